#!/usr/bin/env python3
"""
Analytic Cost Module

Closed-form hardware inference metrics (RM, BOP, NABS) per edge, per layer and per
network, plus parameter counts and the dense GPU-FLOPs baseline.
"""

import dataclasses
from dataclasses import dataclass
from typing import Optional

from netspec import (
    BasisMode,
    BSpline,
    Chebyshev,
    Fourier,
    Grbf,
    Mlp,
    QuantConfig,
)


class UnsupportedError(ValueError):
    """A metric or basis mode that is not defined for the given edge family."""


def ceil_log2(n):
    """Ceiling of log2 for positive integers, with ceil_log2(1) == 0."""
    if n < 1:
        raise ValueError(f"ceil_log2 needs n >= 1, got {n}")
    return (n - 1).bit_length()


def acc_bitwidth(n, b_w, b_x):
    """
    Accumulator bitwidth of an n-term multiply-accumulate.

    Args:
        n: number of accumulated products (>= 1)
        b_w: weight bitwidth
        b_x: bitwidth of the other operand

    Returns:
        b_w + b_x + ceil(log2 n)
    """
    return b_w + b_x + ceil_log2(n)


@dataclass(frozen=True)
class Term:
    """One named term of a cost formula, with its symbolic and substituted forms."""
    name: str
    formula: str
    substituted: str
    value: int


@dataclass(frozen=True)
class RmBreakdown:
    fixed: int   # normalisation and base-path multiplications
    linear: int  # linear-combination multiplications
    basis: int   # multiplications spent producing basis values

    @property
    def total(self):
        return self.fixed + self.linear + self.basis


def _require_kan(family, what):
    if not family.is_kan:
        raise UnsupportedError(f"{what} is defined for KAN edges only, got {family.TAG}")


def rm_edge_breakdown(family, mode=BasisMode.LUT):
    """
    Split an edge's real multiplications into fixed, linear-combination and basis parts.

    Raises:
        UnsupportedError: recursive evaluation requested for Chebyshev or Fourier edges
    """
    if isinstance(family, Mlp):
        return RmBreakdown(0, 1, 0)
    if isinstance(family, BSpline):
        k = family.k
        # grid normalisation multiply plus base-path multiply
        basis = k * k + k - 2 if mode is BasisMode.RECURSIVE else 0
        return RmBreakdown(2, k + 1, basis)
    if isinstance(family, Grbf):
        # compute mode: squared distance and scale by -1/(2 sigma^2) per center
        basis = 2 * family.n_centers if mode is BasisMode.RECURSIVE else 0
        return RmBreakdown(1, family.n_centers, basis)
    if mode is BasisMode.RECURSIVE:
        raise UnsupportedError(f"recursive basis evaluation has no cost model for {family.TAG} edges")
    return RmBreakdown(1, family.n_coeffs, 0)


def rm_edge(family, mode=BasisMode.LUT):
    return rm_edge_breakdown(family, mode).total


def rm_layer(layer, mode=BasisMode.LUT):
    """Real multiplications of a dense layer: one edge cost per (input, output) pair."""
    return layer.n_edges * rm_edge(layer.family, mode)


def _acc_term(family, quant):
    """Accumulator bitwidth of a family's linear combination."""
    return acc_bitwidth(family.term_count, quant.b_w, quant.basis_bits(family))


def bop_edge_terms(family, quant, n_in=1):
    """
    BOP of one edge as ordered terms; MLP terms are per input connection of an n_in-input node.

    Returns:
        list of Term whose values sum to bop_edge
    """
    b_i, b_w = quant.b_i, quant.b_w
    if isinstance(family, Mlp):
        acc = acc_bitwidth(n_in, b_w, b_i)
        return [
            Term("multiply", "b_w*b_i", f"{b_w}*{b_i}", b_w * b_i),
            Term("accumulate", "Acc(n_i, b_w, b_i)", f"{b_w}+{b_i}+{ceil_log2(n_in)}", acc),
        ]

    terms = family.term_count
    b_x = quant.basis_bits(family)
    acc = _acc_term(family, quant)
    if isinstance(family, BSpline):
        fixed = Term("fixed", "b_i(1 + b_knot + b_w)", f"{b_i}(1 + {quant.b_knot} + {b_w})",
                     b_i * (1 + quant.b_knot + b_w))
    else:
        fixed = Term("fixed", "b_i*b_w", f"{b_i}*{b_w}", b_i * b_w)
    return [
        fixed,
        Term("combination", "m*b_w*b_x", f"{terms}*{b_w}*{b_x}", terms * b_w * b_x),
        Term("accumulation", "(m - 1)*Acc(m, b_w, b_x)", f"{terms - 1}*{acc}", (terms - 1) * acc),
    ]


def bop_edge(family, quant=None, n_in=1):
    return sum(term.value for term in bop_edge_terms(family, quant or QuantConfig(), n_in))


def nabs_edge_terms(family, quant, n_in=1):
    """
    NABS of one edge as ordered terms, multiplications realised as shift-add.

    Returns:
        list of Term whose values sum to nabs_edge
    """
    b_i, b_w = quant.b_i, quant.b_w
    x_w = quant.x_w
    if isinstance(family, Mlp):
        acc = acc_bitwidth(n_in, b_w, b_i)
        return [Term("multiply-accumulate", "(X_w + 1)*Acc(n_i, b_w, b_i)",
                     f"({x_w} + 1)*{acc}", (x_w + 1) * acc)]

    terms = family.term_count
    acc = _acc_term(family, quant)
    found = []
    if isinstance(family, BSpline):
        x_knot = quant.x_knot
        found.append(Term("normalise subtract", "b_i", f"{b_i}", b_i))
        found.append(Term("normalise multiply", "X_knot(b_i + b_knot)",
                          f"{x_knot}({b_i} + {quant.b_knot})", x_knot * (b_i + quant.b_knot)))
    found.append(Term("base multiply", "X_w(b_i + b_w)", f"{x_w}({b_i} + {b_w})", x_w * (b_i + b_w)))
    found.append(Term("combination", "[m*X_w + (m - 1)]*Acc(m, b_w, b_x)",
                      f"[{terms}*{x_w} + {terms - 1}]*{acc}", (terms * x_w + terms - 1) * acc))
    return found


def nabs_edge(family, quant=None, n_in=1):
    return sum(term.value for term in nabs_edge_terms(family, quant or QuantConfig(), n_in))


def _node_accumulation(layer, quant):
    # summing n_in edge outputs at every output node
    acc = _acc_term(layer.family, quant) + ceil_log2(layer.n_in)
    return Term("output accumulation", "n_n(n_i - 1)(Acc(m, b_w, b_x) + ceil(log2 n_i))",
                f"{layer.n_out}*{layer.n_in - 1}*{acc}", layer.n_out * (layer.n_in - 1) * acc)


def mlp_bop_split(layer, quant=None):
    """
    BOP of an MLP layer as (vector-matrix multiply part, bias-add part).

    Returns:
        tuple (bop_mul, bop_bias) summing to bop_layer
    """
    if layer.family.is_kan:
        raise UnsupportedError(f"mlp_bop_split needs an MLP layer, got {layer.family.TAG}")
    quant = quant or QuantConfig()
    acc = acc_bitwidth(layer.n_in, quant.b_w, quant.b_i)
    bop_mul = layer.n_out * (layer.n_in * quant.b_w * quant.b_i + (layer.n_in - 1) * acc)
    bop_bias = layer.n_out * acc
    return bop_mul, bop_bias


def bop_layer_terms(layer, quant):
    if not layer.family.is_kan:
        bop_mul, bop_bias = mlp_bop_split(layer, quant)
        return [Term("multiply", "n_n[n_i*b_w*b_i + (n_i - 1)*Acc]", f"{bop_mul}", bop_mul),
                Term("bias", "n_n*Acc(n_i, b_w, b_i)", f"{bop_bias}", bop_bias)]
    per_edge = bop_edge(layer.family, quant)
    return [Term("edges", "n_n*n_i*BOP_edge", f"{layer.n_edges}*{per_edge}", layer.n_edges * per_edge),
            _node_accumulation(layer, quant)]


def bop_layer(layer, quant=None):
    return sum(term.value for term in bop_layer_terms(layer, quant or QuantConfig()))


def nabs_layer_terms(layer, quant):
    per_edge = nabs_edge(layer.family, quant, layer.n_in)
    edges = Term("edges", "n_n*n_i*NABS_edge", f"{layer.n_edges}*{per_edge}", layer.n_edges * per_edge)
    if not layer.family.is_kan:
        return [edges]
    return [edges, _node_accumulation(layer, quant)]


def nabs_layer(layer, quant=None):
    return sum(term.value for term in nabs_layer_terms(layer, quant or QuantConfig()))


def adds_edge(family):
    """
    Additions left in an edge's NABS structure once every multiplier costs zero adders.

    For MLP edges this is the per-connection share of the node's n_i - 1 sums and bias add.
    """
    if isinstance(family, Mlp):
        return 1
    if isinstance(family, BSpline):
        # normalisation subtract plus k combination adds
        return 1 + family.k
    return family.term_count - 1


def adds_layer(layer):
    if not layer.family.is_kan:
        return layer.n_edges
    return layer.n_edges * adds_edge(layer.family) + layer.n_out * (layer.n_in - 1)


def n_par_bspline(layer):
    """
    Learnable parameters of a B-spline KAN layer.

    Raises:
        UnsupportedError: the layer is not a B-spline layer
    """
    family = layer.family
    if not isinstance(family, BSpline):
        raise UnsupportedError(f"parameter count is defined for B-spline layers, got {family.TAG}")
    return layer.n_edges * (family.grid_size + family.k + 3) + layer.n_out


def n_par_mlp(layer):
    if layer.family.is_kan:
        raise UnsupportedError(f"n_par_mlp needs an MLP layer, got {layer.family.TAG}")
    return layer.n_edges + layer.n_out


def flops_dense_edge(family):
    """Dense GPU FLOPs of one B-spline edge evaluating all G + k basis functions."""
    if not isinstance(family, BSpline):
        raise UnsupportedError(f"dense FLOPs are defined for B-spline edges, got {family.TAG}")
    k, g = family.k, family.grid_size
    return 9 * k * (g + 1.5 * k) + 2 * g - 2.5 * k - 1


def flops_dense_bspline_layer(layer):
    return layer.n_edges * flops_dense_edge(layer.family)


@dataclass(frozen=True)
class FlopsComparison:
    grid_size: int
    flops_dense: float
    sparse_ops: int  # 2 * RM: one multiply and one add per real multiplication
    ratio: float


def flops_overestimate(family, grid_sizes):
    """
    Compare dense FLOPs against the sparsity-aware 2*RM count over a list of grid sizes.

    Returns:
        list of FlopsComparison, one per grid size
    """
    rows = []
    for g in grid_sizes:
        variant = dataclasses.replace(family, grid_size=g)
        dense = flops_dense_edge(variant)
        sparse = 2 * rm_edge(variant)
        rows.append(FlopsComparison(g, dense, sparse, dense / sparse))
    return rows


@dataclass(frozen=True)
class LayerCost:
    index: int
    family: str
    n_in: int
    n_out: int
    rm: int
    bop: int
    nabs: int
    n_par: Optional[int] = None
    flops_dense: Optional[float] = None
    n_par_mlp: Optional[int] = None


@dataclass(frozen=True)
class CostTotals:
    rm: int
    bop: int
    nabs: int
    n_par: Optional[int] = None
    flops_dense: Optional[float] = None
    n_par_mlp: Optional[int] = None


@dataclass(frozen=True)
class CostReport:
    name: str
    mode: BasisMode
    layers: tuple
    totals: CostTotals

    def metric(self, metric):
        """Network total of 'rm', 'bop' or 'nabs'."""
        return getattr(self.totals, metric)

    def to_dict(self):
        return {
            "name": self.name,
            "mode": self.mode.value,
            "layers": [dataclasses.asdict(layer) for layer in self.layers],
            "totals": dataclasses.asdict(self.totals),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            name=data["name"],
            mode=BasisMode(data["mode"]),
            layers=tuple(LayerCost(**layer) for layer in data["layers"]),
            totals=CostTotals(**data["totals"]),
        )


def _optional_sum(values):
    present = [v for v in values if v is not None]
    return sum(present) if present else None


def layer_cost(index, layer, quant, mode=BasisMode.LUT):
    family = layer.family
    # n_par is the B-spline count; MLP parameters are reported in their own column
    bspline = isinstance(family, BSpline)
    return LayerCost(index, family.TAG, layer.n_in, layer.n_out,
                     rm_layer(layer, mode), bop_layer(layer, quant), nabs_layer(layer, quant),
                     n_par=n_par_bspline(layer) if bspline else None,
                     flops_dense=flops_dense_bspline_layer(layer) if bspline else None,
                     n_par_mlp=n_par_mlp(layer) if isinstance(family, Mlp) else None)


def cost_report(spec, quant=None, mode=BasisMode.LUT):
    """
    Per-layer and network totals of every metric.

    The mode only changes RM. BOP and NABS always cost the lookup-table dataflow, so a
    recursive report (GRBF compute mode included) pairs recursive RM with lookup-table
    BOP and NABS.

    Args:
        spec: NetworkSpec to cost
        quant: QuantConfig, defaults to all-8-bit uniform
        mode: how basis values are produced

    Returns:
        CostReport
    """
    quant = quant or QuantConfig()
    layers = tuple(layer_cost(index, layer, quant, mode) for index, layer in enumerate(spec.layers))
    totals = CostTotals(
        rm=sum(layer.rm for layer in layers),
        bop=sum(layer.bop for layer in layers),
        nabs=sum(layer.nabs for layer in layers),
        n_par=_optional_sum(layer.n_par for layer in layers),
        flops_dense=_optional_sum(layer.flops_dense for layer in layers),
        n_par_mlp=_optional_sum(layer.n_par_mlp for layer in layers),
    )
    return CostReport(spec.name, mode, layers, totals)
