#!/usr/bin/env python3
"""
Inference Module

Floating-point reference inference: B-spline basis evaluation (Cox-de Boor and
tabulated cardinal spline), edge functions of every family and the network forward pass.

All arithmetic of the hardware dataflow goes through an `Arithmetic` object so that the
instrumented interpreter in counted.py can tally it while executing the very same code.
"""

import functools
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from netspec import (
    BaseActivation,
    BasisMode,
    BSpline,
    Chebyshev,
    EdgeWeights,
    Fourier,
    Grbf,
    Mlp,
)

MIN_RESOLUTION = 16
LUT_TOLERANCE = 2.0 ** -7
INTERPOLATIONS = ("linear", "nearest")


class ShapeError(ValueError):
    """Input vector or weights do not match the network spec."""


class LutError(ValueError):
    """A tabulated basis failed its build-time checks."""


class Arithmetic:
    """
    Plain arithmetic of the edge dataflow.

    Each method is one hardware operation; the names say how it is charged:
    `add`/`sub` are adders in the cost model, `node_add` sums edge outputs at an output
    node, `aux_*` and `merge` are additions the formulas do not charge, `fetch` is a
    table read and `compare` an interval-search comparison.
    """

    def mul(self, a, b):
        return a * b

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def node_add(self, a, b):
        return a + b

    def aux_add(self, a, b):
        return a + b

    def aux_sub(self, a, b):
        return a - b

    def merge(self, a, b):
        return a + b

    def fetch(self, fn, *args):
        return fn(*args)

    def compare(self, a, b):
        return a < b

    def enter_edge(self, layer, out, inp):
        pass

    def leave_edge(self):
        pass


PLAIN = Arithmetic()


def activate(kind, x):
    """Fixed activation function; modelled as a table lookup in hardware."""
    if kind is BaseActivation.SILU:
        if x >= 0:
            return x / (1.0 + math.exp(-x))
        z = math.exp(x)
        return x * z / (1.0 + z)
    if kind is BaseActivation.RELU:
        return x if x > 0 else 0.0
    if kind is BaseActivation.TANH:
        return math.tanh(x)
    return x


# ---------------------------------------------------------------------------
# B-spline basis
# ---------------------------------------------------------------------------

def _cox_de_boor(t, i, p, x):
    if p == 0:
        return 1.0 if t[i] <= x < t[i + 1] else 0.0
    left_den = t[i + p] - t[i]
    right_den = t[i + p + 1] - t[i + 1]
    # 0/0 := 0 for repeated knots
    left = 0.0 if left_den == 0 else (x - t[i]) / left_den * _cox_de_boor(t, i, p - 1, x)
    right = 0.0 if right_den == 0 else (t[i + p + 1] - x) / right_den * _cox_de_boor(t, i + 1, p - 1, x)
    return left + right


def bspline_basis_recursive(knots, i, k, x):
    """
    B_{i,k}(x) by the Cox-de Boor recursion.

    Args:
        knots: extended knot vector (G + 2k + 1 entries)
        i: basis index, 0 <= i <= G + k - 1
        k: spline order (polynomial degree)
        x: evaluation point

    Returns:
        basis value; supported on [t_i, t_{i+k+1}), half-open like the order-0 indicators

    Raises:
        IndexError: i outside the G + k basis functions
    """
    n_basis = len(knots) - k - 1
    if not 0 <= i < n_basis:
        raise IndexError(f"basis index {i} outside [0, {n_basis - 1}]")
    return _cox_de_boor([float(t) for t in knots], i, k, float(x))


def bspline_bases(knots, k, x):
    """
    Every basis function of order k at a batch of points.

    Returns:
        array of shape (len(x), len(knots) - k - 1)
    """
    t = np.asarray(knots, dtype=float)
    x = np.asarray(x, dtype=float)[:, None]
    bases = ((x >= t[:-1]) & (x < t[1:])).astype(float)
    for p in range(1, k + 1):
        left_den = t[p:-1] - t[:-(p + 1)]
        right_den = t[p + 1:] - t[1:-p]
        left = np.divide(x - t[:-(p + 1)], left_den, out=np.zeros((len(x), len(left_den))),
                         where=left_den != 0)
        right = np.divide(t[p + 1:] - x, right_den, out=np.zeros((len(x), len(right_den))),
                          where=right_den != 0)
        bases = left * bases[:, :-1] + right * bases[:, 1:]
    return bases


def _locate(arith, a, inv_h, grid_size, x):
    """Interval index and in-interval fraction u of x on a uniform grid."""
    xn = arith.mul(arith.sub(x, a), inv_h)
    j = math.floor(xn)
    below = arith.compare(j, 0)
    above = arith.compare(grid_size - 1, j)
    if below:
        return 0, 0.0
    if above:
        return grid_size - 1, 1.0
    # integer/fraction split is bit slicing
    return j, xn - j


def _grid_of(knots, grid_size):
    k = (len(knots) - grid_size - 1) // 2
    a, b = float(knots[k]), float(knots[k + grid_size])
    return k, a, grid_size / (b - a)


def find_interval(knots, grid_size, x):
    """
    Index j of the knot interval [t_j, t_{j+1}) of the base grid holding x.

    Inputs left of the domain clamp to 0, inputs at or right of its end clamp to G - 1.
    """
    _, a, inv_h = _grid_of(knots, grid_size)
    return _locate(PLAIN, a, inv_h, grid_size, x)[0]


def cardinal_triangle(arith, k, u):
    """
    Scaled Cox-de Boor triangle on one knot interval.

    Returns k! times the k + 1 non-zero basis values at fraction u, so that only the
    2p multiplications of each depth p >= 2 remain; works elementwise on arrays.
    """
    m = [arith.aux_sub(1.0, u), u]
    for p in range(2, k + 1):
        row = [arith.mul(arith.aux_sub(1.0, u), m[0])]
        for r in range(1, p):
            left = arith.mul(arith.aux_add(u, p - r), m[r - 1])
            right = arith.mul(arith.aux_sub(r + 1, u), m[r])
            row.append(arith.aux_add(left, right))
        row.append(arith.mul(u, m[p - 1]))
        m = row
    return m


@functools.lru_cache(maxsize=None)
def _folded_coeffs(coeffs, k):
    # 1/k! of the scaled triangle moved into the stored coefficients
    scale = 1.0 / math.factorial(k)
    return tuple(c * scale for c in coeffs)


@dataclass(frozen=True)
class ActiveBasis:
    interval_index: int
    values: tuple  # values[r] multiplies coefficient interval_index + r


def active_basis(knots, k, grid_size, x, mode=BasisMode.RECURSIVE, lut=None):
    """
    The k + 1 non-zero B-spline basis values at x.

    Args:
        knots: extended knot vector
        k: spline order
        grid_size: number of base-grid intervals G
        x: evaluation point
        mode: BasisMode.RECURSIVE evaluates the triangle, BasisMode.LUT reads `lut`
        lut: cardinal-spline BasisLut, required in LUT mode

    Returns:
        ActiveBasis
    """
    _, a, inv_h = _grid_of(knots, grid_size)
    j, u = _locate(PLAIN, a, inv_h, grid_size, x)
    if mode is BasisMode.LUT:
        if lut is None:
            raise LutError("LUT mode needs a cardinal-spline table")
        values = tuple(lut.cardinal.lookup(u + k - r) for r in range(k + 1))
    else:
        scale = 1.0 / math.factorial(k)
        values = tuple(m * scale for m in cardinal_triangle(PLAIN, k, u))
    return ActiveBasis(j, values)


# ---------------------------------------------------------------------------
# Exact basis values of the other families
# ---------------------------------------------------------------------------

def grbf_values(family, x):
    """Gaussian responses exp(-(x - c_i)^2 / (2 sigma^2)) of every center."""
    return [np.exp((x - c) ** 2 * family.neg_inv_two_sigma_sq) for c in family.centers]


def chebyshev_values(degree, u):
    """T_0(u) .. T_degree(u) by the three-term recurrence; scalars or arrays."""
    values = [u * 0.0 + 1.0, u]
    for _ in range(2, degree + 1):
        values.append(2.0 * u * values[-1] - values[-2])
    return values[:degree + 1]


def fourier_values(family, x):
    """Interleaved cos(i w x), sin(i w x) for i = 1..G."""
    values = []
    for i in range(1, family.grid_size + 1):
        values.append(np.cos(i * family.omega * x))
        values.append(np.sin(i * family.omega * x))
    return values


# ---------------------------------------------------------------------------
# Lookup tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SampledTable:
    """One tabulated function: samples at start + i*step, clamped or periodic."""
    samples: list
    start: float
    step: float
    periodic: bool = False
    interpolation: str = "linear"

    def lookup(self, x):
        n = len(self.samples)
        pos = (x - self.start) / self.step
        if self.periodic:
            pos = pos % n
        else:
            pos = min(max(pos, 0.0), n - 1.0)
        if self.interpolation == "nearest":
            return self.samples[int(round(pos)) % n]
        i = min(int(pos), n - 2) if not self.periodic else int(pos)
        frac = pos - i
        lo, hi = self.samples[i % n], self.samples[(i + 1) % n]
        return lo + (hi - lo) * frac


@dataclass(frozen=True, eq=False)
class BasisLut:
    family: str
    resolution: int
    tables: tuple

    @property
    def cardinal(self):
        return self.tables[0]


def _check_table(name, fn, xs, samples, step, periodic):
    # linear interpolant against the analytic function halfway between samples
    nxt = np.roll(samples, -1) if periodic else samples[1:]
    base = samples if periodic else samples[:-1]
    mids = (xs if periodic else xs[:-1]) + step / 2.0
    err = float(np.max(np.abs((base + nxt) / 2.0 - fn(mids))))
    if err > LUT_TOLERANCE:
        raise LutError(f"{name}: interpolation error {err:.3g} exceeds {LUT_TOLERANCE:.3g}")


def _table(name, fn, start, stop, resolution, interpolation, periodic=False):
    if periodic:
        n = int(math.ceil((stop - start) * resolution))
        step = (stop - start) / n
        xs = start + step * np.arange(n)
    else:
        n = int(math.ceil((stop - start) * resolution)) + 1
        step = (stop - start) / (n - 1)
        xs = start + step * np.arange(n)
    samples = np.asarray(fn(xs), dtype=float)
    _check_table(name, fn, xs, samples, step, periodic)
    return SampledTable(samples.tolist(), float(start), float(step), periodic, interpolation)


def _cardinal_spline(k):
    def fn(t):
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.floor(t), 0, k).astype(int)
        u = t - idx
        m = np.stack(cardinal_triangle(PLAIN, k, u))
        values = m[k - idx, np.arange(len(t))] / math.factorial(k)
        return np.where((t < 0) | (t > k + 1), 0.0, values)
    return fn


@functools.lru_cache(maxsize=None)
def build_lut(family, resolution=1024, interpolation="linear", span=8.0):
    """
    Tabulate a family's basis functions.

    B-spline: one cardinal spline on [0, k+1] sampled `resolution` times per knot
    interval. GRBF: one table per center over the family domain. Chebyshev: one table
    of T_i(tanh x) per degree over [-span, span]. Fourier: one periodic table per
    cosine and sine term over a period 2*pi/omega.

    Raises:
        LutError: resolution below 16, unknown interpolation, or a table whose
                  linear interpolant misses the analytic function by more than 2^-7
    """
    if resolution < MIN_RESOLUTION:
        raise LutError(f"resolution must be >= {MIN_RESOLUTION}, got {resolution}")
    if interpolation not in INTERPOLATIONS:
        raise LutError(f"interpolation must be one of {', '.join(INTERPOLATIONS)}, got {interpolation!r}")

    if isinstance(family, BSpline):
        k = family.k
        cardinal = _table("cardinal", _cardinal_spline(k), 0.0, float(k + 1), resolution, interpolation)
        # independent check of the samples against Cox-de Boor
        t = cardinal.start + cardinal.step * np.arange(len(cardinal.samples) - 1)
        ref = bspline_bases(np.arange(k + 2, dtype=float), k, t)[:, 0]
        err = float(np.max(np.abs(np.asarray(cardinal.samples[:-1]) - ref)))
        if err > LUT_TOLERANCE:
            raise LutError(f"cardinal: table disagrees with Cox-de Boor by {err:.3g}")
        tables = (cardinal,)
    elif isinstance(family, Grbf):
        a, b = family.domain
        tables = tuple(
            _table(f"grbf[{i}]", functools.partial(_grbf_term, family, i),
                   a, b, resolution, interpolation)
            for i in range(family.n_centers))
    elif isinstance(family, Chebyshev):
        tables = tuple(
            _table(f"chebyshev[{i}]", functools.partial(_chebyshev_of_tanh, i),
                   -span, span, resolution, interpolation)
            for i in range(family.degree + 1))
    elif isinstance(family, Fourier):
        tables = tuple(
            _table(f"fourier[{i}]", functools.partial(_fourier_term, family, i),
                   0.0, family.period, resolution, interpolation, periodic=True)
            for i in range(2 * family.grid_size))
    else:
        raise LutError(f"no basis tables for {family.TAG} edges")
    return BasisLut(family.TAG, resolution, tables)


def _grbf_term(family, index, x):
    return grbf_values(family, x)[index]


def _chebyshev_of_tanh(degree, x):
    return chebyshev_values(degree, np.tanh(x))[degree]


def _fourier_term(family, index, x):
    return fourier_values(family, x)[index]


@dataclass(frozen=True)
class LutSettings:
    resolution: int = 1024
    interpolation: str = "linear"
    chebyshev_span: float = 8.0

    @classmethod
    def from_config(cls, config):
        lut = config["lut"]
        return cls(lut["resolution"], lut["interpolation"], lut["chebyshev_span"])

    def build(self, family):
        return build_lut(family, self.resolution, self.interpolation, self.chebyshev_span)


# ---------------------------------------------------------------------------
# Edges, layers, networks
# ---------------------------------------------------------------------------

def _combine(arith, coeffs, values):
    acc = arith.mul(coeffs[0], values[0])
    for c, v in zip(coeffs[1:], values[1:]):
        acc = arith.add(acc, arith.mul(c, v))
    return acc


def _bspline_basis_path(arith, family, coeffs, x, mode, lut):
    k = family.k
    j, u = _locate(arith, family.domain[0], family.inv_spacing, family.grid_size, x)
    if mode is BasisMode.LUT:
        table = lut.cardinal
        values = [arith.fetch(table.lookup, u + k - r) for r in range(k + 1)]
        return _combine(arith, coeffs[j:j + k + 1], values)
    values = cardinal_triangle(arith, k, u)
    return _combine(arith, _folded_coeffs(coeffs, k)[j:j + k + 1], values)


def _grbf_basis_path(arith, family, coeffs, x, mode, lut):
    if mode is BasisMode.LUT:
        values = [arith.fetch(table.lookup, x) for table in lut.tables]
    else:
        values = []
        for c in family.centers:
            d = arith.aux_sub(x, c)
            e = arith.mul(arith.mul(d, d), family.neg_inv_two_sigma_sq)
            values.append(arith.fetch(math.exp, e))
    return _combine(arith, coeffs, values)


def _chebyshev_basis_path(arith, family, coeffs, x, mode, lut):
    if mode is BasisMode.LUT:
        values = [arith.fetch(table.lookup, x) for table in lut.tables]
    else:
        values = chebyshev_values(family.degree, math.tanh(x))
    return _combine(arith, coeffs, values)


def _fourier_basis_path(arith, family, coeffs, x, mode, lut):
    if mode is BasisMode.LUT:
        values = [arith.fetch(table.lookup, x) for table in lut.tables]
    else:
        values = [float(v) for v in fourier_values(family, x)]
    return _combine(arith, coeffs, values)


_BASIS_PATHS = {
    BSpline: _bspline_basis_path,
    Grbf: _grbf_basis_path,
    Chebyshev: _chebyshev_basis_path,
    Fourier: _fourier_basis_path,
}


def edge_eval(family, weights, x, mode=BasisMode.LUT, lut=None, arith=PLAIN):
    """
    Evaluate one edge function phi(x) = w_b * base(x) + basis combination.

    Args:
        family: edge family of the layer
        weights: EdgeWeights of the edge
        x: edge input
        mode: BasisMode.LUT reads tabulated basis values, BasisMode.RECURSIVE computes them
        lut: BasisLut for LUT mode; built with default settings when omitted
        arith: Arithmetic carrying out the dataflow operations

    Returns:
        edge output
    """
    if len(weights.coeffs) != family.n_coeffs:
        raise ShapeError(f"{family.TAG} edge needs {family.n_coeffs} coefficients, got {len(weights.coeffs)}")
    if isinstance(family, Mlp):
        return arith.mul(weights.w_b, x)
    if mode is BasisMode.LUT and lut is None:
        lut = build_lut(family)
    base = arith.mul(weights.w_b, arith.fetch(activate, family.base, x))
    spline = _BASIS_PATHS[type(family)](arith, family, weights.coeffs, x, mode, lut)
    return arith.merge(base, spline)


@dataclass(frozen=True)
class LayerWeights:
    edges: tuple     # edges[out][inp] -> EdgeWeights
    bias: tuple = ()  # per output node, MLP layers only


@dataclass(frozen=True)
class NetworkWeights:
    layers: tuple


def check_weights(spec, weights):
    """
    Raises:
        ShapeError: weights do not match the layer widths or coefficient lengths
    """
    if len(weights.layers) != len(spec.layers):
        raise ShapeError(f"expected weights for {len(spec.layers)} layers, got {len(weights.layers)}")
    for index, (layer, lw) in enumerate(zip(spec.layers, weights.layers)):
        if len(lw.edges) != layer.n_out or any(len(row) != layer.n_in for row in lw.edges):
            raise ShapeError(f"layers[{index}]: expected {layer.n_out}x{layer.n_in} edges")
        for row in lw.edges:
            for edge in row:
                if len(edge.coeffs) != layer.family.n_coeffs:
                    raise ShapeError(f"layers[{index}]: {layer.family.TAG} edges need "
                                     f"{layer.family.n_coeffs} coefficients, got {len(edge.coeffs)}")
        expected_bias = 0 if layer.family.is_kan else layer.n_out
        if len(lw.bias) != expected_bias:
            raise ShapeError(f"layers[{index}]: expected {expected_bias} bias values, got {len(lw.bias)}")


def layer_forward(index, layer, layer_weights, xs, mode=BasisMode.LUT, lut=None, arith=PLAIN):
    """Outputs y_j = sum_i phi_ij(x_i) of one layer (MLP: bias and activation on top)."""
    outputs = []
    for j in range(layer.n_out):
        total = None
        for i in range(layer.n_in):
            arith.enter_edge(index, j, i)
            y = edge_eval(layer.family, layer_weights.edges[j][i], xs[i], mode, lut, arith)
            arith.leave_edge()
            total = y if total is None else arith.node_add(total, y)
        if not layer.family.is_kan:
            total = arith.add(total, layer_weights.bias[j])
            total = arith.fetch(activate, layer.family.activation, total)
        outputs.append(total)
    return outputs


def network_forward(spec, weights, x, mode=BasisMode.LUT, settings=None, arith=PLAIN):
    """
    Forward pass through every layer.

    Args:
        spec: NetworkSpec
        weights: NetworkWeights shaped per spec
        x: input vector of length layers[0].n_in
        mode: basis evaluation mode
        settings: LutSettings for LUT mode
        arith: Arithmetic carrying out the dataflow operations

    Returns:
        list of outputs, one per node of the last layer

    Raises:
        ShapeError: input length or weights do not match the spec, or an input is not finite
    """
    if len(x) != spec.layers[0].n_in:
        raise ShapeError(f"expected {spec.layers[0].n_in} inputs, got {len(x)}")
    if not all(math.isfinite(v) for v in x):
        raise ShapeError(f"inputs must be finite, got {list(x)}")
    check_weights(spec, weights)
    settings = settings or LutSettings()
    values = [float(v) for v in x]
    for index, (layer, lw) in enumerate(zip(spec.layers, weights.layers)):
        lut = settings.build(layer.family) if mode is BasisMode.LUT and layer.family.is_kan else None
        values = layer_forward(index, layer, lw, values, mode, lut, arith)
    return values


def random_weights(spec, seed=42):
    """Reproducible weights drawn uniformly from [-1, 1] / n_in."""
    rng = np.random.default_rng(seed)
    layers = []
    for layer in spec.layers:
        scale = 1.0 / layer.n_in
        rows = []
        for _ in range(layer.n_out):
            row = []
            for _ in range(layer.n_in):
                w_b = float(rng.uniform(-1.0, 1.0)) * scale
                coeffs = tuple(float(c) * scale for c in rng.uniform(-1.0, 1.0, layer.family.n_coeffs))
                row.append(EdgeWeights(w_b, coeffs))
            rows.append(tuple(row))
        bias = () if layer.family.is_kan else tuple(float(b) * scale for b in rng.uniform(-1.0, 1.0, layer.n_out))
        layers.append(LayerWeights(tuple(rows), bias))
    return NetworkWeights(tuple(layers))


def weights_to_json(weights):
    doc = {"layers": []}
    for lw in weights.layers:
        entry = {"edges": [[edge.w_b, *edge.coeffs] for row in lw.edges for edge in row]}
        if lw.bias:
            entry["bias"] = list(lw.bias)
        doc["layers"].append(entry)
    return doc


def weights_from_json(doc, spec):
    """
    Build NetworkWeights from a decoded weight file; edges are row-major by (output, input).

    Raises:
        ShapeError: the document does not fit the spec
    """
    if not isinstance(doc, dict) or not isinstance(doc.get("layers"), list):
        raise ShapeError('weight file needs a "layers" list')
    if len(doc["layers"]) != len(spec.layers):
        raise ShapeError(f"expected weights for {len(spec.layers)} layers, got {len(doc['layers'])}")
    layers = []
    for index, (layer, entry) in enumerate(zip(spec.layers, doc["layers"])):
        edges = entry.get("edges", [])
        if len(edges) != layer.n_edges:
            raise ShapeError(f"layers[{index}].edges: expected {layer.n_edges} edges, got {len(edges)}")
        flat = []
        for e, values in enumerate(edges):
            if len(values) != 1 + layer.family.n_coeffs:
                raise ShapeError(f"layers[{index}].edges[{e}]: expected {1 + layer.family.n_coeffs} numbers, "
                                 f"got {len(values)}")
            flat.append(EdgeWeights(float(values[0]), tuple(float(v) for v in values[1:])))
        rows = tuple(tuple(flat[j * layer.n_in:(j + 1) * layer.n_in]) for j in range(layer.n_out))
        if layer.family.is_kan:
            if entry.get("bias"):
                raise ShapeError(f"layers[{index}].bias: KAN layers carry no bias")
            bias = ()
        else:
            bias = tuple(float(b) for b in entry.get("bias", [0.0] * layer.n_out))
            if len(bias) != layer.n_out:
                raise ShapeError(f"layers[{index}].bias: expected {layer.n_out} values, got {len(bias)}")
        layers.append(LayerWeights(rows, bias))
    return NetworkWeights(tuple(layers))


def load_weights(path, spec):
    with open(path, 'r', encoding='utf-8') as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ShapeError(f"malformed weight file {path}: {e}") from None
    return weights_from_json(doc, spec)


def save_weights(weights, path):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(weights_to_json(weights), f, indent=4)
