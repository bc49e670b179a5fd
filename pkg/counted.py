#!/usr/bin/env python3
"""
Counted Inference Module

Instrumented interpreter: runs the inference dataflow of infer.py with an arithmetic
object that tallies every operation, and reconciles the tallies with the closed-form
metrics of analytic.py.
"""

import dataclasses
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from analytic import adds_edge, adds_layer, cost_report, rm_edge, rm_layer
from infer import Arithmetic, cardinal_triangle, network_forward, random_weights
from netspec import BasisMode, QuantConfig
from path_utils import validate_and_prepare_path


@dataclass(frozen=True)
class OpTally:
    mults: int = 0
    adds: int = 0            # adders the metrics charge (incl. subtractions)
    node_adds: int = 0       # edge-output sums at output nodes
    uncharged_adds: int = 0  # residual merges, triangle and distance arithmetic
    lut_fetches: int = 0
    comparisons: int = 0

    FIELDS = ("mults", "adds", "node_adds", "uncharged_adds", "lut_fetches", "comparisons")

    def __add__(self, other):
        return OpTally(*(getattr(self, name) + getattr(other, name) for name in self.FIELDS))

    @classmethod
    def from_counts(cls, counts):
        return cls(**{name: counts.get(name, 0) for name in cls.FIELDS})

    def to_dict(self):
        return dataclasses.asdict(self)


class CountingArithmetic(Arithmetic):
    """
    Arithmetic that tallies each operation per edge, and per layer for node-level work.

    Args:
        fault_edge: optional (layer, out, inp) edge charged one extra multiplication,
                    used to exercise the mismatch path of reconciliation
    """

    def __init__(self, fault_edge=None):
        self.fault_edge = fault_edge
        self.edges = {}
        self._nodes = defaultdict(Counter)
        self._layer = None
        self._edge_key = None
        self._edge = Counter()

    def _tick(self, name):
        if self._edge_key is not None:
            self._edge[name] += 1
        else:
            self._nodes[self._layer][name] += 1

    def mul(self, a, b):
        self._tick("mults")
        return a * b

    def add(self, a, b):
        self._tick("adds")
        return a + b

    def sub(self, a, b):
        self._tick("adds")
        return a - b

    def node_add(self, a, b):
        self._tick("node_adds")
        return a + b

    def aux_add(self, a, b):
        self._tick("uncharged_adds")
        return a + b

    def aux_sub(self, a, b):
        self._tick("uncharged_adds")
        return a - b

    def merge(self, a, b):
        self._tick("uncharged_adds")
        return a + b

    def fetch(self, fn, *args):
        self._tick("lut_fetches")
        return fn(*args)

    def compare(self, a, b):
        self._tick("comparisons")
        return a < b

    def enter_edge(self, layer, out, inp):
        self._layer = layer
        self._edge_key = (layer, out, inp)
        self._edge = Counter()

    def leave_edge(self):
        if self._edge_key == self.fault_edge:
            self._edge["mults"] += 1
        self.edges[self._edge_key] = OpTally.from_counts(self._edge)
        self._edge_key = None

    def layer_tally(self, layer):
        tally = OpTally.from_counts(self._nodes.get(layer, {}))
        for key, edge in self.edges.items():
            if key[0] == layer:
                tally = tally + edge
        return tally

    def total(self):
        tally = OpTally()
        for counts in self._nodes.values():
            tally = tally + OpTally.from_counts(counts)
        for edge in self.edges.values():
            tally = tally + edge
        return tally


def count_recursion_triangle(k):
    """
    Multiplications of the boundary-optimised Cox-de Boor triangle, counted by running it.

    Returns:
        k^2 + k - 2 (0 for k = 1)
    """
    if k < 1:
        raise ValueError(f"spline order must be >= 1, got {k}")
    arith = CountingArithmetic()
    cardinal_triangle(arith, k, 0.5)
    return arith.total().mults


@dataclass(frozen=True)
class CountedResult:
    outputs: tuple
    layers: tuple     # OpTally per layer
    network: OpTally
    edges: dict = field(default_factory=dict)  # (layer, out, inp) -> OpTally


def counted_forward(spec, weights, x, mode=BasisMode.LUT, settings=None, fault_edge=None):
    """
    Forward pass with every operation tallied.

    Args:
        spec: NetworkSpec
        weights: NetworkWeights
        x: input vector
        mode: basis evaluation mode
        settings: LutSettings for LUT mode
        fault_edge: optional edge charged one spurious multiplication

    Returns:
        CountedResult; outputs are identical to infer.network_forward

    Raises:
        UnsupportedError: the mode has no cost model for one of the layer families
    """
    for layer in spec.layers:
        rm_edge(layer.family, mode)
    arith = CountingArithmetic(fault_edge)
    outputs = network_forward(spec, weights, x, mode, settings, arith)
    layers = tuple(arith.layer_tally(index) for index in range(len(spec.layers)))
    network = OpTally()
    for tally in layers:
        network = network + tally
    return CountedResult(tuple(outputs), layers, network, dict(arith.edges))


@dataclass(frozen=True)
class Mismatch:
    trial: int
    layer: int
    edge: Optional[tuple]  # (out, inp), None for layer-level checks
    quantity: str
    expected: object
    counted: object

    def describe(self):
        where = f"layer {self.layer}" + (f" edge {self.edge}" if self.edge is not None else "")
        return (f"trial {self.trial}, {where}: {self.quantity} expected {self.expected}, "
                f"counted {self.counted}")


class ReconciliationError(AssertionError):
    def __init__(self, mismatch):
        self.mismatch = mismatch
        super().__init__(mismatch.describe())


@dataclass(frozen=True)
class ReconciliationReport:
    name: str
    mode: str
    trials: int
    seed: int
    checked_edges: int
    analytic: dict
    layer_tallies: tuple
    mismatches: tuple

    # tallied but outside the formulas
    NOT_RECONCILED = ("uncharged_adds", "lut_fetches", "comparisons")

    @property
    def ok(self):
        return not self.mismatches

    def to_dict(self):
        return {
            "name": self.name,
            "mode": self.mode,
            "trials": self.trials,
            "seed": self.seed,
            "ok": self.ok,
            "checked_edges": self.checked_edges,
            "analytic": self.analytic,
            "layer_tallies": [tally.to_dict() for tally in self.layer_tallies],
            "not_reconciled": list(self.NOT_RECONCILED),
            "mismatches": [dataclasses.asdict(m) for m in self.mismatches],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=4)


def _first_edge_mismatch(trial, spec, result, mode):
    for (index, out, inp), tally in result.edges.items():
        family = spec.layers[index].family
        expected_mults = rm_edge(family, mode)
        if tally.mults != expected_mults:
            return Mismatch(trial, index, (out, inp), "mults", expected_mults, tally.mults)
        expected_adds = adds_edge(family) if family.is_kan else 0
        if tally.adds != expected_adds:
            return Mismatch(trial, index, (out, inp), "adds", expected_adds, tally.adds)
    return None


def _layer_mismatches(trial, spec, result, mode):
    found = []
    for index, (layer, tally) in enumerate(zip(spec.layers, result.layers)):
        if tally.mults != rm_layer(layer, mode):
            found.append(Mismatch(trial, index, None, "mults", rm_layer(layer, mode), tally.mults))
        if tally.adds + tally.node_adds != adds_layer(layer):
            found.append(Mismatch(trial, index, None, "adds", adds_layer(layer),
                                  tally.adds + tally.node_adds))
    return found


def reconcile(spec, quant=None, mode=BasisMode.LUT, trials=100, seed=42, settings=None, fault_edge=None):
    """
    Check counted operations against the closed forms over random inputs.

    Every trial draws an input inside the first layer's domain, runs the counted
    interpreter and the plain forward pass, and compares per-edge and per-layer
    multiplication and addition counts with the formulas, plus the two outputs.

    Returns:
        ReconciliationReport listing the first divergent edge of every failing trial
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    quant = quant or QuantConfig()
    analytic = cost_report(spec, quant, mode).totals
    weights = random_weights(spec, seed)
    rng = np.random.default_rng(seed)
    lo, hi = spec.layers[0].family.input_domain

    mismatches = []
    result = None
    for trial in range(trials):
        x = [float(v) for v in rng.uniform(lo, hi, spec.layers[0].n_in)]
        result = counted_forward(spec, weights, x, mode, settings, fault_edge)
        edge_mismatch = _first_edge_mismatch(trial, spec, result, mode)
        if edge_mismatch is not None:
            mismatches.append(edge_mismatch)
        mismatches.extend(_layer_mismatches(trial, spec, result, mode))
        plain = tuple(network_forward(spec, weights, x, mode, settings))
        if plain != result.outputs:
            mismatches.append(Mismatch(trial, len(spec.layers) - 1, None, "outputs", plain, result.outputs))

    return ReconciliationReport(
        name=spec.name,
        mode=mode.value,
        trials=trials,
        seed=seed,
        checked_edges=len(result.edges),
        analytic={"rm": analytic.rm, "bop": analytic.bop, "nabs": analytic.nabs},
        layer_tallies=result.layers,
        mismatches=tuple(mismatches),
    )


class Reconciler:
    """
    Runs reconciliation for the command layer and reports through its logger.
    """

    def __init__(self, config, logger):
        self.config = config
        self.logger = logger

    def run(self, spec, quant, mode, trials=None, seed=None, settings=None, inject_fault=False):
        trials = self.config["validate"]["trials"] if trials is None else trials
        seed = self.config["validate"]["seed"] if seed is None else seed
        fault_edge = (0, 0, 0) if inject_fault else None
        if inject_fault:
            self.logger.warning("Fault injection enabled: one extra multiplication on layer 0 edge (0, 0)")
        self.logger.info(f"Reconciling '{spec.name or 'network'}' ({mode.value} mode, {trials} trials, seed {seed})")
        report = reconcile(spec, quant, mode, trials, seed, settings, fault_edge)
        if report.ok:
            self.logger.info(f"Counts match the formulas on {report.checked_edges} edges over {trials} trials")
        else:
            for mismatch in report.mismatches[:10]:
                self.logger.error(f"Mismatch: {mismatch.describe()}")
            self.logger.error(f"{len(report.mismatches)} mismatches in total")
        return report

    def write(self, report, path):
        path_valid, validation_message = validate_and_prepare_path(path, self.logger)
        if not path_valid:
            self.logger.error(f"Cannot write reconciliation report: {validation_message}")
            return False
        with open(path, 'w', encoding='utf-8') as f:
            f.write(report.to_json())
        self.logger.info(f"Reconciliation report written to {path}")
        return True

    def check(self, report):
        """
        Raises:
            ReconciliationError: for the first mismatch of the report
        """
        if report.mismatches:
            raise ReconciliationError(report.mismatches[0])
