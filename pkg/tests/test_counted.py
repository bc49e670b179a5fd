"""
Counted interpreter: tallies of the instrumented forward pass against the closed forms.
"""

import json

import numpy as np
import pytest

from analytic import UnsupportedError, adds_edge, rm_edge
from counted import (
    OpTally,
    ReconciliationError,
    Reconciler,
    count_recursion_triangle,
    counted_forward,
    reconcile,
)
from infer import network_forward, random_weights
from netspec import BasisMode, BSpline, Chebyshev, Fourier, Grbf, Mlp, build_network

CUBIC = BSpline(3, 5)

GRID_FAMILIES = (
    [BSpline(k, g) for k in (1, 2, 3) for g in (1, 3, 5)]
    + [Grbf.uniform(n) for n in (1, 3, 5)]
    + [Chebyshev(n) for n in (0, 2, 5)]
    + [Fourier(g) for g in (1, 3, 5)]
    + [Mlp()]
)


def _single_edge(family):
    return build_network([1, 1], family)


class TestEdgeTallies:

    def test_bspline_lut(self):
        spec = _single_edge(CUBIC)
        result = counted_forward(spec, random_weights(spec), [0.2], BasisMode.LUT)
        assert result.network.mults == 6

    def test_bspline_recursive(self):
        spec = _single_edge(CUBIC)
        result = counted_forward(spec, random_weights(spec), [0.2], BasisMode.RECURSIVE)
        assert result.network.mults == 16

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
    @pytest.mark.parametrize("mode", list(BasisMode))
    def test_bspline_orders(self, k, mode):
        spec = _single_edge(BSpline(k, 5))
        result = counted_forward(spec, random_weights(spec), [-0.3], mode)
        assert result.network.mults == rm_edge(spec.layers[0].family, mode)
        assert result.network.adds == 1 + k

    def test_grbf_compute_mode(self):
        spec = _single_edge(Grbf.uniform(5))
        result = counted_forward(spec, random_weights(spec), [0.1], BasisMode.RECURSIVE)
        assert result.network.mults == 16

    def test_lut_fetches(self, reference_families):
        # one fetch per basis term plus the base activation
        expected = {"bspline": 5, "grbf": 6, "chebyshev": 7, "fourier": 11}
        for tag, family in reference_families.items():
            spec = _single_edge(family)
            assert counted_forward(spec, random_weights(spec), [0.4]).network.lut_fetches == expected[tag]

    def test_recursive_chebyshev_unsupported(self):
        spec = _single_edge(Chebyshev(3))
        with pytest.raises(UnsupportedError):
            counted_forward(spec, random_weights(spec), [0.0], BasisMode.RECURSIVE)


class TestRecursionTriangle:

    def test_values(self):
        assert count_recursion_triangle(3) == 10
        assert count_recursion_triangle(1) == 0
        assert count_recursion_triangle(5) == 28

    @pytest.mark.parametrize("k", range(1, 9))
    def test_closed_form(self, k):
        assert count_recursion_triangle(k) == k * k + k - 2

    def test_order_zero(self):
        with pytest.raises(ValueError):
            count_recursion_triangle(0)


class TestNetworkTallies:

    def test_bspline_network(self, fig1_bspline):
        result = counted_forward(fig1_bspline, random_weights(fig1_bspline), [0.1, -0.5, 0.9])
        assert result.network.mults == 2016

    def test_small_mlp(self):
        spec = build_network([2, 2], Mlp())
        result = counted_forward(spec, random_weights(spec), [0.5, -0.5])
        assert result.network.mults == 4
        assert result.network.node_adds == 2

    def test_outputs_identical_to_plain_pass(self, fig1_bspline):
        weights = random_weights(fig1_bspline)
        x = [0.3, 0.1, -0.8]
        result = counted_forward(fig1_bspline, weights, x)
        assert list(result.outputs) == network_forward(fig1_bspline, weights, x)

    def test_independent_of_input(self, fig1_bspline):
        weights = random_weights(fig1_bspline)
        rng = np.random.default_rng(42)
        tallies = {counted_forward(fig1_bspline, weights, rng.uniform(-1.0, 1.0, 3)).network
                   for _ in range(5)}
        assert len(tallies) == 1

    def test_additive(self, fig1_bspline):
        result = counted_forward(fig1_bspline, random_weights(fig1_bspline), [0.0, 0.2, 0.4])
        layer_sum = OpTally()
        for tally in result.layers:
            layer_sum = layer_sum + tally
        assert layer_sum == result.network
        assert sum(edge.mults for edge in result.edges.values()) == result.network.mults

    def test_recursive_and_lut_agree(self, fig1_bspline):
        weights = random_weights(fig1_bspline)
        x = [0.25, -0.4, 0.6]
        lut = counted_forward(fig1_bspline, weights, x, BasisMode.LUT)
        recursive = counted_forward(fig1_bspline, weights, x, BasisMode.RECURSIVE)
        np.testing.assert_allclose(lut.outputs, recursive.outputs, atol=1e-5)
        assert {edge.mults for edge in lut.edges.values()} == {6}
        assert {edge.mults for edge in recursive.edges.values()} == {16}

    def test_per_edge_adds(self, reference_families):
        for family in reference_families.values():
            spec = build_network([3, 4], family)
            result = counted_forward(spec, random_weights(spec), [0.1, 0.2, 0.3])
            assert {edge.adds for edge in result.edges.values()} == {adds_edge(family)}


class TestReconcile:

    @pytest.mark.parametrize("tag", ["bspline", "grbf", "chebyshev", "fourier"])
    def test_reference_networks(self, tag, reference_families):
        spec = build_network([3, 16, 16, 2], reference_families[tag], name=tag)
        report = reconcile(spec, trials=100, seed=42)
        assert report.ok, [m.describe() for m in report.mismatches[:3]]
        assert report.checked_edges == 48 + 256 + 32

    def test_mlp(self, fig1_mlp):
        assert reconcile(fig1_mlp, trials=20).ok

    @pytest.mark.parametrize("family", GRID_FAMILIES, ids=str)
    @pytest.mark.parametrize("width", [1, 2, 3, 8, 16])
    def test_grid(self, family, width):
        report = reconcile(build_network([width, width], family), trials=100, seed=width)
        assert report.ok, [m.describe() for m in report.mismatches[:3]]

    @pytest.mark.parametrize("family", [BSpline(5, 50), Fourier(4, 3.0)])
    def test_deep_network(self, family):
        assert reconcile(build_network([3, 8, 8, 2], family), trials=5).ok

    @pytest.mark.parametrize("family", [BSpline(2, 4), Grbf.uniform(4)])
    def test_recursive_mode(self, family):
        spec = build_network([3, 5, 2], family)
        assert reconcile(spec, mode=BasisMode.RECURSIVE, trials=10).ok

    def test_injected_fault(self, fig1_bspline):
        report = reconcile(fig1_bspline, trials=3, fault_edge=(0, 0, 0))
        assert not report.ok
        first = report.mismatches[0]
        assert (first.trial, first.layer, first.edge) == (0, 0, (0, 0))
        assert (first.quantity, first.expected, first.counted) == ("mults", 6, 7)

    def test_zero_trials(self, fig1_bspline):
        with pytest.raises(ValueError):
            reconcile(fig1_bspline, trials=0)

    def test_report_json(self, fig1_bspline):
        doc = json.loads(reconcile(fig1_bspline, trials=2).to_json())
        assert doc["ok"] is True
        assert doc["analytic"] == {"rm": 2016, "bop": 156436, "nabs": 272020}
        assert doc["not_reconciled"] == ["uncharged_adds", "lut_fetches", "comparisons"]
        assert sum(tally["mults"] for tally in doc["layer_tallies"]) == 2016


class TestReconciler:

    def test_check_raises_first_mismatch(self, config, logger, fig1_bspline):
        reconciler = Reconciler(config, logger)
        report = reconciler.run(fig1_bspline, None, BasisMode.LUT, trials=1, inject_fault=True)
        with pytest.raises(ReconciliationError) as excinfo:
            reconciler.check(report)
        assert "layer 0 edge (0, 0)" in str(excinfo.value)

    def test_config_defaults(self, config, logger):
        config["validate"]["trials"] = 3
        spec = build_network([2, 2], Mlp())
        report = Reconciler(config, logger).run(spec, None, BasisMode.LUT)
        assert report.trials == 3
        assert report.seed == config["validate"]["seed"]

    def test_write(self, config, logger, tmp_path):
        spec = build_network([2, 2], Mlp())
        reconciler = Reconciler(config, logger)
        path = tmp_path / "reports" / "reconciliation.json"
        assert reconciler.write(reconciler.run(spec, None, BasisMode.LUT, trials=1), str(path))
        assert json.loads(path.read_text(encoding="utf-8"))["ok"] is True
