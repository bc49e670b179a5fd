"""
Width sweeps and iso-complexity solving against the [3,64,64,2] MLP baseline.
"""

import pytest

from iso import (
    IsoSolver,
    Metric,
    TemplateError,
    WidthSweep,
    iso_table,
    max_width_within_budget,
    network_cost,
    ordering,
    parse_template,
    parse_widths,
    scan_width,
    solve_width,
    sweep_widths,
)
from netspec import BSpline, Chebyshev, Fourier, Grbf, Mlp, QuantConfig, build_network

# Widest [3,X,X,2] KAN within the [3,64,64,2] MLP totals, 8-bit uniform
EXPECTED_X = {
    "bspline": {"rm": 24, "bop": 26, "nabs": 28},
    "grbf": {"rm": 24, "bop": 25, "nabs": 27},
    "chebyshev": {"rm": 22, "bop": 23, "nabs": 25},
    "fourier": {"rm": 17, "bop": 18, "nabs": 18},
}

# Widths reported for the same comparison, widened by the +-2 acceptance margin
REPORTED_RANGE = {"bspline": (25 - 2, 29 + 2), "fourier": (18 - 2, 19 + 2)}


@pytest.fixture(scope="module")
def table():
    families = {"bspline": BSpline(3, 5), "grbf": Grbf.uniform(5), "chebyshev": Chebyshev(5), "fourier": Fourier(5)}
    baseline = build_network([3, 64, 64, 2], Mlp())
    return iso_table(QuantConfig(), baseline, families, ["rm", "bop", "nabs"], max_workers=4)


class TestTemplates:

    def test_parse(self):
        template = parse_template("3,X,X,2")
        assert template.symbol == "X"
        assert template.widths(7) == [3, 7, 7, 2]
        assert str(template) == "3,X,X,2"

    def test_brackets_accepted(self):
        assert parse_template("[3, N, 2]").widths(5) == [3, 5, 2]

    @pytest.mark.parametrize("text", ["3,X,Y,2", "3,4,2", "3,X,-1", "X", "3,,X"])
    def test_rejected(self, text):
        with pytest.raises(TemplateError):
            parse_template(text)

    def test_fixed_widths(self):
        assert parse_widths("3,64,64,2") == [3, 64, 64, 2]
        with pytest.raises(TemplateError):
            parse_widths("3,X,2")
        with pytest.raises(TemplateError):
            parse_widths("3,0,2")


@pytest.fixture(scope="module")
def sweep_rows():
    families = {"bspline": BSpline(3, 5), "fourier": Fourier(5)}
    return sweep_widths("3,X,X,2", 4, 64, QuantConfig(), families)


class TestSweep:

    def test_range_covered(self, sweep_rows):
        assert {row.x for row in sweep_rows} == set(range(4, 65))
        assert [row.family for row in sweep_rows[:3]] == ["mlp", "bspline", "fourier"]

    def test_mlp_ratio_is_one(self, sweep_rows):
        assert {row.rm_ratio for row in sweep_rows if row.family == "mlp"} == {1.0}

    def test_rm_ratio_constant(self, sweep_rows):
        assert {row.rm_ratio for row in sweep_rows if row.family == "bspline"} == {6.0}
        assert {row.rm_ratio for row in sweep_rows if row.family == "fourier"} == {11.0}

    @pytest.mark.parametrize("metric, bound", [("bop_ratio", 0.05), ("nabs_ratio", 0.2)])
    def test_ratio_drift(self, sweep_rows, metric, bound):
        for family in ("bspline", "fourier"):
            ratios = [getattr(row, metric) for row in sweep_rows if row.family == family]
            assert (max(ratios) - min(ratios)) / max(ratios) < bound

    def test_ratios_positive(self, sweep_rows):
        assert all(min(row.rm_ratio, row.bop_ratio, row.nabs_ratio) > 0 for row in sweep_rows)

    def test_width_one(self):
        rows = sweep_widths("3,X,X,2", 1, 1, families={"bspline": BSpline(3, 5)})
        assert [row.x for row in rows] == [1, 1]

    @pytest.mark.parametrize("x_min, x_max", [(0, 5), (10, 5)])
    def test_bad_range(self, x_min, x_max):
        with pytest.raises(TemplateError):
            sweep_widths("3,X,X,2", x_min, x_max)

    def test_runner(self, config, logger):
        rows = WidthSweep(config, logger).run("3,X,2", 2, 3, QuantConfig(), {"fourier": Fourier(5)})
        assert len(rows) == 4


class TestSolveWidth:

    def test_matches_scan(self):
        def cost(x):
            return 6 * (x * x + 5 * x)
        for budget in (0, 35, 36, 37, 500, 4416, 10 ** 6):
            assert solve_width(cost, budget) == scan_width(cost, budget, 1000)

    def test_budget_too_small(self):
        assert solve_width(lambda x: 10 * x, 5) is None


class TestMaxWidth:

    def test_bspline_rm(self, baseline_mlp):
        result = max_width_within_budget(BSpline(3, 5), QuantConfig(), "rm", baseline_mlp, "3,X,X,2")
        assert result.budget == 4416
        assert result.x_floor == 24
        assert result.x_nearest == 25
        assert result.cost_at_x == 6 * (24 * 24 + 5 * 24)

    def test_fourier_rm(self, baseline_mlp):
        result = max_width_within_budget(Fourier(5), QuantConfig(), Metric.RM, baseline_mlp, "3,X,X,2")
        assert result.x_floor == 17

    def test_zero_budget(self):
        result = max_width_within_budget(BSpline(3, 5), QuantConfig(), "rm", 0, "3,X,X,2")
        assert result.budget_too_small
        assert result.x_nearest is None

    def test_integer_budget(self):
        result = max_width_within_budget(BSpline(3, 5), QuantConfig(), "rm", 4416, "3,X,X,2")
        assert result.x_floor == 24


class TestIsoTable:

    def test_widths(self, table):
        for family, by_metric in EXPECTED_X.items():
            for metric, x in by_metric.items():
                assert table.cell(family, metric).x_floor == x, (family, metric)

    def test_budgets(self, table):
        assert {r.budget for r in table.results if r.metric == "rm"} == {4416}
        assert {r.budget for r in table.results if r.metric == "bop"} == {379008}
        assert {r.budget for r in table.results if r.metric == "nabs"} == {771072}

    def test_bracketing(self, table):
        families = {"bspline": BSpline(3, 5), "fourier": Fourier(5)}
        template = parse_template("3,X,X,2")
        for tag, family in families.items():
            for metric in ("rm", "bop", "nabs"):
                result = table.cell(tag, metric)
                below = network_cost(family, template.widths(result.x_floor), QuantConfig(), metric)
                above = network_cost(family, template.widths(result.x_floor + 1), QuantConfig(), metric)
                assert below <= result.budget < above

    def test_scan_oracle(self, table):
        template = parse_template("3,X,X,2")
        family = BSpline(3, 5)
        for metric in ("rm", "bop", "nabs"):
            budget = table.cell("bspline", metric).budget
            scanned = scan_width(lambda x: network_cost(family, template.widths(x), QuantConfig(), metric),
                                 budget, 64)
            assert scanned == table.cell("bspline", metric).x_floor

    def test_ordering(self, table):
        for metric in ("rm", "bop", "nabs"):
            order = ordering(table, metric)
            assert order[0] == "bspline"
            assert order[-1] == "fourier"

    def test_equal_rm_cost_equal_width(self, table):
        assert table.cell("bspline", "rm").x_floor == table.cell("grbf", "rm").x_floor

    def test_metrics_cluster(self, table):
        for family in EXPECTED_X:
            widths = [table.cell(family, metric).x_floor for metric in table.metrics]
            assert max(widths) - min(widths) <= 4

    def test_within_reported_ranges(self, table):
        for family, (lo, hi) in REPORTED_RANGE.items():
            for metric in table.metrics:
                assert lo <= table.cell(family, metric).x_floor <= hi

    def test_missing_cell(self, table):
        with pytest.raises(KeyError):
            table.cell("wavelet", "rm")


class TestIsoSolver:

    def test_thread_override(self, config, logger, monkeypatch):
        monkeypatch.setenv("KAN_HWCOST_THREADS", "3")
        assert IsoSolver(config, logger).max_workers == 3

    def test_solve(self, config, logger, baseline_mlp):
        config["runtime"]["threads"] = 2
        table = IsoSolver(config, logger).solve(QuantConfig(), baseline_mlp, {"fourier": Fourier(5)},
                                                ["rm"], "3,X,X,2")
        assert [(r.family, r.metric, r.x_floor) for r in table.results] == [("fourier", "rm", 17)]
