#!/usr/bin/env python3
"""
Iso-Complexity Module

Width sweeps over an architecture template and iso-complexity width solving
against an MLP baseline.
"""

import concurrent.futures
import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from analytic import cost_report
from config import resolve_threads
from netspec import BasisMode, Mlp, QuantConfig, build_network


class TemplateError(ValueError):
    """Architecture template without exactly one free width, or a bad width range."""


class Metric(Enum):
    RM = "rm"
    BOP = "bop"
    NABS = "nabs"


MAX_WIDTH = 1 << 24
_SYMBOL = re.compile(r"^[A-Za-z_]\w*$")


@dataclass(frozen=True)
class Template:
    """Architecture like 3,X,X,2: fixed integer widths and one repeated free symbol."""
    tokens: tuple
    symbol: str

    def widths(self, x):
        return [x if token == self.symbol else token for token in self.tokens]

    def __str__(self):
        return ",".join(str(token) for token in self.tokens)


def parse_template(text):
    """
    Parse a comma-separated architecture template.

    Raises:
        TemplateError: no free symbol, more than one distinct symbol, or a bad token
    """
    tokens = []
    symbols = set()
    for raw in str(text).replace("[", "").replace("]", "").split(","):
        token = raw.strip()
        if token.isdigit():
            if int(token) < 1:
                raise TemplateError(f"template widths must be >= 1, got {token}")
            tokens.append(int(token))
        elif _SYMBOL.match(token):
            symbols.add(token)
            tokens.append(token)
        else:
            raise TemplateError(f"bad template entry {token!r} in {text!r}")
    if len(tokens) < 2:
        raise TemplateError(f"template {text!r} needs at least two widths")
    if len(symbols) != 1:
        raise TemplateError(f"template {text!r} must contain exactly one free width symbol, "
                            f"found {len(symbols)}")
    return Template(tuple(tokens), symbols.pop())


def parse_widths(text):
    """Parse a fixed architecture such as 3,64,64,2."""
    try:
        widths = [int(token) for token in str(text).replace("[", "").replace("]", "").split(",")]
    except ValueError:
        raise TemplateError(f"architecture {text!r} must list integer widths") from None
    if len(widths) < 2 or min(widths) < 1:
        raise TemplateError(f"architecture {text!r} needs at least two widths, all >= 1")
    return widths


def network_cost(family, widths, quant, metric, mode=BasisMode.LUT):
    return cost_report(build_network(widths, family), quant, mode).metric(Metric(metric).value)


def _check_range(x_min, x_max):
    if x_min < 1:
        raise TemplateError(f"x_min must be >= 1, got {x_min}")
    if x_min > x_max:
        raise TemplateError(f"x_min ({x_min}) is larger than x_max ({x_max})")


@dataclass(frozen=True)
class SweepRow:
    x: int
    family: str
    rm: int
    bop: int
    nabs: int
    rm_ratio: float
    bop_ratio: float
    nabs_ratio: float

    COLUMNS = ("x", "family", "rm", "bop", "nabs", "rm_ratio", "bop_ratio", "nabs_ratio")
    HEADER = ("X",) + COLUMNS[1:]


def sweep_widths(template, x_min, x_max, quant=None, families=None, mode=BasisMode.LUT):
    """
    Network totals of every metric for X in [x_min, x_max], MLP first, ratios to the MLP.

    Args:
        template: Template (or its text) with one free width
        x_min, x_max: inclusive width range
        quant: QuantConfig, all-8-bit uniform when omitted
        families: dict tag -> KAN edge family
        mode: basis evaluation mode

    Returns:
        list of SweepRow, ordered by X then family
    """
    if not isinstance(template, Template):
        template = parse_template(template)
    _check_range(x_min, x_max)
    quant = quant or QuantConfig()
    families = {"mlp": Mlp(), **(families or {})}
    rows = []
    for x in range(x_min, x_max + 1):
        widths = template.widths(x)
        baseline = cost_report(build_network(widths, families["mlp"]), quant, mode).totals
        for tag, family in families.items():
            totals = cost_report(build_network(widths, family), quant, mode).totals
            rows.append(SweepRow(x, tag, totals.rm, totals.bop, totals.nabs,
                                 totals.rm / baseline.rm, totals.bop / baseline.bop,
                                 totals.nabs / baseline.nabs))
    return rows


class WidthSweep:
    """
    Sweep runner used by the command layer.
    """

    def __init__(self, config, logger):
        self.config = config
        self.logger = logger

    def run(self, template, x_min, x_max, quant, families, mode=BasisMode.LUT):
        self.logger.info(f"Sweeping [{template}] for X in {x_min}..{x_max} over {', '.join(families)}")
        rows = sweep_widths(template, x_min, x_max, quant, families, mode)
        for tag in families:
            ratios = [row.rm_ratio for row in rows if row.family == tag]
            self.logger.debug(f"{tag}: RM ratio {min(ratios):.4f}..{max(ratios):.4f}")
        return rows


def scan_width(cost, budget, limit):
    """Largest X in 1..limit with cost(X) <= budget by exhaustive scan, or None."""
    best = None
    for x in range(1, limit + 1):
        if cost(x) <= budget:
            best = x
    return best


def solve_width(cost, budget):
    """
    Largest X >= 1 with cost(X) <= budget for a cost increasing in X.

    Doubling bracket followed by bisection.

    Returns:
        X, or None when even X = 1 exceeds the budget
    """
    if cost(1) > budget:
        return None
    lo, hi = 1, 2
    while cost(hi) <= budget:
        if hi >= MAX_WIDTH:
            raise TemplateError(f"cost stays within budget {budget} beyond X = {MAX_WIDTH}")
        lo, hi = hi, hi * 2
    # cost(lo) <= budget < cost(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if cost(mid) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class IsoResult:
    family: str
    metric: str
    x_floor: Optional[int]    # largest X within budget, None when budget too small
    x_nearest: Optional[int]  # X whose cost is closest to the budget
    budget: int
    cost_at_x: Optional[int]

    COLUMNS = ("family", "metric", "x_floor", "x_nearest", "budget", "cost_at_x")

    @property
    def budget_too_small(self):
        return self.x_floor is None


def max_width_within_budget(family, quant, metric, baseline, template, mode=BasisMode.LUT):
    """
    Widest KAN of a template that stays within an MLP baseline's metric total.

    Args:
        family: KAN edge family
        quant: QuantConfig shared by KAN and baseline
        metric: Metric or its value
        baseline: baseline NetworkSpec, or an integer budget
        template: Template (or text) with one free width
        mode: basis evaluation mode

    Returns:
        IsoResult with cost(x_floor) <= budget < cost(x_floor + 1)
    """
    if not isinstance(template, Template):
        template = parse_template(template)
    metric = Metric(metric)
    quant = quant or QuantConfig()
    if isinstance(baseline, int):
        budget = baseline
    else:
        budget = cost_report(baseline, quant, mode).metric(metric.value)

    def cost(x):
        return network_cost(family, template.widths(x), quant, metric, mode)

    x_floor = solve_width(cost, budget)
    if x_floor is None:
        return IsoResult(family.TAG, metric.value, None, None, budget, None)
    below, above = cost(x_floor), cost(x_floor + 1)
    x_nearest = x_floor + 1 if above - budget < budget - below else x_floor
    return IsoResult(family.TAG, metric.value, x_floor, x_nearest, budget, below)


@dataclass(frozen=True)
class IsoTable:
    results: tuple

    def cell(self, family, metric):
        metric = Metric(metric).value
        for result in self.results:
            if result.family == family and result.metric == metric:
                return result
        raise KeyError((family, metric))

    @property
    def metrics(self):
        return list(dict.fromkeys(result.metric for result in self.results))


def ordering(table, metric):
    """Family tags by descending X*, ties kept in table order."""
    cells = [r for r in table.results if r.metric == Metric(metric).value]
    return [r.family for r in sorted(cells, key=lambda r: -(r.x_floor or 0))]


def iso_table(quant, baseline, families, metrics, template="3,X,X,2", mode=BasisMode.LUT, max_workers=1):
    """
    Solve every (family, metric) cell; cells are independent and may run concurrently.

    Returns:
        IsoTable ordered family-major in the order of `families`
    """
    template = parse_template(template) if not isinstance(template, Template) else template
    cells = [(family, Metric(metric)) for family in families.values() for metric in metrics]
    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = [executor.submit(max_width_within_budget, family, quant, metric, baseline, template, mode)
                   for family, metric in cells]
        results = tuple(future.result() for future in futures)
    return IsoTable(results)


class IsoSolver:
    """
    Iso-complexity runner used by the command layer; parallelism capped by the config.
    """

    def __init__(self, config, logger):
        self.config = config
        self.logger = logger
        self.max_workers = resolve_threads(config)

    def solve(self, quant, baseline, families, metrics, template, mode=BasisMode.LUT):
        self.logger.info(f"Solving iso-complexity widths for [{template}] against "
                         f"'{baseline.name or baseline.widths}' on {self.max_workers} threads")
        table = iso_table(quant, baseline, families, metrics, template, mode, self.max_workers)
        for result in table.results:
            if result.budget_too_small:
                self.logger.warning(f"{result.family}/{result.metric}: budget {result.budget} too small for X = 1")
            else:
                self.logger.debug(f"{result.family}/{result.metric}: X* = {result.x_floor} "
                                  f"(nearest {result.x_nearest}), cost {result.cost_at_x} <= {result.budget}")
        for metric in table.metrics:
            self.logger.info(f"{metric}: widest first {' > '.join(ordering(table, metric))}")
        return table
