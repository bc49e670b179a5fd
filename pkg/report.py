#!/usr/bin/env python3
"""
Report Rendering Module

Renders cost reports as table, CSV or JSON, writes the sweep and iso CSV files, and
prints the closed-form cost formulas with values substituted.
"""

import csv
import io
import json

from analytic import (
    CostReport,
    bop_edge_terms,
    bop_layer_terms,
    flops_overestimate,
    nabs_edge_terms,
    nabs_layer_terms,
    rm_edge_breakdown,
    rm_layer,
)
from iso import SweepRow
from netspec import BasisMode, BSpline, LayerSpec, SchemeKind
from path_utils import validate_and_prepare_path

FORMATS = ("table", "json", "csv")
REPORT_COLUMNS = ("layer", "family", "n_in", "n_out", "rm", "bop", "nabs", "n_par", "flops_dense", "n_par_mlp")


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _report_rows(report):
    rows = []
    for layer in report.layers:
        rows.append({"layer": layer.index, "family": layer.family, "n_in": layer.n_in, "n_out": layer.n_out,
                     "rm": layer.rm, "bop": layer.bop, "nabs": layer.nabs,
                     "n_par": layer.n_par, "flops_dense": layer.flops_dense, "n_par_mlp": layer.n_par_mlp})
    totals = report.totals
    rows.append({"layer": "total", "family": "", "n_in": "", "n_out": "",
                 "rm": totals.rm, "bop": totals.bop, "nabs": totals.nabs,
                 "n_par": totals.n_par, "flops_dense": totals.flops_dense, "n_par_mlp": totals.n_par_mlp})
    return rows


def _csv_text(columns, rows):
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({column: _cell(row[column]) for column in columns})
    return buffer.getvalue()


def _table_text(report):
    rows = [[_cell(row[column]) for column in REPORT_COLUMNS] for row in _report_rows(report)]
    widths = [max(len(column), *(len(row[i]) for row in rows)) for i, column in enumerate(REPORT_COLUMNS)]
    title = f"{report.name or 'network'} ({report.mode.value} mode)"
    if report.mode is BasisMode.RECURSIVE:
        title += "; rm follows the mode, bop and nabs use the lookup-table dataflow"
    lines = [title,
             "  ".join(column.rjust(width) for column, width in zip(REPORT_COLUMNS, widths)),
             "  ".join("-" * width for width in widths)]
    for row in rows:
        lines.append("  ".join(cell.rjust(width) for cell, width in zip(row, widths)))
    return "\n".join(lines) + "\n"


def render_report(report, fmt="table"):
    """
    Render a CostReport.

    Args:
        report: CostReport
        fmt: "table", "json" or "csv"

    Returns:
        str ending in a newline
    """
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=4) + "\n"
    if fmt == "csv":
        return _csv_text(REPORT_COLUMNS, _report_rows(report))
    if fmt == "table":
        return _table_text(report)
    raise ValueError(f"unknown format {fmt!r}, expected one of {', '.join(FORMATS)}")


def report_from_json(text):
    return CostReport.from_dict(json.loads(text))


def write_csv(path, columns, rows, logger):
    """
    Write dict rows to a CSV file; floats use fixed six-decimal formatting.

    Returns:
        True when the file was written
    """
    path_valid, validation_message = validate_and_prepare_path(path, logger)
    if not path_valid:
        logger.error(f"Cannot write {path}: {validation_message}")
        return False
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(_csv_text(columns, rows))
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return True


def write_sweep_csv(rows, path, logger):
    records = [{h: getattr(row, c) for h, c in zip(SweepRow.HEADER, SweepRow.COLUMNS)} for row in rows]
    return write_csv(path, SweepRow.HEADER, records, logger)


def write_iso_csv(table, path, logger):
    results = table.results
    columns = results[0].COLUMNS if results else ()
    return write_csv(path, columns, [{c: getattr(r, c) for c in columns} for r in results], logger)


def describe_family(family):
    params = {key: value for key, value in family.to_json().items() if key != "type"}
    inner = ", ".join(f"{key}={value}" for key, value in params.items())
    return f"{family.TAG}({inner})"


def describe_quant(quant):
    scheme = quant.scheme
    if scheme.kind is SchemeKind.ADDITIVE_POWER_OF_TWO:
        name = f"APoT({scheme.terms})"
    else:
        name = {SchemeKind.UNIFORM: "uniform", SchemeKind.POWER_OF_TWO: "power-of-two"}[scheme.kind]
    bits = ", ".join(f"{field}={getattr(quant, field)}" for field in quant.BIT_FIELDS)
    return f"{name}; {bits}; X_w={quant.x_w}, X_knot={quant.x_knot}"


def _sum_line(label, terms):
    total = sum(term.value for term in terms)
    lines = [f"{label}:"]
    for term in terms:
        lines.append(f"  {term.name:<20} {term.formula} = {term.substituted} = {term.value}")
    lines.append(f"  {' + '.join(str(term.value) for term in terms)} = {total}")
    return lines


def render_formulas(family, quant, n_in=1, n_out=1, mode=None):
    """
    Per-edge and per-layer formulas of one family with every term evaluated.

    The printed totals come from the same term lists the metrics sum.

    Returns:
        str of newline-terminated lines
    """
    mode = mode or BasisMode.LUT
    layer = LayerSpec(n_in, n_out, family)
    rm = rm_edge_breakdown(family, mode)
    lines = [describe_family(family),
             f"quantization: {describe_quant(quant)}",
             f"layer: n_i={n_in}, n_n={n_out}, {mode.value} mode",
             "",
             f"RM/edge: fixed + linear + basis = {rm.fixed} + {rm.linear} + {rm.basis} = {rm.total}"]
    edge_label = "/edge" if family.is_kan else " per connection"
    lines += _sum_line(f"BOP{edge_label}", bop_edge_terms(family, quant, n_in))
    lines += _sum_line(f"NABS{edge_label}", nabs_edge_terms(family, quant, n_in))
    lines.append("")
    lines.append(f"RM/layer: n_n*n_i*RM_edge = {layer.n_edges}*{rm.total} = {rm_layer(layer, mode)}")
    lines += _sum_line("BOP/layer", bop_layer_terms(layer, quant))
    lines += _sum_line("NABS/layer", nabs_layer_terms(layer, quant))
    if isinstance(family, BSpline):
        [flops] = flops_overestimate(family, [family.grid_size])
        lines.append("")
        lines.append(f"dense FLOPs/edge: 9k(G + 1.5k) + 2G - 2.5k - 1 = {flops.flops_dense:g} "
                     f"vs 2*RM = {flops.sparse_ops} (x{flops.ratio:.2f})")
    return "\n".join(lines) + "\n"
