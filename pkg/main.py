#!/usr/bin/env python3
"""
Main Application Module

Command-line entry point: cost reports, reference inference, count/formula
reconciliation, width sweeps, iso-complexity tables and formula printouts.
"""

import argparse
import json
import sys

# Import our modules
from config import DEFAULT_CONFIG_FILE, load_config
from logging_setup import setup_logging
from path_utils import resolve_output_path, resolve_spec_path, validate_and_prepare_path
from analytic import UnsupportedError, cost_report
from counted import Reconciler, counted_forward
from infer import LutError, LutSettings, ShapeError, load_weights, network_forward, random_weights, save_weights
from iso import IsoSolver, TemplateError, WidthSweep, parse_widths
from netspec import (
    BasisMode,
    BSpline,
    Chebyshev,
    Fourier,
    Grbf,
    Mlp,
    QuantConfig,
    SpecError,
    SpecValidationError,
    build_network,
    load_spec,
    parse_family,
    parse_scheme,
)
from report import FORMATS, render_formulas, render_report, write_iso_csv, write_sweep_csv

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2

# Errors reported as bad input (exit code 2)
INPUT_ERRORS = (SpecError, SpecValidationError, TemplateError, UnsupportedError, ShapeError, LutError,
                FileNotFoundError, ValueError)


class HwCostApp:
    """
    Main application class that wires configuration, logging and the analysis modules.
    """

    def __init__(self, config_path=None, debug=False):
        self.config_path = config_path or DEFAULT_CONFIG_FILE
        self.config = load_config(self.config_path)
        if debug:
            self.config["logging"]["debug"] = True
        self.logger = setup_logging(self.config)
        self.lut_settings = LutSettings.from_config(self.config)

    # -- helpers ------------------------------------------------------------

    def _mode(self, args):
        return BasisMode(args.mode or self.config["analysis"]["mode"])

    def _load_spec(self, path):
        resolved = resolve_spec_path(path)
        self.logger.debug(f"Loading spec {resolved}")
        return load_spec(resolved)

    def _out_path(self, filename):
        return resolve_output_path(self.config["output"]["out_dir"], filename)

    def _quant(self, args):
        bits = args.bits if args.bits is not None else self.config["quant"]["bits"]
        scheme = args.scheme if args.scheme is not None else self.config["quant"]["scheme"]
        quant = QuantConfig.all_bits(bits, parse_scheme(scheme))
        problems = quant.problems()
        if problems:
            raise SpecValidationError(problems)
        return quant

    def _families(self, tags):
        families = {}
        for tag in tags:
            if tag not in self.config["families"]:
                raise SpecError(f"families.{tag}", "no parameters configured for this family")
            families[tag] = parse_family(self.config["families"][tag], f"families.{tag}")
        return families

    # -- commands -----------------------------------------------------------

    def analyze(self, args):
        spec, quant = self._load_spec(args.spec)
        report = cost_report(spec, quant, self._mode(args))
        fmt = args.format or self.config["analysis"]["format"]
        sys.stdout.write(render_report(report, fmt))
        return EXIT_OK

    def infer(self, args):
        spec, _ = self._load_spec(args.spec)
        mode = self._mode(args)
        if args.weights:
            weights = load_weights(args.weights, spec)
        else:
            weights = random_weights(spec, args.seed)
        if args.save_weights:
            path_valid, message = validate_and_prepare_path(args.save_weights, self.logger)
            if not path_valid:
                self.logger.error(f"Cannot save weights: {message}")
                return EXIT_USAGE
            save_weights(weights, args.save_weights)
            self.logger.info(f"Weights written to {args.save_weights}")
        x = [float(v) for v in args.input.split(",")]
        if args.tally:
            result = counted_forward(spec, weights, x, mode, self.lut_settings)
            doc = {"outputs": list(result.outputs),
                   "layers": [tally.to_dict() for tally in result.layers],
                   "network": result.network.to_dict()}
        else:
            doc = {"outputs": network_forward(spec, weights, x, mode, self.lut_settings)}
        sys.stdout.write(json.dumps(doc, indent=4) + "\n")
        return EXIT_OK

    def validate(self, args):
        spec, quant = self._load_spec(args.spec)
        reconciler = Reconciler(self.config, self.logger)
        report = reconciler.run(spec, quant, self._mode(args), args.trials, args.seed,
                                self.lut_settings, inject_fault=args.inject_fault)
        report_path = args.report or self._out_path(self.config["validate"]["report_file"])
        reconciler.write(report, report_path)
        sys.stdout.write(f"{'OK' if report.ok else 'MISMATCH'}: {len(report.mismatches)} mismatches, "
                         f"{report.checked_edges} edges, {report.trials} trials\n")
        for mismatch in report.mismatches[:1]:
            sys.stdout.write(f"first divergence: {mismatch.describe()}\n")
        return EXIT_OK if report.ok else EXIT_MISMATCH

    def sweep(self, args):
        settings = self.config["sweep"]
        template = args.template or settings["template"]
        x_min = settings["x_min"] if args.x_min is None else args.x_min
        x_max = settings["x_max"] if args.x_max is None else args.x_max
        families = self._families(args.families or settings["families"])
        rows = WidthSweep(self.config, self.logger).run(template, x_min, x_max, self._quant(args), families,
                                                        self._mode(args))
        out = args.out or self._out_path("sweep.csv")
        if not write_sweep_csv(rows, out, self.logger):
            return EXIT_USAGE
        sys.stdout.write(f"{out}\n")
        return EXIT_OK

    def iso(self, args):
        settings = self.config["iso"]
        template = args.template or self.config["sweep"]["template"]
        baseline_widths = parse_widths(args.baseline or settings["baseline"])
        baseline = build_network(baseline_widths, Mlp(), name=f"mlp[{','.join(map(str, baseline_widths))}]")
        families = self._families(args.families or self.config["sweep"]["families"])
        metrics = args.metrics or settings["metrics"]
        table = IsoSolver(self.config, self.logger).solve(self._quant(args), baseline, families, metrics,
                                                          template, self._mode(args))
        out = args.out or self._out_path("iso.csv")
        if not write_iso_csv(table, out, self.logger):
            return EXIT_USAGE
        sys.stdout.write(f"{out}\n")
        return EXIT_OK

    def formulas(self, args):
        builders = {
            "mlp": lambda: Mlp(),
            "bspline": lambda: BSpline(args.k, args.grid),
            "grbf": lambda: Grbf.uniform(args.n_centers),
            "chebyshev": lambda: Chebyshev(args.degree),
            "fourier": lambda: Fourier(args.grid, args.omega),
        }
        family = builders[args.family]()
        sys.stdout.write(render_formulas(family, self._quant(args), args.n_in, args.n_out, self._mode(args)))
        return EXIT_OK

    def run(self, args):
        """Dispatch one subcommand and map failures onto exit codes."""
        command = getattr(self, args.command)
        try:
            return command(args)
        except INPUT_ERRORS as e:
            self.logger.error(str(e))
            return EXIT_USAGE


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _metric(text):
    if text not in ("rm", "bop", "nabs"):
        raise argparse.ArgumentTypeError(f"unknown metric {text!r}")
    return text


def _scheme(text):
    # "uniform", "pot" or "apot:N"
    if text.startswith("apot:"):
        return {"apot": int(text.split(":", 1)[1])}
    return text


def build_parser():
    parser = argparse.ArgumentParser(description="Hardware inference cost model for KAN and MLP layers")
    parser.add_argument('--config', default=DEFAULT_CONFIG_FILE,
                        help='Path to configuration file')
    parser.add_argument('--debug', action='store_true',
                        help='Enable debug logging')
    commands = parser.add_subparsers(dest='command', required=True)

    mode_help = 'Basis evaluation mode (default from config)'

    analyze = commands.add_parser('analyze', help='Per-layer and total RM/BOP/NABS of a network spec')
    analyze.add_argument('spec', help='Spec file, or the name of a bundled spec')
    analyze.add_argument('--mode', choices=[m.value for m in BasisMode], help=mode_help)
    analyze.add_argument('--format', choices=FORMATS, help='Output format (default from config)')

    infer = commands.add_parser('infer', help='Run the reference forward pass')
    infer.add_argument('spec', help='Spec file, or the name of a bundled spec')
    infer.add_argument('--input', required=True, help='Comma-separated input vector')
    infer.add_argument('--weights', help='Weight file (random weights when omitted)')
    infer.add_argument('--seed', type=int, default=42, help='Seed for random weights')
    infer.add_argument('--mode', choices=[m.value for m in BasisMode], help=mode_help)
    infer.add_argument('--tally', action='store_true', help='Also report counted operations')
    infer.add_argument('--save-weights', help='Write the weights used to this file')

    validate = commands.add_parser('validate', help='Reconcile counted operations with the formulas')
    validate.add_argument('spec', help='Spec file, or the name of a bundled spec')
    validate.add_argument('--trials', type=_positive_int, help='Random inputs to check')
    validate.add_argument('--seed', type=int, help='Seed for weights and inputs')
    validate.add_argument('--mode', choices=[m.value for m in BasisMode], help=mode_help)
    validate.add_argument('--report', help='Path of the JSON reconciliation report')
    validate.add_argument('--inject-fault', action='store_true', help=argparse.SUPPRESS)

    for name, help_text in (('sweep', 'Metric totals over a range of widths'),
                            ('iso', 'Widest KAN within an MLP baseline budget')):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument('--template', help='Architecture with one free width, e.g. 3,X,X,2')
        sub.add_argument('--families', nargs='+', choices=["bspline", "grbf", "chebyshev", "fourier"],
                         help='KAN families to include')
        sub.add_argument('--bits', type=_positive_int, help='Bitwidth of every operand')
        sub.add_argument('--scheme', type=_scheme, help='uniform, pot or apot:N')
        sub.add_argument('--mode', choices=[m.value for m in BasisMode], help=mode_help)
        sub.add_argument('--out', help='Output CSV path')
        if name == 'sweep':
            sub.add_argument('--x-min', type=int, help='Smallest width')
            sub.add_argument('--x-max', type=int, help='Largest width')
        else:
            sub.add_argument('--baseline', help='MLP baseline architecture, e.g. 3,64,64,2')
            sub.add_argument('--metrics', nargs='+', type=_metric, help='Metrics among rm, bop, nabs')

    formulas = commands.add_parser('formulas', help='Print the cost formulas with values substituted')
    formulas.add_argument('family', choices=["mlp", "bspline", "grbf", "chebyshev", "fourier"])
    formulas.add_argument('--k', type=int, default=3, help='B-spline order')
    formulas.add_argument('--grid', type=int, default=5, help='B-spline / Fourier grid size')
    formulas.add_argument('--n-centers', type=int, default=5, help='GRBF centers')
    formulas.add_argument('--degree', type=int, default=5, help='Chebyshev degree')
    formulas.add_argument('--omega', type=float, default=1.0, help='Fourier angular frequency')
    formulas.add_argument('--n-in', type=_positive_int, default=1, help='Layer inputs')
    formulas.add_argument('--n-out', type=_positive_int, default=1, help='Layer outputs')
    formulas.add_argument('--bits', type=_positive_int, help='Bitwidth of every operand')
    formulas.add_argument('--scheme', type=_scheme, help='uniform, pot or apot:N')
    formulas.add_argument('--mode', choices=[m.value for m in BasisMode], help=mode_help)
    return parser


def main(argv=None):
    """Main entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        app = HwCostApp(config_path=args.config, debug=args.debug)
    except FileNotFoundError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return app.run(args)


if __name__ == "__main__":
    sys.exit(main())
