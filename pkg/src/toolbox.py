#!/usr/bin/env python3
"""
paraspec - command-line entry point.

Each subcommand is a thin wrapper over one chain of module operations:

    decompose    lp_decompose
    paraproduct  paraproduct + bony_remainder + remainder_gain
    bundle       system_from_manifest + compute_unstable_bundle
    regularity   estimate_regularity + wavefront_test
    thresholds   lyapunov_rates + rigidity_thresholds + threshold_sign_report
    resonances   build_escape_weight + weighted_generator + compute_resonances + s1_and_delta
    pipeline     run_pipeline
    plot-data    emit_plot_data

Reports go to <output root>/<subcommand>/ where the output root is --out,
else $PARASPEC_OUTPUT_ROOT, else ./output.

Usage:
    paraspec decompose --synth 2.0 --grid 256 -v 1
    paraspec bundle --matrix 2,1,1,1 --amplitude 0.1 --grid 128 --tol 1e-10
    paraspec resonances --weight=-1,1 --trunc 32 --cone-aperture 15
    paraspec pipeline configs/catmap_baseline.yaml --seed 7 --out results
"""

import argparse
import math
import sys
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

try:
    from .common import (
        DEFAULT_TIMEOUT_SECONDS, EXIT_ERROR, EXIT_INTERRUPTED, EXIT_SUCCESS, TOOLBOX_VERSION,
        ensure_output_directory, get_execution_start_timestamp, make_rng, resolve_output_root, safe_exit,
        setup_module_path, spawn_rng,
    )
except ImportError:
    from common import (
        DEFAULT_TIMEOUT_SECONDS, EXIT_ERROR, EXIT_INTERRUPTED, EXIT_SUCCESS, TOOLBOX_VERSION,
        ensure_output_directory, get_execution_start_timestamp, make_rng, resolve_output_root, safe_exit,
        setup_module_path, spawn_rng,
    )

try:
    from .artifact_io import load_yaml, read_pfld, write_bundle, write_json, write_pfld
    from .bundle import compute_unstable_bundle, invariance_residual
    from .dynamics import SystemKind, lyapunov_rates, system_from_manifest
    from .error_manager import ErrorManager, ToolboxError
    from .microlocal_diag import (
        LOCATIONS, rigidity_thresholds, threshold_sign_report, threshold_sweep, wavefront_test,
    )
    from .output_manager import OutputManager
    from .parax import bony_remainder, paraproduct, remainder_gain
    from .pipeline import apply_overrides, emit_plot_data, load_config, run_pipeline
    from .resonances import build_escape_weight, compute_resonances, s1_and_delta, weighted_generator
    from .spectral_core import constant_field, estimate_regularity, lp_decompose, synthesize_field
    from .stats_tracker import StatsTracker
    from .timeout_manager import TimeoutManager
except ImportError:
    # Fall back to absolute imports (when run as a script)
    setup_module_path()
    from artifact_io import load_yaml, read_pfld, write_bundle, write_json, write_pfld
    from bundle import compute_unstable_bundle, invariance_residual
    from dynamics import SystemKind, lyapunov_rates, system_from_manifest
    from error_manager import ErrorManager, ToolboxError
    from microlocal_diag import (
        LOCATIONS, rigidity_thresholds, threshold_sign_report, threshold_sweep, wavefront_test,
    )
    from output_manager import OutputManager
    from parax import bony_remainder, paraproduct, remainder_gain
    from pipeline import apply_overrides, emit_plot_data, load_config, run_pipeline
    from resonances import build_escape_weight, compute_resonances, s1_and_delta, weighted_generator
    from spectral_core import constant_field, estimate_regularity, lp_decompose, synthesize_field
    from stats_tracker import StatsTracker
    from timeout_manager import TimeoutManager


@dataclass
class RunContext:
    """Shared services handed to every subcommand."""
    output: OutputManager
    stats: StatsTracker
    errors: ErrorManager
    rng: np.random.Generator
    out_root: str


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _weight(text: str) -> List[float]:
    values = _floats(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError("--weight expects two numbers u,s")
    return values


def _band_range(text: str) -> List[int]:
    values = _floats(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError("--band-range expects lo,hi")
    return [int(v) for v in values]


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('-v', '--verbose', type=int, default=0, metavar='LEVEL',
                        help='Verbose output level: 0=statistics only, 1=stage status, '
                             '2=iteration progress, 3=per-band and per-orbit detail')
    parser.add_argument('-q', '--quiet', action='store_true', help='Suppress all output including statistics')
    parser.add_argument('-to', '--timeout', type=int, default=DEFAULT_TIMEOUT_SECONDS, metavar='SECONDS',
                        help='Stop before the next stage after this many seconds (0 = no timeout)')
    parser.add_argument('--seed', type=int, default=None, help='Seed of the experiment generator')
    parser.add_argument('--out', type=str, default=None, metavar='DIR', help='Output root directory')
    parser.add_argument('--jobs', type=int, default=None, help='Worker cap for parallel assembly')
    parser.add_argument('--grid', type=int, default=None, metavar='N', help='Grid size (power of two)')


def _add_system_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--system', type=str, metavar='FILE', help='YAML system manifest')
    parser.add_argument('--matrix', type=_floats, default=[2, 1, 1, 1], metavar='A11,A12,A21,A22',
                        help='Hyperbolic integer matrix (default: 2,1,1,1)')
    parser.add_argument('--amplitude', type=float, default=0.0,
                        help='Amplitude of a single-mode shear perturbation (0 = linear)')
    parser.add_argument('--roof', type=float, default=None, help='Constant roof; builds the suspension flow')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paraspec",
        description="Paradifferential and microlocal diagnostics for hyperbolic systems on the torus.",
        epilog="Examples: paraspec bundle --amplitude 0.1 --grid 128\n"
               "          paraspec pipeline configs/catmap_baseline.yaml --out results",
    )
    parser.add_argument('--version', action='version', version=f"paraspec {TOOLBOX_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="Littlewood-Paley block norms of a field")
    _add_common_flags(p)
    p.add_argument('--input', type=str, metavar='FILE', help='.pfld field')
    p.add_argument('--synth', type=float, metavar='EXPONENT', help='Synthesize a field with <k>^-EXPONENT decay')
    p.add_argument('--dim', type=int, default=2, choices=(1, 2, 3))

    p = sub.add_parser("paraproduct", help="Bony decomposition ab = T_a b + T_b a + R(a,b)")
    _add_common_flags(p)
    p.add_argument('--a', type=str, metavar='FILE')
    p.add_argument('--b', type=str, metavar='FILE')
    p.add_argument('--a-exponent', type=float, default=1.6, help='Decay exponent of a synthesized a')
    p.add_argument('--b-exponent', type=float, default=2.0, help='Decay exponent of a synthesized b')
    p.add_argument('--dim', type=int, default=2, choices=(1, 2, 3))

    p = sub.add_parser("bundle", help="Unstable bundle by graph transform")
    _add_common_flags(p)
    _add_system_flags(p)
    p.add_argument('--tol', type=float, default=1e-10)
    p.add_argument('--max-iter', type=int, default=200)

    p = sub.add_parser("regularity", help="Regularity exponent and wavefront test of a field")
    _add_common_flags(p)
    p.add_argument('--input', type=str, metavar='FILE', required=True, help='.pfld scalar field')
    p.add_argument('--scale', choices=("sobolev", "holder"), default="sobolev")
    p.add_argument('--band-range', type=_band_range, default=None, metavar='LO,HI')
    p.add_argument('--direction', type=_floats, default=None, metavar='K1,K2', help='Frequency direction to test')
    p.add_argument('--s', type=float, default=1.0, help='Sobolev order of the wavefront test')
    p.add_argument('--cone-aperture', type=float, default=15.0, metavar='DEGREES')

    p = sub.add_parser("thresholds", help="Rigidity thresholds and radial threshold margins")
    _add_common_flags(p)
    _add_system_flags(p)
    p.add_argument('--s-values', type=_floats, default=[1.9, 2.1], metavar='S1,S2,...')
    p.add_argument('-T', '--time', type=float, default=64.0)
    p.add_argument('--samples', type=int, default=256)
    p.add_argument('--location', choices=LOCATIONS, default="sink_Eu_star")
    p.add_argument('--sweep', type=_floats, default=None, metavar='LO,HI,COUNT')

    p = sub.add_parser("resonances", help="Resonances of the weighted transfer operator")
    _add_common_flags(p)
    _add_system_flags(p)
    p.add_argument('--weight', type=_weight, default=[-1.0, 1.0], metavar='U,S',
                   help='Weight orders; pass as --weight=U,S since U is negative')
    p.add_argument('--cone-aperture', type=float, default=15.0, metavar='DEGREES')
    p.add_argument('--trunc', type=int, default=32, metavar='N')
    p.add_argument('--r', type=float, default=2.0, help='Regularity r of the strip formula')
    p.add_argument('--potential', type=float, default=0.0, help='Constant potential value')
    p.add_argument('--backend', choices=("map", "flow"), default="map")
    p.add_argument('--strip', type=float, default=None, help='Lower edge of the reported strip')

    p = sub.add_parser("pipeline", help="Run an experiment config")
    _add_common_flags(p)
    p.add_argument('config', help='YAML experiment config')
    p.add_argument('--tol', type=float, default=None)
    p.add_argument('--cone-aperture', type=float, default=None, metavar='DEGREES')
    p.add_argument('--weight', type=_weight, default=None, metavar='U,S')
    p.add_argument('--trunc', type=int, default=None, metavar='N')

    p = sub.add_parser("plot-data", help="CSV tables from report files")
    _add_common_flags(p)
    p.add_argument('reports', nargs='+', help='JSON reports written by other subcommands')
    return parser


def parse_arguments(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose and args.quiet:
        parser.error("Cannot specify both --verbose and --quiet options")
    if args.timeout < 0:
        parser.error("Timeout value must be non-negative")
    if args.jobs is not None and args.jobs < 1:
        parser.error("--jobs must be at least 1")
    if args.command == "decompose" and (args.input is None) == (args.synth is None):
        parser.error("decompose needs exactly one of --input or --synth")
    if args.command == "paraproduct" and (args.a is None) != (args.b is None):
        parser.error("paraproduct needs both --a and --b, or neither")
    if getattr(args, "matrix", None) is not None and len(args.matrix) != 4:
        parser.error("--matrix expects four entries")
    return args


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _system(args: argparse.Namespace):
    if args.system:
        manifest = load_yaml(args.system)
    else:
        a = [int(round(v)) for v in args.matrix]
        manifest = {"matrix": [a[:2], a[2:]]}
        if args.roof is not None:
            manifest["roof"] = args.roof
        if args.amplitude:
            manifest["synth"] = {"kind": "single_mode", "amplitude": args.amplitude}
    return system_from_manifest(manifest), manifest


def cmd_decompose(args, ctx: RunContext) -> int:
    N = args.grid or 256
    u = read_pfld(args.input) if args.input else synthesize_field(N, args.dim, args.synth, spawn_rng(ctx.rng, "decompose"))
    blocks = lp_decompose(u)
    l2, sup = blocks.l2_norms(), blocks.sup_norms()
    for j, a, b in zip(blocks.indices, l2, sup):
        ctx.output.print_band_row("block", j, a, b)
    out = ensure_output_directory(ctx.out_root, "decompose")
    path = write_json({"kind": "decompose", "J": blocks.J, "profile": blocks.profile,
                       "bands": blocks.indices, "l2": l2, "sup": sup}, f"{out}/decompose.json")
    ctx.stats.increment_artifacts_written()
    ctx.output.print_artifact_written(path)
    return EXIT_SUCCESS


def cmd_paraproduct(args, ctx: RunContext) -> int:
    if args.a:
        a, b = read_pfld(args.a), read_pfld(args.b)
    else:
        N = args.grid or 256
        a = synthesize_field(N, args.dim, args.a_exponent, spawn_rng(ctx.rng, "a"))
        b = synthesize_field(N, args.dim, args.b_exponent, spawn_rng(ctx.rng, "b"))
    tab, tba, rem = paraproduct(a, b), paraproduct(b, a), bony_remainder(a, b)
    product = a.values * b.values
    identity = float(np.max(np.abs(product - tab.values - tba.values - rem.values)))
    out = ensure_output_directory(ctx.out_root, "paraproduct")
    for name, fld in (("T_a_b", tab), ("T_b_a", tba), ("R_a_b", rem)):
        ctx.output.print_artifact_written(write_pfld(fld, f"{out}/{name}.pfld"))
        ctx.stats.increment_artifacts_written()
    report = {"kind": "paraproduct", "identity_error": identity,
              "relative_identity_error": identity / max(float(np.max(np.abs(product))), 1e-300),
              "gain": remainder_gain(a, b)}
    ctx.output.print_artifact_written(write_json(report, f"{out}/paraproduct.json"))
    ctx.stats.increment_artifacts_written()
    ctx.output.print_info_pair("Bony identity error", f"{identity:.3e}")
    return EXIT_SUCCESS


def cmd_bundle(args, ctx: RunContext) -> int:
    sys_, manifest = _system(args)
    section = compute_unstable_bundle(sys_, args.tol, args.max_iter, args.grid or 64, output_manager=ctx.output)
    ctx.stats.add_iterations(section.iterations)
    out = ensure_output_directory(ctx.out_root, "bundle")
    for path in write_bundle(section, f"{out}/bundle.pfld", manifest):
        ctx.output.print_artifact_written(path)
        ctx.stats.increment_artifacts_written()
    report = {"kind": "bundle", "section": section.to_dict(), "invariance_residual": invariance_residual(sys_, section)}
    ctx.output.print_artifact_written(write_json(report, f"{out}/bundle_report.json"))
    ctx.stats.increment_artifacts_written()
    ctx.output.print_info_pair("Iterations", str(section.iterations))
    ctx.output.print_info_pair("Residual", f"{section.residual:.3e}")
    return EXIT_SUCCESS


def cmd_regularity(args, ctx: RunContext) -> int:
    u = read_pfld(args.input)
    estimate = estimate_regularity(u, args.scale, args.band_range)
    report = {"kind": "regularity", "estimate": estimate.to_dict()}
    if args.direction:
        ap = math.radians(args.cone_aperture)
        report["wavefront"] = wavefront_test(u, args.direction, args.s, (ap, ap * 2 / 3, ap * 4 / 3),
                                             args.band_range).to_dict()
    out = ensure_output_directory(ctx.out_root, "regularity")
    ctx.output.print_artifact_written(write_json(report, f"{out}/regularity.json"))
    ctx.stats.increment_artifacts_written()
    ctx.output.print_info_pair(f"{args.scale} exponent", f"{estimate.exponent:.4f}")
    return EXIT_SUCCESS


def cmd_thresholds(args, ctx: RunContext) -> int:
    sys_, _ = _system(args)
    rng = spawn_rng(ctx.rng, "thresholds")
    rates = lyapunov_rates(sys_, args.time, args.samples, rng, output_manager=ctx.output)
    dim = 3 if sys_.kind == SystemKind.SUSPENSION else "general"
    thresholds = rigidity_thresholds(rates, dim, sys_.volume_preserving)
    reports = [threshold_sign_report(sys_, s, args.time, args.location, args.samples, rng, ctx.output).to_dict()
               for s in args.s_values]
    report = {"kind": "thresholds", "rates": rates.to_dict(), "thresholds": thresholds.to_dict(),
              "location": args.location, "reports": reports, "sweep": []}
    if args.sweep:
        lo, hi, count = args.sweep
        report["sweep"] = threshold_sweep(sys_, np.linspace(lo, hi, int(count)), args.time, args.location,
                                          args.samples, rng)
    out = ensure_output_directory(ctx.out_root, "thresholds")
    ctx.output.print_artifact_written(write_json(report, f"{out}/thresholds.json"))
    ctx.stats.increment_artifacts_written()
    ctx.output.print_info_pair("Rigidity threshold", f"{thresholds.rigidity_threshold:.4f}")
    return EXIT_SUCCESS


def cmd_resonances(args, ctx: RunContext) -> int:
    sys_, _ = _system(args)
    u, s = args.weight
    weight = build_escape_weight(sys_, u, s, math.radians(args.cone_aperture), ctx.output,
                                 rng=spawn_rng(ctx.rng, "weight"))
    V = constant_field(args.potential, 4 * args.trunc, 2) if args.potential else None
    matrix = weighted_generator(sys_, V, weight, args.trunc, args.backend, args.jobs or 1)
    rates = lyapunov_rates(sys_, rng=spawn_rng(ctx.rng, "rates"), output_manager=ctx.output)
    strip = s1_and_delta(sys_, V, args.r, weight, rates, rng=spawn_rng(ctx.rng, "resonances"))
    lower = args.strip if args.strip is not None else strip.s1 - strip.delta
    report = compute_resonances(matrix, lower)
    report.s1, report.delta = strip.s1, strip.delta
    ctx.stats.add_eigenpairs(len(report.eigenvalues))
    out = ensure_output_directory(ctx.out_root, "resonances")
    payload = {"kind": "resonances", **report.to_dict(), "strip_estimate": strip._asdict()}
    ctx.output.print_artifact_written(write_json(payload, f"{out}/resonances.json"))
    ctx.stats.increment_artifacts_written()
    for z in report.eigenvalues[:10]:
        ctx.output.print_info_pair("  resonance", f"{z.real:+.10f} {z.imag:+.10f}i")
    return EXIT_SUCCESS


def cmd_pipeline(args, ctx: RunContext, timeout_manager: TimeoutManager) -> int:
    cfg = apply_overrides(load_config(args.config), grid=args.grid, tol=args.tol,
                          cone_aperture=args.cone_aperture, weight=args.weight, trunc=args.trunc,
                          seed=args.seed, out=args.out, jobs=args.jobs)
    ctx.output.print_startup_info(cfg.name, cfg.grid, cfg.seed, resolve_output_root(cfg.output_root), cfg.jobs)
    result = run_pipeline(cfg, ctx.output, ctx.stats, ctx.errors, timeout_manager)
    ctx.output.print_info_pair("Manifest", result.manifest_path)
    return result.exit_code


def cmd_plot_data(args, ctx: RunContext) -> int:
    out = ensure_output_directory(ctx.out_root, "plot_data")
    written, skipped = emit_plot_data(args.reports, out, ctx.output)
    for path in written:
        ctx.output.print_artifact_written(path)
        ctx.stats.increment_artifacts_written()
    return EXIT_SUCCESS if written or not skipped else EXIT_ERROR


COMMANDS = {
    "decompose": cmd_decompose,
    "paraproduct": cmd_paraproduct,
    "bundle": cmd_bundle,
    "regularity": cmd_regularity,
    "thresholds": cmd_thresholds,
    "resonances": cmd_resonances,
    "plot-data": cmd_plot_data,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run one subcommand and print the run statistics.

    Exit Codes:
        0 (EXIT_SUCCESS): Normal completion
        1 (EXIT_ERROR): A stage or subcommand failed
        2 (EXIT_INTERRUPTED): User interruption (Ctrl+C)
    """
    args = parse_arguments(argv)
    _, start_timestamp_str = get_execution_start_timestamp()
    output = OutputManager(verbose_level=args.verbose, quiet=args.quiet)
    stats = StatsTracker()
    errors = ErrorManager(stats_tracker=stats, output_manager=output,
                          start_timestamp_str=start_timestamp_str, output_root=args.out)
    ctx = RunContext(output, stats, errors, make_rng(args.seed), resolve_output_root(args.out))
    timeout_manager = TimeoutManager(args.timeout)

    if output.get_verbose_level() >= 1:
        output.print_info_pair("paraspec version", TOOLBOX_VERSION)
        output.print_info_pair("Command", args.command)
    try:
        if args.timeout > 0:
            timeout_manager.setup_timeout_handler(
                lambda: output.print_timeout_warning(timeout_manager.get_elapsed_time(), args.timeout))
        try:
            if args.command == "pipeline":
                code = cmd_pipeline(args, ctx, timeout_manager)
            else:
                output.print_stage_start(args.command)
                code = COMMANDS[args.command](args, ctx)
                stats.increment_stages_run()
                output.print_stage_complete(args.command, ok=code == EXIT_SUCCESS)
        except ToolboxError as e:
            errors.handle_exception(e, context=f"command {args.command}", stage=args.command)
            stats.increment_stages_failed()
            code = EXIT_ERROR
        except (ArithmeticError, LookupError, ValueError, OSError, np.linalg.LinAlgError) as e:
            info = errors.handle_exception(e, context=f"command {args.command}", stage=args.command,
                                           critical=True)
            errors.log_critical_failure(info, f"argv: {list(argv) if argv is not None else sys.argv[1:]}")
            stats.increment_stages_failed()
            code = EXIT_ERROR
        finally:
            timeout_manager.cancel_timeout()
    except KeyboardInterrupt:
        output.print_warning("Operation cancelled by user")
        return EXIT_INTERRUPTED

    output.print_completion_message(ok=code == EXIT_SUCCESS)
    stats.print_report(quiet=args.quiet, output_manager=output)
    return code


if __name__ == "__main__":
    safe_exit(main())
