"""
Pipeline - experiment configs, staged runs and plot-data emission.

An experiment config (YAML, schema_version 1) names a system, a grid, a seed
and the stages to run. Stages execute in dependency order:

    system -> bundle -> regularity
    system -> thresholds
    system -> resonances

Every stage writes its reports below <output root>/<name>/ and registers
them in manifest.json with their sha256. Nothing written by a stage carries
a timestamp, so re-running a config with the same seed reproduces the
manifest hashes.
"""

import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

try:
    from .artifact_io import load_yaml, read_json, sha256_file, write_bundle, write_csv, write_json
    from .bundle import cross_validate, compute_unstable_bundle, default_frames, invariance_residual
    from .common import (
        DEFAULT_SEED, EXIT_ERROR, EXIT_SUCCESS, SCHEMA_VERSION, is_power_of_two, make_rng,
        resolve_output_root, spawn_rng,
    )
    from .dynamics import SystemKind, build_frames, lyapunov_rates, system_from_manifest
    from .error_manager import ConfigurationError, StageTimeoutError, ToolboxError
    from .microlocal_diag import (
        LOCATIONS, bunching_margin, cone_decay_contrast, cone_energy, dual_directions,
        rigidity_thresholds, threshold_sign_report, threshold_sweep, wavefront_test,
    )
    from .resonances import (
        build_escape_weight, compute_resonances, s1_and_delta, synthesize_potential, weighted_generator,
    )
    from .spectral_core import constant_field, estimate_regularity
except ImportError:
    from artifact_io import load_yaml, read_json, sha256_file, write_bundle, write_csv, write_json
    from bundle import cross_validate, compute_unstable_bundle, default_frames, invariance_residual
    from common import (
        DEFAULT_SEED, EXIT_ERROR, EXIT_SUCCESS, SCHEMA_VERSION, is_power_of_two, make_rng,
        resolve_output_root, spawn_rng,
    )
    from dynamics import SystemKind, build_frames, lyapunov_rates, system_from_manifest
    from error_manager import ConfigurationError, StageTimeoutError, ToolboxError
    from microlocal_diag import (
        LOCATIONS, bunching_margin, cone_decay_contrast, cone_energy, dual_directions,
        rigidity_thresholds, threshold_sign_report, threshold_sweep, wavefront_test,
    )
    from resonances import (
        build_escape_weight, compute_resonances, s1_and_delta, synthesize_potential, weighted_generator,
    )
    from spectral_core import constant_field, estimate_regularity


STAGE_ORDER = ("system", "bundle", "regularity", "thresholds", "resonances")
STAGE_DEPENDENCIES = {
    "system": (),
    "bundle": ("system",),
    "regularity": ("bundle",),
    "thresholds": ("system",),
    "resonances": ("system",),
}
STAGE_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "system": {"check_cone": True, "rates_T": 64.0, "samples": 256},
    "bundle": {"tol": 1e-10, "max_iter": 200, "riccati_check": True, "riccati_dt": 0.02,
               "frames": "axes", "eps_frames": 0.05},
    "regularity": {"scale": "holder", "band_range": None, "apertures": [15.0, 10.0, 20.0],
                   "wavefront_s": 1.0},
    "thresholds": {"s_values": [1.9, 2.1], "T": 64.0, "samples": 256, "sweep": [1.5, 2.5, 21],
                   "location": "sink_Eu_star"},
    "resonances": {"weight": [-1.0, 1.0], "aperture": 15.0, "trunc": 32, "potential": {"kind": "zero"},
                   "r": 2.0, "backend": "map", "ell_max": 0, "strip_re_min": None, "T": 64.0,
                   "samples": 256, "average_T": None},
}
TOP_LEVEL_KEYS = {"schema_version", "name", "seed", "grid", "jobs", "system", "stages", "output"}
SYSTEM_KEYS = {"matrix", "roof", "perturbation_file", "r_pert", "synth"}
SYNTH_KEYS = {"kind", "modes", "amplitude", "r_pert", "seed", "mode"}
POTENTIAL_KEYS = {"kind", "value", "r_v", "amplitude"}
OUTPUT_KEYS = {"root"}


@dataclass
class ExperimentConfig:
    """A validated experiment; params() merges each stage with its defaults."""
    name: str
    seed: int
    grid: int
    system: Dict[str, Any]
    stages: Dict[str, Dict[str, Any]]
    jobs: int = 1
    output_root: Optional[str] = None
    schema_version: int = SCHEMA_VERSION

    def planned_stages(self) -> List[str]:
        """Requested stages plus their dependencies, in execution order."""
        wanted = set()

        def add(stage: str) -> None:
            wanted.add(stage)
            for dep in STAGE_DEPENDENCIES[stage]:
                add(dep)

        for stage in self.stages:
            add(stage)
        return [s for s in STAGE_ORDER if s in wanted]

    def params(self, stage: str) -> Dict[str, Any]:
        merged = dict(STAGE_DEFAULTS[stage])
        merged.update(self.stages.get(stage) or {})
        return merged


def _reject_unknown(given: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(given) - allowed)
    if unknown:
        paths = [f"{where}.{k}" if where else k for k in unknown]
        raise ConfigurationError(f"unknown key '{paths[0]}'", keys=paths)


def validate_config(raw: Any) -> ExperimentConfig:
    """Check a parsed config against schema version 1; unknown keys are errors."""
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a mapping")
    _reject_unknown(raw, TOP_LEVEL_KEYS, "")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigurationError(
            f"schema_version must be {SCHEMA_VERSION}, got {raw.get('schema_version')!r}"
        )
    grid = raw.get("grid", 64)
    if not is_power_of_two(grid):
        raise ConfigurationError(f"grid must be a power of two, got {grid!r}")
    jobs = raw.get("jobs", 1)
    if not isinstance(jobs, int) or jobs < 1:
        raise ConfigurationError(f"jobs must be a positive integer, got {jobs!r}")
    seed = raw.get("seed", DEFAULT_SEED)
    if not isinstance(seed, int):
        raise ConfigurationError(f"seed must be an integer, got {seed!r}")

    system = raw.get("system")
    if not isinstance(system, dict):
        raise ConfigurationError("config needs a 'system' mapping")
    _reject_unknown(system, SYSTEM_KEYS, "system")
    if isinstance(system.get("synth"), dict):
        _reject_unknown(system["synth"], SYNTH_KEYS, "system.synth")

    stages_raw = raw.get("stages") or {}
    if not isinstance(stages_raw, dict):
        raise ConfigurationError("'stages' must map stage names to parameters")
    _reject_unknown(stages_raw, set(STAGE_ORDER), "stages")
    stages = {}
    for name, params in stages_raw.items():
        params = params or {}
        if not isinstance(params, dict):
            raise ConfigurationError(f"parameters of stage '{name}' must be a mapping")
        _reject_unknown(params, set(STAGE_DEFAULTS[name]), f"stages.{name}")
        if name == "resonances" and isinstance(params.get("potential"), dict):
            _reject_unknown(params["potential"], POTENTIAL_KEYS, "stages.resonances.potential")
        stages[name] = dict(params)

    output = raw.get("output") or {}
    _reject_unknown(output, OUTPUT_KEYS, "output")
    return ExperimentConfig(
        name=str(raw.get("name", "experiment")),
        seed=seed,
        grid=int(grid),
        system=dict(system),
        stages=stages,
        jobs=jobs,
        output_root=output.get("root"),
    )


def load_config(path: str) -> ExperimentConfig:
    return validate_config(load_yaml(path))


def apply_overrides(cfg: ExperimentConfig, grid: Optional[int] = None, tol: Optional[float] = None,
                    cone_aperture: Optional[float] = None, weight: Optional[Sequence[float]] = None,
                    trunc: Optional[int] = None, seed: Optional[int] = None, out: Optional[str] = None,
                    jobs: Optional[int] = None) -> ExperimentConfig:
    """Command-line flags take precedence over config values."""
    if grid is not None:
        if not is_power_of_two(grid):
            raise ConfigurationError(f"grid must be a power of two, got {grid}")
        cfg.grid = grid
    if seed is not None:
        cfg.seed = seed
    if out is not None:
        cfg.output_root = out
    if jobs is not None:
        cfg.jobs = jobs
    if tol is not None:
        cfg.stages.setdefault("bundle", {})["tol"] = tol
    if cone_aperture is not None:
        if "regularity" in cfg.stages:
            rest = cfg.params("regularity")["apertures"][1:]
            cfg.stages["regularity"]["apertures"] = [cone_aperture] + list(rest)
        if "resonances" in cfg.stages:
            cfg.stages["resonances"]["aperture"] = cone_aperture
    if weight is not None and "resonances" in cfg.stages:
        cfg.stages["resonances"]["weight"] = list(weight)
    if trunc is not None and "resonances" in cfg.stages:
        cfg.stages["resonances"]["trunc"] = trunc
    return cfg


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

@dataclass
class PipelineResult:
    exit_code: int
    manifest: Dict[str, Any]
    manifest_path: str
    out_dir: str
    state: Dict[str, Any] = field(default_factory=dict)


class _Run:
    """Per-run bookkeeping shared by the stage functions."""

    def __init__(self, cfg: ExperimentConfig, out_dir: str, output_manager, stats_tracker, error_manager=None):
        self.cfg = cfg
        self.out_dir = out_dir
        self.output = output_manager
        self.stats = stats_tracker
        self.errors = error_manager
        self.rng = make_rng(cfg.seed)
        self.state: Dict[str, Any] = {}
        self.files: List[Dict[str, Any]] = []
        self.stage_files: List[int] = []

    def optional(self, operation: str, stage: str, compute):
        """Run an optional diagnostic; failures are reported and give None."""
        if self.errors is None:
            try:
                return compute()
            except ToolboxError as e:
                if self.output:
                    self.output.print_warning(f"{operation} skipped: {e}")
                return None
        with self.errors.create_exception_context(operation, stage):
            return compute()
        return None

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def register(self, path: str) -> None:
        self.stage_files.append(len(self.files))
        self.files.append({"path": os.path.relpath(path, self.out_dir).replace(os.sep, "/"),
                           "status": "complete"})
        if self.stats:
            self.stats.increment_artifacts_written()
        if self.output:
            self.output.print_artifact_written(path)


def _stage_system(run: _Run, p: dict) -> str:
    sys = system_from_manifest(run.cfg.system, bool(p["check_cone"]))
    rates = lyapunov_rates(sys, float(p["rates_T"]), int(p["samples"]), spawn_rng(run.rng, "system"),
                           output_manager=run.output)
    split = sys.linear_splitting()
    run.state.update(sys=sys, rates=rates)
    report = {
        "kind": "system",
        "manifest": run.cfg.system,
        "system_kind": sys.kind.value,
        "linear": sys.is_linear,
        "linear_splitting": {"lambda_u": split.lambda_u, "lambda_s": split.lambda_s,
                             "e_u": split.e_u, "e_s": split.e_s},
        "rates": rates.to_dict(),
    }
    run.register(write_json(report, run.path("system.json")))
    return f"nu_u in [{rates.nu_u_min:.4f}, {rates.nu_u_max:.4f}], converged={rates.converged}"


def _stage_bundle(run: _Run, p: dict) -> str:
    sys, N = run.state["sys"], run.cfg.grid
    if p["frames"] == "smooth":
        frames = build_frames(sys, float(p["eps_frames"]), N, run.output)
    elif p["frames"] == "axes":
        frames = default_frames(sys, N)
    else:
        raise ConfigurationError(f"unknown frames '{p['frames']}' (expected axes or smooth)")
    section = compute_unstable_bundle(sys, float(p["tol"]), int(p["max_iter"]), N, frames, run.output)
    if run.stats:
        run.stats.add_iterations(section.iterations)
    run.state["bundle"] = section
    report = {"kind": "bundle", "section": section.to_dict(),
              "invariance_residual": invariance_residual(sys, section), "riccati_cross_check": None}
    if p["riccati_check"]:
        report["riccati_cross_check"] = run.optional(
            "riccati cross-check", "bundle", lambda: cross_validate(sys, section, dt=float(p["riccati_dt"])))
    pfld, sidecar = write_bundle(section, run.path("bundle.pfld"), run.cfg.system)
    run.register(pfld)
    run.register(sidecar)
    run.register(write_json(report, run.path("bundle_report.json")))
    return f"{section.iterations} iterations, residual {section.residual:.2e}"


def _stage_regularity(run: _Run, p: dict) -> str:
    sys, U = run.state["sys"], run.state["bundle"].values
    estimate = estimate_regularity(U, p["scale"], p["band_range"])
    eu_star, es_star = dual_directions(sys)
    apertures = [math.radians(a) for a in p["apertures"]]
    s = float(p["wavefront_s"])
    wavefront = {
        "E_u_star": wavefront_test(U, eu_star, s, apertures, p["band_range"]).to_dict(),
        "E_s_star": wavefront_test(U, es_star, s, apertures, p["band_range"]).to_dict(),
    }
    contrast = None
    if U.J >= 7:
        contrast = run.optional("cone decay contrast", "regularity",
                                lambda: cone_decay_contrast(U, eu_star, max(apertures)))
    report = {"kind": "regularity", "estimate": estimate.to_dict(), "wavefront": wavefront,
              "contrast": contrast, "cone_energy": cone_energy(U, eu_star, apertures[0], run.output).to_dict()}
    run.register(write_json(report, run.path("regularity.json")))
    return f"{p['scale']} exponent {estimate.exponent:.3f}, E_u* status {wavefront['E_u_star']['status']}"


def _stage_thresholds(run: _Run, p: dict) -> str:
    sys, rates = run.state["sys"], run.state["rates"]
    location = p["location"]
    if location not in LOCATIONS:
        raise ConfigurationError(f"unknown location '{location}'")
    dim = 3 if sys.kind == SystemKind.SUSPENSION else "general"
    thresholds = rigidity_thresholds(rates, dim, sys.volume_preserving)
    T, samples = float(p["T"]), int(p["samples"])
    reports = [threshold_sign_report(sys, float(s), T, location, samples, spawn_rng(run.rng, "thresholds"),
                                     run.output).to_dict()
               for s in p["s_values"]]
    lo, hi, count = p["sweep"]
    sweep = threshold_sweep(sys, np.linspace(float(lo), float(hi), int(count)), T, location, samples,
                            spawn_rng(run.rng, "thresholds"))
    report = {
        "kind": "thresholds",
        "thresholds": thresholds.to_dict(),
        "location": location,
        "reports": reports,
        "sweep": [[s, m] for s, m in sweep],
        "bunching": [[float(s), bunching_margin(rates, float(s), T)] for s in p["s_values"]],
    }
    run.register(write_json(report, run.path("thresholds.json")))
    return f"rigidity threshold {thresholds.rigidity_threshold:.3f}"


def _potential(spec: dict, N: int, rng: np.random.Generator):
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return None
    if kind == "constant":
        return constant_field(float(spec.get("value", 0.0)), N, 2)
    if kind == "rough":
        return synthesize_potential(N, float(spec.get("r_v", 1.5)), float(spec.get("amplitude", 0.1)), rng)
    raise ConfigurationError(f"unknown potential kind '{kind}'")


def _stage_resonances(run: _Run, p: dict) -> str:
    sys, rates = run.state["sys"], run.state["rates"]
    u, s = (float(v) for v in p["weight"])
    average_T = None if p["average_T"] is None else int(p["average_T"])
    weight = build_escape_weight(sys, u, s, math.radians(float(p["aperture"])), run.output, average_T,
                                 spawn_rng(run.rng, "weight"))
    V = _potential(p["potential"] or {}, run.cfg.grid, spawn_rng(run.rng, "potential"))
    matrix = weighted_generator(sys, V, weight, int(p["trunc"]), p["backend"], run.cfg.jobs)
    strip = s1_and_delta(sys, V, float(p["r"]), weight, rates, float(p["T"]), int(p["samples"]),
                         spawn_rng(run.rng, "resonances"))
    strip_re_min = p["strip_re_min"]
    if strip_re_min is None:
        strip_re_min = strip.s1 - strip.delta
    report = compute_resonances(matrix, float(strip_re_min), int(p["ell_max"]))
    report.s1, report.delta = strip.s1, strip.delta
    if run.stats:
        run.stats.add_eigenpairs(len(report.eigenvalues))
    payload = {"kind": "resonances", **report.to_dict(), "strip_estimate": strip._asdict(),
               "backend": p["backend"]}
    run.register(write_json(payload, run.path("resonances.json")))
    return f"{len(report.eigenvalues)} resonances above {float(strip_re_min):+.4f}"


STAGE_FUNCTIONS = {
    "system": _stage_system,
    "bundle": _stage_bundle,
    "regularity": _stage_regularity,
    "thresholds": _stage_thresholds,
    "resonances": _stage_resonances,
}


def run_pipeline(cfg: ExperimentConfig, output_manager=None, stats_tracker=None, error_manager=None,
                 timeout_manager=None) -> PipelineResult:
    """
    Execute the planned stages in order and write manifest.json.

    A failing stage halts the run: its structured error goes into the
    manifest, files it already wrote are marked partial, and the remaining
    stages are listed as skipped. A spent time budget skips the rest.
    """
    out_dir = os.path.join(resolve_output_root(cfg.output_root), cfg.name)
    os.makedirs(out_dir, exist_ok=True)
    run = _Run(cfg, out_dir, output_manager, stats_tracker, error_manager)
    planned = cfg.planned_stages()
    statuses: Dict[str, Any] = {}
    exit_code = EXIT_SUCCESS
    for index, stage in enumerate(planned):
        run.stage_files = []
        try:
            if timeout_manager:
                timeout_manager.check_before_stage(stage)
            if output_manager:
                output_manager.print_stage_start(stage, (index + 1, len(planned)))
            summary = STAGE_FUNCTIONS[stage](run, cfg.params(stage))
            statuses[stage] = {"status": "complete", "summary": summary}
            if stats_tracker:
                stats_tracker.increment_stages_run()
            if output_manager:
                output_manager.print_stage_complete(stage, summary)
        except ToolboxError as e:
            timed_out = isinstance(e, StageTimeoutError)
            statuses[stage] = {"status": "skipped" if timed_out else "failed", "error": e.to_dict()}
            for i in run.stage_files:
                run.files[i]["status"] = "partial"
            if error_manager:
                info = error_manager.handle_exception(e, context=f"stage {stage}", stage=stage)
                error_manager.log_stage_failures(stage, [info], f"Run '{cfg.name}' halted at stage '{stage}'")
            elif output_manager:
                output_manager.print_error(stage, e)
            if stats_tracker and not timed_out:
                stats_tracker.increment_stages_failed()
            for rest in planned[index + 1:]:
                statuses[rest] = {"status": "skipped"}
            exit_code = EXIT_ERROR
            break

    for entry in run.files:
        full = run.path(entry["path"])
        entry["sha256"] = sha256_file(full)
        entry["bytes"] = os.path.getsize(full)
    manifest = {
        "name": cfg.name,
        "seed": cfg.seed,
        "grid": cfg.grid,
        "schema_version": cfg.schema_version,
        "status": "complete" if exit_code == EXIT_SUCCESS else "partial",
        "stages": statuses,
        "files": sorted(run.files, key=lambda f: f["path"]),
    }
    manifest_path = write_json(manifest, run.path("manifest.json"))
    return PipelineResult(exit_code, manifest, manifest_path, out_dir, run.state)


# ---------------------------------------------------------------------------
# Plot data
# ---------------------------------------------------------------------------

def _plot_tables(report: dict) -> List[tuple]:
    """(suffix, header, rows) tables for one report."""
    kind = report.get("kind")
    if kind == "regularity":
        est = report["estimate"]
        tables = [("fit", ("j", "log2_norm"), list(zip(est["bands"], est["log2_norms"])))]
        bands = report.get("cone_energy", {}).get("per_band", [])
        tables.append(("cone_energy", ("j", "inside", "outside"), [tuple(r) for r in bands]))
        return tables
    if kind == "resonances":
        return [("scatter", ("re", "im", "residual"), [tuple(e) for e in report["eigenvalues"]])]
    if kind == "thresholds":
        return [("margins", ("s", "margin"), [tuple(r) for r in report["sweep"]])]
    if kind == "bundle":
        history = report["section"]["history"]
        return [("history", ("iteration", "sup_change"), list(enumerate(history, start=1)))]
    raise ConfigurationError(f"no plot data for report kind '{kind}'")


def emit_plot_data(report_paths: Sequence[str], out_dir: str, output_manager=None) -> tuple:
    """
    Write CSV tables for each report; missing or unreadable reports are
    listed and skipped. Returns (written paths, skipped paths).
    """
    written, skipped = [], []
    for path in report_paths:
        try:
            report = read_json(path)
            stem = os.path.splitext(os.path.basename(path))[0]
            for suffix, header, rows in _plot_tables(report):
                written.append(write_csv(os.path.join(out_dir, f"{stem}_{suffix}.csv"), header, rows))
        except (ToolboxError, KeyError, TypeError) as e:
            skipped.append(path)
            if output_manager:
                output_manager.print_warning(f"skipping {path}: {e}")
    return written, skipped
