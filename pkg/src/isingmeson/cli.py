"""Command-line runner: ``isingmeson {run,compare,compress,mitigate,spectrum}``.

Configs are YAML mappings.  Exit codes: 0 success, 2 usage or config error,
3 unreadable or incompatible inputs, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .circuit import dumps_circuit, run_trotter_series, trotter_first_order, trotter_second_order
from .compress import (LayerSchedule, OptimizeOptions, default_schedule, optimize, run_compressed_series,
                       target_operator, trotter_brickwall)
from .exact import run_exact_series
from .model import ModelSpec, as_pattern
from .noise import (EPS_DEN, MitigationPair, NoiseModel, interleaved_plan, mitigate, native_circuit,
                    reference_circuit, run_noisy_series)
from .series import TimeSeries, n_steps
from .spectral import PeakReport, Deviation, Peak, comparison_table, find_peaks, fourier, assign_e8

log = logging.getLogger("isingmeson")

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3, 4
BACKENDS = ("exact", "trotter", "compressed")
DEFAULT_SHOTS = 8192

# E8 column values (units of m1) for side-by-side comparison
PUBLISHED_REFERENCE = {
    "ED": {"m2-m1": 0.5, "m1": 1.0, "m2": 1.6, "m1+m2": 2.6},
    "Trotter (device)": {"m2-m1": 0.6, "m1": 1.1, "m2": 1.7, "m1+m2": 2.5},
    "Riemannian (device)": {"m2-m1": 0.5, "m1": 1.0, "m2": 1.6, "m1+m2": 2.6},
}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists ``(field, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{k}: {m}" for k, m in self.errors))


class InputError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    L: int = 8
    h_x: float = 1.0
    h_z: float = 3.0
    initial: str = "UUDDDDUU"
    dt: float = 0.1
    t_max: float = 10.0
    t_cut: float | None = None
    backend: str = "trotter"
    order: int = 1
    shots: int | None = None
    noise: dict | None = None
    noise_method: str = "auto"
    trajectories: int = 256
    schedule: list | None = None
    compress_mode: str = "dense"
    max_iters: int = 100
    grad_tol: float = 1e-8
    mitigation: bool = False
    eps_den: float = EPS_DEN
    min_prominence: float = 0.02
    hint_m1: float | None = None
    rel_tol: float = 0.15
    seed: int = 0
    output_dir: str = "out"

    @classmethod
    def from_mapping(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw or {})
        model = raw.pop("model", None)
        if isinstance(model, dict):
            for k, v in model.items():
                raw.setdefault(k, v)
        elif model is not None:
            raise ConfigError([("model", "must be a mapping with L, h_x, h_z")])
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - names)
        if unknown:
            raise ConfigError([(k, "unknown field") for k in unknown])
        return cls(**raw)

    def resolved(self) -> "ExperimentConfig":
        """Validate and fill defaults; raises :class:`ConfigError`."""
        errs: list[tuple[str, str]] = []
        c = ExperimentConfig(**asdict(self))

        def check(cond, key, msg):
            if not cond:
                errs.append((key, msg))
            return cond

        for key in ("L", "order", "seed", "trajectories", "max_iters"):
            v = getattr(c, key)
            check(isinstance(v, int) and not isinstance(v, bool), key, "must be an integer")
        for key in ("h_x", "h_z", "dt", "t_max", "eps_den", "min_prominence", "rel_tol", "grad_tol"):
            v = getattr(c, key)
            if isinstance(v, str):
                # YAML 1.1 reads exponent literals such as 1e-8 as strings
                try:
                    v = float(v)
                except ValueError:
                    pass
            if check(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v),
                     key, "must be a finite number"):
                setattr(c, key, float(v))
        if errs:
            raise ConfigError(errs)
        check(c.L >= 2, "L", "must be >= 2")
        try:
            pat = as_pattern(c.initial)
            check(len(pat) == c.L, "initial", f"has {len(pat)} sites but L={c.L}")
        except (ValueError, TypeError) as exc:
            errs.append(("initial", str(exc)))
        check(c.dt > 0, "dt", "must be positive")
        check(c.t_max > 0, "t_max", "must be positive")
        if c.dt > 0 and c.t_max > 0:
            try:
                n_steps(c.dt, c.t_max)
            except ValueError as exc:
                errs.append(("t_max", str(exc)))
        if c.t_cut is None:
            c.t_cut = c.t_max
        else:
            c.t_cut = float(c.t_cut)
            check(0 < c.t_cut <= c.t_max + 1e-12, "t_cut", "must satisfy 0 < t_cut <= t_max")
        check(c.backend in BACKENDS, "backend", f"must be one of {', '.join(BACKENDS)}")
        check(c.order in (1, 2), "order", "must be 1 or 2")
        if c.backend == "exact":
            check(c.shots is None, "shots", "shot sampling applies to circuit backends only")
            check(not c.noise, "noise", "the exact backend is noiseless")
            check(not c.mitigation, "mitigation", "requires a circuit backend")
        elif c.shots is None:
            c.shots = DEFAULT_SHOTS
        if c.shots is not None:
            if check(isinstance(c.shots, int) and not isinstance(c.shots, bool), "shots",
                     "must be an integer"):
                check(c.shots >= 0, "shots", "must be >= 0 (0 means exact expectation values)")
        if c.noise is not None:
            try:
                NoiseModel(**c.noise)
            except (TypeError, ValueError) as exc:
                errs.append(("noise", str(exc)))
        check(c.noise_method in ("auto", "density", "trajectories"), "noise_method",
              "must be auto, density or trajectories")
        if c.noise and c.noise_method == "density":
            check(c.L <= 10, "noise_method", "density-matrix mode needs L <= 10")
        if c.schedule is not None:
            check(c.backend == "compressed", "schedule", "only used by the compressed backend")
            try:
                sched = LayerSchedule(tuple(tuple(bp) for bp in c.schedule))
                check(sched.covers(c.t_max), "schedule", "does not cover [0, t_max]")
                c.schedule = [list(bp) for bp in sched.breakpoints]
            except (TypeError, ValueError) as exc:
                errs.append(("schedule", str(exc)))
        elif c.backend == "compressed":
            c.schedule = [list(bp) for bp in default_schedule(c.t_max).breakpoints]
        check(c.compress_mode in ("dense", "mpo"), "compress_mode", "must be dense or mpo")
        check(c.eps_den > 0, "eps_den", "must be positive")
        check(c.min_prominence >= 0, "min_prominence", "must be >= 0")
        if c.hint_m1 is not None:
            check(isinstance(c.hint_m1, (int, float)) and c.hint_m1 > 0, "hint_m1", "must be positive")
        check(c.trajectories >= 1, "trajectories", "must be >= 1")
        if errs:
            raise ConfigError(errs)
        return c


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def _load_yaml(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh) if str(path).endswith(".json") else yaml.safe_load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError([("config", f"not valid YAML: {exc}")]) from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError([("config", "top level must be a mapping")])
    return data


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _shots(c: ExperimentConfig) -> int | None:
    return c.shots if c.shots else None


def _step(spec: ModelSpec, c: ExperimentConfig):
    return trotter_first_order(spec, c.dt) if c.order == 1 else trotter_second_order(spec, c.dt)


def _simulate(c: ExperimentConfig):
    """Return ``(raw, reference or None, extras)``."""
    spec = ModelSpec(c.L, c.h_x, c.h_z)
    shots = _shots(c)
    noise = NoiseModel(**(c.noise or {}))
    extras: dict = {}
    circuit_path = c.mitigation or not noise.is_noiseless
    if c.backend == "exact":
        return run_exact_series(spec, c.initial, c.dt, c.t_max), None, extras
    if c.backend == "trotter":
        if not circuit_path:
            return run_trotter_series(spec, c.initial, c.dt, c.t_max, shots, c.seed, c.order), None, extras
        step = _step(spec, c)
        raw = run_noisy_series(step, c.initial, c.dt, c.t_max, noise, shots, c.seed,
                               c.noise_method, c.trajectories, label="trotter")
        raw.meta["order"] = c.order
        ref = None
        if c.mitigation:
            ref_step = reference_circuit(step)
            ref = run_noisy_series(ref_step, c.initial, c.dt, c.t_max, noise, shots, c.seed,
                                   c.noise_method, c.trajectories, label="trotter-reference", stream=1)
            k_max = n_steps(c.dt, c.t_max)
            extras["plan"] = interleaved_plan([step.repeat(k) for k in range(k_max + 1)],
                                              [ref_step.repeat(k) for k in range(k_max + 1)])
        return raw, ref, extras
    opts = OptimizeOptions(max_iters=c.max_iters, grad_tol=c.grad_tol, seed=c.seed)
    sched = LayerSchedule(tuple(tuple(bp) for bp in c.schedule))
    comp = run_compressed_series(spec, c.initial, sched, c.dt, c.t_max,
                                 None if circuit_path else shots, c.seed, opts, c.compress_mode,
                                 keep_circuits=circuit_path)
    extras["costs"] = comp
    if not circuit_path:
        return comp, None, extras
    natives = [native_circuit(w) for w in comp.meta.pop("circuits")]
    raw = run_noisy_series(lambda k: natives[k], c.initial, c.dt, c.t_max, noise, shots, c.seed,
                           c.noise_method, c.trajectories, label="compressed")
    ref = None
    if c.mitigation:
        refs = [reference_circuit(n) for n in natives]
        ref = run_noisy_series(lambda k: refs[k], c.initial, c.dt, c.t_max, noise, shots, c.seed,
                               c.noise_method, c.trajectories, label="compressed-reference", stream=1)
        extras["plan"] = interleaved_plan(natives, refs)
    return raw, ref, extras


def _write_costs(path: Path, comp: TimeSeries) -> None:
    lines = ["t,n_layers,cost,status"]
    for t, n, cst, st in zip(comp.times, comp.meta["layers"], comp.meta["costs"], comp.meta["status"]):
        lines.append(f"{t!r},{n},{float(cst)!r},{st}")
    path.write_text("\n".join(lines) + "\n")


def _report_md(c: ExperimentConfig, report: PeakReport | None, spectrum, series: TimeSeries,
               notes: list[str]) -> str:
    out = [f"# {c.backend} run: L={c.L}, h_x={c.h_x:g}, h_z={c.h_z:g}, initial {c.initial}", ""]
    out.append(f"- dt = {c.dt:g}, t_max = {c.t_max:g}, t_cut = {spectrum.window['t_cut']:g}")
    out.append(f"- d_omega = {spectrum.d_omega:.6g} rad per unit time")
    out.append(f"- shots = {_shots(c) or 'exact'}, seed = {c.seed}")
    out.extend(f"- {n}" for n in notes)
    out.append("")
    if report is None:
        out.append("No peaks matched any E8 entry.")
    else:
        out.append(f"m1 = {report.m1:.6g} rad per unit time; match tolerance {report.tolerance:.4g}")
        out.append("")
        out.append(report.to_markdown(c.backend))
        out.append("## Peaks")
        out.append("")
        out.append("| omega | omega / m1 | magnitude | label |")
        out.append("|---|---|---|---|")
        for p in report.peaks:
            out.append(f"| {p.omega:.4f} | {p.omega / report.m1:.3f} | {p.magnitude:.4g} | {p.label or ''} |")
    return "\n".join(out) + "\n"


def _analyse(series: TimeSeries, t_cut: float, min_prominence: float, hint_m1, rel_tol: float):
    spec = fourier(series, t_cut)
    peaks = find_peaks(spec, min_prominence)
    report = None
    if peaks:
        try:
            report = assign_e8(peaks, spec.d_omega, hint_m1=hint_m1, rel_tol=rel_tol)
        except ValueError as exc:
            log.warning("%s", exc)
    return spec, peaks, report


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_run(args) -> int:
    raw = _load_yaml(args.config) if args.config else {}
    if raw.get("tool") == "isingmeson" and "config" in raw:
        # a manifest from an earlier run: replay its resolved config
        raw = raw["config"]
    cfg = ExperimentConfig.from_mapping(raw)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.backend is not None:
        cfg.backend = args.backend
    if args.t_cut is not None:
        cfg.t_cut = args.t_cut
    if args.out is not None:
        cfg.output_dir = args.out
    cfg = cfg.resolved()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    series, ref, extras = _simulate(cfg)
    files: list[str] = []
    notes: list[str] = []
    series.to_csv(out / "series.csv")
    files.append("series.csv")
    analysed = series
    if ref is not None:
        ref.to_csv(out / "series_ref.csv")
        mit = mitigate(series, ref, cfg.eps_den)
        mit.to_csv(out / "series_mitigated.csv")
        MitigationPair(series, ref, mit).to_csv(out / "mitigation.csv")
        files += ["series_ref.csv", "series_mitigated.csv", "mitigation.csv"]
        analysed = mit
        notes.append(f"mitigated with eps_den = {cfg.eps_den:g}; "
                     f"{mit.meta['n_invalid']} point(s) flagged invalid")
    if "plan" in extras:
        (out / "jobs.txt").write_text(extras["plan"].to_manifest())
        files.append("jobs.txt")
        if extras["plan"].boundaries:
            ks = ", ".join(f"t={k * cfg.dt:g}" for k in extras["plan"].boundaries)
            notes.append(f"job chunk boundaries at {ks}")
    if "costs" in extras:
        _write_costs(out / "compress_costs.csv", extras["costs"])
        files.append("compress_costs.csv")
        warn = extras["costs"].meta["warnings"]
        if warn:
            notes.append(f"line search stalled at time index(es) {warn}")

    spectrum, peaks, report = _analyse(analysed, cfg.t_cut, cfg.min_prominence, cfg.hint_m1, cfg.rel_tol)
    spectrum.to_csv(out / "spectrum.csv")
    files.append("spectrum.csv")
    rep = {"backend": cfg.backend, "L": cfg.L, "initial": cfg.initial, "t_cut": spectrum.window["t_cut"],
           "d_omega": spectrum.d_omega, "window": spectrum.window,
           "report": None if report is None else report.as_dict(),
           "peaks_unlabelled": [p.as_dict() for p in peaks] if report is None else None}
    _write_json(out / "report.json", rep)
    (out / "report.md").write_text(_report_md(cfg, report, spectrum, analysed, notes))
    files += ["report.json", "report.md"]

    manifest = {
        "tool": "isingmeson",
        "version": __version__,
        "command": "run",
        "config": asdict(cfg),
        "seeds": {"master": cfg.seed, "shots": "SeedSequence([seed, k]) per time point k",
                  "reference_shots": "SeedSequence([seed, k, 1]) per time point k"},
        "outputs": {f: _sha256(out / f) for f in files},
    }
    _write_json(out / "manifest.json", manifest)
    print(f"wrote {len(files) + 1} files to {out}")
    return EXIT_OK


def _load_report(run_dir: Path) -> tuple[str, PeakReport]:
    path = run_dir / "report.json"
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    r = data.get("report")
    if r is None:
        raise InputError(f"{path}: run has no labelled peaks")
    peaks = [Peak(p["omega"], p["magnitude"], p["prominence"], p["label"], tuple(p["sources"]))
             for p in r["peaks"]]
    devs = [Deviation(d["label"], d["measured"], d["predicted"], d["deviation"]) for d in r["deviations"]]
    return data.get("backend", run_dir.name), PeakReport(peaks, r["m1"], r["d_omega"], r["tolerance"], devs)


def compare_runs(run_dirs, reference: str = "ed") -> tuple[str, dict]:
    if not run_dirs:
        raise ConfigError([("runs", "need at least one run directory")])
    reports: dict[str, PeakReport] = {}
    for d in run_dirs:
        name, rep = _load_report(Path(d))
        key = name if name not in reports else f"{name} ({Path(d).name})"
        reports[key] = rep
    d0 = next(iter(reports.values())).d_omega
    for name, r in reports.items():
        if not math.isclose(r.d_omega, d0, rel_tol=1e-12):
            raise InputError(f"incompatible resolutions: {name} has d_omega={r.d_omega}, expected {d0}")
    table = {}
    md = [comparison_table(reports)]
    if reference == "ed":
        ref_name = next((n for n in reports if n.startswith("exact")), next(iter(reports)))
        ref = reports[ref_name]
        md.append(f"\nDifferences against `{ref_name}` (rad per unit time; bins of d_omega = {d0:.6g}):\n")
        md.append("| Label | " + " | ".join(reports) + " |")
        md.append("|---|" + "---|" * len(reports))
        for lab in [d.label for d in ref.deviations]:
            m_ref = next(d.measured for d in ref.deviations if d.label == lab)
            row, table[lab] = [lab], {}
            for n, r in reports.items():
                m = next(d.measured for d in r.deviations if d.label == lab)
                diff = None if (m is None or m_ref is None) else m - m_ref
                table[lab][n] = diff
                row.append("n/a" if diff is None else f"{diff:+.4f} ({diff / d0:+.2f} bins)")
            md.append("| " + " | ".join(row) + " |")
    elif reference == "published":
        md.append("\nPublished column values (units of m1) for reference:\n")
        cols = list(PUBLISHED_REFERENCE)
        md.append("| Label | " + " | ".join(cols) + " | " + " | ".join(reports) + " |")
        md.append("|---|" + "---|" * (len(cols) + len(reports)))
        for lab in PUBLISHED_REFERENCE["ED"]:
            row, table[lab] = [lab], {}
            for col in cols:
                row.append(f"{PUBLISHED_REFERENCE[col][lab]:.1f}")
            for n, r in reports.items():
                m = next(d.measured for d in r.deviations if d.label == lab)
                val = None if m is None else m / r.m1
                table[lab][n] = None if val is None else val - PUBLISHED_REFERENCE["ED"][lab]
                row.append("n/a" if val is None else f"{val:.3f}")
            md.append("| " + " | ".join(row) + " |")
    else:
        raise ConfigError([("reference", "must be ed or published")])
    return "\n".join(md) + "\n", {"d_omega": d0, "reference": reference, "differences": table,
                                   "runs": {n: r.as_dict() for n, r in reports.items()}}


def cmd_compare(args) -> int:
    md, data = compare_runs(args.runs, args.reference)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "comparison.md").write_text(md)
        _write_json(out / "comparison.json", data)
    print(md, end="")
    return EXIT_OK


def cmd_compress(args) -> int:
    raw = _load_yaml(args.config) if args.config else {}
    cfg = ExperimentConfig.from_mapping({k: v for k, v in raw.items()
                                         if k in {f.name for f in fields(ExperimentConfig)} | {"model"}})
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.backend = "compressed"
    cfg = cfg.resolved()
    t = args.time if args.time is not None else cfg.t_max
    n_layers = args.layers or LayerSchedule(tuple(tuple(b) for b in cfg.schedule)).layers_at(t)
    spec = ModelSpec(cfg.L, cfg.h_x, cfg.h_z)
    target = target_operator(spec, t, mode=cfg.compress_mode)
    res = optimize(target, trotter_brickwall(spec, t, n_layers),
                   OptimizeOptions(max_iters=cfg.max_iters, grad_tol=cfg.grad_tol, seed=cfg.seed))
    circ = res.ansatz.to_circuit()
    if args.native:
        circ = native_circuit(circ)
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "circuit.txt").write_text(dumps_circuit(circ))
    res.trace_to_csv(out / "trace.csv")
    _write_json(out / "compress.json", {
        "L": cfg.L, "h_x": cfg.h_x, "h_z": cfg.h_z, "t": t, "n_layers": n_layers, "native": bool(args.native),
        "cost": res.cost, "status": res.status, "iterations": len(res.trace) - 1,
        "max_unitarity_error": res.max_unitarity_error,
        "outputs": {f: _sha256(out / f) for f in ("circuit.txt", "trace.csv")}})
    print(f"t={t:g} layers={n_layers} cost={res.cost:.3e} status={res.status}")
    return EXIT_OK


def _read_series(path) -> TimeSeries:
    try:
        s = TimeSeries.from_csv(path)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot read series {path}: {exc}") from exc
    return s


def cmd_mitigate(args) -> int:
    raw, ref = _read_series(args.raw), _read_series(args.ref)
    if len(raw) != len(ref) or not math.isclose(raw.dt, ref.dt, rel_tol=1e-12):
        raise InputError("raw and reference series are not aligned")
    mit = mitigate(raw, ref, args.eps_den)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    mit.to_csv(out / "series_mitigated.csv")
    MitigationPair(raw, ref, mit).to_csv(out / "mitigation.csv")
    print(f"{int(mit.valid.sum())}/{len(mit)} valid points written to {out}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    s = _read_series(args.series)
    t_cut = args.t_cut if args.t_cut is not None else s.duration
    spectrum, peaks, report = _analyse(s, t_cut, args.min_prominence, args.hint_m1, args.rel_tol)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    spectrum.to_csv(out / "spectrum.csv")
    data = {"t_cut": spectrum.window["t_cut"], "d_omega": spectrum.d_omega, "window": spectrum.window,
            "report": None if report is None else report.as_dict(),
            "peaks_unlabelled": [p.as_dict() for p in peaks] if report is None else None}
    _write_json(out / "report.json", data)
    md = [f"# Spectrum of {args.series}", "", f"- t_cut = {spectrum.window['t_cut']:g}, "
          f"d_omega = {spectrum.d_omega:.6g}", ""]
    md.append(report.to_markdown("series") if report else "No peaks matched any E8 entry.\n")
    (out / "report.md").write_text("\n".join(md))
    print(f"{len(peaks)} peak(s); m1 = {report.m1:.6g}" if report else f"{len(peaks)} peak(s); no E8 match")
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isingmeson", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate, analyse and write an artifact bundle")
    r.add_argument("--config", help="YAML experiment config, or a manifest.json to replay")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help="output directory (overrides output_dir)")
    r.add_argument("--backend", choices=BACKENDS)
    r.add_argument("--t-cut", type=float, dest="t_cut")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="side-by-side peak table of finished runs")
    c.add_argument("runs", nargs="*", help="run directories containing report.json")
    c.add_argument("--reference", choices=("ed", "published"), default="ed")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)

    k = sub.add_parser("compress", help="optimize one brickwall circuit and write it to a file")
    k.add_argument("--config")
    k.add_argument("--seed", type=int)
    k.add_argument("--out")
    k.add_argument("--time", type=float, help="evolution time (default t_max)")
    k.add_argument("--layers", type=int, help="brickwall depth (default from the schedule)")
    k.add_argument("--native", action="store_true", help="emit RX/RZ/RZZ instead of dense gates")
    k.set_defaults(func=cmd_compress)

    m = sub.add_parser("mitigate", help="divide a raw series by its reference series")
    m.add_argument("raw")
    m.add_argument("ref")
    m.add_argument("--eps-den", type=float, default=EPS_DEN, dest="eps_den")
    m.add_argument("--out")
    m.set_defaults(func=cmd_mitigate)

    s = sub.add_parser("spectrum", help="Fourier spectrum and E8 report of a series CSV")
    s.add_argument("series")
    s.add_argument("--t-cut", type=float, dest="t_cut")
    s.add_argument("--out")
    s.add_argument("--hint-m1", type=float, dest="hint_m1")
    s.add_argument("--min-prominence", type=float, default=0.02, dest="min_prominence")
    s.add_argument("--rel-tol", type=float, default=0.15, dest="rel_tol")
    s.set_defaults(func=cmd_spectrum)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for key, msg in exc.errors:
            print(f"config error: {key}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
