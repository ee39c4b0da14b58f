"""Experiment presets: configuration, deterministic seeding, worker pool, and
the CSV/SVG emitting commands behind the CLI.

Determinism contract: every output file's bytes depend only on (config,
seeds). Jobs fan out over a thread pool capped by ALIGNLAB_THREADS, results
are assembled in job order, and files are written atomically
(write-then-rename), so the pool size never changes the outputs.
"""

from __future__ import annotations

import csv
import json
import math
import os
import struct
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import montecarlo, svgplot, theory
from .dynamics import run_trajectory, write_trajectory_csv
from .errors import AlignlabError, ConstructionError, ParameterError
from .montecarlo import drift_sign_test, late_phase_statistic, projected_loss_test
from .spectrum import NoiseProfile, Spectrum, build_spectrum, isotropic_noise, read_noise_json, read_spectrum_json
from .state import State, block_stats, random_init, rescale_to_alignment, state_from_json

__all__ = [
    "ExperimentConfig",
    "load_config",
    "cmd_simulate",
    "cmd_sweep_gap",
    "cmd_drift_test",
    "cmd_projected_test",
    "cmd_report",
    "VERDICT_COLUMNS",
]

DEFAULT_M_LIST = (5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 300.0, 400.0, 500.0)
DEFAULT_SEEDS = (42, 87, 568, 1101, 12138, 70425, 4008001)

VERDICT_COLUMNS = ["test", "theta", "eta", "eta_star", "predicted", "mean", "stderr", "z", "verdict"]

# stream labels for deriving independent generators from (seed, m)
_STREAM_SPECTRUM, _STREAM_INIT, _STREAM_TRAJECTORY, _STREAM_MC = range(4)


@dataclass
class ExperimentConfig:
    """Resolved experiment parameters; every CLI flag overrides one field.

    bulk_range and top_spread are conventions (the target setting specifies
    only the gap ratio); top_spread defaults low enough that the default sweep
    up to m = 500 keeps eta * lambda_1 < 2 at eta = 0.003.
    """

    d: int = 500
    k: int = 50
    m_list: tuple = DEFAULT_M_LIST
    eta: float = 0.003
    T: int = 30000
    sigma2: float = 1.0
    init_scale: float = 1.0
    seeds: tuple = DEFAULT_SEEDS
    n_mc: int = 100_000
    record_every: int = 10
    T_start: int | None = None
    output_dir: str = "out"
    bulk_range: tuple = (0.5, 1.0)
    top_spread: float = 0.2
    z_crit: float = 3.0

    def validate(self) -> None:
        if self.d < 2 or self.k < 1 or self.T < 1 or self.record_every < 1 or self.n_mc < 1:
            raise ParameterError("counts must be >= 1 (and d >= 2)")
        if not self.eta > 0 or not self.sigma2 > 0 or not self.init_scale > 0:
            raise ParameterError("eta, sigma2 and init_scale must be > 0")
        if not self.m_list or any(m <= 1 for m in self.m_list):
            raise ParameterError("m values must be > 1 and non-empty")
        if not self.seeds:
            raise ParameterError("seeds must be non-empty")

    @property
    def resolved_t_start(self) -> int:
        return self.T // 2 if self.T_start is None else self.T_start

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["m_list"] = list(self.m_list)
        doc["seeds"] = list(self.seeds)
        doc["bulk_range"] = list(self.bulk_range)
        doc["T_start"] = self.resolved_t_start
        return doc


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then the JSON config file, then explicit overrides."""
    doc = {}
    if path is not None:
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParameterError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if overrides:
        doc.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    for key in ("m_list", "seeds", "bulk_range"):
        if key in doc:
            doc[key] = tuple(doc[key])
    cfg = ExperimentConfig(**doc)
    cfg.validate()
    return cfg


def _m_token(m: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", float(m)))[0]


def _stream(seed: int, m: float, label: int, *extra: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), _m_token(m), label, *extra])


def _stream_int(seed: int, m: float, label: int, *extra: int) -> int:
    return int(_stream(seed, m, label, *extra).generate_state(1)[0])


def _atomic_write(path: Path, writer) -> None:
    tmp = path.with_name(path.name + ".part")
    writer(tmp)
    os.replace(tmp, path)


def _cell(value) -> str:
    if value is None:
        return "undef"
    if isinstance(value, float):
        if math.isnan(value):
            return "undef"
        return repr(value)
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    def writer(tmp):
        with open(tmp, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])

    _atomic_write(path, writer)


def _worker_count(n_jobs: int) -> int:
    env = os.environ.get("ALIGNLAB_THREADS", "").strip()
    if env:
        workers = max(1, int(env))
    else:
        workers = os.cpu_count() or 1
    return max(1, min(workers, n_jobs))


def _run_jobs(fn, jobs: list) -> list:
    workers = _worker_count(len(jobs))
    if workers == 1:
        return [fn(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _problem_for(config: ExperimentConfig, m: float, seed: int) -> tuple[Spectrum, NoiseProfile]:
    spec = build_spectrum(
        config.d, config.k, m, config.bulk_range, config.top_spread,
        seed=_stream(seed, m, _STREAM_SPECTRUM),
    )
    return spec, isotropic_noise(config.d, config.sigma2)


def _simulate_one(config: ExperimentConfig, m: float, seed: int) -> dict:
    spec, noise = _problem_for(config, m, seed)
    init = random_init(config.d, config.init_scale, seed=_stream(seed, m, _STREAM_INIT))
    traj = run_trajectory(
        spec, noise, init, config.eta, config.T, config.record_every,
        algo="sgd", seed=_stream(seed, m, _STREAM_TRAJECTORY),
    )
    try:
        plan = theory.csgd_plan(spec, noise, init, config.eta)
        t_star, theta_inf = plan.t_star, plan.theta_inf
    except AlignlabError:
        t_star, theta_inf = None, None
    late_mean, late_std = late_phase_statistic(traj, config.resolved_t_start)
    return {
        "m": m,
        "seed": seed,
        "traj": traj,
        "t_star": t_star,
        "theta_inf": theta_inf,
        "late_mean": late_mean,
        "late_std": late_std,
    }


def cmd_simulate(config: ExperimentConfig) -> Path:
    """One constant-step trajectory per (m, seed): trajectory CSV, a loss/
    alignment SVG pair, and a summary CSV of two-phase predictions vs the
    measured late phase. Returns the output directory."""
    config.validate()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(m, seed) for m in config.m_list for seed in config.seeds]
    results = _run_jobs(lambda job: _simulate_one(config, *job), jobs)

    for res in results:
        m, seed, traj = res["m"], res["seed"], res["traj"]
        stem = f"m{m:g}_seed{seed}"
        _atomic_write(out / f"traj_{stem}.csv", lambda tmp, tr=traj: write_trajectory_csv(tmp, tr))
        _atomic_write(
            out / f"alignment_{stem}.svg",
            lambda tmp, tr=traj, s=stem: svgplot.line_plot(
                tmp, [(tr.times, tr.thetas, "")], title=f"alignment {s}",
                xlabel="step", ylabel="alignment", xlog=True,
            ),
        )
        _atomic_write(
            out / f"loss_{stem}.svg",
            lambda tmp, tr=traj, s=stem: svgplot.line_plot(
                tmp, [(tr.times, tr.losses, "")], title=f"loss {s}",
                xlabel="step", ylabel="loss", ylog=True,
            ),
        )
    _write_csv(
        out / "summary.csv",
        ["m", "seed", "t_star", "theta_inf", "late_mean", "late_std"],
        [
            [res["m"], res["seed"], res["t_star"], res["theta_inf"], res["late_mean"], res["late_std"]]
            for res in results
        ],
    )
    return out


def cmd_sweep_gap(config: ExperimentConfig) -> Path:
    """Late-phase alignment mean/std per gap ratio, pooled across seeds, with
    the predicted late-time alignment and a reported log fit of mean vs m."""
    config.validate()
    if len(config.m_list) < 2:
        raise ParameterError("sweep needs at least two m values")
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(m, seed) for m in config.m_list for seed in config.seeds]
    results = _run_jobs(lambda job: _simulate_one(config, *job), jobs)

    t_start = config.resolved_t_start
    rows = []
    for m in config.m_list:
        per_m = [r for r in results if r["m"] == m]
        pooled = np.concatenate(
            [r["traj"].thetas[r["traj"].times >= t_start] for r in per_m]
        )
        predictions = [r["theta_inf"] for r in per_m if r["theta_inf"] is not None]
        prediction = float(np.mean(predictions)) if predictions else None
        rows.append([m, float(np.mean(pooled)), float(np.std(pooled)), prediction])

    _write_csv(out / "alignment_vs_m.csv", ["m", "mean", "std", "theta_inf_prediction"], rows)

    ms = np.array([r[0] for r in rows], dtype=float)
    means = np.array([r[1] for r in rows], dtype=float)
    if np.unique(ms).size >= 2:
        slope, intercept = np.polyfit(np.log(ms), means, 1)
        fit = slope * np.log(ms) + intercept
        ss_tot = float(np.sum((means - means.mean()) ** 2))
        r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum((means - fit) ** 2)) / ss_tot
        fit_row = [float(slope), float(intercept), r2]
    else:
        fit_row = [None, None, None]
    _write_csv(out / "alignment_vs_m_logfit.csv", ["slope", "intercept", "r2"], [fit_row])
    measured = [(ms, means, "measured")]
    if all(r[3] is not None for r in rows):
        measured.append((ms, [r[3] for r in rows], "predicted"))
    _atomic_write(
        out / "alignment_vs_m.svg",
        lambda tmp: svgplot.line_plot(
            tmp, measured, title="late-phase alignment vs gap ratio",
            xlabel="m", ylabel="alignment", xlog=True,
        ),
    )
    return out


def _parse_theta_target(token, spec: Spectrum, noise: NoiseProfile) -> tuple[str, float | None]:
    """Target forms: a float in (0,1); 'X*ggap' for a multiple of the
    low-alignment threshold; 'high' for the self-referential point
    theta = (theta_star + 1)/2 (resolved during construction)."""
    if isinstance(token, (int, float)):
        return "absolute", float(token)
    text = str(token).strip().lower()
    if text == "high":
        return "high", None
    if text.endswith("*ggap"):
        return "absolute", float(text[: -len("*ggap")]) * theory.g_gap(spec, noise)
    return "absolute", float(text)


def _state_above_theta_star(base: State, spec: Spectrum, noise: NoiseProfile) -> State:
    """Shrink the bulk block until theta = (theta_star + 1)/2 at the resulting
    state. theta(h) falls and theta_star(h) rises with the bulk scale h, so the
    gap function is strictly decreasing and bisection is safe. (Growing the
    dominant block instead cannot cross theta_star: both sides then approach 1
    at the same 1/scale^2 rate and the inequality locks.)"""

    def gap(log_h: float) -> float:
        c = base.c.copy()
        c[spec.k :] *= math.exp(log_h)
        stats = block_stats(State(c=c, t=base.t), spec, noise)
        ts = theory.theta_star(stats, spec, noise).theta_star
        return stats.theta - 0.5 * (ts + 1.0)

    lo, hi = -40.0, 40.0
    if gap(lo) <= 0 or gap(hi) >= 0:
        raise ConstructionError("no bulk rescaling reaches the high-alignment regime")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0:
            lo = mid
        else:
            hi = mid
    c = base.c.copy()
    c[spec.k :] *= math.exp(0.5 * (lo + hi))
    return State(c=c, t=base.t)


def cmd_drift_test(
    config: ExperimentConfig,
    theta_targets=("0.3*ggap", "0.9*ggap", "high"),
    eta_factors=(0.5, 2.0),
) -> tuple[Path, bool]:
    """Sign tests of the one-step drift on states constructed at the requested
    alignments, at step sizes relative to the critical one. Returns the output
    directory and whether any verdict was contradicted."""
    config.validate()
    if not theta_targets or not eta_factors:
        raise ParameterError("need at least one theta target and one eta factor")
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    m, seed = config.m_list[0], config.seeds[0]
    spec, noise = _problem_for(config, m, seed)
    base = random_init(config.d, config.init_scale, seed=_stream(seed, m, _STREAM_INIT))
    # asymptotic claim on theta itself: allow absolute slack at moderate d
    theta_slack = 0.005 if config.d >= 200 else 0.0
    eta_fallback = 2.0 * spec.gap1 / (spec.lambda_max**2 - spec.lambda_min**2)

    rows = []
    contradicted = False
    for t_idx, token in enumerate(theta_targets):
        kind, value = _parse_theta_target(token, spec, noise)
        if kind == "high":
            state = _state_above_theta_star(base, spec, noise)
        else:
            state = rescale_to_alignment(base, spec, value, which="dominant")
        dq = theory.drift_quadratic(block_stats(state, spec, noise))
        eta_star = dq.eta_star if dq.eta_star is not None and dq.eta_star > 0 else None
        eta_ref = eta_star if eta_star is not None else eta_fallback
        mc_seed = _stream_int(seed, m, _STREAM_MC, t_idx)
        for factor in eta_factors:
            eta = factor * eta_ref
            res = drift_sign_test(
                state, spec, noise, eta, config.n_mc, config.z_crit,
                seed=mc_seed, theta_abs_slack=theta_slack,
            )
            for verdict in (res.f_drift, res.theta_drift):
                rows.append([
                    verdict.quantity, res.theta, eta, res.eta_star,
                    verdict.predicted_sign, verdict.estimate.mean,
                    verdict.estimate.stderr, verdict.z, verdict.verdict,
                ])
                contradicted = contradicted or verdict.verdict == "contradicted"
    _write_csv(out / "drift_verdicts.csv", VERDICT_COLUMNS, rows)
    return out, contradicted


def cmd_projected_test(config: ExperimentConfig, n_states: int = 10) -> tuple[Path, bool]:
    """For random states, step with the midpoint of the two per-block loss
    thresholds and check that the block with the smaller threshold increases
    the loss while the other decreases it. Returns (out_dir, any_failure)."""
    config.validate()
    if n_states < 1:
        raise ParameterError("n_states must be >= 1")
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    m, seed = config.m_list[0], config.seeds[0]
    spec, noise = _problem_for(config, m, seed)

    rows = []
    failed = False
    for i in range(n_states):
        state = random_init(config.d, config.init_scale, seed=_stream(seed, m, _STREAM_INIT, i))
        stats = block_stats(state, spec, noise)
        if stats.s_d == 0.0 or stats.s_b == 0.0:
            print(f"projected-test: state {i} skipped (a block carries no energy)", file=sys.stderr)
            continue
        thresholds = {b: theory.loss_threshold(stats, b) for b in ("D", "B")}
        lo, hi = sorted(thresholds.values())
        if lo == hi:
            print(f"projected-test: state {i} skipped (equal thresholds)", file=sys.stderr)
            continue
        eta = 0.5 * (lo + hi)
        mc_seed = _stream_int(seed, m, _STREAM_MC, 1000 + i)
        for block in ("D", "B"):
            res = projected_loss_test(
                state, spec, noise, eta, block, config.n_mc, config.z_crit, seed=mc_seed
            )
            v = res.verdict
            rows.append([
                f"loss_change_{block}", res.theta, eta, res.eta_loss,
                v.predicted_sign, v.estimate.mean, v.estimate.stderr, v.z, v.verdict,
            ])
            failed = failed or v.verdict == "contradicted" or not res.target_ok
    _write_csv(out / "projected_verdicts.csv", VERDICT_COLUMNS, rows)
    return out, failed


def cmd_report(spectrum_path, noise_path, state_path, eta: float) -> dict:
    """Full closed-form report for inputs loaded from JSON files."""

    def load(path):
        with open(path) as fh:
            try:
                return json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParameterError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc

    spec = read_spectrum_json(load(spectrum_path))
    noise = read_noise_json(load(noise_path))
    state = state_from_json(load(state_path))
    return theory.theory_report(spec, noise, state, eta)
