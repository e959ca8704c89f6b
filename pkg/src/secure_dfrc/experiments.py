"""Seeded Monte-Carlo batches and their CSV/JSON artifacts."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .config import SystemConfig
from .optimizer import METHODS, RunResult, optimize
from .scenario import draw_scenario, realization_rngs
from .signal_model import (IRS_AZIMUTH_GRID_DEG, RADAR_GRID_DEG, beampattern_irs,
                           beampattern_radar)

log = logging.getLogger(__name__)

KINDS = ("converge", "sweep-omega", "beampattern", "feasible-rate", "scaling", "csi-error")

# sweep key per kind and its default values
SWEEP_KEY = {
    "converge": None,
    "sweep-omega": "omega",
    "beampattern": None,
    "feasible-rate": "gamma_th_db",
    "scaling": "n_irs",
    "csi-error": "sigma_e2_db",
}
DEFAULT_SWEEP = {
    "sweep-omega": [0.1, 0.3, 0.6, 0.8, 0.95],
    "feasible-rate": [-6.0, -2.0, 2.0, 6.0, 10.0],
    "scaling": [9, 16, 25, 36, 49, 64],
    "csi-error": ["none", -10.0, -7.0],
}
DEFAULT_REALIZATIONS = {
    "converge": 100, "sweep-omega": 100, "beampattern": 1,
    "feasible-rate": 100, "scaling": 20, "csi-error": 100,
}
# experiment-specific settings; a user-supplied config key takes precedence
KIND_OVERRIDES = {
    "beampattern": {"omega": 0.7},
    "feasible-rate": {"n_irs": 25},
    "csi-error": {"omega": 0.2, "rician_db": 0.0},
}

# fixed column order per kind
COLUMNS = {
    "converge": ["iteration", "method", "mean", "variance", "count"],
    "sweep-omega": ["omega", "method", "mean", "variance", "count", "mean_r_u", "mean_r_te"],
    "feasible-rate": ["gamma_th_db", "method", "mean", "variance", "count", "feasible_fraction",
                      "feasible_fraction_surrogate", "feasible_fraction_both", "updates"],
    "scaling": ["n_irs", "method", "mean", "variance", "count", "mean_gamma_r_db", "mean_runtime_s"],
    "csi-error": ["sigma_e2_db", "iteration", "method", "mean", "variance", "count"],
    "beampattern": ["pattern", "angle_deg", "gain_db"],
}


class ExperimentError(RuntimeError):
    """Raised when an experiment cannot produce any result."""


@dataclass
class ExperimentSpec:
    kind: str
    base_config: SystemConfig = field(default_factory=SystemConfig)
    sweep: list | None = None
    realizations: int | None = None
    methods: tuple[str, ...] = ("qtmm",)
    out_dir: Path | None = None
    base_seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.realizations is None:
            self.realizations = DEFAULT_REALIZATIONS[self.kind]
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if SWEEP_KEY[self.kind] is not None:
            if self.sweep is None:
                self.sweep = list(DEFAULT_SWEEP[self.kind])
            if len(self.sweep) == 0:
                raise ValueError(f"sweep list for {self.kind} is empty")
        self.methods = tuple(self.methods)
        bad = set(self.methods) - set(METHODS)
        if bad or not self.methods:
            raise ValueError(f"methods must be a nonempty subset of {METHODS}")


# --------------------------------------------------------------------------- rows


@dataclass
class AggregateRow:
    key: dict[str, Any]
    method: str
    mean: float
    variance: float
    count: int
    extras: dict[str, Any] = field(default_factory=dict)

    def as_record(self) -> dict[str, Any]:
        return {**self.key, "method": self.method, "mean": self.mean, "variance": self.variance,
                "count": self.count, **self.extras}


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.9g}"
    return str(value)


def emit_csv(rows: list, path: str | Path, columns: list[str]) -> Path:
    """Write rows (AggregateRow or plain dicts) with a fixed header, 9 significant digits."""
    path = Path(path)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        rec = row.as_record() if isinstance(row, AggregateRow) else row
        missing = [c for c in columns if c not in rec]
        if missing:
            raise ValueError(f"row lacks columns {missing}")
        writer.writerow([_fmt(rec[c]) for c in columns])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# --------------------------------------------------------------------------- runs


def _mean_var(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return float("nan"), float("nan")
    return float(arr.mean()), float(arr.var())


def config_for(spec: ExperimentSpec, value) -> SystemConfig:
    key = SWEEP_KEY[spec.kind]
    if key is None:
        return spec.base_config
    if key == "gamma_th_db":
        return spec.base_config.replace(gamma_r_th_db=float(value))
    if key == "sigma_e2_db":
        return spec.base_config.replace(sigma_e2_db=value)
    if key == "n_irs":
        return spec.base_config.replace(n_irs=int(value))
    return spec.base_config.replace(**{key: value})


def run_single(config: SystemConfig, seed: int, method: str) -> RunResult:
    """One realization: draw the scenario and optimize with the realization's streams."""
    rngs = realization_rngs(seed)
    view = draw_scenario(config, rngs["channels"])
    return optimize(view, config, method, rng_init=rngs["init"], rng_sdr=rngs["sdr"])


def _task(args):
    config_dict, seed, method, value = args
    config = SystemConfig.from_dict(config_dict)
    try:
        return value, seed, method, run_single(config, seed, method), None
    except Exception as exc:  # a failed realization is logged and skipped
        return value, seed, method, None, f"{type(exc).__name__}: {exc}"


def _collect(spec: ExperimentSpec) -> list[tuple]:
    values = spec.sweep if SWEEP_KEY[spec.kind] is not None else [None]
    tasks = []
    for value in values:
        cfg = config_for(spec, value).to_dict()
        for r in range(spec.realizations):
            for method in spec.methods:
                tasks.append((cfg, spec.base_seed + r, method, value))
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    order = {m: i for i, m in enumerate(spec.methods)}
    vindex = {repr(v): i for i, v in enumerate(values)}
    results.sort(key=lambda x: (vindex[repr(x[0])], x[1], order[x[2]]))
    for value, seed, method, _, err in results:
        if err is not None:
            log.warning("run failed (kind=%s value=%s seed=%d method=%s): %s",
                        spec.kind, value, seed, method, err)
    return results


def _padded_traces(runs: list[RunResult], length: int) -> np.ndarray:
    """Secrecy traces held at their last value after termination."""
    out = np.empty((len(runs), length))
    for i, run in enumerate(runs):
        vals = [rec.secrecy_rate for rec in run.trace]
        out[i] = vals + [vals[-1]] * (length - len(vals))
    return out


def _trace_rows(runs: list[RunResult], method: str, t_max: int, key: dict | None = None) -> list[AggregateRow]:
    if not runs:
        return []
    traces = _padded_traces(runs, t_max)
    rows = []
    for t in range(t_max):
        mean, var = _mean_var(traces[:, t])
        rows.append(AggregateRow({**(key or {}), "iteration": t + 1}, method, mean, var, len(runs)))
    return rows


def aggregate(spec: ExperimentSpec, results: list[tuple]) -> dict[str, list[AggregateRow]]:
    """Rows per method from (value, seed, method, RunResult, error) tuples."""
    key_name = SWEEP_KEY[spec.kind]
    values = spec.sweep if key_name is not None else [None]
    rows: dict[str, list[AggregateRow]] = {m: [] for m in spec.methods}
    for value in values:
        cfg = config_for(spec, value)
        for method in spec.methods:
            runs = [res for v, _, m, res, err in results
                    if err is None and m == method and repr(v) == repr(value)]
            if not runs:
                continue
            finals = [run.trace[-1] for run in runs]
            mean, var = _mean_var([f.secrecy_rate for f in finals])
            key = {key_name: value} if key_name else {}
            if spec.kind == "converge":
                rows[method] += _trace_rows(runs, method, cfg.t_max)
            elif spec.kind == "csi-error":
                rows[method] += _trace_rows(runs, method, cfg.t_max, key)
            elif spec.kind == "sweep-omega":
                rows[method].append(AggregateRow(key, method, mean, var, len(runs), {
                    "mean_r_u": float(np.mean([f.r_u for f in finals])),
                    "mean_r_te": float(np.mean([f.r_te for f in finals]))}))
            elif spec.kind == "feasible-rate":
                recs = [rec for run in runs for rec in run.trace]
                true_ok = np.array([rec.irs_feasible_true for rec in recs], bool)
                sur_ok = np.array([rec.irs_feasible_surrogate for rec in recs], bool)
                rows[method].append(AggregateRow(key, method, mean, var, len(runs), {
                    "feasible_fraction": float(true_ok.mean()),
                    "feasible_fraction_surrogate": float(sur_ok.mean()),
                    "feasible_fraction_both": float((true_ok & sur_ok).mean()),
                    "updates": int(len(recs))}))
            elif spec.kind == "scaling":
                gam = [10.0 * math.log10(f.gamma_r_true) if f.gamma_r_true > 0 else -math.inf
                       for f in finals]
                rows[method].append(AggregateRow(key, method, mean, var, len(runs), {
                    "mean_gamma_r_db": float(np.mean(gam)),
                    "mean_runtime_s": float(np.mean([run.trace[-1].wall_time_s for run in runs]))}))
    return rows


def beampattern_rows(spec: ExperimentSpec, result: RunResult, seed: int) -> list[dict]:
    cfg = spec.base_config
    rngs = realization_rngs(seed)
    view = draw_scenario(cfg, rngs["channels"])
    state = result.final_state
    info, an = beampattern_radar(state, cfg)
    irs = beampattern_irs(view.truth, state, cfg)
    rows = [{"pattern": "info", "angle_deg": float(a), "gain_db": float(g)} for a, g in zip(RADAR_GRID_DEG, info)]
    rows += [{"pattern": "an", "angle_deg": float(a), "gain_db": float(g)} for a, g in zip(RADAR_GRID_DEG, an)]
    rows += [{"pattern": "irs", "angle_deg": float(a), "gain_db": float(g)}
             for a, g in zip(IRS_AZIMUTH_GRID_DEG, irs)]
    return rows


def _write_runs(out_dir: Path, spec: ExperimentSpec, results: list[tuple]) -> None:
    by_seed: dict[int, list] = {}
    for value, seed, method, res, err in results:
        entry = {"kind": spec.kind, "method": method, "sweep_value": value}
        if err is not None:
            entry["error"] = err
        else:
            entry.update(res.to_dict())
        by_seed.setdefault(seed, []).append(entry)
    run_dir = out_dir / "runs"
    run_dir.mkdir(parents=True, exist_ok=True)
    for seed, entries in sorted(by_seed.items()):
        (run_dir / f"{seed}.json").write_text(json.dumps(entries, indent=1, default=_json_default) + "\n",
                                              encoding="utf-8")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def run_experiment(spec: ExperimentSpec) -> tuple[dict[str, list], list[tuple]]:
    """Run every realization, aggregate, and write artifacts when ``out_dir`` is set.

    Returns ({method: rows}, raw results).
    """
    results = _collect(spec)
    if all(err is not None for *_, err in results):
        raise ExperimentError(f"every run of {spec.kind} failed")
    if spec.kind == "beampattern":
        rows = {}
        for value, seed, method, res, err in results:
            if err is None and method not in rows:
                rows[method] = beampattern_rows(spec, res, seed)
    else:
        rows = aggregate(spec, results)
    if spec.out_dir is not None:
        out = Path(spec.out_dir)
        for method, method_rows in rows.items():
            emit_csv(method_rows, out / f"{spec.kind}_{method}.csv", COLUMNS[spec.kind])
        _write_runs(out, spec, results)
    return rows, results
