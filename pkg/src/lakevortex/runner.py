"""Config-driven runs, eps-sweeps and their on-disk artifacts."""

from __future__ import annotations

import csv
import json
import math
import platform
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .blob import Blob, init_blob, total_circulation
from .config import RunConfig, SCHEMA_VERSION
from .diagnostics import (CSV_COLUMNS, FAIL, INCONCLUSIVE, PASS, fit_log_law,
                          localization_radius, sweep_protocol)
from .elliptic import WeightedOperator, assemble
from .lake import Lake, build_lake
from .limit import LimitTrajectory, compare_series, integrate_limit
from .transport import TimeSeries, simulate

LIMIT_DT = 1e-3
_CACHE: dict = {}


def lake_and_operator(cfg: RunConfig) -> tuple[Lake, WeightedOperator]:
    """Build (and memoize per lake spec and tolerance) the raster and operator."""
    key = (cfg.lake, cfg.tol)
    if key not in _CACHE:
        lake = build_lake(cfg.lake)
        _CACHE.clear()
        _CACHE[key] = (lake, assemble(lake, tol=cfg.tol))
    return _CACHE[key]


def make_blobs(cfg: RunConfig, lake: Lake) -> list[Blob]:
    return [init_blob(lake, b.z0, b.gamma, cfg.blob_eps(b), b.M0, b.profile) for b in cfg.blobs]


@dataclass
class RunResult:
    cfg: RunConfig
    lake: Lake
    series: TimeSeries
    blobs0: list
    limits: list

    @property
    def eps(self) -> float:
        return self.cfg.eps

    def comparison(self, i: int = 0):
        return compare_series(self.series, self.limits[i], i, self.lake)


def run(cfg: RunConfig, progress=None) -> RunResult:
    lake, op = lake_and_operator(cfg)
    blobs = make_blobs(cfg, lake)
    meta = {"scenario": cfg.scenario, "eps": cfg.eps, "resolution": cfg.lake.resolution,
            "config_sha256": cfg.digest()}
    series = simulate(lake, op, blobs, cfg.T, cfg.sample_interval, cfl=cfg.cfl,
                      dt_max=cfg.dt_max, method=cfg.method, meta=meta, progress=progress)
    limits = [integrate_limit(lake.spec, b.z0, b.gamma, cfg.T, LIMIT_DT,
                              sample_times=series.times) for b in cfg.blobs]
    return RunResult(cfg=cfg, lake=lake, series=series, blobs0=blobs, limits=limits)


# ---------------------------------------------------------------------------
# artifacts

def _fmt(v) -> str:
    return repr(float(v))


def write_series_csv(series: TimeSeries, i: int, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_COLUMNS)
        for r in series.blob_series(i):
            row = r.as_row()
            wr.writerow([_fmt(row[c]) for c in CSV_COLUMNS])


EXTENDED_COLUMNS = ("t", "J4", "psi_moment", "psi_variance", "R_eps", "min_phi", "min_dist",
                    "lp1", "lp2", "circulation")


def write_extended_csv(series: TimeSeries, i: int, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(EXTENDED_COLUMNS)
        for r in series.blob_series(i):
            wr.writerow([_fmt(v) for v in (r.t, r.J[4], r.psi_moment, r.psi_variance,
                                           r.R_eps_used, r.min_phi, r.min_dist, r.lp[1],
                                           r.lp[2], r.circulation)])


def environment() -> dict:
    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "lakevortex": __version__}


def manifest(res: RunResult) -> dict:
    s = res.series
    meta = {k: v for k, v in s.meta.items() if k != "wall_clock_s"}
    return {
        "schema_version": SCHEMA_VERSION,
        "config": res.cfg.to_mapping(),
        "config_sha256": res.cfg.digest(),
        "versions": environment(),
        "seeds": {"probe_points": 0, "note": "initialization is deterministic; no RNG is used"},
        "stop_reason": s.stop_reason,
        "run": meta,
        "wall_clock_s": s.meta.get("wall_clock_s"),
        "blobs": [b.identity() for b in res.blobs0],
        "csv_columns": list(CSV_COLUMNS),
        "extended_columns": list(EXTENDED_COLUMNS),
        "limit_sup_error": [res.comparison(i).sup_error for i in range(len(res.blobs0))],
    }


def write_run(res: RunResult, outdir, plots: bool = True) -> Path:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    s = res.series
    for i in range(len(res.blobs0)):
        write_series_csv(s, i, out / f"blob{i}_timeseries.csv")
        write_extended_csv(s, i, out / f"blob{i}_extended.csv")
        res.limits[i].to_csv(out / f"blob{i}_limit.csv")
        res.comparison(i).to_json(out / f"blob{i}_comparison.json")
    if res.cfg.snapshots:
        snap = out / "snapshots"
        snap.mkdir(exist_ok=True)
        for k, (t, pos) in enumerate(zip(s.times, s.snapshots)):
            for i, p in enumerate(pos):
                res.blobs0[i].copy(p).write_snapshot(snap / f"blob{i}_{k:04d}", t)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest(res), fh, indent=2, sort_keys=True, default=float)
    if plots:
        from .plots import plot_trajectories
        plot_trajectories(res, out / "trajectory.png")
    return out


def remove_partial(outdir) -> None:
    p = Path(outdir)
    if p.exists():
        shutil.rmtree(p)


# ---------------------------------------------------------------------------
# sweep

LAWS = ("I_ln", "K_ln", "energy_offset", "limit_sup", "R_t_scaled", "mass_out_lnln")


def law_values(res: RunResult, i: int = 0) -> dict[str, float]:
    """The six sweep quantities for blob ``i`` of one run."""
    s = res.series
    L = abs(math.log(res.eps))
    b = res.blobs0[i]
    b0 = float(res.lake.depth_exact(np.asarray(b.z0)))
    E = s.column(i, "E_eps")
    lead = b.gamma**2 * b0 * L / (2 * math.pi)
    return {
        "I_ln": float(s.column(i, "I_eps").max() * L),
        "K_ln": float(s.column(i, "K_eps").max() * L),
        "energy_offset": float(abs(E[0] - lead)),
        "energy_ratio": float(E[0] / lead),
        "energy_drift": float(np.abs(E - E[0]).max()),
        "limit_sup": res.comparison(i).sup_error,
        "R_t_scaled": float(s.column(i, "R_t").max() * L**0.125),
        "mass_out_lnln": float(s.column(i, "mass_out").max() * math.log(L)),
        "R_eps": localization_radius(res.eps),
        "T_eps": float(s.meta["T_eps"]),
    }


def R_t_exponent(results: list[RunResult], i: int = 0) -> float:
    """Empirical ``k`` in ``sup_t R_t ~ |ln eps|^(-k)`` by a log-log fit (nan if degenerate)."""
    L = np.array([abs(math.log(r.eps)) for r in results])
    R = np.array([r.series.column(i, "R_t").max() for r in results])
    if len(L) < 2 or np.any(R <= 0):
        return float("nan")
    return float(-np.polyfit(np.log(L), np.log(R), 1)[0])


def scaling_report(results: list[RunResult]) -> dict:
    """Per blob and law: the sweep values and the protocol verdict."""
    eps = [r.eps for r in results]
    nblobs = len(results[0].blobs0) if results else 0
    report = {"eps": eps, "protocol": "PASS if max <= 2 min or strictly decreasing as eps "
              "decreases; INCONCLUSIVE with fewer than two values", "blobs": []}
    for i in range(nblobs):
        vals = [law_values(r, i) for r in results]
        entry = {"laws": {}, "extra": {}}
        for law in LAWS:
            series = {e: v[law] for e, v in zip(eps, vals)}
            entry["laws"][law] = {"values": [series[e] for e in eps],
                                  "verdict": sweep_protocol(series)}
        for k in ("energy_ratio", "energy_drift", "R_eps", "T_eps"):
            entry["extra"][k] = [v[k] for v in vals]
        if len(eps) >= 2:
            E0 = [r.series.column(i, "E_eps")[0] for r in results]
            a, c = fit_log_law(eps, E0)
            entry["extra"]["energy_fit"] = {"offset": a, "slope": c}
            entry["extra"]["energy_drift_verdict"] = sweep_protocol(
                dict(zip(eps, entry["extra"]["energy_drift"])))
            entry["extra"]["R_t_exponent"] = R_t_exponent(results, i)
        report["blobs"].append(entry)
    verdicts = [law["verdict"] for b in report["blobs"] for law in b["laws"].values()]
    report["overall"] = (INCONCLUSIVE if all(v == INCONCLUSIVE for v in verdicts)
                         else FAIL if FAIL in verdicts else PASS)
    return report


def run_sweep(cfg: RunConfig, progress=None) -> list[RunResult]:
    eps_list = cfg.sweep or (cfg.eps,)
    return [run(cfg.with_eps(e), progress=progress) for e in eps_list]


def write_sweep(results: list[RunResult], outdir, plots: bool = True) -> dict:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for r in results:
        write_run(r, out / f"eps_{r.eps:g}", plots=plots)
    report = scaling_report(results)
    with open(out / "scaling_report.json", "w") as fh:
        json.dump(report, fh, indent=2, default=float)
    with open(out / "sweep_manifest.json", "w") as fh:
        json.dump({"schema_version": SCHEMA_VERSION, "config": results[0].cfg.to_mapping(),
                   "members": [f"eps_{r.eps:g}" for r in results],
                   "versions": environment()}, fh, indent=2, sort_keys=True)
    if plots:
        from .plots import plot_scaling
        plot_scaling(report, out / "scaling.png")
    return report


def circulation_exact(res: RunResult) -> bool:
    final = res.series.final_state.blobs
    return all(total_circulation(b) == total_circulation(b0) == b0.gamma
               for b, b0 in zip(final, res.blobs0))


__all__ = ["RunResult", "run", "run_sweep", "write_run", "write_sweep", "scaling_report",
           "law_values", "R_t_exponent", "lake_and_operator", "make_blobs", "LimitTrajectory"]
