"""Limit point-vortex motion ``z' = -(gamma / 4 pi) grad^perp b(z) / b(z)``.

The right-hand side always uses the analytic depth, never the grid.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lake import Lake, LakeSpec


class LimitError(RuntimeError):
    """The limit trajectory left the lake."""


@dataclass(frozen=True)
class LimitTrajectory:
    t: np.ndarray
    z: np.ndarray
    b_level: float
    gamma: float
    level_error: np.ndarray

    def at(self, times) -> np.ndarray:
        """Linear interpolation of the samples at ``times`` (inside the sampled range)."""
        times = np.asarray(times, dtype=float)
        if times.min() < self.t[0] - 1e-12 or times.max() > self.t[-1] + 1e-12:
            raise LimitError("requested times outside the trajectory range")
        return np.stack([np.interp(times, self.t, self.z[:, k]) for k in range(2)], axis=-1)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "z_x", "z_y", "b_level_error"])
            for t, z, e in zip(self.t, self.z, self.level_error):
                wr.writerow([repr(float(t)), repr(float(z[0])), repr(float(z[1])), repr(float(e))])


def _spec(lake) -> LakeSpec:
    return lake.spec if isinstance(lake, Lake) else lake


def _inside(lake, z) -> bool:
    if isinstance(lake, Lake):
        return bool(lake.is_interior(z))
    return bool(lake.phi(z) > 0)


def richardson_velocity(lake, z, gamma: float) -> np.ndarray:
    spec = _spec(lake)
    z = np.asarray(z, dtype=float)
    g = spec.grad_depth(z)
    b = spec.depth(z)
    perp = np.stack([-g[..., 1], g[..., 0]], axis=-1)
    return -gamma / (4 * np.pi) * perp / np.asarray(b)[..., None]


def integrate_limit(lake, z0, gamma: float, T: float, dt: float = 1e-3,
                    sample_times: Sequence[float] | None = None) -> LimitTrajectory:
    """RK4 for the limit ODE; every sample time is hit exactly by the step sequence."""
    if dt <= 0 or T < 0:
        raise ValueError("need dt > 0 and T >= 0")
    spec = _spec(lake)
    z = np.asarray(z0, dtype=float)
    if not _inside(lake, z):
        raise LimitError("z0 is not inside the lake")
    ts = np.asarray(sample_times if sample_times is not None else np.arange(0.0, T + 0.5 * dt, dt),
                    dtype=float)
    if ts[0] != 0.0:
        ts = np.concatenate([[0.0], ts])
    b0 = float(spec.depth(z))
    f = lambda p: richardson_velocity(spec, p, gamma)
    out = [z.copy()]
    t = 0.0
    for target in ts[1:]:
        n = max(1, int(math.ceil((target - t) / dt - 1e-9)))
        h = (target - t) / n
        for _ in range(n):
            k1 = f(z)
            k2 = f(z + 0.5 * h * k1)
            k3 = f(z + 0.5 * h * k2)
            k4 = f(z + h * k3)
            z = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not _inside(lake, z):
                raise LimitError(f"trajectory left the lake near t={t:.4g}")
        t = float(target)
        out.append(z.copy())
    Z = np.array(out)
    err = np.abs(spec.depth(Z) - b0)
    return LimitTrajectory(t=ts, z=Z, b_level=b0, gamma=float(gamma), level_error=err)


def _radial_b(coeffs, r: float) -> tuple[float, float]:
    P = np.polynomial.polynomial
    b = float(P.polyval(r * r, coeffs))
    db = 2 * r * float(P.polyval(r * r, P.polyder(coeffs))) if len(coeffs) > 1 else 0.0
    return b, db


def angular_rate(coeffs, r0: float, gamma: float) -> float:
    """``-gamma b'(r0) / (4 pi b(r0) r0)`` for ``b = sum_k coeffs[k] r^(2k)``."""
    b, db = _radial_b(coeffs, r0)
    return -gamma * db / (4 * np.pi * b * r0)


def analytic_radial(b_params, z0, gamma: float, t) -> np.ndarray:
    """Closed-form limit trajectory for a radial depth: uniform rotation about the origin."""
    z0 = np.asarray(z0, dtype=float)
    r0 = float(np.hypot(*z0))
    t = np.asarray(t, dtype=float)
    if r0 == 0:
        return np.broadcast_to(z0, t.shape + (2,)).copy()
    th = angular_rate(tuple(b_params), r0, gamma) * t
    c, s = np.cos(th), np.sin(th)
    return np.stack([c * z0[0] - s * z0[1], s * z0[0] + c * z0[1]], axis=-1)


def rotation_period(b_params, r0: float, gamma: float) -> float:
    b, db = _radial_b(tuple(b_params), r0)
    if db == 0 or gamma == 0:
        return math.inf
    return 8 * math.pi**2 * b * r0 / (abs(gamma) * abs(db))


@dataclass(frozen=True)
class ComparisonReport:
    sup_error: float
    errors: np.ndarray
    times: np.ndarray
    level_drift: np.ndarray

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"sup_error": self.sup_error, "times": self.times.tolist(),
                       "errors": self.errors.tolist(), "level_drift": self.level_drift.tolist()},
                      fh, indent=2)


def compare(times, centers, limit: LimitTrajectory, lake=None) -> ComparisonReport:
    """Sup over sample times of ``|z_eps(t) - z(t)|``; ``lake`` enables the level drift."""
    times = np.asarray(times, dtype=float)
    centers = np.asarray(centers, dtype=float)
    if times.max() < limit.t[0] or times.min() > limit.t[-1]:
        raise LimitError("simulation and limit time ranges are disjoint")
    zl = limit.at(times)
    err = np.linalg.norm(centers - zl, axis=-1)
    if lake is not None:
        drift = np.asarray(_spec(lake).depth(centers)) - limit.b_level
    else:
        drift = np.full(len(times), np.nan)
    return ComparisonReport(sup_error=float(err.max()), errors=err, times=times,
                            level_drift=drift)


def compare_series(series, limit: LimitTrajectory, i: int = 0, lake=None) -> ComparisonReport:
    return compare(series.times, series.centers(i), limit, lake)
