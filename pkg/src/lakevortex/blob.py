"""Lagrangian particle blobs for concentrated vorticity."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .lake import Lake, LakeError

MIN_PARTICLES = 16
LATTICE_PER_RADIUS = 8
PROFILES = ("uniform", "cosine")


@dataclass(eq=False)
class Blob:
    """Particles carrying fixed weights ``w_j``, the mass of ``b omega`` on their patch.

    ``positions`` is the only mutable state; the integrator replaces it with a
    new array at the end of a step.
    """

    positions: np.ndarray
    weights: np.ndarray
    z0: tuple[float, float]
    gamma: float
    eps: float
    M0: float
    profile: str
    spacing: float
    M0_prime: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=float)
        self.weights.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def sign(self) -> int:
        return 1 if self.gamma > 0 else -1

    def copy(self, positions=None) -> "Blob":
        pos = self.positions if positions is None else positions
        return Blob(positions=np.array(pos, dtype=float), weights=self.weights, z0=self.z0,
                    gamma=self.gamma, eps=self.eps, M0=self.M0, profile=self.profile,
                    spacing=self.spacing, M0_prime=self.M0_prime, meta=dict(self.meta))

    def identity(self) -> dict:
        return {"z0": list(self.z0), "gamma": self.gamma, "eps": self.eps, "M0": self.M0,
                "sign": self.sign, "profile": self.profile, "spacing": self.spacing,
                "M0_prime": self.M0_prime, "n_particles": self.n}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "y", "w"])
            for (x, y), w in zip(self.positions, self.weights):
                wr.writerow([repr(float(x)), repr(float(y)), repr(float(w))])

    def write_snapshot(self, stem, time: float) -> None:
        """Write ``stem.csv`` with particles and ``stem.json`` with the identity."""
        self.to_csv(f"{stem}.csv")
        meta = self.identity() | {"time": time}
        with open(f"{stem}.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)


def _exact_sum_weights(w: np.ndarray, gamma: float) -> np.ndarray:
    """Scale to ``gamma``, then correct the largest weight until ``fsum(w) == gamma``."""
    w = w * (gamma / math.fsum(w))
    k = int(np.argmax(np.abs(w)))
    for _ in range(64):
        s = math.fsum(w)
        if s == gamma:
            return w
        step = w[k] + (gamma - s)
        if step == w[k]:
            step = np.nextafter(w[k], np.inf if s < gamma else -np.inf)
        w[k] = step
    raise ArithmeticError("could not make the weights sum exactly")


def total_circulation(blob: Blob) -> float:
    """Correctly rounded ``sum_j w_j``."""
    return math.fsum(blob.weights)


def init_blob(lake: Lake, z0, gamma: float, eps: float, M0: float = 1.0,
              profile: str = "uniform", spacing: float | None = None) -> Blob:
    """Particles on a square lattice inside ``B(z0, M0 eps)``.

    The lattice is centered on ``z0`` with spacing ``min(h, M0 eps / 8)`` so the
    blob is resolved independently of the grid.  ``uniform`` gives every
    particle the same weight (constant ``b omega``); ``cosine`` tapers as
    ``(1 + cos(pi r / a)) / 2``.
    """
    if profile not in PROFILES:
        raise LakeError(f"unknown profile {profile!r}")
    if gamma == 0 or not math.isfinite(gamma):
        raise LakeError("gamma must be a nonzero finite number")
    if not (0 < eps < 1) or M0 <= 0:
        raise LakeError("need 0 < eps < 1 and M0 > 0")
    z0 = np.asarray(z0, dtype=float)
    a = M0 * eps
    s = min(lake.h, a / LATTICE_PER_RADIUS) if spacing is None else float(spacing)

    # disc plus a two-cell margin must sit in the interior
    ring = z0 + (a + 2 * lake.h) * np.stack(
        [np.cos(np.linspace(0, 2 * np.pi, 64, endpoint=False)),
         np.sin(np.linspace(0, 2 * np.pi, 64, endpoint=False))], axis=-1)
    if not lake.is_interior(z0) or not lake.is_interior(ring).all():
        raise LakeError("blob disc (with a two-cell margin) leaves the lake")

    m = int(math.floor(a / s))
    k = np.arange(-m, m + 1)
    I, J = np.meshgrid(k, k, indexing="ij")
    off = np.stack([I.ravel(), J.ravel()], axis=-1) * s
    r = np.linalg.norm(off, axis=-1)
    keep = r < a
    off, r = off[keep], r[keep]
    if len(off) < MIN_PARTICLES:
        raise LakeError("fewer than 16 particles in the blob; refine the spacing")

    shape = np.ones(len(r)) if profile == "uniform" else 0.5 * (1 + np.cos(np.pi * r / a))
    w = _exact_sum_weights(shape * s * s, float(gamma))
    pos = z0 + off
    omega = np.abs(w) / (s * s) / lake.depth_exact(pos)
    return Blob(positions=pos, weights=w, z0=(float(z0[0]), float(z0[1])), gamma=float(gamma),
                eps=float(eps), M0=float(M0), profile=profile, spacing=float(s),
                M0_prime=float(omega.max() * eps**2))


def deposit(blob: Blob, lake: Lake, out: np.ndarray | None = None) -> np.ndarray:
    """Area-weighted (bilinear) deposition of the weights; returns cell ``b omega``.

    ``out`` is accumulated into when given, which lets several blobs share one
    field.
    """
    if out is None:
        out = np.zeros(lake.shape)
    x = blob.positions
    if not lake.is_interior(x).all():
        raise LakeError("particle outside the lake during deposition")
    fx = (x[:, 0] - lake.origin[0]) / lake.h - 0.5
    fy = (x[:, 1] - lake.origin[1]) / lake.h - 0.5
    i0 = np.floor(fx).astype(np.int64)
    j0 = np.floor(fy).astype(np.int64)
    tx, ty = fx - i0, fy - j0
    w = blob.weights / lake.h**2
    nx, ny = lake.shape
    flat = np.zeros(nx * ny)
    for di, dj, c in ((0, 0, (1 - tx) * (1 - ty)), (1, 0, tx * (1 - ty)),
                      (0, 1, (1 - tx) * ty), (1, 1, tx * ty)):
        flat += np.bincount((i0 + di) * ny + (j0 + dj), weights=w * c, minlength=nx * ny)
    out += flat.reshape(nx, ny)
    if np.any(out[~lake.mask] != 0):
        raise LakeError("deposition reached exterior cells; particle too close to the boundary")
    return out


def lp_norm(field_bw: np.ndarray, lake: Lake, p: float) -> float:
    """``|| b^(1/p) omega ||_p`` of a deposited ``b omega`` cell field."""
    m = lake.mask
    q = np.abs(field_bw[m])
    b = lake.b_cells[m]
    return float((np.sum(q**p * b ** (1 - p)) * lake.h**2) ** (1.0 / p))
