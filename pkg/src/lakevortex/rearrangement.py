"""Bathtub bound for ``sup int f(y) g(|x - y|) dy`` over ``0 <= f <= M0``, ``int f = gamma``.

For nonincreasing ``g >= 0`` the supremum is attained by ``M0`` times the
indicator of the disc of radius ``R0 = sqrt(gamma / (pi M0))`` about ``x``,
so the value is ``2 pi M0 int_0^R0 s g(s) ds``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid


@dataclass(frozen=True)
class RearrangementInstance:
    """Kernel ``g`` sampled on ``radii`` (extended by zero past the last radius).

    ``spacing`` and ``half_width`` describe the square cell grid
    ``[-half_width, half_width]^2`` used by the brute-force oracle.
    """

    radii: np.ndarray
    g: np.ndarray
    M0: float
    gamma: float
    spacing: float
    half_width: float
    fn: Callable | None = None

    def __post_init__(self):
        r, g = np.asarray(self.radii, float), np.asarray(self.g, float)
        if r.ndim != 1 or r.shape != g.shape or len(r) < 2:
            raise ValueError("radii and g must be matching 1-d samples")
        if np.any(np.diff(r) <= 0) or r[0] < 0:
            raise ValueError("radii must be increasing and nonnegative")
        finite = np.isfinite(g)
        if np.any(g[finite] < 0) or np.any(np.diff(g[finite]) > 1e-12 * max(1.0, np.abs(g[finite]).max())):
            raise ValueError("g must be nonnegative and nonincreasing")
        if self.gamma <= 0 or self.M0 <= 0:
            raise ValueError("gamma and M0 must be positive")

    @property
    def R0(self) -> float:
        return math.sqrt(self.gamma / (math.pi * self.M0))

    def kernel(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        r, g = np.asarray(self.radii), np.asarray(self.g)
        if self.fn is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.asarray(self.fn(np.minimum(s, r[-1])), dtype=float)
        else:
            out = np.interp(s, r, g)
        return np.where(s > r[-1], 0.0, out)

    @classmethod
    def from_function(cls, fn: Callable, support: float, M0: float, gamma: float,
                      n_cells: int = 64, half_width: float | None = None,
                      n_radii: int = 200001) -> "RearrangementInstance":
        """Sample ``fn`` on a fine radius grid; ``fn(0)`` may be infinite."""
        hw = half_width if half_width is not None else 1.25 * max(support, math.sqrt(gamma / (math.pi * M0)))
        r = np.linspace(0.0, support, n_radii)
        with np.errstate(divide="ignore"):
            g = np.asarray(fn(r), dtype=float)
        return cls(radii=r, g=g, M0=float(M0), gamma=float(gamma),
                   spacing=2 * hw / n_cells, half_width=hw, fn=fn)


def rearrangement_bound(inst: RearrangementInstance) -> float:
    """``2 pi M0 int_0^R0 s g(s) ds`` by the trapezoid rule (``s g(s) -> 0`` at ``s = 0``)."""
    if inst.gamma <= 0 or inst.M0 <= 0:
        raise ValueError("gamma and M0 must be positive")
    R0 = inst.R0
    r = np.asarray(inst.radii)
    s = np.concatenate([r[r < R0], [R0]])
    with np.errstate(invalid="ignore"):
        sg = s * inst.kernel(s)
    sg[s > r[-1]] = 0.0
    sg = np.where(s == 0, 0.0, sg)
    return float(2 * math.pi * inst.M0 * trapezoid(sg, s))


@dataclass(frozen=True)
class BruteForceResult:
    value: float
    density: np.ndarray
    centers: np.ndarray
    cell_area: float


def cell_centers(inst: RearrangementInstance) -> np.ndarray:
    n = int(round(2 * inst.half_width / inst.spacing))
    c = -inst.half_width + (np.arange(n) + 0.5) * inst.spacing
    X, Y = np.meshgrid(c, c, indexing="ij")
    return np.stack([X, Y], axis=-1)


def brute_force_sup(inst: RearrangementInstance, x=(0.0, 0.0), max_cells: int = 64 * 64
                    ) -> BruteForceResult:
    """Exact maximizer on the cell grid by greedy filling.

    Cells are ranked by ``g(|x - y|)`` (ties broken by distance) and filled at
    density ``M0`` until the mass ``gamma`` is spent; the last cell may be
    partially filled.  This is exact for a linear objective with box
    constraints and one mass constraint.
    """
    y = cell_centers(inst)
    if y.shape[0] * y.shape[1] > max_cells:
        raise ValueError("grid too large for the brute-force oracle")
    area = inst.spacing**2
    cap = inst.M0 * area
    if inst.gamma > cap * y.shape[0] * y.shape[1] * (1 + 1e-12):
        raise ValueError("gamma exceeds M0 times the domain area")
    d = np.linalg.norm(y - np.asarray(x, dtype=float), axis=-1).ravel()
    gv = inst.kernel(d)
    order = np.lexsort((d, -gv))
    mass = np.zeros(d.size)
    left = inst.gamma
    for k in order:
        if left <= 0:
            break
        take = min(cap, left)
        mass[k] = take
        left -= take
    value = float(np.sum(mass * gv))
    return BruteForceResult(value=value, density=(mass / area).reshape(y.shape[:2]),
                            centers=y, cell_area=area)


def functional(inst: RearrangementInstance, density: np.ndarray, x=(0.0, 0.0)) -> float:
    """``sum_cells f g(|x - y|) dA`` for a density on the oracle grid."""
    y = cell_centers(inst)
    d = np.linalg.norm(y - np.asarray(x, dtype=float), axis=-1)
    return float(np.sum(density * inst.kernel(d)) * inst.spacing**2)


def random_admissible(inst: RearrangementInstance, rng: np.random.Generator) -> np.ndarray:
    """Random density with ``0 <= f <= M0`` and total mass ``gamma`` on the oracle grid."""
    n = int(round(2 * inst.half_width / inst.spacing))
    u = rng.random((n, n)) ** rng.uniform(0.5, 4.0)
    area = inst.spacing**2
    lo, hi = 0.0, 1.0
    mass = lambda c: float(np.minimum(inst.M0, c * u).sum() * area)
    while mass(hi) < inst.gamma:
        hi *= 2
        if hi > 1e12:
            raise ValueError("cannot reach the requested mass")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if mass(mid) < inst.gamma else (lo, mid)
    f = np.minimum(inst.M0, hi * u)
    return f * (inst.gamma / (f.sum() * area))


def canonical_instances() -> dict[str, RearrangementInstance]:
    """The three reference cases: constant kernel, truncated log kernel, doubled mass."""
    one = lambda r: np.ones_like(r)
    neg_log = lambda r: np.where(r > 0, -np.log(np.where(r > 0, r, 1.0)), np.inf)
    hw = 1.6
    return {
        "constant": RearrangementInstance.from_function(one, 2.0, 1.0, math.pi, half_width=hw),
        "log": RearrangementInstance.from_function(neg_log, 1.0, 1.0, math.pi, half_width=hw),
        "doubled": RearrangementInstance.from_function(one, 2.0, 1.0, 2 * math.pi, half_width=hw),
    }
