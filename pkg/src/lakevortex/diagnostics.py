"""Scalar observables of a blob: center, moments, energy and localization measures.

Blobs are sign-definite, so moments use ``|w_j|`` and are nonnegative; depth
moments ``J_k`` keep the sign of the circulation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .blob import Blob, deposit, lp_norm
from .elliptic import StreamField, WeightedOperator, solve_stream
from .lake import Lake
from .velocity import mollifier, psi_log

DEPTH_POWERS = (1, 2, 4)
LP_POWERS = (1, 2)
H_LADDER_LEVELS = 6


def localization_radius(eps: float) -> float:
    """``R_eps = sqrt(ln|ln eps| / |ln eps|)`` (requires ``eps < 1/e``)."""
    L = abs(math.log(eps))
    if L <= 1:
        raise ValueError("localization radius needs |ln eps| > 1")
    return math.sqrt(math.log(L) / L)


def center(blob: Blob) -> np.ndarray:
    g = math.fsum(blob.weights)
    if g == 0:
        raise ZeroDivisionError("blob has zero circulation")
    return blob.weights @ blob.positions / g


def inertia(blob: Blob, z) -> float:
    d = blob.positions - np.asarray(z, dtype=float)
    return float(np.abs(blob.weights) @ np.einsum("nc,nc->n", d, d))


def depth_moment(blob: Blob, k: int, lake: Lake) -> float:
    return math.fsum(blob.weights * lake.depth_exact(blob.positions) ** k)


def transverse_moment(blob: Blob, b0: float, lake: Lake) -> float:
    return float(np.abs(blob.weights) @ (lake.depth_exact(blob.positions) - b0) ** 2)


def mass_outside(blob: Blob, z, R: float) -> float:
    if R <= 0:
        raise ValueError("R must be positive")
    d = np.linalg.norm(blob.positions - np.asarray(z, dtype=float), axis=-1)
    return float(np.abs(blob.weights[d > R]).sum())


def default_h_ladder(rho_b: float, levels: int = H_LADDER_LEVELS) -> tuple[float, ...]:
    return tuple(rho_b / 2**k for k in range(levels)) if rho_b > 0 else ()


def transverse_support(blob: Blob, b0: float, lake: Lake, h_ladder: Sequence[float]
                       ) -> tuple[float, dict[float, float]]:
    """``R_t = max_j |b(x_j) - b0|`` and ``m_t(h) = sum_{|b(x_j) - b0| > h} |w_j|``."""
    dev = np.abs(lake.depth_exact(blob.positions) - b0)
    aw = np.abs(blob.weights)
    m = {float(hh): float(aw[dev > hh].sum()) for hh in h_ladder}
    return float(dev.max()), m


def blob_stream(op: WeightedOperator, blob: Blob, method: str = "direct") -> tuple[StreamField, np.ndarray]:
    bw = deposit(blob, op.lake)
    return solve_stream(op, bw, method=method), bw


def energy(op: WeightedOperator, blob: Blob, method: str = "direct",
           stream: StreamField | None = None, bw: np.ndarray | None = None) -> float:
    """Local energy ``-sum_cells Psi (b omega) h^2`` of the blob's own stream function."""
    if stream is None or bw is None:
        stream, bw = blob_stream(op, blob, method)
    m = op.lake.mask
    return float(-np.sum(stream.values[m] * bw[m]) * op.lake.h**2)


def psi_values(blob: Blob, lake: Lake) -> np.ndarray:
    return psi_log(lake, blob, blob.positions, delta=mollifier(lake, blob))


def psi_moment(blob: Blob, lake: Lake, psi: np.ndarray | None = None) -> float:
    """``sum_j psi(x_j) w_j`` from pairwise particle sums (self pairs mollified)."""
    p = psi_values(blob, lake) if psi is None else psi
    return float(p @ blob.weights)


def psi_variance(blob: Blob, lake: Lake, psi: np.ndarray | None = None) -> float:
    """``sum_j |w_j| (gamma psi(x_j) - psi_moment)^2``."""
    p = psi_values(blob, lake) if psi is None else psi
    pm = float(p @ blob.weights)
    g = math.fsum(blob.weights)
    return float(np.abs(blob.weights) @ (g * p - pm) ** 2)


def lp_norms(blob: Blob, lake: Lake, powers=LP_POWERS, bw: np.ndarray | None = None
             ) -> dict[int, float]:
    f = deposit(blob, lake) if bw is None else bw
    return {int(p): lp_norm(f, lake, p) for p in powers}


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    z_eps: tuple[float, float]
    I_eps: float
    K_eps: float
    J: dict
    E_eps: float
    psi_moment: float
    psi_variance: float
    mass_out: float
    R_eps_used: float
    R_t: float
    m_t: dict
    min_phi: float
    min_dist: float
    lp: dict = field(default_factory=dict)
    circulation: float = 0.0

    def as_row(self) -> dict:
        return {"t": self.t, "z_x": self.z_eps[0], "z_y": self.z_eps[1], "I": self.I_eps,
                "K": self.K_eps, "E": self.E_eps, "J1": self.J[1], "J2": self.J[2],
                "mass_out": self.mass_out, "R_t": self.R_t}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["J"] = {str(k): v for k, v in self.J.items()}
        d["m_t"] = {repr(k): v for k, v in self.m_t.items()}
        d["lp"] = {str(k): v for k, v in self.lp.items()}
        return d


CSV_COLUMNS = ("t", "z_x", "z_y", "I", "K", "E", "J1", "J2", "mass_out", "R_t")


def record(t: float, blob: Blob, lake: Lake, op: WeightedOperator | None,
           h_ladder: Sequence[float] = (), stream: StreamField | None = None,
           bw: np.ndarray | None = None, method: str = "direct") -> DiagnosticsRecord:
    """Evaluate every diagnostic for one blob.

    ``stream``/``bw`` may carry the blob's already solved own field.  Without
    an operator the energy is reported as ``nan``.
    """
    from .transport import boundary_guard

    z = center(blob)
    b0 = float(lake.depth_exact(np.asarray(blob.z0)))
    if bw is None:
        bw = deposit(blob, lake)
    if op is not None:
        if stream is None:
            stream = solve_stream(op, bw, method=method)
        E = energy(op, blob, stream=stream, bw=bw)
    else:
        E = float("nan")
    p = psi_values(blob, lake)
    R = localization_radius(blob.eps)
    R_t, m_t = transverse_support(blob, b0, lake, h_ladder)
    guard = boundary_guard(lake, blob)
    return DiagnosticsRecord(
        t=float(t), z_eps=(float(z[0]), float(z[1])), I_eps=inertia(blob, z),
        K_eps=transverse_moment(blob, b0, lake),
        J={k: depth_moment(blob, k, lake) for k in DEPTH_POWERS}, E_eps=E,
        psi_moment=float(p @ blob.weights), psi_variance=psi_variance(blob, lake, p),
        mass_out=mass_outside(blob, z, R), R_eps_used=R, R_t=R_t, m_t=m_t,
        min_phi=guard.min_phi, min_dist=guard.min_dist,
        lp=lp_norms(blob, lake, bw=bw), circulation=math.fsum(blob.weights))


# ---------------------------------------------------------------------------
# sweep protocol

PASS, FAIL, INCONCLUSIVE = "PASS", "FAIL", "INCONCLUSIVE"


def sweep_protocol(values: Mapping[float, float], factor: float = 2.0) -> str:
    """Judge whether ``Q_eps`` is bounded across an eps-sweep.

    PASS when ``max Q <= factor * min Q`` or when ``Q`` decreases strictly as
    ``eps`` decreases; INCONCLUSIVE with fewer than two finite values.
    """
    items = sorted(((float(e), float(q)) for e, q in values.items() if np.isfinite(q)),
                   reverse=True)
    if len(items) < 2:
        return INCONCLUSIVE
    q = np.array([v for _, v in items])
    if np.all(np.diff(q) < 0):
        return PASS
    if q.min() > 0 and q.max() <= factor * q.min():
        return PASS
    if q.min() == q.max():
        return PASS
    return FAIL


def fit_log_law(eps: Sequence[float], values: Sequence[float]) -> tuple[float, float]:
    """Least-squares ``values ~ a + c |ln eps|``; returns ``(a, c)``."""
    L = np.abs(np.log(np.asarray(eps, dtype=float)))
    A = np.stack([np.ones_like(L), L], axis=-1)
    (a, c), *_ = np.linalg.lstsq(A, np.asarray(values, dtype=float), rcond=None)
    return float(a), float(c)
