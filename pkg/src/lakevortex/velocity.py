"""Velocity reconstruction and its split into singular, log and remainder parts.

``v = b^-1 grad^perp Psi`` with ``grad^perp = (-d_y, d_x)``.  Particle sums use
the mollified kernel ``K_delta(x, y) = (x - y)^perp / (|x - y|^2 + delta^2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from .elliptic import StreamField
from .lake import ComponentSet, Lake, LakeError, dist_boundary

CHUNK = 4096


def perp(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


@dataclass(frozen=True)
class VelocitySample:
    v_total: np.ndarray
    v_K: np.ndarray
    v_L: np.ndarray
    v_R: np.ndarray
    psi_log: np.ndarray


def _stencil(lake: Lake, x: np.ndarray):
    fx = (x[:, 0] - lake.origin[0]) / lake.h - 0.5
    fy = (x[:, 1] - lake.origin[1]) / lake.h - 0.5
    i0 = np.floor(fx).astype(np.int64)
    j0 = np.floor(fy).astype(np.int64)
    return i0, j0, fx - i0, fy - j0


def stream_gradient(lake: Lake, values: np.ndarray, x, clamp_width: float = 0.0) -> np.ndarray:
    """Centered-difference gradient of a cell field, bilinearly interpolated to ``x``.

    Raises ``LakeError`` when the bilinear stencil touches exterior cells or,
    for degenerate depths, when ``x`` lies in the clamp layer.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    i0, j0, tx, ty = _stencil(lake, x)
    nx, ny = lake.shape
    if np.any((i0 < 1) | (i0 + 2 >= nx) | (j0 < 1) | (j0 + 2 >= ny)):
        raise LakeError("gradient stencil leaves the grid")
    m = lake.mask
    if not (m[i0, j0] & m[i0 + 1, j0] & m[i0, j0 + 1] & m[i0 + 1, j0 + 1]).all():
        raise LakeError("velocity query too close to the boundary")
    if lake.spec.alpha > 0 and clamp_width > 0 and np.any(lake.phi(x) < clamp_width):
        raise LakeError("velocity query inside the clamp layer")
    P = values
    inv2h = 0.5 / lake.h
    g = np.zeros((len(x), 2))
    for di, dj, w in ((0, 0, (1 - tx) * (1 - ty)), (1, 0, tx * (1 - ty)),
                      (0, 1, (1 - tx) * ty), (1, 1, tx * ty)):
        i, j = i0 + di, j0 + dj
        g[:, 0] += w * (P[i + 1, j] - P[i - 1, j]) * inv2h
        g[:, 1] += w * (P[i, j + 1] - P[i, j - 1]) * inv2h
    return g


def velocity_from_stream(lake: Lake, psi: StreamField, x) -> np.ndarray:
    """``v(x) = b(x)^-1 grad^perp Psi(x)`` at one point ``(2,)`` or many ``(n, 2)``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    g = stream_gradient(lake, psi.values, pts, psi.clamp_width)
    v = perp(g) / lake.depth_exact(pts)[:, None]
    return v[0] if single else v


def mollifier(lake: Lake, blob) -> float:
    return 0.5 * max(lake.h, blob.spacing)


def _pair_sum(x: np.ndarray, blob, fn) -> np.ndarray:
    """Deterministic chunked reduction of ``fn(x, particles_chunk, weights_chunk)``."""
    out = None
    for s in range(0, blob.n, CHUNK):
        part = fn(x, blob.positions[s:s + CHUNK], blob.weights[s:s + CHUNK])
        out = part if out is None else out + part
    return out


def v_K(lake: Lake, blob, x, delta: float | None = None) -> np.ndarray:
    """Most singular part: 2D Biot-Savart sum with weight ``sqrt(b(x) b(x_j))``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    d = mollifier(lake, blob) if delta is None else delta
    bx = lake.depth_exact(pts)

    def fn(p, xs, w):
        diff = p[:, None, :] - xs[None, :, :]
        r2 = np.einsum("mnc,mnc->mn", diff, diff) + d * d
        coef = np.sqrt(lake.depth_exact(xs))[None, :] * w[None, :] / r2
        return np.einsum("mn,mnc->mc", coef, perp(diff))

    v = _pair_sum(pts, blob, fn) * (np.sqrt(bx) / (2 * np.pi * bx))[:, None]
    return v[0] if single else v


def psi_log(lake: Lake, blob, x, delta: float | None = None) -> np.ndarray:
    """``sum_j ln(max(|x - x_j|, delta)) sqrt(b(x) b(x_j)) w_j``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    d = mollifier(lake, blob) if delta is None else delta

    def fn(p, xs, w):
        r = np.linalg.norm(p[:, None, :] - xs[None, :, :], axis=-1)
        return np.log(np.maximum(r, d)) @ (np.sqrt(lake.depth_exact(xs)) * w)

    out = _pair_sum(pts, blob, fn) * np.sqrt(lake.depth_exact(pts))
    return out[0] if single else out


def psi_log_and_vL(lake: Lake, blob, x, delta: float | None = None):
    """Return ``(psi, v_L)`` with ``v_L = grad^perp b / (4 pi b^2) * psi``."""
    x = np.asarray(x, dtype=float)
    psi = psi_log(lake, blob, x, delta)
    b = lake.depth_exact(x)
    gb = lake.grad_depth_exact(x)
    vL = perp(gb) * (np.asarray(psi) / (4 * np.pi * b**2))[..., None]
    return psi, vL


def v_R_by_subtraction(lake: Lake, psi: StreamField, blob, x, delta: float | None = None
                       ) -> np.ndarray:
    """Remainder ``v_R = v - v_K - v_L`` evaluated from the solved stream field."""
    return decompose(lake, psi, blob, x, delta).v_R


def decompose(lake: Lake, psi: StreamField, blob, x, delta: float | None = None
              ) -> VelocitySample:
    v = velocity_from_stream(lake, psi, x)
    vk = v_K(lake, blob, x, delta)
    pl, vl = psi_log_and_vL(lake, blob, x, delta)
    return VelocitySample(v_total=v, v_K=vk, v_L=vl, v_R=v - vk - vl, psi_log=pl)


def external_field(lake: Lake, other_blobs: Sequence, streams: Sequence[StreamField], x,
                   neighborhoods: Sequence[ComponentSet] | None = None) -> np.ndarray:
    """Velocity induced at ``x`` by the other blobs (their own stream fields).

    ``neighborhoods`` are the level components of the other blobs; evaluating
    inside one of them is rejected.
    """
    if len(other_blobs) != len(streams):
        raise ValueError("one stream field per other blob is required")
    x = np.asarray(x, dtype=float)
    if neighborhoods is not None:
        for comp in neighborhoods:
            if np.any(comp.contains(lake, x)):
                raise LakeError("evaluation point lies in another blob's neighborhood")
    out = np.zeros(x.shape)
    for sf in streams:
        out = out + velocity_from_stream(lake, sf, x)
    return out


def probe_points(lake: Lake, r0: float, n: int = 64, seed: int = 0) -> np.ndarray:
    """Deterministic quasi-random points of the lake at distance >= r0 from the shore."""
    gen = qmc.Halton(d=2, scramble=True, seed=seed)
    nx, ny = lake.shape
    lo = np.array(lake.origin)
    span = np.array([nx, ny]) * lake.h
    found = []
    while sum(len(f) for f in found) < n:
        cand = lo + gen.random(256) * span
        cand = cand[lake.is_interior(cand)]
        if len(cand):
            cand = cand[dist_boundary(lake, cand) >= r0]
        found.append(cand)
    return np.concatenate(found)[:n]
