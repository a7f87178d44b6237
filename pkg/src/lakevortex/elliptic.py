"""Weighted Poisson problem ``div(b^-1 grad Psi) = f`` with ``Psi = 0`` off the lake.

Five-point, cell-centered, divergence-form discretization.  Face
coefficients are harmonic means of the (clamped) cell values of ``1/b``;
exterior cells act as Dirichlet ghosts holding zero (or user-supplied data).
The assembled matrix is symmetric negative definite on the interior unknowns.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lake import Lake, LakeError, dist_boundary

DEFAULT_TOL = 1e-10

_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1))


class SolverError(RuntimeError):
    """Elliptic solve failed to reach its tolerance."""


@dataclass(frozen=True, eq=False)
class WeightedOperator:
    lake: Lake
    inv_b: np.ndarray          # clamped 1/b per cell (nan outside the lake)
    matrix: sp.csr_matrix      # discrete div(b^-1 grad .) on interior unknowns
    ghost_rows: np.ndarray     # interior unknown index of each Dirichlet face
    ghost_cells: np.ndarray    # (n_faces, 2) exterior cell of each Dirichlet face
    ghost_coeff: np.ndarray    # face coefficient / h^2
    clamp_width: float
    tol: float = DEFAULT_TOL
    maxiter: int = 0

    @property
    def h(self) -> float:
        return self.lake.h

    @cached_property
    def diagonal(self) -> np.ndarray:
        return -self.matrix.diagonal()

    @cached_property
    def _factor(self):
        # SPD system -A x = -f; SuperLU with a symmetric ordering
        return spla.splu((-self.matrix).tocsc(), permc_spec="MMD_AT_PLUS_A")

    def to_vector(self, grid: np.ndarray) -> np.ndarray:
        grid = np.asarray(grid, dtype=float)
        if grid.shape != self.lake.shape:
            raise ValueError(f"field shape {grid.shape} does not match grid {self.lake.shape}")
        return grid[self.lake.mask]

    def to_grid(self, vec: np.ndarray) -> np.ndarray:
        out = np.zeros(self.lake.shape)
        out[self.lake.mask] = vec
        return out

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """Apply the operator to a grid field (exterior values ignored, taken as 0)."""
        return self.to_grid(self.matrix @ self.to_vector(psi))

    def ghost_rhs(self, ghost_values: np.ndarray) -> np.ndarray:
        """Interior rhs contribution moving Dirichlet ghost data to the right side."""
        vals = np.asarray(ghost_values, dtype=float)[self.ghost_cells[:, 0], self.ghost_cells[:, 1]]
        return np.bincount(self.ghost_rows, weights=-self.ghost_coeff * vals,
                           minlength=self.lake.n_interior)


@dataclass(frozen=True, eq=False)
class StreamField:
    """Grid solution ``Psi`` (zero outside the lake) plus solver metadata."""

    lake: Lake
    values: np.ndarray
    rhs_norm: float
    residual_norm: float
    iterations: int
    method: str = "cg"
    clamp_width: float = 0.0
    source: tuple[float, float] | None = None
    meta: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        write_grid_csv(self.lake, self.values, path, value_name="psi")

    def to_binary(self, path) -> None:
        write_grid_binary(self.lake, self.values, path)


def assemble(lake: Lake, clamp_width: float | None = None, tol: float = DEFAULT_TOL,
             maxiter: int | None = None) -> WeightedOperator:
    """Assemble ``div(b^-1 grad .)`` on the interior cells of ``lake``.

    For degenerate depths (``alpha > 0``) ``1/b`` is capped at its value on
    the level ``phi = clamp_width`` (default one cell width ``h``).
    """
    n = lake.n_interior
    if n == 0:
        raise LakeError("lake has no interior cells")
    h = lake.h
    clamp = h if clamp_width is None else float(clamp_width)
    mask = lake.mask
    inv_b = np.full(lake.shape, np.nan)
    b = lake.b_cells[mask]
    ib = 1.0 / b
    if lake.spec.alpha > 0:
        c = lake.spec.c(lake.centers[mask])
        cap = 1.0 / (c * clamp**lake.spec.alpha)
        ib = np.where(lake.phi_cells[mask] < clamp, np.minimum(ib, cap), ib)
    inv_b[mask] = ib

    idx = lake.index
    I, J = np.nonzero(mask)
    nx, ny = lake.shape
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    g_rows, g_cells, g_coeff = [], [], []
    me = idx[I, J]
    for di, dj in _OFFSETS:
        I2, J2 = I + di, J + dj          # padding guarantees in-bounds neighbours
        nb_in = mask[I2, J2]
        ia, ib_ = inv_b[I, J], inv_b[I2, J2]
        with np.errstate(invalid="ignore"):
            coeff = np.where(nb_in, 2.0 * ia * ib_ / (ia + ib_), ia) / h**2
        diag -= coeff
        rows.append(me[nb_in])
        cols.append(idx[I2[nb_in], J2[nb_in]])
        vals.append(coeff[nb_in])
        out = ~nb_in
        g_rows.append(me[out])
        g_cells.append(np.stack([I2[out], J2[out]], axis=-1))
        g_coeff.append(coeff[out])
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    if maxiter is None:
        maxiter = max(int(50 * math.sqrt(n)), 100)
    inv_b.setflags(write=False)
    return WeightedOperator(lake=lake, inv_b=inv_b, matrix=A,
                            ghost_rows=np.concatenate(g_rows),
                            ghost_cells=np.concatenate(g_cells),
                            ghost_coeff=np.concatenate(g_coeff),
                            clamp_width=clamp, tol=tol, maxiter=maxiter)


def _pcg(A, rhs, diag, tol, maxiter, x0=None):
    """Jacobi-preconditioned CG on the SPD system ``A x = rhs`` (scipy's ``cg``)."""
    if not np.any(rhs):
        return np.zeros_like(rhs), 0
    inv_d = 1.0 / diag
    M = spla.LinearOperator(A.shape, matvec=lambda v: inv_d * v, dtype=float)
    count = [0]

    def tick(_):
        count[0] += 1

    x, info = spla.cg(A, rhs, x0=x0, rtol=tol, atol=0.0, maxiter=maxiter, M=M, callback=tick)
    if info != 0 or np.linalg.norm(rhs - A @ x) > tol * np.linalg.norm(rhs) * (1 + 1e-6):
        raise SolverError(f"CG did not converge to {tol:g} in {maxiter} iterations")
    return x, count[0]


def solve_stream(op: WeightedOperator, rhs: np.ndarray, method: str = "cg",
                 ghost_values: np.ndarray | None = None, x0: np.ndarray | None = None
                 ) -> StreamField:
    """Solve ``div(b^-1 grad Psi) = rhs`` on the lake.

    ``method`` is ``"cg"`` (Jacobi-preconditioned conjugate gradient) or
    ``"direct"`` (cached sparse factorization; same system, used for the
    many repeated solves of a transport run).  ``ghost_values`` optionally
    supplies nonzero Dirichlet data at exterior cell centers.
    """
    f = op.to_vector(rhs)
    if ghost_values is not None:
        f = f + op.ghost_rhs(ghost_values)
    neg = -op.matrix
    if method == "cg":
        guess = None if x0 is None else op.to_vector(x0)
        x, iters = _pcg(neg, -f, op.diagonal, op.tol, op.maxiter, guess)
    elif method == "direct":
        x = op._factor.solve(-f) if np.any(f) else np.zeros_like(f)
        iters = 1
    else:
        raise ValueError(f"unknown method {method!r}")
    fnorm = float(np.linalg.norm(f))
    res = float(np.linalg.norm(op.matrix @ x - f))
    rel = res / fnorm if fnorm > 0 else res
    if method == "direct" and rel > op.tol:
        raise SolverError(f"direct solve residual {rel:.3e} exceeds {op.tol:g}")
    psi = op.to_grid(x)
    if ghost_values is not None:
        ext = ~op.lake.mask
        psi[ext] = np.asarray(ghost_values, dtype=float)[ext]
    psi.setflags(write=False)
    return StreamField(lake=op.lake, values=psi, rhs_norm=fnorm, residual_norm=rel,
                       iterations=iters, method=method, clamp_width=op.clamp_width)


def residual_norm(op: WeightedOperator, psi, rhs) -> float:
    """``||A psi - rhs|| / ||rhs||`` over interior cells (absolute norm when rhs = 0)."""
    if isinstance(psi, StreamField):
        psi = psi.values
    p = op.to_vector(np.asarray(psi))
    f = op.to_vector(np.asarray(rhs))
    r = float(np.linalg.norm(op.matrix @ p - f))
    fn = float(np.linalg.norm(f))
    return r / fn if fn > 0 else r


def point_source(op: WeightedOperator, y) -> tuple[np.ndarray, tuple[float, float]]:
    """Unit-mass discrete delta at the cell containing ``y`` (value ``1/h^2``)."""
    lake = op.lake
    y = np.asarray(y, dtype=float)
    if not lake.is_interior(y):
        raise LakeError("source point outside the lake")
    if float(dist_boundary(lake, y)) < 2 * lake.h:
        raise LakeError("source point closer than 2h to the boundary")
    i, j = (int(v) for v in lake.cell_of(y))
    rhs = np.zeros(lake.shape)
    rhs[i, j] = 1.0 / lake.h**2
    return rhs, tuple(float(v) for v in lake.centers[i, j])


def green_kernel(op: WeightedOperator, y, method: str = "cg") -> StreamField:
    """Discrete Green function ``G(., y)``; ``source`` holds the deposition cell center."""
    rhs, src = point_source(op, y)
    sf = solve_stream(op, rhs, method=method)
    return StreamField(lake=sf.lake, values=sf.values, rhs_norm=sf.rhs_norm,
                       residual_norm=sf.residual_norm, iterations=sf.iterations,
                       method=sf.method, clamp_width=sf.clamp_width, source=src)


def singular_part(lake: Lake, y) -> np.ndarray:
    """``(1/2pi) sqrt(b(x) b(y)) ln|x - y|`` on the cells (nan at ``x = y`` and outside)."""
    y = np.asarray(y, dtype=float)
    x = lake.centers
    r = np.linalg.norm(x - y, axis=-1)
    by = float(lake.depth_exact(y))
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.sqrt(np.maximum(lake.b_cells, 0.0) * by) * np.log(r) / (2 * np.pi)
    s = np.where(lake.mask & (r > 0.5 * lake.h), s, np.nan)
    return s


def remainder_kernel(op: WeightedOperator, y, method: str = "cg",
                     green: StreamField | None = None) -> np.ndarray:
    """``R(., y) = G(., y) - (1/2pi) sqrt(b(.) b(y)) ln|. - y|`` sampled on cells.

    The logarithm is centered on the deposition cell of the discrete delta;
    the singular cell itself and exterior cells are ``nan``.
    """
    G = green if green is not None else green_kernel(op, y, method=method)
    return G.values - singular_part(op.lake, G.source)


def disc_image_green(x, y, radius: float = 1.0, center=(0.0, 0.0), depth: float = 1.0):
    """Closed-form Dirichlet Green function of ``div(b^-1 grad .)`` for constant ``b``
    on a disc, by the method of images: ``(b/2pi) ln(R|x-y| / (|y| |x-y*|))``.
    """
    x = np.asarray(x, dtype=float) - np.asarray(center, dtype=float)
    y = np.asarray(y, dtype=float) - np.asarray(center, dtype=float)
    ry = float(np.hypot(*y))
    d = np.linalg.norm(x - y, axis=-1)
    with np.errstate(divide="ignore"):
        if ry < 1e-14:
            g = np.log(d / radius)
        else:
            ystar = y * radius**2 / ry**2
            g = np.log(radius * d / (ry * np.linalg.norm(x - ystar, axis=-1)))
    return depth * g / (2 * np.pi)


def compare_disc_green(op: WeightedOperator, G: StreamField, exclude: float = 0.2,
                       shore: float = 0.2) -> dict:
    """Relative L-infinity error of ``G`` against the image formula on
    ``{dist(x, shore) > shore} minus B(y, exclude)`` (constant-depth discs only).
    """
    lake = op.lake
    spec = lake.spec
    if spec.shape.kind != "disc" or spec.alpha != 0 or spec.c.kind != "constant":
        raise LakeError("image comparison needs a constant-depth disc")
    x = lake.centers
    r = np.linalg.norm(x - np.asarray(spec.shape.center), axis=-1)
    region = lake.mask & (r < spec.shape.radius - shore)
    region &= np.linalg.norm(x - np.asarray(G.source), axis=-1) >= exclude
    exact = disc_image_green(x, G.source, spec.shape.radius, spec.shape.center, spec.c.value)
    err = np.abs(G.values - exact)[region].max()
    scale = np.abs(exact[region]).max()
    return {"rel_linf": float(err / scale), "abs_linf": float(err), "n_cells": int(region.sum()),
            "exclude": exclude, "shore": shore}


def discrete_energy(op: WeightedOperator, psi: np.ndarray) -> float:
    """``sum_faces coeff (dPsi)^2 h^2`` over interior and Dirichlet faces."""
    lake = op.lake
    p = op.to_vector(psi)
    A = op.matrix.tocoo()
    off = A.row < A.col
    e = float(np.sum(A.data[off] * (p[A.row[off]] - p[A.col[off]]) ** 2))
    e += float(np.sum(op.ghost_coeff * p[op.ghost_rows] ** 2))
    return e * lake.h**2


# ---------------------------------------------------------------------------
# export

_MAGIC = b"LKPSI001"
_HEADER = struct.Struct("<8sii3d")


def write_grid_csv(lake: Lake, values: np.ndarray, path, value_name: str = "value",
                   extra: dict | None = None) -> None:
    """Write interior cells as CSV rows ``x,y,<value_name>[,extra...]``."""
    pts = lake.centers[lake.mask]
    cols = [pts[:, 0], pts[:, 1], np.asarray(values)[lake.mask]]
    names = ["x", "y", value_name]
    for k, v in (extra or {}).items():
        names.append(k)
        cols.append(np.asarray(v)[lake.mask])
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for row in zip(*cols):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def write_grid_binary(lake: Lake, values: np.ndarray, path) -> None:
    """Header (magic, nx, ny, h, x0, y0) followed by row-major float64 values."""
    nx, ny = lake.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, nx, ny, lake.h, lake.origin[0], lake.origin[1]))
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes(order="C"))


def read_grid_binary(path) -> tuple[np.ndarray, dict]:
    data = Path(path).read_bytes()
    magic, nx, ny, h, x0, y0 = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ValueError("not a stream-field snapshot")
    vals = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(nx, ny)
    return vals.copy(), {"nx": nx, "ny": ny, "h": h, "origin": (x0, y0)}
