"""Lake geometry: analytic domains and depths, rasterization, level-set components.

A lake is a simply connected domain (disc or axis-aligned rectangle) with a
depth ``b = c * phi**alpha`` where ``phi`` is the boundary-defining function of
the shape (positive inside, zero on the boundary) and ``c`` is drawn from a
small closed-form catalog.  ``alpha > 0`` gives a beach: the depth vanishes on
the shore like ``dist**alpha``.

The grid is cell centered with two rings of exterior padding cells, so every
bilinear stencil around an interior point stays in bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

PAD = 2
MIN_CELLS_ACROSS = 16


class LakeError(ValueError):
    """Invalid lake description or query outside the wet domain."""


# ---------------------------------------------------------------------------
# analytic catalog


def _xy(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0], x[..., 1]


@dataclass(frozen=True)
class Profile:
    """Closed-form scalar field used as the prefactor ``c`` of the depth.

    ``kind`` is one of ``constant`` (``value``), ``affine``
    (``value + slope . x``) or ``radial`` (``sum_k coeffs[k] |x - center|^(2k)``).
    """

    kind: str = "constant"
    value: float = 1.0
    slope: tuple[float, float] = (0.0, 0.0)
    coeffs: tuple[float, ...] = ()
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("constant", "affine", "radial"):
            raise LakeError(f"unknown profile kind {self.kind!r}")
        if self.kind == "radial" and not self.coeffs:
            raise LakeError("radial profile needs at least one coefficient")

    def __call__(self, x):
        X, Y = _xy(x)
        if self.kind == "constant":
            return np.full(np.shape(X), float(self.value))
        if self.kind == "affine":
            return self.value + self.slope[0] * X + self.slope[1] * Y
        r2 = (X - self.center[0]) ** 2 + (Y - self.center[1]) ** 2
        return np.polynomial.polynomial.polyval(r2, self.coeffs)

    def grad(self, x):
        X, Y = _xy(x)
        out = np.zeros(np.shape(X) + (2,))
        if self.kind == "affine":
            out[..., 0] = self.slope[0]
            out[..., 1] = self.slope[1]
        elif self.kind == "radial":
            dX, dY = X - self.center[0], Y - self.center[1]
            r2 = dX**2 + dY**2
            dcoef = np.polynomial.polynomial.polyder(self.coeffs)
            db_dr2 = np.polynomial.polynomial.polyval(r2, dcoef) if len(dcoef) else 0.0 * r2
            out[..., 0] = 2.0 * dX * db_dr2
            out[..., 1] = 2.0 * dY * db_dr2
        return out

    @classmethod
    def from_mapping(cls, data: Mapping) -> "Profile":
        kind = data.get("type", data.get("kind", "constant"))
        if kind == "constant":
            return cls("constant", value=float(data.get("value", 1.0)))
        if kind == "affine":
            return cls("affine", value=float(data.get("value", 0.0)),
                       slope=tuple(float(s) for s in data.get("slope", (0.0, 0.0))))
        if kind == "radial":
            return cls("radial", coeffs=tuple(float(c) for c in data["coeffs"]),
                       center=tuple(float(c) for c in data.get("center", (0.0, 0.0))))
        raise LakeError(f"unknown profile kind {kind!r}")

    def to_mapping(self) -> dict:
        if self.kind == "constant":
            return {"type": "constant", "value": self.value}
        if self.kind == "affine":
            return {"type": "affine", "value": self.value, "slope": list(self.slope)}
        return {"type": "radial", "coeffs": list(self.coeffs), "center": list(self.center)}


@dataclass(frozen=True)
class Shape:
    """Disc (``center``, ``radius``) or rectangle (``bounds = (x0, x1, y0, y1)``)."""

    kind: str = "disc"
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0
    bounds: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)

    def __post_init__(self):
        if self.kind == "disc":
            if self.radius <= 0:
                raise LakeError("disc radius must be positive")
        elif self.kind == "rectangle":
            x0, x1, y0, y1 = self.bounds
            if not (x1 > x0 and y1 > y0):
                raise LakeError("rectangle bounds must satisfy x0 < x1, y0 < y1")
        else:
            raise LakeError(f"unknown shape kind {self.kind!r}")

    @property
    def extent(self) -> tuple[float, float]:
        if self.kind == "disc":
            return 2 * self.radius, 2 * self.radius
        x0, x1, y0, y1 = self.bounds
        return x1 - x0, y1 - y0

    def phi(self, x):
        X, Y = _xy(x)
        if self.kind == "disc":
            return self.radius**2 - (X - self.center[0]) ** 2 - (Y - self.center[1]) ** 2
        x0, x1, y0, y1 = self.bounds
        return np.minimum(np.minimum(X - x0, x1 - X), np.minimum(Y - y0, y1 - Y))

    def grad_phi(self, x):
        X, Y = _xy(x)
        out = np.zeros(np.shape(X) + (2,))
        if self.kind == "disc":
            out[..., 0] = -2.0 * (X - self.center[0])
            out[..., 1] = -2.0 * (Y - self.center[1])
            return out
        x0, x1, y0, y1 = self.bounds
        d = np.stack([X - x0, x1 - X, Y - y0, y1 - Y], axis=-1)
        k = np.argmin(d, axis=-1)
        out[..., 0] = np.select([k == 0, k == 1], [1.0, -1.0], 0.0)
        out[..., 1] = np.select([k == 2, k == 3], [1.0, -1.0], 0.0)
        return out

    def max_grad_phi(self) -> float:
        return 2.0 * self.radius if self.kind == "disc" else 1.0

    @classmethod
    def from_mapping(cls, data: Mapping) -> "Shape":
        kind = data.get("type", data.get("kind", "disc"))
        if kind == "disc":
            return cls("disc", center=tuple(float(c) for c in data.get("center", (0.0, 0.0))),
                       radius=float(data.get("radius", 1.0)))
        if kind == "rectangle":
            return cls("rectangle", bounds=tuple(float(v) for v in data["bounds"]))
        raise LakeError(f"unknown shape kind {kind!r}")

    def to_mapping(self) -> dict:
        if self.kind == "disc":
            return {"type": "disc", "center": list(self.center), "radius": self.radius}
        return {"type": "rectangle", "bounds": list(self.bounds)}


@dataclass(frozen=True)
class LakeSpec:
    """Analytic lake: shape, depth ``b = c * phi**alpha`` and grid resolution."""

    shape: Shape
    c: Profile = field(default_factory=Profile)
    alpha: float = 0.0
    resolution: int = 64

    @property
    def h(self) -> float:
        return 1.0 / self.resolution

    def phi(self, x):
        return self.shape.phi(x)

    def depth(self, x):
        """Exact depth; extends by ``c`` (``alpha == 0``) or 0 outside the lake."""
        if self.alpha == 0:
            return self.c(x)
        return self.c(x) * np.maximum(self.shape.phi(x), 0.0) ** self.alpha

    def grad_depth(self, x):
        gc = self.c.grad(x)
        if self.alpha == 0:
            return gc
        phi = self.shape.phi(x)
        pos = np.maximum(phi, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            dphi_pow = np.where(phi > 0, self.alpha * pos ** (self.alpha - 1.0), 0.0)
        return (gc * (pos**self.alpha)[..., None]
                + (self.c(x) * dphi_pow)[..., None] * self.shape.grad_phi(x))

    def radial_coefficients(self) -> tuple[float, ...] | None:
        """Coefficients of ``b`` as a polynomial in ``|x|^2`` when that form exists."""
        if self.shape.kind != "disc" or tuple(self.shape.center) != (0.0, 0.0):
            return None
        P = np.polynomial.polynomial
        if self.c.kind == "constant":
            cc = (self.c.value,)
        elif self.c.kind == "radial" and tuple(self.c.center) == (0.0, 0.0):
            cc = self.c.coeffs
        else:
            return None
        if self.alpha != int(self.alpha):
            return None
        phi = (self.shape.radius**2, -1.0)
        return tuple(float(v) for v in P.polymul(cc, P.polypow(phi, int(self.alpha))))

    @classmethod
    def from_mapping(cls, data: Mapping) -> "LakeSpec":
        try:
            shape = Shape.from_mapping(data["shape"])
            depth = data.get("depth", {})
            c = Profile.from_mapping(depth.get("c", {"type": "constant", "value": 1.0}))
            alpha = float(depth.get("alpha", 0.0))
            resolution = int(data.get("resolution", 64))
        except (KeyError, TypeError) as exc:
            raise LakeError(f"malformed lake description: {exc}") from exc
        return cls(shape=shape, c=c, alpha=alpha, resolution=resolution)

    def to_mapping(self) -> dict:
        return {"shape": self.shape.to_mapping(),
                "depth": {"c": self.c.to_mapping(), "alpha": self.alpha},
                "resolution": self.resolution}


# ---------------------------------------------------------------------------
# rasterized lake


@dataclass(frozen=True, eq=False)
class Lake:
    spec: LakeSpec
    origin: tuple[float, float]
    h: float
    mask: np.ndarray
    b_cells: np.ndarray
    phi_cells: np.ndarray
    grad_b_cells: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    @property
    def n_interior(self) -> int:
        return int(self.mask.sum())

    @cached_property
    def centers(self) -> np.ndarray:
        nx, ny = self.mask.shape
        xs = self.origin[0] + (np.arange(nx) + 0.5) * self.h
        ys = self.origin[1] + (np.arange(ny) + 0.5) * self.h
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([X, Y], axis=-1)

    @cached_property
    def index(self) -> np.ndarray:
        """Map cell -> position in the interior unknown vector (-1 outside)."""
        idx = np.full(self.mask.shape, -1, dtype=np.int64)
        idx[self.mask] = np.arange(self.n_interior)
        return idx

    @cached_property
    def boundary_adjacent(self) -> np.ndarray:
        ext = ~self.mask
        near = np.zeros_like(self.mask)
        near[1:, :] |= ext[:-1, :]
        near[:-1, :] |= ext[1:, :]
        near[:, 1:] |= ext[:, :-1]
        near[:, :-1] |= ext[:, 1:]
        return self.mask & near

    @cached_property
    def max_grad_b(self) -> float:
        g = np.linalg.norm(self.grad_b_cells[self.mask], axis=-1)
        return float(g.max()) if g.size else 0.0

    @cached_property
    def _boundary_faces(self) -> tuple[np.ndarray, np.ndarray, cKDTree]:
        """Segments (start, end) of the staircase boundary, and a tree on midpoints."""
        h = self.h
        ox, oy = self.origin
        starts, ends = [], []
        m = self.mask
        # x-normal faces between (i, j) and (i+1, j)
        I, J = np.nonzero(m[:-1, :] != m[1:, :])
        xf = ox + (I + 1) * h
        starts.append(np.stack([xf, oy + J * h], -1))
        ends.append(np.stack([xf, oy + (J + 1) * h], -1))
        I, J = np.nonzero(m[:, :-1] != m[:, 1:])
        yf = oy + (J + 1) * h
        starts.append(np.stack([ox + I * h, yf], -1))
        ends.append(np.stack([ox + (I + 1) * h, yf], -1))
        s = np.concatenate(starts)
        e = np.concatenate(ends)
        return s, e, cKDTree(0.5 * (s + e))

    def cell_of(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        i = np.floor((x[..., 0] - self.origin[0]) / self.h).astype(np.int64)
        j = np.floor((x[..., 1] - self.origin[1]) / self.h).astype(np.int64)
        return i, j

    def is_interior(self, x) -> np.ndarray:
        i, j = self.cell_of(x)
        nx, ny = self.mask.shape
        ok = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
        out = np.zeros(np.shape(i), dtype=bool)
        out[ok] = self.mask[i[ok], j[ok]]
        return out

    def require_interior(self, x):
        if not np.all(self.is_interior(x)):
            raise LakeError("query point outside the interior mask")

    # exact (analytic) evaluations, used wherever the grid is not required
    def depth_exact(self, x):
        return self.spec.depth(x)

    def grad_depth_exact(self, x):
        return self.spec.grad_depth(x)

    def phi(self, x):
        return self.spec.phi(x)


def build_lake(spec: LakeSpec) -> Lake:
    """Rasterize ``spec`` on a cell-centered grid of spacing ``1/resolution``.

    Discs are placed so that their center is a cell center; rectangles so
    that their edges are cell faces.
    """
    if spec.alpha < 0:
        raise LakeError("alpha must be nonnegative")
    if spec.resolution <= 0:
        raise LakeError("resolution must be a positive integer")
    h = spec.h
    wx, wy = spec.shape.extent
    if min(wx, wy) * spec.resolution < MIN_CELLS_ACROSS:
        raise LakeError(f"fewer than {MIN_CELLS_ACROSS} cells across the domain")

    if spec.shape.kind == "disc":
        half = int(math.ceil(spec.shape.radius / h)) + PAD
        n = 2 * half + 1
        origin = (spec.shape.center[0] - (half + 0.5) * h, spec.shape.center[1] - (half + 0.5) * h)
        dims = (n, n)
    else:
        x0, x1, y0, y1 = spec.shape.bounds
        dims = (int(round((x1 - x0) / h)) + 2 * PAD, int(round((y1 - y0) / h)) + 2 * PAD)
        origin = (x0 - PAD * h, y0 - PAD * h)

    xs = origin[0] + (np.arange(dims[0]) + 0.5) * h
    ys = origin[1] + (np.arange(dims[1]) + 0.5) * h
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X, Y], axis=-1)
    phi = spec.phi(pts)
    mask = phi > 0
    if not mask.any():
        raise LakeError("lake has no interior cells")
    c = spec.c(pts)
    if np.min(c[mask]) <= 0:
        raise LakeError("depth prefactor c must be positive on the interior")
    b = spec.depth(pts)
    if np.min(b[mask]) <= 0:
        raise LakeError("depth must be positive on interior cells")
    grad_b = spec.grad_depth(pts)
    for arr in (mask, b, phi, grad_b):
        arr.setflags(write=False)
    return Lake(spec=spec, origin=origin, h=h, mask=mask, b_cells=b,
                phi_cells=phi, grad_b_cells=grad_b)


# ---------------------------------------------------------------------------
# grid interpolation


def bilinear(lake: Lake, field: np.ndarray, x) -> np.ndarray:
    """Bilinear interpolation of a cell-centered field (trailing dims allowed)."""
    x = np.asarray(x, dtype=float)
    fx = (x[..., 0] - lake.origin[0]) / lake.h - 0.5
    fy = (x[..., 1] - lake.origin[1]) / lake.h - 0.5
    i0 = np.floor(fx).astype(np.int64)
    j0 = np.floor(fy).astype(np.int64)
    tx = fx - i0
    ty = fy - j0
    nx, ny = lake.shape
    if np.any((i0 < 0) | (i0 + 1 >= nx) | (j0 < 0) | (j0 + 1 >= ny)):
        raise LakeError("interpolation stencil leaves the grid")
    w00 = (1 - tx) * (1 - ty)
    w10 = tx * (1 - ty)
    w01 = (1 - tx) * ty
    w11 = tx * ty
    tail = (1,) * (field.ndim - 2)
    w00, w10, w01, w11 = (w.reshape(w.shape + tail) for w in (w00, w10, w01, w11))
    return (w00 * field[i0, j0] + w10 * field[i0 + 1, j0]
            + w01 * field[i0, j0 + 1] + w11 * field[i0 + 1, j0 + 1])


def depth(lake: Lake, x) -> np.ndarray:
    """Bilinear interpolation of the cell depths at interior points ``x``."""
    lake.require_interior(x)
    return bilinear(lake, lake.b_cells, x)


def grad_depth(lake: Lake, x) -> np.ndarray:
    """Bilinear interpolation of the cell depth gradients at interior points ``x``."""
    lake.require_interior(x)
    return bilinear(lake, lake.grad_b_cells, x)


def dist_boundary(lake: Lake, x) -> np.ndarray:
    """Distance from interior points to the staircase boundary (exact for the raster)."""
    x = np.asarray(x, dtype=float)
    lake.require_interior(x)
    starts, ends, tree = lake._boundary_faces
    pts = x.reshape(-1, 2)
    k = min(8, len(starts))
    _, nn = tree.query(pts, k=k)
    nn = nn.reshape(len(pts), k)
    a = starts[nn]
    d = ends[nn] - a
    t = np.clip(np.einsum("nkc,nkc->nk", pts[:, None, :] - a, d) / np.einsum("nkc,nkc->nk", d, d), 0, 1)
    proj = a + t[..., None] * d
    dist = np.linalg.norm(pts[:, None, :] - proj, axis=-1).min(axis=1)
    return dist.reshape(x.shape[:-1])


# ---------------------------------------------------------------------------
# level-set components


@dataclass(frozen=True, eq=False)
class ComponentSet:
    """Connected cell set ``{|b - level_value| <= rho}`` grown from one seed cell."""

    cells: np.ndarray
    level_value: float
    rho: float
    seed: tuple[int, int]

    @property
    def size(self) -> int:
        return int(self.cells.sum())

    def contains(self, lake: Lake, x) -> np.ndarray:
        i, j = lake.cell_of(x)
        nx, ny = self.cells.shape
        ok = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
        out = np.zeros(np.shape(i), dtype=bool)
        out[ok] = self.cells[i[ok], j[ok]]
        return out

    def centers(self, lake: Lake) -> np.ndarray:
        return lake.centers[self.cells]

    def touches_boundary(self, lake: Lake) -> bool:
        return bool(np.any(self.cells & lake.boundary_adjacent))


_FOUR = ndimage.generate_binary_structure(2, 1)


def level_component(lake: Lake, z0, rho: float) -> ComponentSet:
    """Flood fill (4-connectivity) of ``|b - b(z0)| <= max(rho, h max|grad b|)`` from z0."""
    z0 = np.asarray(z0, dtype=float)
    if rho < 0:
        raise LakeError("rho must be nonnegative")
    if not lake.is_interior(z0):
        raise LakeError("z0 is not an interior point")
    level = float(lake.depth_exact(z0))
    tol = max(rho, lake.h * lake.max_grad_b)
    band = lake.mask & (np.abs(lake.b_cells - level) <= tol)
    i, j = (int(v) for v in lake.cell_of(z0))
    band[i, j] = True
    labels, _ = ndimage.label(band, structure=_FOUR)
    cells = labels == labels[i, j]
    cells.setflags(write=False)
    return ComponentSet(cells=cells, level_value=level, rho=tol, seed=(i, j))


def _set_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(cKDTree(b).query(a, k=1)[0].min())


def separation_constants(lake: Lake, centers: Sequence, max_halvings: int = 40
                         ) -> tuple[float, float, list[ComponentSet]]:
    """Dyadic search for the separation tolerance ``rho_b`` and the distance ``r0``.

    Returns ``(rho_b, r0, components)`` with the components evaluated at
    ``rho_b``.  ``rho_b`` is the first value of ``rho_max / 2**k`` (``rho_max``
    the range of ``b`` over the interior) for which every component avoids the
    boundary and all components are pairwise disjoint.
    """
    centers = [np.asarray(c, dtype=float) for c in centers]
    if not centers:
        raise LakeError("need at least one center")

    def valid(comps):
        if any(c.touches_boundary(lake) for c in comps):
            return False
        for a in range(len(comps)):
            for b_ in range(a + 1, len(comps)):
                if np.any(comps[a].cells & comps[b_].cells):
                    return False
        return True

    base = [level_component(lake, c, 0.0) for c in centers]
    if not valid(base):
        raise LakeError("level components overlap or touch the boundary at rho=0")

    bvals = lake.b_cells[lake.mask]
    rho_max = float(bvals.max() - bvals.min())
    rho_b, comps = 0.0, base
    if rho_max > 0:
        for k in range(max_halvings + 1):
            rho = rho_max / 2.0**k
            trial = [level_component(lake, c, rho) for c in centers]
            if valid(trial):
                rho_b, comps = rho, trial
                break

    dists = []
    for idx, comp in enumerate(comps):
        dists.append(float(dist_boundary(lake, comp.centers(lake)).min()))
        for other in comps[idx + 1:]:
            dists.append(_set_distance(comp.centers(lake), other.centers(lake)))
    return rho_b, min(dists), comps
