"""Particle transport under the rescaled lake dynamics ``x' = (v + F)(x) / |ln eps|``.

Each RK4 stage deposits every blob, solves one stream problem for the summed
``b omega`` and interpolates the grid velocity at the particles.  By
linearity this equals each blob's own velocity plus the external field of
the others.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .blob import Blob, deposit
from .diagnostics import DiagnosticsRecord, default_h_ladder, record
from .elliptic import SolverError, StreamField, WeightedOperator, solve_stream
from .lake import Lake, LakeError, dist_boundary, separation_constants
from .velocity import stream_gradient, perp

DEFAULT_CFL = 0.5
HARD_CFL = 1.0


class GuardTrip(RuntimeError):
    """A particle left the region where the solver and diagnostics are valid."""


class CFLViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class GuardReport:
    min_phi: float
    min_dist: float
    phi_min: float
    flagged: bool


def phi_threshold(lake: Lake) -> float:
    return lake.h * lake.spec.shape.max_grad_phi()


def boundary_guard(lake: Lake, blob: Blob) -> GuardReport:
    """Minimum of ``phi`` and of the boundary distance over the particles."""
    x = blob.positions
    phi = lake.phi(x)
    thr = phi_threshold(lake)
    inside = lake.is_interior(x)
    md = float(dist_boundary(lake, x).min()) if inside.all() else 0.0
    mp = float(phi.min())
    return GuardReport(min_phi=mp, min_dist=md, phi_min=thr, flagged=bool(mp < thr or not inside.all()))


@dataclass
class SimState:
    t: float
    blobs: list
    streams: list = field(default_factory=list)
    dt: float | None = None
    cfl: float = DEFAULT_CFL
    substeps: int = 0
    max_speed: float = 0.0


def rk4(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of ``x' = fn(x)``."""
    k1 = fn(x)
    k2 = fn(x + 0.5 * dt * k1)
    k3 = fn(x + 0.5 * dt * k2)
    k4 = fn(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def advect_frozen(velocity: Callable[[np.ndarray], np.ndarray], x: np.ndarray, dt: float,
                  steps: int = 1) -> np.ndarray:
    """RK4 advection through a time-independent velocity field."""
    for _ in range(steps):
        x = rk4(velocity, x, dt)
    return x


class Propagator:
    """Evaluates rescaled particle velocities for a list of blobs."""

    def __init__(self, op: WeightedOperator, method: str = "direct"):
        self.op = op
        self.lake = op.lake
        self.method = method
        self.solves = 0

    def total_stream(self, blobs: Sequence[Blob], positions: Sequence[np.ndarray]) -> StreamField:
        bw = np.zeros(self.lake.shape)
        for b, x in zip(blobs, positions):
            deposit(b.copy(x), self.lake, out=bw)
        self.solves += 1
        return solve_stream(self.op, bw, method=self.method)

    def velocities(self, blobs: Sequence[Blob], positions: Sequence[np.ndarray]) -> list:
        try:
            sf = self.total_stream(blobs, positions)
            out = []
            for b, x in zip(blobs, positions):
                g = stream_gradient(self.lake, sf.values, x, sf.clamp_width)
                v = perp(g) / self.lake.depth_exact(x)[:, None]
                out.append(v / abs(math.log(b.eps)))
        except LakeError as exc:
            raise GuardTrip(str(exc)) from exc
        return out


def step(state: SimState, dt: float, prop: Propagator, cfl_limit: float = HARD_CFL) -> SimState:
    """Advance all blobs by ``dt`` with RK4, re-solving the field at every stage."""
    if dt == 0:
        return state
    blobs = state.blobs
    X = [b.positions for b in blobs]
    k1 = prop.velocities(blobs, X)
    vmax = max(float(np.linalg.norm(k, axis=-1).max()) for k in k1)
    if abs(dt) * vmax > cfl_limit * prop.lake.h * (1 + 1e-12):
        raise CFLViolation(f"dt={dt:.3e} exceeds the CFL limit at speed {vmax:.3e}")
    X2 = [x + 0.5 * dt * k for x, k in zip(X, k1)]
    k2 = prop.velocities(blobs, X2)
    X3 = [x + 0.5 * dt * k for x, k in zip(X, k2)]
    k3 = prop.velocities(blobs, X3)
    X4 = [x + dt * k for x, k in zip(X, k3)]
    k4 = prop.velocities(blobs, X4)
    new = [b.copy(x + dt / 6.0 * (a + 2 * c + 2 * d + e))
           for b, x, a, c, d, e in zip(blobs, X, k1, k2, k3, k4)]
    for b in new:
        rep = boundary_guard(prop.lake, b)
        if rep.flagged:
            raise GuardTrip(f"particle at phi={rep.min_phi:.3e} below {rep.phi_min:.3e}")
    return SimState(t=state.t + dt, blobs=new, streams=[], dt=dt, cfl=state.cfl,
                    substeps=state.substeps + 1, max_speed=vmax)


@dataclass
class TimeSeries:
    times: list
    records: list                 # per sample: list of DiagnosticsRecord, one per blob
    snapshots: list               # per sample: list of particle position arrays
    meta: dict
    stop_reason: str = "completed"
    final_state: SimState | None = None

    def blob_series(self, i: int) -> list[DiagnosticsRecord]:
        return [r[i] for r in self.records]

    def column(self, i: int, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.blob_series(i)])

    def centers(self, i: int) -> np.ndarray:
        return np.array([r.z_eps for r in self.blob_series(i)])


def sample_times(T: float, interval: float) -> np.ndarray:
    if T < 0 or interval <= 0:
        raise LakeError("need T >= 0 and a positive sample interval")
    n = int(math.floor(T / interval + 1e-9))
    ts = [k * interval for k in range(n + 1)]
    if T - ts[-1] > 1e-12:
        ts.append(T)
    return np.array(ts)


def support_monitor(lake: Lake, blobs: Sequence[Blob]):
    """Level components ``C_{rho_b}`` per blob, or ``None`` when ``b`` has no usable levels."""
    try:
        rho_b, r0, comps = separation_constants(lake, [b.z0 for b in blobs])
    except LakeError:
        return None
    return rho_b, r0, comps


def _records(t, blobs, lake, op, ladder, method, shared_stream=None):
    recs = []
    for b in blobs:
        bw = deposit(b, lake)
        sf = shared_stream if (shared_stream is not None and len(blobs) == 1) else None
        recs.append(record(t, b, lake, op, ladder, stream=sf, bw=bw, method=method))
    return recs


def simulate(lake: Lake, op: WeightedOperator, blobs: Sequence[Blob], T: float,
             sample_interval: float, cfl: float = DEFAULT_CFL, dt_max: float | None = None,
             method: str = "direct", meta: dict | None = None,
             progress: Callable[[float], None] | None = None) -> TimeSeries:
    """Run to rescaled time ``T``, recording diagnostics at each sample time.

    The run stops early (``stop_reason`` set, series truncated at the last
    valid sample) when a particle trips the boundary guard, when the solver
    fails, or when a blob leaves its level component ``C_{rho_b}``.
    """
    if T < 0:
        raise LakeError("T must be nonnegative")
    if cfl <= 0 or cfl > HARD_CFL:
        raise LakeError(f"cfl must lie in (0, {HARD_CFL}]")
    wall0 = _time.perf_counter()
    prop = Propagator(op, method=method)
    mon = support_monitor(lake, blobs)
    ladder = default_h_ladder(mon[0]) if mon else ()
    ts = sample_times(T, sample_interval)

    state = SimState(t=0.0, blobs=[b.copy() for b in blobs], cfl=cfl)
    series = TimeSeries(times=[], records=[], snapshots=[], meta=dict(meta or {}))
    series.meta.update({
        "monitor": "disabled (depth has no separated level components)" if mon is None
        else {"rho_b": mon[0], "r0": mon[1]},
        "h_ladder": list(ladder), "cfl": cfl, "method": method, "T": T,
        "sample_interval": sample_interval,
    })

    def emit(st: SimState) -> bool:
        series.times.append(float(st.t))
        series.records.append(_records(st.t, st.blobs, lake, op, ladder, method))
        series.snapshots.append([b.positions.copy() for b in st.blobs])
        if mon is not None:
            for b, comp in zip(st.blobs, mon[2]):
                if not comp.contains(lake, b.positions).all():
                    series.stop_reason = "support_exit"
                    return False
        return True

    ok = emit(state)
    speed = None
    try:
        for target in ts[1:]:
            if not ok:
                break
            while state.t < target - 1e-12:
                if speed is None:
                    speed = max(float(np.linalg.norm(k, axis=-1).max())
                                for k in prop.velocities(state.blobs, [b.positions for b in state.blobs]))
                dt = cfl * lake.h / speed if speed > 0 else target - state.t
                if dt_max is not None:
                    dt = min(dt, dt_max)
                remaining = target - state.t
                if dt >= remaining * (1 - 1e-9):
                    dt = remaining
                else:
                    # even out the steps inside the sample interval
                    dt = remaining / math.ceil(remaining / dt)
                new = step(state, dt, prop)
                if abs(new.t - target) < 1e-9:
                    new.t = float(target)
                state, speed = new, new.max_speed
            if progress is not None:
                progress(state.t)
            ok = emit(state)
    except GuardTrip as exc:
        series.stop_reason = "guard_trip"
        series.meta["stop_detail"] = str(exc)
    except SolverError as exc:
        series.stop_reason = "solver_failure"
        series.meta["stop_detail"] = str(exc)
    except CFLViolation as exc:
        series.stop_reason = "cfl_violation"
        series.meta["stop_detail"] = str(exc)
    series.final_state = state
    series.meta["T_eps"] = series.times[-1] if series.stop_reason != "completed" else T
    series.meta["steps"] = state.substeps
    series.meta["solves"] = prop.solves
    series.meta["wall_clock_s"] = _time.perf_counter() - wall0
    return series
