import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lakevortex.blob import Blob, deposit, init_blob
from lakevortex.diagnostics import (CSV_COLUMNS, FAIL, INCONCLUSIVE, PASS, center,
                                    default_h_ladder, depth_moment, energy, fit_log_law, inertia,
                                    localization_radius, mass_outside, psi_moment, psi_variance,
                                    record, sweep_protocol, transverse_moment, transverse_support)


def make_blob(lake, pos, w, gamma=None):
    pos = np.atleast_2d(np.asarray(pos, dtype=float))
    w = np.asarray(w, dtype=float)
    return Blob(pos, w, tuple(pos[0]), float(w.sum()) if gamma is None else gamma, 0.05, 1.0,
                "uniform", lake.h, 1.0)


particles = st.lists(st.tuples(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6), st.floats(0.01, 1.0)),
                     min_size=1, max_size=25)


def test_center_of_symmetric_blob(flat64):
    lake, _ = flat64
    blob = init_blob(lake, (0.123, -0.051), 1.0, 0.05)
    assert np.linalg.norm(center(blob) - [0.123, -0.051]) <= blob.spacing / 4


def test_center_single_particle_and_zero_circulation(flat64):
    lake, _ = flat64
    np.testing.assert_allclose(center(make_blob(lake, [0.2, 0.3], [0.4])), [0.2, 0.3], rtol=1e-15)
    with pytest.raises(ZeroDivisionError):
        center(make_blob(lake, [[0, 0], [0.1, 0]], [1.0, -1.0]))


@settings(max_examples=40, deadline=None)
@given(parts=particles, dx=st.floats(-0.3, 0.3), dy=st.floats(-0.3, 0.3),
       lam=st.floats(0.2, 3.0))
def test_center_and_inertia_equivariance(flat64, parts, dx, dy, lam):
    lake, _ = flat64
    a = np.array(parts)
    blob = make_blob(lake, a[:, :2], a[:, 2])
    z = center(blob)
    moved = blob.copy(a[:, :2] + [dx, dy])
    np.testing.assert_allclose(center(moved), z + [dx, dy], atol=1e-12)
    I = inertia(blob, z)
    assert I >= 0
    dil = blob.copy(z + lam * (a[:, :2] - z))
    assert inertia(dil, z) == pytest.approx(lam**2 * I, rel=1e-9, abs=1e-15)


def test_inertia_single_particle_zero(flat64):
    lake, _ = flat64
    b = make_blob(lake, [0.1, 0.1], [1.0])
    assert inertia(b, center(b)) == 0.0


def test_transverse_moment_on_level_set(radial64):
    lake, _ = radial64
    th = np.linspace(0, 2 * np.pi, 10, endpoint=False)
    pos = np.stack([np.cos(th), np.sin(th)], -1)
    b = make_blob(lake, pos, np.full(10, 0.1))
    assert transverse_moment(b, 1.5, lake) == pytest.approx(0.0, abs=1e-28)
    R_t, m_t = transverse_support(b, 1.5, lake, default_h_ladder(0.5))
    assert R_t == pytest.approx(0.0, abs=1e-14) and all(v == 0 for v in m_t.values())


@settings(max_examples=40, deadline=None)
@given(parts=particles, b0=st.floats(0.5, 2.0))
def test_transverse_moment_expansion_identity(radial64, parts, b0):
    lake, _ = radial64
    a = np.array(parts)
    blob = make_blob(lake, a[:, :2], a[:, 2])
    K = transverse_moment(blob, b0, lake)
    J1, J2 = depth_moment(blob, 1, lake), depth_moment(blob, 2, lake)
    g = math.fsum(blob.weights)
    assert K == pytest.approx(J2 - 2 * b0 * J1 + b0**2 * g, rel=1e-9, abs=1e-12)


def test_depth_moments_flat(flat64):
    lake, _ = flat64
    blob = init_blob(lake, (0.2, 0.1), 0.8, 0.05)
    for k in (1, 2, 4):
        assert depth_moment(blob, k, lake) == pytest.approx(0.8, rel=1e-14)


def test_depth_moments_concentrated(radial64):
    lake, _ = radial64
    res = []
    for eps in (0.05, 0.025, 0.0125):
        blob = init_blob(lake, (1.0, 0.0), 1.0, eps)
        res.append(max(abs(depth_moment(blob, k, lake) - 1.5**k) / eps for k in (1, 2, 4)))
    # |J_k - gamma b(z0)^k| <= C eps; symmetry makes it O(eps^2), so the ratio decreases
    assert sweep_protocol(dict(zip((0.05, 0.025, 0.0125), res))) == PASS and max(res) < 1.0


def test_transverse_support_endpoints(radial64):
    lake, _ = radial64
    blob = init_blob(lake, (1.0, 0.0), 1.0, 0.05)
    R_t, m_t = transverse_support(blob, 1.5, lake, [0.0, 0.01, 0.02])
    dev = np.abs(lake.depth_exact(blob.positions) - 1.5)
    assert m_t[0.0] == pytest.approx(1.0 - blob.weights[dev == 0].sum())
    _, m_end = transverse_support(blob, 1.5, lake, [R_t])
    assert m_end[R_t] == 0.0
    vals = [m_t[h] for h in sorted(m_t)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_mass_outside_and_chebyshev(flat64, rng):
    lake, _ = flat64
    pos = rng.normal(scale=0.1, size=(200, 2))
    blob = make_blob(lake, pos, np.full(200, 0.005))
    z = center(blob)
    I = inertia(blob, z)
    for R in (0.05, 0.1, 0.2, 0.4):
        m = mass_outside(blob, z, R)
        assert 0 <= m <= 1.0 + 1e-12
        assert m <= I / R**2
    assert mass_outside(blob, z, 10.0) == 0.0
    with pytest.raises(ValueError):
        mass_outside(blob, z, 0.0)


def test_localization_radius():
    eps = 0.0125
    L = abs(math.log(eps))
    assert localization_radius(eps) == pytest.approx(math.sqrt(math.log(L) / L))
    with pytest.raises(ValueError):
        localization_radius(0.5)


def test_energy_positive_and_log_growth(radial128):
    lake, op = radial128
    E = [energy(op, init_blob(lake, (1.0, 0.0), 1.0, e)) for e in (0.05, 0.025, 0.0125)]
    assert all(e > 0 for e in E)
    a, c = fit_log_law((0.05, 0.025, 0.0125), E)
    # slope of E against |ln eps| is b(z0) / 2 pi
    assert c == pytest.approx(1.5 / (2 * math.pi), rel=0.15)


def test_psi_moment_pair(flat64):
    lake, _ = flat64
    b = make_blob(lake, [[0.0, 0.0], [0.3, 0.4]], [0.5, 0.25])
    from lakevortex.velocity import mollifier
    d = mollifier(lake, b)
    expected = 2 * 0.5 * 0.25 * math.log(0.5) + math.log(d) * (0.5**2 + 0.25**2)
    assert psi_moment(b, lake) == pytest.approx(expected, rel=1e-12)


def test_psi_variance_nonnegative(radial64):
    lake, _ = radial64
    blob = init_blob(lake, (1.0, 0.0), 1.0, 0.05)
    assert psi_variance(blob, lake) >= 0


def test_record_invariants_and_purity(radial64):
    lake, op = radial64
    blob = init_blob(lake, (1.0, 0.0), 1.0, 0.05)
    ladder = default_h_ladder(0.5)
    r1 = record(0.0, blob, lake, op, ladder)
    r2 = record(0.0, blob, lake, op, ladder)
    assert r1.to_dict() == r2.to_dict()
    assert r1.I_eps >= 0 and r1.K_eps >= 0 and 0 <= r1.mass_out <= 1
    assert r1.circulation == 1.0
    assert set(r1.as_row()) == set(CSV_COLUMNS)
    vals = [r1.m_t[h] for h in sorted(r1.m_t)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert math.isnan(record(0.0, blob, lake, None).E_eps)


def test_mass_expansion_at_init(radial64):
    lake, _ = radial64
    vals = []
    for eps in (0.05, 0.025, 0.0125):
        blob = init_blob(lake, (1.0, 0.0), 1.0, eps)
        m = math.fsum(blob.weights / lake.depth_exact(blob.positions))
        vals.append(abs(m - 1.0 / 1.5) * abs(math.log(eps)))
    assert sweep_protocol(dict(zip((0.05, 0.025, 0.0125), vals))) == PASS


@pytest.mark.parametrize("vals,verdict", [
    ({0.05: 1.0, 0.025: 1.5, 0.0125: 1.9}, PASS),     # within factor 2
    ({0.05: 3.0, 0.025: 1.0, 0.0125: 0.1}, PASS),     # strictly decreasing
    ({0.05: 1.0, 0.025: 3.0, 0.0125: 0.5}, FAIL),
    ({0.05: 0.1, 0.025: 0.3, 0.0125: 0.9}, FAIL),
    ({0.05: 0.0, 0.025: 0.0, 0.0125: 0.0}, PASS),
    ({0.05: 1.0}, INCONCLUSIVE),
    ({0.05: 1.0, 0.025: float("nan")}, INCONCLUSIVE),
])
def test_sweep_protocol(vals, verdict):
    assert sweep_protocol(vals) == verdict


def test_fit_log_law_recovers_line():
    eps = [0.05, 0.025, 0.0125]
    vals = [0.3 + 0.2 * abs(math.log(e)) for e in eps]
    a, c = fit_log_law(eps, vals)
    assert a == pytest.approx(0.3) and c == pytest.approx(0.2)
