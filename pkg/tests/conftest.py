import numpy as np
import pytest

from lakevortex.elliptic import assemble, solve_stream
from lakevortex.lake import LakeSpec, Profile, Shape, build_lake, dist_boundary


def unit_disc(resolution=128, c=None, alpha=0.0):
    return LakeSpec(shape=Shape("disc", radius=1.0), c=c or Profile(), alpha=alpha,
                    resolution=resolution)


def radial_spec(resolution=128, radius=2.0):
    return LakeSpec(shape=Shape("disc", radius=radius),
                    c=Profile("radial", coeffs=(1.0, 0.5)), resolution=resolution)


def affine_spec(resolution=64):
    return LakeSpec(shape=Shape("rectangle", bounds=(0, 1, 0, 1)),
                    c=Profile("affine", value=0.1, slope=(0.0, 1.0)), resolution=resolution)


def dist_grid(lake):
    D = np.full(lake.shape, -1.0)
    D[lake.mask] = dist_boundary(lake, lake.centers[lake.mask])
    return D


def manufactured_radial(res, ghost=False):
    """b = 1 + r^2/2 on the unit disc with exact Psi = (1 - r^2)^2.

    With ``ghost`` the exact values are imposed at the exterior ghost cells;
    otherwise the staircase carries zero data.
    """
    spec = LakeSpec(shape=Shape("disc", radius=1.0), c=Profile("radial", coeffs=(1.0, 0.5)),
                    resolution=res)
    lake = build_lake(spec)
    s = np.sum(lake.centers**2, axis=-1)
    q = 1 + s / 2
    rhs = np.where(lake.mask, -8 * (1 - s) / q + 12 * s / q**2, 0.0)
    exact = (1 - s) ** 2
    op = assemble(lake)
    psi = solve_stream(op, rhs, method="direct", ghost_values=exact if ghost else None).values
    region = dist_grid(lake) >= 0.1
    return float(np.abs(psi - exact)[region].max())


@pytest.fixture(scope="session")
def flat128():
    lake = build_lake(unit_disc(128))
    return lake, assemble(lake)


@pytest.fixture(scope="session")
def flat64():
    lake = build_lake(unit_disc(64))
    return lake, assemble(lake)


@pytest.fixture(scope="session")
def radial64():
    lake = build_lake(radial_spec(64))
    return lake, assemble(lake)


@pytest.fixture(scope="session")
def radial128():
    lake = build_lake(radial_spec(128))
    return lake, assemble(lake)


@pytest.fixture(scope="session")
def affine64():
    lake = build_lake(affine_spec(64))
    return lake, assemble(lake)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- scenario runs

SWEEP = (0.05, 0.025, 0.0125)
_RUNS: dict = {}


def scenario_run(name, eps, resolution=None):
    """Run a built-in scenario once per session and memoize the result."""
    from lakevortex import config as cfgmod
    from lakevortex.runner import run

    key = (name, eps, resolution)
    if key not in _RUNS:
        cfg = cfgmod.scenario(name).with_eps(eps)
        if resolution is not None:
            cfg = cfg.with_resolution(resolution)
        _RUNS[key] = run(cfg)
    return _RUNS[key]


@pytest.fixture(scope="session")
def radial_sweep():
    return {e: scenario_run("radial", e) for e in SWEEP}


@pytest.fixture(scope="session")
def flat_sweep():
    return {e: scenario_run("flat", e) for e in SWEEP}


@pytest.fixture(scope="session")
def beach_sweep():
    return {e: scenario_run("beach", e) for e in SWEEP}


@pytest.fixture(scope="session")
def affine_run():
    return scenario_run("affine", 0.0125)


@pytest.fixture(scope="session")
def two_vortex_run():
    return scenario_run("two-vortex", 0.025)


# ---------------------------------------------------------------- acceptance summary

ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
