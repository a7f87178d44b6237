"""Sweep-level diagnostics properties on the shared scenario runs."""

import json
import math

import numpy as np
import pytest

from lakevortex.diagnostics import PASS, sweep_protocol
from lakevortex.runner import R_t_exponent, scaling_report, write_sweep

from conftest import SWEEP

pytestmark = pytest.mark.slow


def drift_law_ratio(res, i=0):
    """max_t |b(z_eps(t)) - b(z0)| / ((sup_s sqrt(I) + 1/|ln eps|) t + eps)."""
    s = res.series
    t = np.asarray(s.times)
    b0 = float(res.lake.depth_exact(np.asarray(res.blobs0[i].z0)))
    db = np.abs(res.lake.depth_exact(s.centers(i)) - b0)
    L = abs(math.log(res.eps))
    bracket = (math.sqrt(s.column(i, "I_eps").max()) + 1 / L) * t + res.eps
    return float((db / bracket).max())


@pytest.mark.parametrize("which", ["radial_sweep", "beach_sweep"])
def test_center_depth_drift_law(request, which):
    sweep = request.getfixturevalue(which)
    q = {e: drift_law_ratio(r) for e, r in sweep.items()}
    assert sweep_protocol(q) == PASS, q


def test_mass_expansion_along_run(radial_sweep):
    vals = {}
    for e, r in radial_sweep.items():
        b0 = float(r.lake.depth_exact(np.asarray(r.blobs0[0].z0)))
        w = r.blobs0[0].weights
        m = [math.fsum(w / r.lake.depth_exact(p[0])) for p in r.series.snapshots]
        vals[e] = max(abs(x - 1.0 / b0) for x in m) * abs(math.log(e))
    assert sweep_protocol(vals) == PASS, vals


def test_transverse_identity_along_run(radial_sweep):
    r = radial_sweep[SWEEP[-1]]
    s = r.series
    b0 = 1.5
    K = s.column(0, "K_eps")
    J1 = np.array([rec.J[1] for rec in s.blob_series(0)])
    J2 = np.array([rec.J[2] for rec in s.blob_series(0)])
    np.testing.assert_allclose(K, J2 - 2 * b0 * J1 + b0**2, atol=1e-12)


def test_scaling_report_radial(radial_sweep, tmp_path):
    results = [radial_sweep[e] for e in SWEEP]
    rep = scaling_report(results)
    laws = rep["blobs"][0]["laws"]
    for name in ("I_ln", "K_ln", "mass_out_lnln", "R_t_scaled"):
        assert laws[name]["verdict"] == PASS
    k = rep["blobs"][0]["extra"]["R_t_exponent"]
    assert k == R_t_exponent(results) and k > 0
    write_sweep(results, tmp_path, plots=True)
    on_disk = json.loads((tmp_path / "scaling_report.json").read_text())
    assert on_disk["overall"] == rep["overall"]
    assert (tmp_path / "scaling.png").is_file()
    assert sorted(p.name for p in tmp_path.glob("eps_*")) == ["eps_0.0125", "eps_0.025",
                                                              "eps_0.05"]


def test_monitor_metadata(radial_sweep, flat_sweep):
    mon = radial_sweep[SWEEP[0]].series.meta["monitor"]
    assert isinstance(mon, dict) and "disabled" not in mon
    assert "disabled" in flat_sweep[SWEEP[0]].series.meta["monitor"]
