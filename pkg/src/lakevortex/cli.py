"""``lakevortex`` command line: simulate, sweep, green-probe, limit-ode, rearrange-check.

Exit codes: 0 success, 2 configuration error, 3 boundary-guard trip,
4 solver failure, 5 support left its level component (T_eps monitor),
6 a check reported FAIL.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError, RunConfig
from .elliptic import (SolverError, assemble, compare_disc_green, green_kernel, singular_part,
                       write_grid_csv)
from .lake import LakeError, build_lake

log = logging.getLogger("lakevortex")

EXIT_OK, EXIT_CONFIG, EXIT_GUARD, EXIT_SOLVER, EXIT_SUPPORT, EXIT_CHECK = 0, 2, 3, 4, 5, 6
_STOP_CODES = {"completed": EXIT_OK, "guard_trip": EXIT_GUARD, "cfl_violation": EXIT_GUARD,
               "solver_failure": EXIT_SOLVER, "support_exit": EXIT_SUPPORT}


def _load(args) -> RunConfig:
    if args.config and args.scenario:
        raise ConfigError("give either --config or --scenario, not both")
    if args.config:
        cfg = cfgmod.load(args.config)
    elif args.scenario:
        cfg = cfgmod.scenario(args.scenario)
    else:
        raise ConfigError("a --config file or a --scenario name is required")
    if getattr(args, "resolution", None):
        cfg = cfg.with_resolution(args.resolution)
    if getattr(args, "dt", None):
        if args.dt <= 0:
            raise ConfigError("--dt must be positive")
        cfg = replace(cfg, dt_max=float(args.dt))
    if getattr(args, "eps", None):
        cfg = cfg.with_eps(args.eps)
    if args.out:
        cfg = replace(cfg, output=args.out)
    cfgmod.validate(cfg)
    return cfg


def _progress(t: float) -> None:
    log.info("t = %.4f", t)


def cmd_simulate(args) -> int:
    from .runner import run, write_run

    cfg = _load(args)
    out = Path(cfg.output)
    try:
        # nothing is written before the run completes, so errors leave no artifacts
        res = run(cfg, progress=_progress)
    except LakeError as exc:
        raise ConfigError(str(exc)) from exc
    write_run(res, out, plots=not args.no_plots)
    s = res.series
    print(f"{cfg.scenario}: eps={cfg.eps:g} stop={s.stop_reason} samples={len(s.times)} "
          f"steps={s.meta['steps']} sup|z-z_lim|={res.comparison(0).sup_error:.4g} -> {out}")
    return _STOP_CODES.get(s.stop_reason, EXIT_SOLVER)


def cmd_sweep(args) -> int:
    from .runner import run, write_sweep

    cfg = _load(args)
    eps_list = cfg.sweep or (cfg.eps,)
    results = []
    for e in eps_list:
        try:
            res = run(cfg.with_eps(e), progress=_progress)
        except LakeError as exc:
            raise ConfigError(str(exc)) from exc
        print(f"  eps={e:g}: stop={res.series.stop_reason}, wall={res.series.meta['wall_clock_s']:.1f}s")
        results.append(res)
        code = _STOP_CODES.get(res.series.stop_reason, EXIT_SOLVER)
        if code not in (EXIT_OK, EXIT_SUPPORT):
            write_sweep(results, cfg.output, plots=not args.no_plots)
            return code
    report = write_sweep(results, cfg.output, plots=not args.no_plots)
    for k, blob in enumerate(report["blobs"]):
        for name, law in blob["laws"].items():
            vals = ", ".join(f"{v:.4g}" for v in law["values"])
            print(f"blob {k} {name:>14}: [{vals}] {law['verdict']}")
    print(f"overall: {report['overall']} -> {cfg.output}")
    if any(r.series.stop_reason == "support_exit" for r in results):
        return EXIT_SUPPORT
    return EXIT_OK


def cmd_green_probe(args) -> int:
    if args.config:
        spec = cfgmod.load(args.config).lake
    elif args.scenario:
        spec = cfgmod.scenario(args.scenario).lake
    else:
        raise ConfigError("a --config file or a --scenario name is required")
    if args.resolution:
        spec = replace(spec, resolution=args.resolution)
    y = np.array(args.y, dtype=float)
    lake = build_lake(spec)
    op = assemble(lake)
    try:
        G = green_kernel(op, y, method=args.method)
    except LakeError as exc:
        raise ConfigError(f"invalid source point: {exc}") from exc
    out = Path(args.out or "runs/green_probe")
    out.mkdir(parents=True, exist_ok=True)
    S = singular_part(lake, G.source)
    write_grid_csv(lake, G.values, out / "green.csv", "G")
    write_grid_csv(lake, S, out / "singular.csv", "S")
    write_grid_csv(lake, G.values - S, out / "remainder.csv", "R")
    info = {"y": list(map(float, y)), "source_cell_center": list(G.source),
            "lake": spec.to_mapping(), "residual": G.residual_norm, "method": G.method}
    if spec.shape.kind == "disc" and spec.alpha == 0 and spec.c.kind == "constant":
        info["image_comparison"] = compare_disc_green(op, G)
        from .elliptic import disc_image_green
        exact = np.where(lake.mask, disc_image_green(lake.centers, G.source, spec.shape.radius,
                                                     spec.shape.center, spec.c.value), 0.0)
        write_grid_csv(lake, exact, out / "image_formula.csv", "G_exact")
    with open(out / "green_probe.json", "w") as fh:
        json.dump(info, fh, indent=2)
    print(json.dumps(info.get("image_comparison", {"residual": G.residual_norm})))
    return EXIT_OK


def cmd_limit_ode(args) -> int:
    from .limit import LimitError, analytic_radial, integrate_limit

    cfg = _load(args)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    T = args.T if args.T is not None else cfg.T
    times = np.linspace(0.0, T, int(round(T / cfg.sample_interval)) + 1) if T > 0 else np.array([0.0])
    report = {"T": T, "dt": args.dt_limit, "blobs": []}
    coeffs = cfg.lake.radial_coefficients()
    for i, b in enumerate(cfg.blobs):
        try:
            traj = integrate_limit(cfg.lake, b.z0, b.gamma, T, args.dt_limit, sample_times=times)
        except LimitError as exc:
            raise ConfigError(str(exc)) from exc
        traj.to_csv(out / f"blob{i}_limit.csv")
        entry = {"z0": list(b.z0), "gamma": b.gamma, "z_T": traj.z[-1].tolist(),
                 "max_level_error": float(traj.level_error.max())}
        if coeffs is not None:
            exact = analytic_radial(coeffs, b.z0, b.gamma, traj.t)
            entry["analytic_max_error"] = float(np.linalg.norm(exact - traj.z, axis=-1).max())
        report["blobs"].append(entry)
    with open(out / "limit_report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    print(json.dumps(report))
    return EXIT_OK


def cmd_rearrange_check(args) -> int:
    from .rearrangement import brute_force_sup, canonical_instances, rearrangement_bound

    rows = []
    ok = True
    for name, inst in canonical_instances().items():
        bound = rearrangement_bound(inst)
        res = brute_force_sup(inst)
        rel = abs(res.value - bound) / bound
        d = np.linalg.norm(res.centers, axis=-1)
        filled = res.density > 0
        disc = d < inst.R0
        ring_ok = bool(np.all(np.abs(d[filled ^ disc] - inst.R0) <= inst.spacing))
        passed = rel <= 0.02 and ring_ok
        ok &= passed
        rows.append({"instance": name, "bound": bound, "brute_force": res.value,
                     "rel_diff": rel, "disc_maximizer": ring_ok, "verdict": "PASS" if passed else "FAIL"})
        print(f"{name:>9}: bound={bound:.6f} brute={res.value:.6f} rel={rel:.2e} "
              f"disc={ring_ok} {'PASS' if passed else 'FAIL'}")
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        with open(Path(args.out) / "rearrangement.json", "w") as fh:
            json.dump(rows, fh, indent=2)
    return EXIT_OK if ok else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lakevortex", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, runs=True):
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--scenario", choices=sorted(cfgmod.SCENARIOS), help="built-in scenario")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--resolution", type=int, help="cells per unit length")
        if runs:
            sp.add_argument("--dt", type=float, help="upper bound on the time step")
            sp.add_argument("--eps", type=float, help="override the core size")
            sp.add_argument("--no-plots", action="store_true", help="skip PNG figures")

    sp = sub.add_parser("simulate", help="run one configuration")
    common(sp)
    sp.set_defaults(func=cmd_simulate)
    sp = sub.add_parser("sweep", help="run the eps-sweep and emit the scaling report")
    common(sp)
    sp.set_defaults(func=cmd_sweep)
    sp = sub.add_parser("green-probe", help="Green function, singular part and remainder")
    common(sp, runs=False)
    sp.add_argument("--y", nargs=2, type=float, required=True, metavar=("X", "Y"))
    sp.add_argument("--method", choices=("cg", "direct"), default="cg")
    sp.set_defaults(func=cmd_green_probe)
    sp = sub.add_parser("limit-ode", help="integrate the limit point-vortex motion")
    common(sp, runs=False)
    sp.add_argument("--T", type=float, help="final time (default: the config's T)")
    sp.add_argument("--dt-limit", type=float, default=1e-3)
    sp.set_defaults(func=cmd_limit_ode)
    sp = sub.add_parser("rearrange-check", help="certify the rearrangement bound")
    sp.add_argument("--out", help="directory for rearrangement.json")
    sp.set_defaults(func=cmd_rearrange_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, LakeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
