"""Command-line frontend: reproducible runs emitting CSV/JSON artifacts.

Subcommands: ``check`` (assumption screens), ``solve`` (grid solvers),
``verify`` (Monte Carlo cross-checks and analytic bounds), ``merton``
(constant-coefficient benchmark), ``kappa`` (discount-moment envelopes).

Exit codes: 0 success, 1 verification/convergence failure, 2 usage or
parse error.  Every artifact embeds the config digest and the seed; with a
fixed seed reruns are byte-identical.
"""

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import finance, model as model_mod, pde, simulate
from .errors import HjbkitError, ParameterError, StabilityError

__all__ = ["main"]


def _config_digest(args):
    payload = {k: repr(v) for k, v in sorted(vars(args).items())
               if k not in ("func", "out")}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _write_json(path, payload, digest, seed):
    doc = {"config_digest": digest, "seed": seed}
    doc.update(payload)
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _provenance_lines(digest, seed):
    return [f"config_digest={digest}", f"seed={seed}"]


def _load_model(args):
    if args.model:
        return model_mod.load_model(args.model)
    if getattr(args, "market", None):
        market = finance.load_market(args.market)
        return finance.to_control_model(market, (args.npi, args.nc))
    raise ParameterError("one of --model / --market is required")


def _grid(args):
    return pde.Grid1D(args.grid_min, args.grid_max, args.nodes,
                      boundary=args.boundary)


def cmd_check(args):
    mdl = _load_model(args)
    box = mdl.domain_box or [[args.grid_min, args.grid_max]] * mdl.dim
    report = model_mod.check_assumption1(mdl, box, samples=args.samples,
                                         seed=args.seed)
    digest = _config_digest(args)
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "assumption_report.json"),
                report.as_dict(), digest, args.seed)
    return 0 if report.passed else 1


def cmd_solve(args):
    digest = _config_digest(args)
    os.makedirs(args.out, exist_ok=True)
    override = None
    if getattr(args, "market", None):
        market = finance.load_market(args.market)
        mdl = finance.to_control_model(market, (args.npi, args.nc))
        if args.closed_form:
            override = finance.control_override(market)
    else:
        mdl = _load_model(args)
    grid = _grid(args)
    try:
        if args.infinite:
            vf, pf, report = pde.solve_infinite_horizon(
                mdl, grid, args.dt, args.tol_dt, args.t_max,
                control_override=override)
        else:
            tg = pde.TimeGrid(args.horizon, args.steps)
            vf, pf, report = pde.solve_finite_horizon(
                mdl, grid, tg, control_override=override,
                slice_stride=args.slice_stride)
    except StabilityError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    header = _provenance_lines(digest, args.seed)
    vf.to_csv(os.path.join(args.out, "value.csv"), header)
    pf.to_csv(os.path.join(args.out, "policy.csv"), header)
    _write_json(os.path.join(args.out, "solve_report.json"),
                report.as_dict(), digest, args.seed)
    if args.infinite and not report.converged:
        print("error: long-time march did not converge before t_max",
              file=sys.stderr)
        return 1
    return 0


def _read_field_csv(path):
    ys, ts, us = [], [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("y,"):
                continue
            a, b, c = line.split(",")[:3]
            ys.append(float(a))
            ts.append(float(b))
            us.append(float(c))
    ys, ts, us = np.array(ys), np.array(ts), np.array(us)
    uy = np.unique(ys)
    ut = np.unique(ts)
    values = np.empty((len(ut), len(uy)))
    for j, t in enumerate(ut):
        sel = ts == t
        order = np.argsort(ys[sel])
        values[j] = us[sel][order]
    grid = pde.Grid1D(float(uy[0]), float(uy[-1]), len(uy))
    return pde.ValueField(grid, values, ut)


def _read_policy_csv(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("y,"):
                continue
            rows.append([float(v) for v in line.split(",")])
    rows = np.array(rows)
    ys, ts = rows[:, 0], rows[:, 1]
    uy, ut = np.unique(ys), np.unique(ts)
    k = rows.shape[1] - 2
    table = np.empty((len(ut), len(uy), k))
    for j, t in enumerate(ut):
        sel = ts == t
        order = np.argsort(ys[sel])
        table[j] = rows[sel][order][:, 2:]
    grid = pde.Grid1D(float(uy[0]), float(uy[-1]), len(uy))
    return pde.PolicyField(grid, table, ut)


def _bound_spec(doc):
    kind = doc["kind"]
    if kind == "drift_discount":
        return simulate.DriftDiscountBound(doc["alpha"], doc["beta"],
                                           doc["P"], doc["Q"])
    if kind == "uniform_discount":
        return simulate.UniformDiscountBound(doc["w"], doc["L1"], doc["L2"])
    if kind == "envelope":
        return simulate.ExponentialEnvelopeBound(doc["K"], doc["M"])
    raise ParameterError(f"unknown bound kind {kind!r}")


def cmd_verify(args):
    digest = _config_digest(args)
    os.makedirs(args.out, exist_ok=True)
    mdl = _load_model(args)
    mc = simulate.MonteCarloConfig(paths=args.paths, dt=args.dt_sim,
                                   seed=args.seed)
    status = 0
    results = {}

    if args.bounds:
        with open(args.bounds) as fh:
            doc = json.load(fh)
        spec = _bound_spec(doc)
        report = simulate.verify_bounds(
            mdl, spec, np.atleast_1d(doc.get("y0", 0.0)),
            float(doc.get("T", args.horizon or 1.0)), mc,
            times=doc.get("times"))
        results["bounds"] = report.as_dict()
        if not report.met:
            status = 1

    if args.field:
        fld = _read_field_csv(args.field)
        if args.policy:
            policy = _read_policy_csv(args.policy).as_policy()
        else:
            raise ParameterError("--policy is required with --field")
        horizon = args.horizon or float(fld.time_stamps[-1])
        finite = len(fld.time_stamps) > 1
        probes = [float(v) for v in args.probes.split(",")] if args.probes \
            else list(fld.grid.ys[fld.grid.nodes // 4::max(1, fld.grid.nodes // 4)])
        rows = []
        cmp_model = mdl if finite else model_mod.ControlModel(
            dim=mdl.dim, drift=mdl.drift, discount_rate=mdl.discount_rate,
            running_reward=mdl.running_reward,
            terminal_reward=lambda y: np.zeros(np.asarray(y).shape[:-1]),
            controls=mdl.controls, lip_L1=mdl.lip_L1, lip_L2=mdl.lip_L2)
        for y in probes:
            node = int(np.argmin(np.abs(fld.grid.ys - y)))
            u_pde = float(fld.layer(0.0 if finite else None)[node])
            est = simulate.estimate_value(cmp_model, policy,
                                          [fld.grid.ys[node]], 0.0, horizon, mc)
            gap = abs(u_pde - est.mean)
            ok = gap <= 3.0 * est.std_error + args.tol
            rows.append({"y": float(fld.grid.ys[node]), "pde": u_pde,
                         "mc": est.mean, "std_error": est.std_error,
                         "gap": gap, "met": bool(ok)})
            if not ok:
                status = 1
        results["field_probes"] = rows

    if not results:
        raise ParameterError("nothing to verify: pass --field and/or --bounds")
    _write_json(os.path.join(args.out, "verify_report.json"), results,
                digest, args.seed)
    return status


def cmd_merton(args):
    digest = _config_digest(args)
    os.makedirs(args.out, exist_ok=True)
    market = finance.load_market(args.market)
    bench = finance.merton_benchmark(market)
    payload = {"benchmark": bench.as_dict()}
    status = 0
    if not args.skip_solve:
        mdl = finance.to_control_model(market, (args.npi, args.nc))
        grid = _grid(args)
        vf, _, report = pde.solve_infinite_horizon(
            mdl, grid, args.dt, args.tol_dt, args.t_max,
            control_override=finance.control_override(market))
        interior = vf.values[0][1:-1]
        rel_err = float(np.max(np.abs(interior - bench.u)) / bench.u)
        payload["solver"] = report.as_dict()
        payload["relative_error"] = rel_err
        if not report.converged:
            status = 1
    if args.emit_reduced:
        payload["reduced_model"] = finance.reduced_model_descriptor(
            market, (args.npi, args.nc))
    _write_json(os.path.join(args.out, "merton.json"), payload, digest,
                args.seed)
    return status


def cmd_kappa(args):
    digest = _config_digest(args)
    os.makedirs(args.out, exist_ok=True)
    mdl = _load_model(args)
    mc = simulate.MonteCarloConfig(paths=args.paths, dt=args.dt_sim,
                                   seed=args.seed)
    table = model_mod.estimate_kappa(
        mdl, args.radius, args.horizon, model_mod.constant_policies(mdl), mc)
    table.to_csv(os.path.join(args.out, "kappa.csv"))
    _write_json(os.path.join(args.out, "kappa.json"), table.as_dict(),
                digest, args.seed)
    return 0 if not table.non_integrable else 1


def _add_common(p):
    p.add_argument("--model", help="model file (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-min", type=float, default=-5.0)
    p.add_argument("--grid-max", type=float, default=5.0)
    p.add_argument("--nodes", type=int, default=201)
    p.add_argument("--boundary", default="one_sided",
                   choices=["one_sided", "linear_extrapolation"])


def _add_market(p):
    p.add_argument("--market", help="market file (JSON)")
    p.add_argument("--npi", type=int, default=21,
                   help="portfolio-grid resolution")
    p.add_argument("--nc", type=int, default=21,
                   help="consumption-grid resolution")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hjbkit",
        description="discounted stochastic control: solve, simulate, verify")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run the assumption screens")
    _add_common(p)
    _add_market(p)
    p.add_argument("--samples", type=int, default=256)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("solve", help="run a grid solver")
    _add_common(p)
    _add_market(p)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--infinite", action="store_true")
    p.add_argument("--dt", type=float, default=1e-3,
                   help="time step for the long-time march")
    p.add_argument("--tol-dt", type=float, default=1e-6)
    p.add_argument("--t-max", type=float, default=500.0)
    p.add_argument("--closed-form", action="store_true",
                   help="use the closed-form market controls")
    p.add_argument("--slice-stride", type=int, default=10 ** 9,
                   help="retain every n-th time slice")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="Monte Carlo cross-checks")
    _add_common(p)
    _add_market(p)
    p.add_argument("--field", help="value.csv from solve")
    p.add_argument("--policy", help="policy.csv from solve")
    p.add_argument("--probes", help="comma-separated probe states")
    p.add_argument("--bounds", help="bound scenario file (JSON)")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--paths", type=int, default=20000)
    p.add_argument("--dt-sim", type=float, default=1e-2)
    p.add_argument("--tol", type=float, default=5e-3,
                   help="extra allowance on |PDE - MC|")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("merton", help="constant-coefficient benchmark")
    _add_common(p)
    _add_market(p)
    p.add_argument("--dt", type=float, default=2e-3)
    p.add_argument("--tol-dt", type=float, default=1e-6)
    p.add_argument("--t-max", type=float, default=500.0)
    p.add_argument("--skip-solve", action="store_true")
    p.add_argument("--emit-reduced", action="store_true",
                   help="embed the reduced model descriptor")
    p.set_defaults(func=cmd_merton)

    p = sub.add_parser("kappa", help="discount-moment envelope table")
    _add_common(p)
    _add_market(p)
    p.add_argument("--radius", type=int, default=2)
    p.add_argument("--horizon", type=float, default=4.0)
    p.add_argument("--paths", type=int, default=4000)
    p.add_argument("--dt-sim", type=float, default=1e-2)
    p.set_defaults(func=cmd_kappa)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (json.JSONDecodeError, KeyError, ParameterError) as err:
        print(f"error: {err!r}", file=sys.stderr)
        return 2
    except HjbkitError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
