"""Command-line experiment runner.

    ibc run <config.json> [--seed N] [--out DIR]
    ibc sweep-nu <config.json> --nu-from A --nu-to B --nu-step S

Outputs go to ``--out``, else ``$IBC_OUT_DIR``, else ``./ibc_out``. Every CSV
starts with a ``#`` metadata line carrying the config sha256, followed by
the column names; floats are written in shortest round-trip form. Each run
also writes ``result.json``. Failures print a JSON error record to stderr and
exit nonzero (2 for configuration problems, 1 for numerical failures).
"""

import argparse
import csv
import json
import os
import sys
import warnings

import numpy as np

from . import analytic, bounds, dp, example1, mc
from .config import ExperimentConfig, config_hash, load_config
from .exceptions import BoundaryMinimumWarning, ConfigError, IBCError
from .lingauss import example2_model, initial_belief
from .optim import SearchSpec, grid_minimize, tune_nu

__all__ = ["main", "run", "sweep_nu", "emit_figure1_data", "write_csv", "write_json",
           "verify_artifact", "OUT_ENV"]

OUT_ENV = "IBC_OUT_DIR"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def write_csv(path, header, rows, cfg_hash, **meta):
    """Metadata line, header line, then rows."""
    meta_items = " ".join(f"{k}={json.dumps(_jsonable(v), separators=(',', ':'))}"
                          for k, v in meta.items())
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_sha256={cfg_hash}" + (f" {meta_items}" if meta_items else "") + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError("row length does not match the header")
            w.writerow([_fmt(v) for v in row])
    return path


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def verify_artifact(path, config):
    """True when the artifact at ``path`` records the hash of ``config``."""
    want = config_hash(config)
    with open(path) as fh:
        if path.endswith(".json"):
            return json.load(fh).get("config_sha256") == want
        first = fh.readline()
    return first.startswith("#") and f"config_sha256={want}" in first.split()


def emit_figure1_data(path, grid, r0_curve, psi_curves, cfg_hash):
    """Write ``u0,R0,Psi_nu1,Psi_nu2,Psi_nu3``; ``psi_curves`` maps three
    ``nu`` values to curves sampled on ``grid``. Values are unscaled."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty u0 grid")
    if len(psi_curves) != 3:
        raise ValueError("need exactly three Psi curves")
    cols = [np.asarray(r0_curve, dtype=float)] + [np.asarray(c, dtype=float) for c in psi_curves.values()]
    if any(c.shape != grid.shape for c in cols):
        raise ValueError("curves are not sampled on the common u0 grid")
    rows = zip(grid, *cols)
    return write_csv(path, ["u0", "R0", "Psi_nu1", "Psi_nu2", "Psi_nu3"], rows, cfg_hash,
                     nu=[float(v) for v in psi_curves])


def _example2(cfg):
    m = cfg["model"]
    model = example2_model(m["a_c"], m["b_c"], m["g1c"], m["g2c"], m["s_v"], m["T0"])
    ini = cfg["initial"]
    belief = initial_belief(model, ini["m0"], ini["S0"], ini["y0"], ini["prior_interpretation"])
    w = analytic.Weights(q=tuple(cfg["weights"]["q"]), r=tuple(cfg["weights"]["r"]))
    return model, belief, w


def _spec(cfg):
    s = cfg["search"]
    return SearchSpec(lo=s["lo"], hi=s["hi"], step=s["step"], tol=s["tol"])


def _dp_cfg(cfg):
    s, d = cfg["search"], cfg["dp"]
    return dp.DpConfig(quad_order=int(d["quad_order"]), u0_grid=(s["lo"], s["hi"], s["step"]),
                       refine_tol=s["tol"], conv_rtol=d["conv_rtol"], max_order=int(d["max_order"]))


def _tune(model, belief, w, target, cfg):
    cov = cfg["ibc"]["covariance"]
    return tune_nu(lambda nu: (lambda u: analytic.psi(model, belief, u, nu, w, covariance=cov)),
                   target, _spec(cfg), nu_max=cfg["ibc"]["nu_max"])


def _run_example2_dp(cfg, out):
    model, belief, w = _example2(cfg)
    res = dp.dp_solve(model, belief, w, _dp_cfg(cfg))
    write_csv(os.path.join(out, "r0_curve.csv"), ["u0", "R0"], zip(res.grid, res.curve), cfg.sha256)
    return {"dp_minimizers": res.minimizers, "dp_value": res.value}


def _run_example2_ibc(cfg, out):
    model, belief, w = _example2(cfg)
    cov = cfg["ibc"]["covariance"]
    res = dp.dp_solve(model, belief, w, _dp_cfg(cfg))
    payload = {"dp_minimizers": res.minimizers, "dp_value": res.value, "covariance": cov}
    nu = cfg["ibc"]["nu"]
    if nu is None:
        tuned = _tune(model, belief, w, res.control, cfg)
        nu = tuned.nu
        payload["tuned_nu"] = tuned.nu
        payload["tuned_argmin"] = tuned.argmin
        write_csv(os.path.join(out, "nu_trace.csv"), ["nu", "abs_argmin"], tuned.trace, cfg.sha256)
    payload["nu"] = nu
    step1 = analytic.ibc_step1(model, belief, nu, w, _spec(cfg), covariance=cov)
    payload["ibc_minimizers"] = step1.minimizers
    psi_curves = {}
    for v in cfg["ibc"]["figure_nus"]:
        psi_curves[float(v)] = [analytic.psi(model, belief, u, v, w, covariance=cov) for u in res.grid]
    emit_figure1_data(os.path.join(out, "figure1.csv"), res.grid, res.curve, psi_curves, cfg.sha256)
    psi_tuned = [analytic.psi(model, belief, u, nu, w, covariance=cov) for u in res.grid]
    write_csv(os.path.join(out, "curves.csv"), ["u0", "R0", "Psi"], zip(res.grid, res.curve, psi_tuned),
              cfg.sha256, nu=nu)
    return payload


def _sweep_rows(cfg, nus):
    model, belief, w = _example2(cfg)
    cov = cfg["ibc"]["covariance"]
    rows = []
    for nu in nus:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BoundaryMinimumWarning)
            r = grid_minimize(lambda u: analytic.psi(model, belief, u, nu, w, covariance=cov), _spec(cfg))
        rows.append((float(nu), max(abs(x) for x in r.minimizers), r.multiplicity, r.fun, r.at_boundary))
    return rows


def _nu_values(lo, hi, step):
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(n)]


def _run_nu_sweep(cfg, out, nus=None):
    sw = cfg["nu_sweep"]
    nus = nus if nus is not None else _nu_values(sw["nu_from"], sw["nu_to"], sw["nu_step"])
    rows = _sweep_rows(cfg, nus)
    write_csv(os.path.join(out, "nu_sweep.csv"),
              ["nu", "abs_argmin", "multiplicity", "value", "at_boundary"], rows, cfg.sha256, nu=nus)
    return {"nus": nus, "abs_argmin": [r[1] for r in rows]}


def _run_example1(cfg, out):
    u0 = float(cfg["example1"]["u0"])
    rows = []
    for p in cfg["example1"]["p_grid"]:
        for theta in (-1, 1):
            x1 = 1.0 + theta * u0
            u1 = example1.ibc_step2_ex1(u0, x1)
            x2, cost = example1.simulate_ex1(p, theta, u0)
            rows.append((float(p), theta, u0, u1, x2, cost, example1.expected_cost_ex1(p, u0),
                         example1.analytic_min_cost(p)))
    write_csv(os.path.join(out, "example1.csv"),
              ["p", "theta", "u0", "u1", "x2", "cost", "expected_cost", "analytic_min_cost"],
              rows, cfg.sha256)
    return {"max_abs_x2": max(abs(r[4]) for r in rows), "max_expected_cost": max(r[6] for r in rows)}


def _run_bounds(cfg, out):
    b = cfg["bounds"]
    gains = np.linspace(b["gain_lo"], b["gain_hi"], int(b["gain_points"]))
    rows = []
    for s_x in b["s_x"]:
        for s_v in b["s_v"]:
            ch = bounds.ScalarChannel(float(s_x), float(s_v))
            for kind, rep, k in (("tightness", bounds.check_tightness(ch), bounds.optimal_gain(ch).k),
                                 ("entropy_identity", bounds.entropy_identity(ch), bounds.optimal_gain(ch).k)):
                rows.append((kind, ch.s_x, ch.s_v, k, bounds.mi_linear_gain(ch, k), rep.lhs, rep.rhs,
                             rep.slack))
            for g in gains:
                info = bounds.mi_linear_gain(ch, g)
                for kind, rep in (("theorem2", bounds.check_theorem2(ch, g)),
                                  ("data_processing", bounds.check_data_processing(ch, g))):
                    rows.append((kind, ch.s_x, ch.s_v, float(g), info, rep.lhs, rep.rhs, rep.slack))
    # for theorem2 rows lhs is J(k) and rhs the bound
    write_csv(os.path.join(out, "bounds.csv"), ["check", "s_x", "s_v", "k", "I", "lhs", "rhs", "slack"],
              rows, cfg.sha256)
    ineq = [r[7] for r in rows if r[0] in ("theorem2", "data_processing")]
    eq = [abs(r[7]) for r in rows if r[0] in ("tightness", "entropy_identity")]
    return {"min_inequality_slack": min(ineq), "max_identity_error": max(eq),
            "all_hold": min(ineq) >= -bounds.HOLD_SLACK}


def _run_mc_demo(cfg, out):
    p = cfg["plan"]
    seed = int(p["seed"])
    plan_cfg = mc.PlanConfig(horizon=int(p["horizon"]), nu=p["nu"], n_s=int(p["n_s"]), seed=seed,
                             u_bounds=tuple(p["u_bounds"]))
    if p["plant"] == "linear_bilinear":
        model, belief, w = _example2(cfg)
        if plan_cfg.horizon != 2:
            raise ConfigError("the linear_bilinear plant is a two-step problem; use horizon 2")
        dyn = mc.linear_gaussian_dynamics(model)
        posterior = mc.KalmanPosterior(model, belief)
        cost = mc.Example2Cost(q=tuple(w.q), r=tuple(w.r))
        x0 = p["x0"]
        if x0 is None:
            x0 = posterior.sample(1, mc.stream(seed + 1, 99))[0]
    else:
        dyn = mc.integrator_theta_dynamics(p["s_v_theta"])
        posterior = mc.ThetaPosterior(p["p"], 1.0, p["s_v_theta"])
        cost = mc.terminal_cost(lambda x: x[:, 0] ** 2)
        x0 = [1.0, float(p["theta"])]
    trace = mc.ibc_plan(dyn, posterior, plan_cfg, cost, x0)
    states = np.asarray(trace.states)
    rows = []
    for k, u in enumerate(trace.controls):
        y = trace.observations[k] if k < len(trace.observations) else float("nan")
        rows.append((k, u, y, *states[k + 1]))
    write_csv(os.path.join(out, "mc_trace.csv"),
              ["k", "u", "y_next"] + [f"x_next_{i}" for i in range(states.shape[1])], rows, cfg.sha256)
    return {"controls": trace.controls, "observations": trace.observations,
            "x0": np.asarray(x0, dtype=float), "realized_cost": trace.realized_cost,
            "seeds": {"plan": seed, "plant": seed + 1}}


_DISPATCH = {
    "example1": _run_example1,
    "example2-dp": _run_example2_dp,
    "example2-ibc": _run_example2_ibc,
    "nu-sweep": _run_nu_sweep,
    "mc-demo": _run_mc_demo,
    "bounds-check": _run_bounds,
}


def _finish(cfg, out, payload):
    payload = dict(payload)
    payload.update({"experiment": cfg.experiment, "config": cfg.data, "config_sha256": cfg.sha256,
                    "seed": cfg["plan"]["seed"]})
    write_json(os.path.join(out, "result.json"), payload)
    return payload


def _out_dir(out):
    out = out or os.environ.get(OUT_ENV) or "ibc_out"
    os.makedirs(out, exist_ok=True)
    return out


def run(cfg, out=None, seed=None):
    """Run one experiment; returns the result payload."""
    if not isinstance(cfg, ExperimentConfig):
        cfg = ExperimentConfig.from_dict(cfg)
    if seed is not None:
        cfg = cfg.with_overrides(plan={"seed": int(seed)})
    out = _out_dir(out)
    return _finish(cfg, out, _DISPATCH[cfg.experiment](cfg, out))


def sweep_nu(cfg, nu_from, nu_to, nu_step, out=None):
    if not isinstance(cfg, ExperimentConfig):
        cfg = ExperimentConfig.from_dict(cfg)
    if not nu_step > 0 or nu_from > nu_to or nu_from < 0:
        raise ConfigError("need 0 <= nu_from <= nu_to and nu_step > 0")
    cfg = cfg.with_overrides(nu_sweep={"nu_from": nu_from, "nu_to": nu_to, "nu_step": nu_step})
    out = _out_dir(out)
    return _finish(cfg, out, _run_nu_sweep(cfg, out))


def _parser():
    ap = argparse.ArgumentParser(prog="ibc", description="Information based control experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiment described by a JSON config")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    s = sub.add_parser("sweep-nu", help="argmin of the penalized objective over a nu grid")
    s.add_argument("config")
    s.add_argument("--nu-from", type=float, required=True)
    s.add_argument("--nu-to", type=float, required=True)
    s.add_argument("--nu-step", type=float, required=True)
    s.add_argument("--out")
    return ap


def _fail(kind, exc, code):
    record = {"status": "error", "kind": kind, "type": type(exc).__name__, "message": str(exc)}
    sys.stderr.write(json.dumps(record) + "\n")
    return code


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            payload = run(cfg, args.out, args.seed)
        else:
            payload = sweep_nu(cfg, args.nu_from, args.nu_to, args.nu_step, args.out)
    except ConfigError as exc:
        return _fail("config", exc, 2)
    except (IBCError, ValueError, np.linalg.LinAlgError) as exc:
        return _fail("numerical", exc, 1)
    summary = {k: v for k, v in payload.items() if k != "config"}
    print(json.dumps(_jsonable(summary), sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
