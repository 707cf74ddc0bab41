"""JSON experiment configuration.

A config file is a JSON object whose keys override :data:`DEFAULTS`
(nested objects are merged key by key). The defaults reproduce the two-step
bilinear example: ``a_c = b_c = 1``, ``g1c = g2c = sqrt(2)``, ``T0 = 0.1``,
``s_v = 0.01``, state weights ``(0, 1)`` on the second state component,
control weights ``1e-3``, ``m0 = (0, 0)``, ``S0 = diag(5, 0.1)``, ``y0 = 0``.

Schema (all keys optional except ``experiment``)::

    experiment            example1 | example2-dp | example2-ibc | nu-sweep
                          | mc-demo | bounds-check
    model                 {a_c, b_c, g1c, g2c, s_v, T0}
    weights               {q: [q1, q2], r: [r0, r1]}
    initial               {m0: [..], S0: [[..]], y0, prior_interpretation}
    search                {lo, hi, step, tol}          first-control grid
    dp                    {quad_order, conv_rtol, max_order}
    ibc                   {nu: null | float, figure_nus: [3 floats],
                           covariance: filtered | predicted, nu_max}
    nu_sweep              {nu_from, nu_to, nu_step}
    plan                  {plant: linear_bilinear | integrator_theta,
                           horizon, nu, n_s, seed, u_bounds, x0, theta, p,
                           s_v_theta}
    example1              {p_grid: [..], u0}
    bounds                {s_x: [..], s_v: [..], gain_lo, gain_hi, gain_points}
"""

import copy
import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError

__all__ = ["EXPERIMENTS", "DEFAULTS", "ExperimentConfig", "load_config", "config_hash"]

EXPERIMENTS = ("example1", "example2-dp", "example2-ibc", "nu-sweep", "mc-demo", "bounds-check")

DEFAULTS = {
    "experiment": None,
    "model": {"a_c": 1.0, "b_c": 1.0, "g1c": math.sqrt(2.0), "g2c": math.sqrt(2.0),
              "s_v": 0.01, "T0": 0.1},
    "weights": {"q": [0.0, 1.0], "r": [1e-3, 1e-3]},
    "initial": {"m0": [0.0, 0.0], "S0": [[5.0, 0.0], [0.0, 0.1]], "y0": 0.0,
                "prior_interpretation": "posterior"},
    "search": {"lo": -6.0, "hi": 6.0, "step": 0.01, "tol": 1e-6},
    "dp": {"quad_order": 32, "conv_rtol": 1e-8, "max_order": 8192},
    "ibc": {"nu": None, "figure_nus": [0.5, 0.7816, 1.0], "covariance": "filtered",
            "nu_max": 10.0},
    "nu_sweep": {"nu_from": 0.0, "nu_to": 1.0, "nu_step": 0.05},
    "plan": {"plant": "linear_bilinear", "horizon": 2, "nu": 0.0, "n_s": 2000, "seed": 0,
             "u_bounds": [-6.0, 6.0], "x0": None, "theta": 1, "p": 0.5, "s_v_theta": 1e-4},
    "example1": {"p_grid": [round(0.1 * i, 1) for i in range(11)], "u0": 1.0},
    "bounds": {"s_x": [0.1, 1.0, 10.0], "s_v": [0.1, 1.0, 10.0],
               "gain_lo": -2.0, "gain_hi": 1.0, "gain_points": 41},
}


def _merge(base, over, path=""):
    out = copy.deepcopy(base)
    for key, val in over.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{path + key!r} must be an object")
            out[key] = _merge(base[key], val, path + key + ".")
        else:
            out[key] = val
    return out


def _num(x, name, *, positive=False, nonneg=False):
    try:
        v = float(x)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {x!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{name} must be finite")
    if positive and v <= 0:
        raise ConfigError(f"{name} must be > 0")
    if nonneg and v < 0:
        raise ConfigError(f"{name} must be >= 0")
    return v


def _validate(d):
    if d["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {d['experiment']!r}")
    m = d["model"]
    for k in ("a_c", "b_c", "g1c", "g2c"):
        _num(m[k], f"model.{k}")
    _num(m["s_v"], "model.s_v", positive=True)
    _num(m["T0"], "model.T0", positive=True)
    w = d["weights"]
    if len(w["q"]) != 2 or len(w["r"]) != 2:
        raise ConfigError("weights.q and weights.r need two entries")
    for i in range(2):
        _num(w["q"][i], "weights.q", nonneg=True)
        _num(w["r"][i], "weights.r", positive=True)
    ini = d["initial"]
    if ini["prior_interpretation"] not in ("prior", "posterior"):
        raise ConfigError("initial.prior_interpretation must be 'prior' or 'posterior'")
    S0 = np.asarray(ini["S0"], dtype=float)
    if S0.shape != (2, 2) or len(ini["m0"]) != 2:
        raise ConfigError("initial.m0 must have 2 entries and S0 must be 2x2")
    if not np.allclose(S0, S0.T) or np.linalg.eigvalsh(S0).min() < -1e-10:
        raise ConfigError("initial.S0 must be symmetric positive semidefinite")
    s = d["search"]
    if not _num(s["lo"], "search.lo") < _num(s["hi"], "search.hi"):
        raise ConfigError("search.lo must be < search.hi")
    _num(s["step"], "search.step", positive=True)
    _num(s["tol"], "search.tol", positive=True)
    if int(d["dp"]["quad_order"]) < 8:
        raise ConfigError("dp.quad_order must be >= 8")
    ibc = d["ibc"]
    if ibc["nu"] is not None:
        _num(ibc["nu"], "ibc.nu", nonneg=True)
    if len(ibc["figure_nus"]) != 3:
        raise ConfigError("ibc.figure_nus needs exactly three values")
    for v in ibc["figure_nus"]:
        _num(v, "ibc.figure_nus", nonneg=True)
    if ibc["covariance"] not in ("filtered", "predicted"):
        raise ConfigError("ibc.covariance must be 'filtered' or 'predicted'")
    _num(ibc["nu_max"], "ibc.nu_max", positive=True)
    sw = d["nu_sweep"]
    if _num(sw["nu_from"], "nu_sweep.nu_from", nonneg=True) > _num(sw["nu_to"], "nu_sweep.nu_to"):
        raise ConfigError("nu_sweep.nu_from must be <= nu_sweep.nu_to")
    _num(sw["nu_step"], "nu_sweep.nu_step", positive=True)
    p = d["plan"]
    if p["plant"] not in ("linear_bilinear", "integrator_theta"):
        raise ConfigError("plan.plant must be 'linear_bilinear' or 'integrator_theta'")
    if int(p["horizon"]) < 2:
        raise ConfigError("plan.horizon must be >= 2")
    if int(p["n_s"]) < 2:
        raise ConfigError("plan.n_s must be >= 2")
    for v in np.atleast_1d(p["nu"]):
        _num(v, "plan.nu", nonneg=True)
    lo, hi = p["u_bounds"]
    if not _num(lo, "plan.u_bounds") < _num(hi, "plan.u_bounds"):
        raise ConfigError("plan.u_bounds must satisfy lo < hi")
    if p["theta"] not in (-1, 1):
        raise ConfigError("plan.theta must be -1 or 1")
    if not 0.0 <= _num(p["p"], "plan.p") <= 1.0:
        raise ConfigError("plan.p must lie in [0, 1]")
    _num(p["s_v_theta"], "plan.s_v_theta", positive=True)
    for v in d["example1"]["p_grid"]:
        if not 0.0 <= _num(v, "example1.p_grid") <= 1.0:
            raise ConfigError("example1.p_grid entries must lie in [0, 1]")
    if _num(d["example1"]["u0"], "example1.u0") == 0.0:
        raise ConfigError("example1.u0 must be nonzero")
    b = d["bounds"]
    for k in ("s_x", "s_v"):
        if not b[k]:
            raise ConfigError(f"bounds.{k} must be non-empty")
        for v in b[k]:
            _num(v, f"bounds.{k}", positive=True)
    if int(b["gain_points"]) < 2:
        raise ConfigError("bounds.gain_points must be >= 2")


def config_hash(data):
    """sha256 of the canonical JSON form of a config dict."""
    if isinstance(data, ExperimentConfig):
        data = data.data
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class ExperimentConfig:
    data: dict

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        if "experiment" not in raw:
            raise ConfigError("config needs an 'experiment' key")
        d = _merge(DEFAULTS, raw)
        _validate(d)
        return cls(d)

    def with_overrides(self, **sections):
        raw = copy.deepcopy(self.data)
        for sec, vals in sections.items():
            raw[sec].update(vals)
        return ExperimentConfig.from_dict(raw)

    @property
    def experiment(self):
        return self.data["experiment"]

    @property
    def sha256(self):
        return config_hash(self.data)

    def __getitem__(self, key):
        return self.data[key]


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(raw)
