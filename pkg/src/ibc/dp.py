"""Exact dynamic-programming solution of the two-step bilinear example.

The second control has a closed form given ``(m1, S1)``; the cost-to-go
``V1(u0)`` is its expectation over the predictive density of ``y1``, computed
by Gauss-Hermite quadrature. The first control minimizes
``R0(u0) = first-stage quadratic + V1(u0)`` by grid scan and golden-section
refinement.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_hermitenorm

from .analytic import propagate_moments, quad_coeffs, step2_coeffs
from .exceptions import ConvergenceError
from .optim import SearchSpec, grid_minimize

__all__ = ["DpConfig", "R1Result", "DpResult", "r1_eval", "value_v1", "r0", "dp_solve"]


@dataclass(frozen=True)
class DpConfig:
    quad_order: int = 32
    u0_grid: tuple = (-6.0, 6.0, 0.01)
    refine_tol: float = 1e-6
    conv_rtol: float = 1e-8
    max_order: int = 8192

    def __post_init__(self):
        if self.quad_order < 8:
            raise ValueError("quad_order must be >= 8")
        lo, hi, step = self.u0_grid
        if not step > 0 or not lo < hi:
            raise ValueError(f"bad u0_grid {self.u0_grid}")
        if not self.refine_tol > 0:
            raise ValueError("refine_tol must be > 0")

    def search_spec(self):
        lo, hi, step = self.u0_grid
        return SearchSpec(lo=lo, hi=hi, step=step, tol=self.refine_tol)


@dataclass(frozen=True)
class R1Result:
    coeffs: object
    u1: float
    value: float


@dataclass
class DpResult:
    control: float
    minimizers: list
    value: float
    grid: np.ndarray
    curve: np.ndarray

    @property
    def multiplicity(self):
        return len(self.minimizers)


def _step1_pred(model, belief, u0):
    pred = propagate_moments(model, belief, u0)
    C = model.C
    SC = pred.sigma @ C
    W1 = model.s_v + C @ SC
    S1 = pred.sigma - np.outer(SC, SC) / W1
    return pred.mu, W1, S1


def r1_eval(model, belief, u0, y1, w):
    """Second-stage coefficients, optimal ``u1`` and optimal cost-to-go.

    ``belief`` is the filtered belief at step 0 (it already contains ``y0``).
    """
    m1_pred, _, S1 = _step1_pred(model, belief, u0)
    m1 = m1_pred + S1 @ model.C / model.s_v * (y1 - model.C @ m1_pred)
    c = step2_coeffs(model, m1, S1, w)
    return R1Result(coeffs=c, u1=c.argmin, value=c.min_value)


@lru_cache(maxsize=16)
def _hermite_rule(order):
    nodes, weights = roots_hermitenorm(order)
    return nodes, weights / np.sqrt(2.0 * np.pi)


def _v1_at_order(model, m1_pred, W1, S1, w, order):
    nodes, weights = _hermite_rule(order)
    gain = S1 @ model.C * (np.sqrt(W1) / model.s_v)
    means = m1_pred[None, :] + nodes[:, None] * gain[None, :]

    Q = w.Q(2, model.n)
    A0, A1 = model.A0, model.A1
    V = means @ A1.T + model.B
    AM = means @ A0.T
    alpha = np.einsum("ki,ij,kj->k", V, Q, V) + np.sum((A1 @ S1 @ A1.T + model.D2) * Q) + w.r[1]
    beta = np.einsum("ki,ij,kj->k", V, Q, AM) + 0.5 * np.sum(
        (A0 @ S1 @ A1.T + A1 @ S1 @ A0.T + model.D1) * Q)
    gamma = 0.5 * np.einsum("ki,ij,kj->k", AM, Q, AM) + 0.5 * np.sum((A0 @ S1 @ A0.T + model.D0) * Q)
    return float(weights @ (gamma - beta**2 / (2.0 * alpha)))


def value_v1(model, belief, u0, w, cfg=None):
    """Expected optimal second-stage cost over ``y1 ~ N(C m1-, W1)``.

    The quadrature order is doubled from ``cfg.quad_order`` until two
    successive values agree to ``cfg.conv_rtol``. Large ``|u0|`` moves the
    complex poles of the integrand towards the real axis, so high orders
    (around 10^3) are needed there.
    """
    cfg = cfg or DpConfig()
    m1_pred, W1, S1 = _step1_pred(model, belief, u0)
    if not W1 > 0:
        raise ValueError(f"innovation variance W1={W1} is not positive")
    order = cfg.quad_order
    prev = _v1_at_order(model, m1_pred, W1, S1, w, order)
    while True:
        order *= 2
        cur = _v1_at_order(model, m1_pred, W1, S1, w, order)
        if abs(cur - prev) <= cfg.conv_rtol * max(abs(cur), 1e-300) or cur == prev:
            return cur
        if order >= cfg.max_order:
            raise ConvergenceError(
                f"Gauss-Hermite quadrature not converged at order {order}",
                best=cur, details={"order": order, "previous": prev, "current": cur},
            )
        prev = cur


def r0(model, belief, u0, w, cfg=None):
    """First-stage objective of the dynamic program."""
    c0 = quad_coeffs(model, belief.m, belief.S, w.Q(1, model.n), w.r[0])
    return c0(u0) + value_v1(model, belief, u0, w, cfg)


def dp_solve(model, belief, w, cfg=None):
    """Optimal first control(s) and the sampled ``R0`` curve."""
    cfg = cfg or DpConfig()
    res = grid_minimize(lambda u: r0(model, belief, u, w, cfg), cfg.search_spec())
    return DpResult(
        control=max(res.minimizers),
        minimizers=res.minimizers,
        value=res.fun,
        grid=res.grid,
        curve=res.curve,
    )
