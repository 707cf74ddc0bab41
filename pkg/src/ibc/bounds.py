"""Information-theoretic cost bounds in the scalar channel example.

State ``x ~ N(0, s_x)`` is observed as ``y = x + v`` with ``v ~ N(0, s_v)``;
a linear strategy ``u = k y`` gives ``x1 = x + u`` and cost ``E{x1^2}``.
Everything here is closed-form Gaussian algebra.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_positive

__all__ = [
    "ScalarChannel",
    "LinearGain",
    "BoundReport",
    "HOLD_SLACK",
    "closed_loop_cost",
    "open_loop_cost",
    "optimal_gain",
    "gaussian_entropy",
    "mi_linear_gain",
    "mi_observation",
    "quadratic_cost_bound",
    "check_tightness",
    "check_theorem2",
    "entropy_identity",
    "check_data_processing",
]

HOLD_SLACK = 1e-10


@dataclass(frozen=True)
class ScalarChannel:
    s_x: float
    s_v: float

    def __post_init__(self):
        check_positive(self.s_x, "s_x")
        check_positive(self.s_v, "s_v")


@dataclass(frozen=True)
class LinearGain:
    k: float

    def __post_init__(self):
        if not np.isfinite(self.k):
            raise ValueError(f"gain must be finite, got {self.k}")


@dataclass(frozen=True)
class BoundReport:
    lhs: float
    rhs: float
    slack: float
    holds: bool

    @classmethod
    def of(cls, lhs, rhs):
        slack = float(lhs - rhs)
        return cls(float(lhs), float(rhs), slack, slack >= -HOLD_SLACK)


def _k(g):
    return g.k if isinstance(g, LinearGain) else LinearGain(float(g)).k


def closed_loop_cost(ch, g):
    """``E{x1^2} = (1+k)^2 s_x + k^2 s_v``."""
    k = _k(g)
    return (1.0 + k) ** 2 * ch.s_x + k * k * ch.s_v


def open_loop_cost(ch):
    return ch.s_x


def optimal_gain(ch):
    return LinearGain(-ch.s_x / (ch.s_x + ch.s_v))


def gaussian_entropy(var, n=1):
    """Differential entropy (nats) of an isotropic ``n``-dim Gaussian."""
    return 0.5 * n * np.log(2.0 * np.pi * np.e * var)


def mi_observation(ch):
    """``I(x; y) = 1/2 ln(1 + s_x / s_v)``."""
    return 0.5 * np.log1p(ch.s_x / ch.s_v)


def mi_linear_gain(ch, g):
    """``I(x; u)`` for ``u = k y``: equal to ``I(x; y)`` for any ``k != 0``
    (invertible map) and zero for ``k = 0``."""
    return mi_observation(ch) if _k(g) != 0 else 0.0


def quadratic_cost_bound(h_open, info, n=1, c=1.0):
    """Lower bound ``c n (2 pi e)^-1 exp(2 (H_o - I) / n)`` on ``E{L(x1)}``
    for any ``L(x) >= c |x|^2``."""
    return c * n / (2.0 * np.pi * np.e) * np.exp(2.0 * (h_open - info) / n)


def check_tightness(ch):
    """``J(k*)`` against ``J_o exp(-2 I(k*))``; these coincide."""
    k = optimal_gain(ch)
    return BoundReport.of(closed_loop_cost(ch, k),
                          open_loop_cost(ch) * np.exp(-2.0 * mi_linear_gain(ch, k)))


def check_theorem2(ch, g):
    """Quadratic-cost bound with ``n = 1``, ``c = 1`` and the Gaussian
    open-loop entropy ``H_o = 1/2 ln(2 pi e J_o)``."""
    h_open = gaussian_entropy(open_loop_cost(ch))
    return BoundReport.of(closed_loop_cost(ch, g),
                          quadratic_cost_bound(h_open, mi_linear_gain(ch, g)))


def entropy_identity(ch):
    """``H_o - H(k*)`` (lhs) against ``I(k*)`` (rhs)."""
    k = optimal_gain(ch)
    reduction = gaussian_entropy(open_loop_cost(ch)) - gaussian_entropy(closed_loop_cost(ch, k))
    return BoundReport.of(reduction, mi_linear_gain(ch, k))


def check_data_processing(ch, g):
    """``I(x; y)`` (lhs) must dominate ``I(x; u)`` (rhs)."""
    return BoundReport.of(mi_observation(ch), mi_linear_gain(ch, g))
