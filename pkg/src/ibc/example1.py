"""Integrator with an unknown gain ``theta in {-1, 1}``.

    x[k+1] = x[k] + theta u[k],   y[k] = x[k],   x[0] = 1,   cost E{x[2]^2}

with ``P(theta = -1) = p``. Any nonzero first control reveals ``theta`` exactly
through ``y1 = 1 + theta u0``, after which the second control drives the state
to zero.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import NoInformationError

__all__ = [
    "ThetaPrior",
    "Ex1State",
    "binary_entropy",
    "mi_theta",
    "ibc_cost1",
    "analytic_min_cost",
    "ibc_step2_ex1",
    "simulate_ex1",
    "expected_cost_ex1",
    "DEFAULT_U0",
]

# The penalized first-step cost is flat in u0 != 0; any such value is optimal.
DEFAULT_U0 = 1.0


@dataclass(frozen=True)
class ThetaPrior:
    p: float  # P(theta = -1)

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")


@dataclass(frozen=True)
class Ex1State:
    x: float
    theta: int
    step: int = 0

    def __post_init__(self):
        if self.theta not in (-1, 1):
            raise ValueError(f"theta must be -1 or 1, got {self.theta}")
        if self.step not in (0, 1, 2):
            raise ValueError(f"step must be 0, 1 or 2, got {self.step}")


def _p(prior):
    return prior.p if isinstance(prior, ThetaPrior) else ThetaPrior(float(prior)).p


def binary_entropy(p):
    """``-p ln p - (1-p) ln(1-p)`` in nats, with ``0 ln 0 = 0``."""
    return float(sum(-q * np.log(q) for q in (p, 1.0 - p) if q > 0.0))


def mi_theta(u0, prior):
    """``I(y1; theta)``: the full prior entropy when ``u0 != 0``, else zero."""
    return binary_entropy(_p(prior)) if u0 != 0 else 0.0


def ibc_cost1(u0, u1, prior, nu0=1.0):
    """First-step penalized cost ``E{x2^2} - nu0 I(y1; theta)``."""
    p = _p(prior)
    s = u0 + u1
    return s * s + 2.0 * (1.0 - 2.0 * p) * s + 1.0 - nu0 * mi_theta(u0, p)


def analytic_min_cost(prior, nu0=1.0):
    """Minimum of :func:`ibc_cost1` over ``u0 != 0``: ``1 - (2p-1)^2 - nu0 H_b(p)``."""
    p = _p(prior)
    return 1.0 - (2.0 * p - 1.0) ** 2 - nu0 * binary_entropy(p)


def ibc_step2_ex1(u0, y1):
    """Second control ``u0 y1 / (1 - y1)``, which zeroes ``x2`` for the
    gain estimate ``(y1 - 1) / u0``."""
    if y1 == 1.0:
        raise ValueError("y1 = 1 carries no information about theta (u0 must be nonzero)")
    return u0 * y1 / (1.0 - y1)


def simulate_ex1(prior, theta, u0=DEFAULT_U0):
    """Run both steps against the true ``theta``; returns ``(x2, x2**2)``."""
    _p(prior)
    if u0 == 0:
        raise NoInformationError("u0 = 0 leaves theta unidentified; the second step is ill-posed")
    state = Ex1State(1.0, int(theta))
    x1 = state.x + state.theta * u0
    u1 = ibc_step2_ex1(u0, x1)
    x2 = x1 + state.theta * u1
    return x2, x2 * x2


def expected_cost_ex1(prior, u0=DEFAULT_U0):
    """Realized cost averaged over ``theta`` with prior weights ``(p, 1-p)``."""
    p = _p(prior)
    return p * simulate_ex1(p, -1, u0)[1] + (1.0 - p) * simulate_ex1(p, 1, u0)[1]
