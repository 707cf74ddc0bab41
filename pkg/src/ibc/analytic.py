"""Closed-form two-step information based control for the bilinear
linear-Gaussian example.

With the filtered belief ``(m0, S0)`` at step 0 the controller minimizes over
``u0`` the function

    psi(u0) = 1/2 (|mu1|^2_Q1 + r0 u0^2 + tr(Q1 Sigma1)) - nu0 I0(u0)
              + gamma_bar - beta_bar^2 / (2 alpha_bar)

where the last two terms are the minimum over ``u1`` of the second-stage
quadratic, and ``I0`` is the predicted mutual information between ``x1`` and
``y1``. After ``y1`` is filtered the second control is the minimizer of the
same quadratic built from ``(m1, S1)``.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import as_matrix, as_vector, check_nonnegative, check_psd
from .lingauss import GaussianBelief, kf_predict, kf_update
from .optim import SearchSpec, grid_minimize

__all__ = [
    "MomentPair",
    "QuadCoeffs",
    "Weights",
    "Step1Result",
    "propagate_moments",
    "expected_cost",
    "predicted_mi",
    "quad_coeffs",
    "step2_coeffs",
    "psi",
    "olfo_objective",
    "ibc_step1",
    "ibc_step2",
    "filter_step",
]


@dataclass(frozen=True)
class MomentPair:
    """Open-loop predicted mean and covariance (never measurement-updated)."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = as_vector(self.mu, "mu")
        sigma = as_matrix(self.sigma, "sigma", (mu.shape[0], mu.shape[0]))
        check_psd(sigma, "sigma")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", 0.5 * (sigma + sigma.T))

    @classmethod
    def from_belief(cls, belief):
        return cls(belief.m, belief.S)


@dataclass(frozen=True)
class QuadCoeffs:
    """Scalar quadratic ``1/2 alpha u^2 + beta u + gamma``."""

    alpha: float
    beta: float
    gamma: float

    def __call__(self, u):
        return 0.5 * self.alpha * u * u + self.beta * u + self.gamma

    @property
    def argmin(self):
        return -self.beta / self.alpha

    @property
    def min_value(self):
        return self.gamma - self.beta**2 / (2.0 * self.alpha)


@dataclass(frozen=True)
class Weights:
    """Stage weights for the two-step cost.

    ``q[i-1]`` weights the state at step ``i`` (i = 1, 2) and ``r[i]``
    weights ``u_i``. A scalar ``q`` entry means ``Q_i = diag(0, q)``, i.e. a
    penalty on the measured second component only; a matrix entry is used
    as ``Q_i`` directly.
    """

    q: tuple = (0.0, 1.0)
    r: tuple = (1e-3, 1e-3)

    def __post_init__(self):
        if len(self.q) != 2 or len(self.r) != 2:
            raise ValueError("Weights needs exactly two q and two r entries")
        for k, qi in enumerate(self.q):
            if np.ndim(qi) == 0:
                check_nonnegative(qi, f"q[{k}]")
        for k, ri in enumerate(self.r):
            if not float(ri) > 0:
                raise ValueError(f"r[{k}] must be > 0, got {ri}")

    def Q(self, i, n=2):
        qi = self.q[i - 1]
        if np.ndim(qi) == 0:
            Q = np.zeros((n, n))
            Q[-1, -1] = float(qi)
            return Q
        return np.asarray(qi, dtype=float)


def _start(start):
    if isinstance(start, MomentPair):
        return start.mu, start.sigma
    if isinstance(start, GaussianBelief):
        return start.m, start.S
    mu, sigma = start
    return np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float)


def propagate_moments(model, start, u):
    """One open-loop step ``mu' = A(u) mu + B u``, ``Sigma' = A(u) Sigma A(u)' + D(u)``."""
    mu, sigma = _start(start)
    A = model.A(u)
    return MomentPair(A @ mu + model.B * u, A @ sigma @ A.T + model.D(u))


def expected_cost(model, belief, u0, u1, w):
    """Open-loop expected two-step cost conditioned on the step-0 belief."""
    p1 = propagate_moments(model, belief, u0)
    p2 = propagate_moments(model, p1, u1)
    total = 0.0
    for i, (p, u, r) in enumerate(((p1, u0, w.r[0]), (p2, u1, w.r[1])), start=1):
        Q = w.Q(i, model.n)
        total += p.mu @ Q @ p.mu + r * u * u + np.trace(Q @ p.sigma)
    return 0.5 * total


def predicted_mi(model, belief, u0):
    """Mutual information (nats) between ``x1`` and ``y1`` predicted at step 0."""
    sigma1 = propagate_moments(model, belief, u0).sigma
    return 0.5 * np.log1p(model.C @ sigma1 @ model.C / model.s_v)


def quad_coeffs(model, mean, cov, Q, r):
    """Coefficients of the one-step cost ``1/2 E{|x'|^2_Q + r u^2}`` as a
    quadratic in ``u`` when ``x ~ N(mean, cov)`` and ``x' = A(u) x + B u + noise``."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    A0, A1 = model.A0, model.A1
    v = A1 @ mean + model.B
    alpha = v @ Q @ v + np.sum((A1 @ cov @ A1.T + model.D2) * Q) + r
    beta = v @ Q @ A0 @ mean + 0.5 * np.sum((A0 @ cov @ A1.T + A1 @ cov @ A0.T + model.D1) * Q)
    gamma = 0.5 * mean @ A0.T @ Q @ A0 @ mean + 0.5 * np.sum((A0 @ cov @ A0.T + model.D0) * Q)
    return QuadCoeffs(float(alpha), float(beta), float(gamma))


def step2_coeffs(model, mean, cov, w):
    """Second-stage quadratic in ``u1`` (state weight ``Q2``, control weight ``r1``)."""
    return quad_coeffs(model, mean, cov, w.Q(2, model.n), w.r[1])


def _filtered_cov(model, sigma1):
    SC = sigma1 @ model.C
    return sigma1 - np.outer(SC, SC) / (model.s_v + model.C @ SC)


def psi(model, belief, u0, nu0, w, *, covariance="filtered"):
    """First-step information based objective with ``u1`` eliminated.

    ``covariance="filtered"`` builds the second-stage coefficients from the
    step-1 covariance after the (predictable) update with ``y1``.
    ``covariance="predicted"`` uses the open-loop covariance instead, which
    makes ``psi`` with ``nu0=0`` exactly the open-loop feedback objective
    ``min_u1 expected_cost``.
    """
    nu0 = check_nonnegative(nu0, "nu0")
    p1 = propagate_moments(model, belief, u0)
    Q1 = w.Q(1, model.n)
    first = 0.5 * (p1.mu @ Q1 @ p1.mu + w.r[0] * u0 * u0 + np.trace(Q1 @ p1.sigma))
    if covariance == "filtered":
        cov = _filtered_cov(model, p1.sigma)
    elif covariance == "predicted":
        cov = p1.sigma
    else:
        raise ValueError(f"covariance must be 'filtered' or 'predicted', got {covariance!r}")
    info = 0.5 * np.log1p(model.C @ p1.sigma @ model.C / model.s_v)
    return float(first - nu0 * info + step2_coeffs(model, p1.mu, cov, w).min_value)


def olfo_objective(model, belief, u0, w):
    """``min_u1 expected_cost(u0, u1)``."""
    return psi(model, belief, u0, 0.0, w, covariance="predicted")


@dataclass
class Step1Result:
    control: float
    minimizers: list
    value: float
    grid: np.ndarray
    curve: np.ndarray

    @property
    def multiplicity(self):
        return len(self.minimizers)


def ibc_step1(model, belief, nu0, w, spec=None, *, covariance="filtered"):
    """Global minimizer of :func:`psi` over ``spec``'s interval.

    Symmetric minima are all listed in ``minimizers``; ``control`` is the
    largest (the positive branch of a +/- pair).
    """
    spec = spec or SearchSpec()
    res = grid_minimize(lambda u: psi(model, belief, u, nu0, w, covariance=covariance), spec)
    return Step1Result(
        control=max(res.minimizers),
        minimizers=res.minimizers,
        value=res.fun,
        grid=res.grid,
        curve=res.curve,
    )


def ibc_step2(model, posterior, w):
    """Second control ``-beta/alpha`` from the filtered belief after ``y1``."""
    return step2_coeffs(model, posterior.m, posterior.S, w).argmin


def filter_step(model, belief, u, y):
    """Predict with ``u`` then update with ``y``."""
    return kf_update(kf_predict(belief, model, u), model, y)
