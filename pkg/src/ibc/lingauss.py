"""Linear-Gaussian state-space models with control-dependent drift and
diffusion, their exact zero-order-hold discretization, and the Kalman filter.

The discrete model has the form::

    x[k+1] = A(u) x[k] + B u + sqrt(D(u)) w[k],   w ~ N(0, I)
    y[k]   = C x[k] + v[k],                        v ~ N(0, s_v)

with ``A(u) = A0 + A1 u`` and ``D(u) = D0 + D1 u + D2 u**2``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from ._validation import (
    PSD_SLACK,
    as_matrix,
    as_vector,
    check_positive,
    check_psd,
    is_psd,
)
from .exceptions import DegenerateObservationError, StructureError

__all__ = [
    "ContinuousModel",
    "DiscreteModel",
    "GaussianBelief",
    "discretize",
    "kf_predict",
    "kf_update",
    "psd_sqrt",
    "simulate_step",
    "example2_continuous",
    "example2_model",
    "initial_belief",
]


@dataclass(frozen=True)
class ContinuousModel:
    """Bilinear-in-control Ito system ``dx = ((A0c + A1c u) x + Bc u) dt + Gc dw``.

    ``C`` and ``s_v`` describe the sampled observation ``y_k = C x(t_k) + v_k``;
    they are carried through discretization unchanged.
    """

    A0c: np.ndarray
    A1c: np.ndarray
    Bc: np.ndarray
    Gc: np.ndarray
    C: np.ndarray
    s_v: float

    def __post_init__(self):
        A0c = as_matrix(self.A0c, "A0c")
        n = A0c.shape[0]
        object.__setattr__(self, "A0c", as_matrix(A0c, "A0c", (n, n)))
        object.__setattr__(self, "A1c", as_matrix(self.A1c, "A1c", (n, n)))
        object.__setattr__(self, "Bc", as_vector(self.Bc, "Bc", n))
        Gc = as_matrix(self.Gc, "Gc")
        if Gc.shape[0] != n:
            raise ValueError(f"Gc must have {n} rows, got {Gc.shape[0]}")
        object.__setattr__(self, "Gc", Gc)
        object.__setattr__(self, "C", as_vector(self.C, "C", n))
        object.__setattr__(self, "s_v", check_positive(self.s_v, "s_v"))

    @property
    def n(self):
        return self.A0c.shape[0]

    def Ac(self, u):
        return self.A0c + self.A1c * u


@dataclass(frozen=True)
class DiscreteModel:
    """Sampled model with ``A(u) = A0 + A1 u`` and ``D(u) = D0 + D1 u + D2 u^2``."""

    A0: np.ndarray
    A1: np.ndarray
    B: np.ndarray
    D0: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    C: np.ndarray
    s_v: float
    T0: float = 1.0

    def __post_init__(self):
        A0 = as_matrix(self.A0, "A0")
        n = A0.shape[0]
        object.__setattr__(self, "A0", as_matrix(A0, "A0", (n, n)))
        object.__setattr__(self, "A1", as_matrix(self.A1, "A1", (n, n)))
        object.__setattr__(self, "B", as_vector(self.B, "B", n))
        for name in ("D0", "D1", "D2"):
            D = as_matrix(getattr(self, name), name, (n, n))
            if not np.allclose(D, D.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(D).max())):
                raise StructureError(f"{name} must be symmetric")
            object.__setattr__(self, name, 0.5 * (D + D.T))
        if not is_psd(self.D2):
            raise StructureError("D2 must be positive semidefinite")
        object.__setattr__(self, "C", as_vector(self.C, "C", n))
        object.__setattr__(self, "s_v", check_positive(self.s_v, "s_v"))
        object.__setattr__(self, "T0", check_positive(self.T0, "T0"))

    @property
    def n(self):
        return self.A0.shape[0]

    def A(self, u):
        return self.A0 + self.A1 * u

    def D(self, u):
        return self.D0 + self.D1 * u + self.D2 * (u * u)

    def is_admissible(self, lo, hi, num=241):
        """True when ``D(u)`` is PSD on an evenly spaced grid over ``[lo, hi]``."""
        return all(is_psd(self.D(u)) for u in np.linspace(lo, hi, num))


@dataclass(frozen=True)
class GaussianBelief:
    """Gaussian belief ``N(m, S)``; used for both filtered and predicted pairs."""

    m: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        m = as_vector(self.m, "m")
        S = as_matrix(self.S, "S", (m.shape[0], m.shape[0]))
        check_psd(S, "S")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "S", 0.5 * (S + S.T))


def _zoh_at(cont, u, T0):
    """Exact sampled ``(A, B, D)`` of the continuous model frozen at control ``u``."""
    n = cont.n
    Ac = cont.Ac(u)
    A = expm(Ac * T0)

    # B = int_0^T0 exp(Ac s) ds Bc
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = Ac
    M[:n, n] = cont.Bc
    B = expm(M * T0)[:n, n]

    # Van Loan: D = Phi @ F12 with [[-Ac, GG'], [0, Ac']] exponentiated.
    GG = cont.Gc @ cont.Gc.T
    V = np.zeros((2 * n, 2 * n))
    V[:n, :n] = -Ac
    V[:n, n:] = GG
    V[n:, n:] = Ac.T
    F = expm(V * T0)
    D = F[n:, n:].T @ F[:n, n:]
    return A, B, 0.5 * (D + D.T)


def _rel_residual(predicted, actual):
    scale = np.linalg.norm(actual)
    diff = np.linalg.norm(predicted - actual)
    return diff / scale if scale > 0 else diff


def discretize(cont, T0, *, check_u=2.0, rtol=1e-9):
    """Exact zero-order-hold discretization of a :class:`ContinuousModel`.

    The sampled matrices are computed with matrix exponentials at
    ``u in {-1, 0, 1}`` and the coefficients of ``A(u)`` and ``D(u)`` are
    recovered by exact interpolation. The fitted forms are then compared with
    a fresh exponential at ``check_u``; a relative residual above ``rtol``
    means the model is not affine/quadratic in the control and
    :class:`StructureError` is raised.
    """
    T0 = check_positive(T0, "T0")
    Am, Bm, Dm = _zoh_at(cont, -1.0, T0)
    A0, B0, D0 = _zoh_at(cont, 0.0, T0)
    Ap, Bp, Dp = _zoh_at(cont, 1.0, T0)
    A1 = Ap - A0
    D1 = 0.5 * (Dp - Dm)
    D2 = 0.5 * (Dp + Dm) - D0

    Ac_, Bc_, Dc_ = _zoh_at(cont, check_u, T0)
    residuals = {
        "A": _rel_residual(A0 + A1 * check_u, Ac_),
        "A(-1)": _rel_residual(A0 - A1, Am),
        "B": max(_rel_residual(B0, b) for b in (Bm, Bp, Bc_)),
        "D": _rel_residual(D0 + D1 * check_u + D2 * check_u**2, Dc_),
    }
    bad = {k: v for k, v in residuals.items() if v > rtol}
    if bad:
        raise StructureError(
            "continuous model is not affine in u for A/B or quadratic in u for D; "
            f"residuals {bad}"
        )
    return DiscreteModel(A0=A0, A1=A1, B=B0, D0=D0, D1=D1, D2=D2,
                         C=cont.C, s_v=cont.s_v, T0=T0)


def kf_predict(belief, model, u):
    """Time update: ``m- = A(u) m + B u``, ``S- = A(u) S A(u)' + D(u)``."""
    A = model.A(u)
    m = A @ belief.m + model.B * u
    S = A @ belief.S @ A.T + model.D(u)
    return GaussianBelief(m, S)


def kf_update(pred, model, y):
    """Measurement update with a scalar observation ``y = C x + v``.

    Uses the information-form gain ``S C' / s_v`` on the already updated
    covariance, which is algebraically the usual Kalman gain.
    """
    C = model.C
    SC = pred.S @ C
    W = model.s_v + C @ SC
    if not W > 0:
        raise DegenerateObservationError(f"innovation variance W={W} is not positive")
    S = pred.S - np.outer(SC, SC) / W
    S = 0.5 * (S + S.T)
    m = pred.m + (S @ C) / model.s_v * (float(y) - C @ pred.m)
    return GaussianBelief(m, S)


def psd_sqrt(D, slack=PSD_SLACK):
    """Symmetric square root of a PSD matrix; eigenvalues in ``[-slack, 0)`` are
    clamped to zero, more negative ones raise :class:`StructureError`."""
    D = 0.5 * (np.asarray(D, dtype=float) + np.asarray(D, dtype=float).T)
    vals, vecs = np.linalg.eigh(D)
    if vals.min() < -slack:
        raise StructureError(f"matrix is indefinite (min eigenvalue {vals.min():.3e})")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def simulate_step(model, x, u, rng, *, observation_noise=True):
    """Advance the true state one sample and observe the new state.

    Returns ``(x_next, y_next)`` with ``y_next = C x_next + v``. With
    ``observation_noise=False`` the measurement is noise-free.
    """
    x = as_vector(x, "x", model.n)
    w = rng.standard_normal(model.n)
    x_next = model.A(u) @ x + model.B * u + psd_sqrt(model.D(u)) @ w
    v = rng.standard_normal() * np.sqrt(model.s_v) if observation_noise else 0.0
    return x_next, float(model.C @ x_next + v)


def example2_continuous(a_c=1.0, b_c=1.0, g1c=np.sqrt(2.0), g2c=np.sqrt(2.0), s_v=0.01):
    """Continuous system with a Wiener-process gain drift and input noise.

    State is ``(gain perturbation, output)``; the output is measured.
    """
    return ContinuousModel(
        A0c=[[0.0, 0.0], [0.0, -a_c]],
        A1c=[[0.0, 0.0], [1.0, 0.0]],
        Bc=[0.0, b_c],
        Gc=[[g1c, 0.0], [0.0, g2c]],
        C=[0.0, 1.0],
        s_v=s_v,
    )


def example2_model(a_c=1.0, b_c=1.0, g1c=np.sqrt(2.0), g2c=np.sqrt(2.0), s_v=0.01, T0=0.1):
    return discretize(example2_continuous(a_c, b_c, g1c, g2c, s_v), T0)


def initial_belief(model, m0, S0, y0=0.0, interpretation="posterior"):
    """Filtered belief at step 0 from stated initial moments.

    ``interpretation="posterior"`` takes ``(m0, S0)`` as already conditioned
    on ``y0``; ``"prior"`` treats them as the prior ``(m0-, S0-)`` and applies
    the measurement update with ``y0``.
    """
    belief = GaussianBelief(m0, S0)
    if interpretation == "posterior":
        return belief
    if interpretation == "prior":
        return kf_update(belief, model, y0)
    raise ValueError(f"interpretation must be 'prior' or 'posterior', got {interpretation!r}")
