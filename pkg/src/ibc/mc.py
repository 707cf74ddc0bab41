"""Sample-based information based control for general plants.

Posterior samples of the current state are pushed through the plant with a
candidate control sequence. The expected cost is a sample mean and the
predicted mutual information between future states and future observations
is estimated with a Gaussian kernel density estimate of the observation
entropy, using the fact that for additive Gaussian measurement noise the
conditional entropy is known in closed form.

Randomness is organised as independent streams keyed by
``(seed, kind, planning step, time index)``; each stream yields the draws
for all samples at once, so results do not depend on evaluation order and
all candidate control sequences at one planning step share the same noise
(common random numbers).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .exceptions import DegenerateSamplesError, PlanningError
from .lingauss import GaussianBelief, kf_predict, kf_update, psd_sqrt

__all__ = [
    "DynamicsInterface",
    "SampleSet",
    "PlanConfig",
    "PlanOptimizer",
    "PlanTrace",
    "KalmanPosterior",
    "ThetaPosterior",
    "stream",
    "linear_gaussian_dynamics",
    "integrator_theta_dynamics",
    "Example2Cost",
    "terminal_cost",
    "sample_trajectories",
    "mc_expectation",
    "kde_bandwidth",
    "pairwise_dist",
    "log_kernel_means",
    "mc_entropy",
    "mc_mutual_info",
    "mi_constant",
    "ibc_cost",
    "ibc_cost_full",
    "ibc_plan",
    "olfo_plan",
    "first_control_curve",
]

POSTERIOR, PROCESS, OBSERVATION, PLANT_PROCESS, PLANT_OBSERVATION = range(5)

# Kernel terms with D_ij above this are below 1e-26 and are skipped; the
# diagonal term keeps every row sum >= 1, so the omission is below roundoff.
_D_CUTOFF = 60.0


def stream(seed, *key):
    """Independent generator for ``seed`` and an integer key path."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


@dataclass(frozen=True)
class DynamicsInterface:
    """Vectorized plant ``x' = step(x, u, w)``, ``y = h(x) + v``, ``v ~ N(0, S_v)``.

    ``step`` receives ``x`` of shape ``(n_s, n)`` and ``w`` of shape
    ``(n_s, n_w)`` (standard normal); ``h`` maps ``(n_s, n)`` to ``(n_s, m)``.
    """

    step: object
    h: object
    S_v: np.ndarray
    n: int
    n_w: int

    def __post_init__(self):
        S_v = np.atleast_2d(np.asarray(self.S_v, dtype=float))
        if S_v.shape[0] != S_v.shape[1]:
            raise ValueError("S_v must be square")
        if np.linalg.eigvalsh(0.5 * (S_v + S_v.T)).min() <= 0:
            raise ValueError("S_v must be positive definite")
        object.__setattr__(self, "S_v", S_v)
        object.__setattr__(self, "_sqrt_S_v", np.linalg.cholesky(S_v))

    @property
    def m(self):
        return self.S_v.shape[0]

    def observe(self, x, z):
        """``h(x) + chol(S_v) z`` for standard normal ``z`` of shape ``(n_s, m)``."""
        return self.h(x) + z @ self._sqrt_S_v.T


def linear_gaussian_dynamics(model):
    """Plant for a :class:`~ibc.lingauss.DiscreteModel`."""

    def step(x, u, w):
        u = float(np.asarray(u).reshape(()))
        return x @ model.A(u).T + model.B * u + w @ psd_sqrt(model.D(u)).T

    def h(x):
        return (x @ model.C)[:, None]

    return DynamicsInterface(step=step, h=h, S_v=[[model.s_v]], n=model.n, n_w=model.n)


def integrator_theta_dynamics(s_v=1e-4):
    """Integrator with unknown gain; state ``(x, theta)``, ``y = x + v``.

    The noise-free observation of the original problem is replaced by a
    small Gaussian noise so the information estimator applies.
    """

    def step(x, u, w):
        u = float(np.asarray(u).reshape(()))
        out = x.copy()
        out[:, 0] = x[:, 0] + x[:, 1] * u
        return out

    def h(x):
        return x[:, :1]

    return DynamicsInterface(step=step, h=h, S_v=[[s_v]], n=2, n_w=1)


@dataclass(frozen=True)
class SampleSet:
    """Posterior samples at step ``k`` and their simulated futures.

    ``x_path[:, j]`` is the state at time ``k + j``; ``y_future`` stacks the
    observations of ``x[k+1] .. x[N-1]``.
    """

    x_post: np.ndarray
    x_path: np.ndarray
    y_future: np.ndarray
    u_seq: np.ndarray
    k: int = 0

    def __post_init__(self):
        n_s = self.x_post.shape[0]
        if self.x_path.shape[0] != n_s or self.y_future.shape[0] != n_s:
            raise ValueError("sample collections must have identical counts")
        if n_s < 2:
            raise ValueError("need at least two samples")

    @property
    def n_s(self):
        return self.x_post.shape[0]

    @property
    def n_k(self):
        return self.y_future.shape[1]

    @property
    def x_final(self):
        return self.x_path[:, -1]


def _controls(u_seq):
    u = np.asarray(u_seq, dtype=float)
    return u.reshape(-1) if u.ndim <= 1 else u


def sample_trajectories(dyn, x_post, u_seq, seed, k=0):
    """Simulate every posterior sample forward under ``u_seq``."""
    x = np.asarray(x_post, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("posterior sample source is empty")
    u_seq = _controls(u_seq)
    T = len(u_seq)
    n_s = x.shape[0]
    path = [x]
    ys = []
    for j in range(T):
        t = k + j
        w = stream(seed, PROCESS, k, t).standard_normal((n_s, dyn.n_w))
        x = dyn.step(x, u_seq[j], w)
        path.append(x)
        if j < T - 1:
            z = stream(seed, OBSERVATION, k, t + 1).standard_normal((n_s, dyn.m))
            ys.append(dyn.observe(x, z))
    y = np.concatenate(ys, axis=1) if ys else np.zeros((n_s, 0))
    return SampleSet(x_post=np.asarray(x_post, dtype=float), x_path=np.stack(path, axis=1),
                     y_future=y, u_seq=u_seq, k=k)


def terminal_cost(L):
    """Wrap a terminal cost ``L(x_N)`` (vectorized over samples)."""
    return lambda x_path, u_seq, k: L(x_path[:, -1])


@dataclass(frozen=True)
class Example2Cost:
    """Per-sample ``1/2 sum_i (q_i x_{i,2}^2 + r_{i-1} u_{i-1}^2)`` for the
    stages remaining after planning step ``k`` of the two-step problem."""

    q: tuple = (0.0, 1.0)
    r: tuple = (1e-3, 1e-3)

    def __call__(self, x_path, u_seq, k):
        u_seq = _controls(u_seq)
        total = np.zeros(x_path.shape[0])
        for j, u in enumerate(u_seq):
            i = k + j + 1
            total += self.q[i - 1] * x_path[:, j + 1, -1] ** 2 + self.r[i - 1] * u * u
        return 0.5 * total


def mc_expectation(s, cost):
    """Sample mean of the per-sample cost."""
    return float(np.mean(cost(s.x_path, s.u_seq, s.k)))


def kde_bandwidth(n_s, n_k):
    """Kernel bandwidth ``(4 / (n_s (n_k + 2) n_k^2)) ** (1 / (n_k + 4))``."""
    if n_s < 2 or n_k < 1:
        raise ValueError("need n_s >= 2 and n_k >= 1")
    return (4.0 / (n_s * (n_k + 2) * n_k * n_k)) ** (1.0 / (n_k + 4))


def _obs(s):
    return s.y_future if isinstance(s, SampleSet) else np.atleast_2d(np.asarray(s, dtype=float).T).T


def pairwise_dist(s, sigma):
    """Dense matrix ``||Y_i - Y_j||^2 / (2 sigma^2)``."""
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    Y = _obs(s)
    sq = np.sum(Y * Y, axis=1)
    D = np.maximum(sq[:, None] + sq[None, :] - 2.0 * Y @ Y.T, 0.0)
    np.fill_diagonal(D, 0.0)
    return D / (2.0 * sigma * sigma)


def log_kernel_means(s, sigma, chunk=8):
    """Per-sample ``ln((1/n) sum_j exp(-D_ij))`` without forming ``D``.

    Samples are sorted on the first observation coordinate and each block of
    rows only visits the window where ``D_ij`` can be below the cutoff.
    The reduction order is fixed, so the result is bitwise reproducible.
    """
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    Y = _obs(s)
    n, d = Y.shape
    order = np.argsort(Y[:, 0], kind="stable")
    Ys = np.ascontiguousarray(Y[order])
    key = Ys[:, 0]
    c = 1.0 / (2.0 * sigma * sigma)
    width = sigma * math.sqrt(2.0 * _D_CUTOFF)
    sums = np.empty(n)
    for i0 in range(0, n, chunk):
        block = Ys[i0:i0 + chunk]
        lo = np.searchsorted(key, block[0, 0] - width, side="left")
        hi = np.searchsorted(key, block[-1, 0] + width, side="right")
        if d == 1:
            D = np.subtract.outer(block[:, 0], key[lo:hi])
            np.square(D, out=D)
        else:
            diff = block[:, None, :] - Ys[None, lo:hi, :]
            D = np.einsum("ijk,ijk->ij", diff, diff)
        D *= -c
        np.exp(D, out=D)
        sums[i0:i0 + chunk] = D.sum(axis=1)
    out = np.empty(n)
    out[order] = np.log(sums) - math.log(n)
    return out


def _check_spread(Y):
    if Y.shape[1] == 0:
        return
    if np.all(Y == Y[0]):
        raise DegenerateSamplesError("all observation samples are identical; entropy is -inf")


def mc_entropy(s, sigma=None):
    """Kernel plug-in estimate (nats) of the entropy of the future observations."""
    Y = _obs(s)
    n_s, n_k = Y.shape
    if n_s < 2:
        raise ValueError("need at least two samples")
    _check_spread(Y)
    sigma = kde_bandwidth(n_s, n_k) if sigma is None else sigma
    return 0.5 * n_k * math.log(2.0 * math.pi * sigma * sigma) - float(np.mean(log_kernel_means(Y, sigma)))


def mi_constant(n_k, sigma, S_v):
    """Control-independent part of the mutual-information estimate.

    With ``n_k`` stacked observations of dimension ``m`` the noise entropy is
    ``(n_k/m) * 1/2 ln((2 pi e)^m |S_v|)``; for scalar noise this reduces to
    ``(n_k/2) ln(sigma^2 / (e s_v))`` after combining with the kernel term.
    """
    S_v = np.atleast_2d(np.asarray(S_v, dtype=float))
    m = S_v.shape[0]
    if n_k % m:
        raise ValueError(f"n_k={n_k} is not a multiple of the observation size {m}")
    logdet = np.linalg.slogdet(S_v)[1]
    return 0.5 * n_k * math.log(sigma * sigma / math.e) - 0.5 * (n_k // m) * logdet


def mc_mutual_info(s, sigma=None, S_v=None):
    """Estimate (nats) of the predicted information between future states and
    future observations for additive Gaussian observation noise ``S_v``.

    The raw estimate is returned; kernel bias can make it slightly negative.
    """
    Y = _obs(s)
    n_s, n_k = Y.shape
    if n_k == 0:
        return 0.0
    if S_v is None:
        raise ValueError("S_v is required")
    _check_spread(Y)
    sigma = kde_bandwidth(n_s, n_k) if sigma is None else sigma
    return mi_constant(n_k, sigma, S_v) - float(np.mean(log_kernel_means(Y, sigma)))


def ibc_cost(s, cost, nu, sigma=None):
    """Reduced objective ``mean_i [cost_i + nu ln((1/n) sum_j exp(-D_ij))]``.

    It differs from the penalized cost ``E - nu I`` only by the constant
    ``nu * mi_constant``; see :func:`ibc_cost_full`.
    """
    if nu < 0:
        raise ValueError("nu must be >= 0")
    L = cost(s.x_path, s.u_seq, s.k)
    if nu == 0 or s.n_k == 0:
        return float(np.mean(L))
    sigma = kde_bandwidth(s.n_s, s.n_k) if sigma is None else sigma
    return float(np.mean(L + nu * log_kernel_means(s, sigma)))


def ibc_cost_full(s, cost, nu, S_v, sigma=None):
    """Penalized cost ``mean cost - nu * mc_mutual_info``."""
    if s.n_k == 0:
        return ibc_cost(s, cost, nu, sigma)
    sigma = kde_bandwidth(s.n_s, s.n_k) if sigma is None else sigma
    return ibc_cost(s, cost, nu, sigma) - nu * mi_constant(s.n_k, sigma, S_v)


class KalmanPosterior:
    """Posterior sample provider backed by the exact Kalman filter."""

    def __init__(self, model, belief):
        self.model = model
        self.belief = belief

    def sample(self, n, rng):
        return rng.multivariate_normal(self.belief.m, self.belief.S, size=n, method="eigh")

    def advance(self, u, y):
        pred = kf_predict(self.belief, self.model, float(u))
        return KalmanPosterior(self.model, kf_update(pred, self.model, float(y)))


class ThetaPosterior:
    """Exact posterior over ``theta in {-1, 1}`` for the unknown-gain
    integrator with known position ``x`` and observation noise ``s_v``."""

    def __init__(self, p, x, s_v):
        self.p = float(p)
        self.x = float(x)
        self.s_v = float(s_v)

    def sample(self, n, rng):
        theta = np.where(rng.random(n) < self.p, -1.0, 1.0)
        return np.column_stack([np.full(n, self.x), theta])

    def advance(self, u, y):
        lik = {th: math.exp(-(y - (self.x + th * u)) ** 2 / (2.0 * self.s_v)) for th in (-1, 1)}
        num = self.p * lik[-1]
        den = num + (1.0 - self.p) * lik[1]
        p = self.p if den == 0 else num / den
        return ThetaPosterior(p, y, self.s_v)


@dataclass(frozen=True)
class PlanConfig:
    horizon: int = 2
    nu: object = 0.0
    n_s: int = 1000
    seed: int = 0
    u_bounds: tuple = (-6.0, 6.0)

    def __post_init__(self):
        if self.horizon < 2:
            raise ValueError("horizon must be >= 2")
        if self.n_s < 2:
            raise ValueError("n_s must be >= 2")
        lo, hi = self.u_bounds
        if not lo < hi:
            raise ValueError("u_bounds must satisfy lo < hi")
        for v in self.nus():
            if v < 0:
                raise ValueError("nu entries must be >= 0")

    def nus(self):
        nu = np.atleast_1d(np.asarray(self.nu, dtype=float))
        if nu.size == 1:
            nu = np.full(self.horizon, float(nu[0]))
        if nu.size != self.horizon:
            raise ValueError(f"nu must be a scalar or have {self.horizon} entries")
        return nu


@dataclass(frozen=True)
class PlanOptimizer:
    """Multi-start search over the control box: a deterministic lattice (or
    Halton points in higher dimension) followed by bounded Powell refinement
    of the best ``n_refine`` starts."""

    starts_per_dim: int = 9
    max_starts: int = 243
    n_refine: int = 2
    xtol: float = 1e-4
    ftol: float = 1e-10

    def starts(self, dim, lo, hi):
        if self.starts_per_dim**dim <= self.max_starts:
            axis = np.linspace(lo, hi, self.starts_per_dim)
            grids = np.meshgrid(*([axis] * dim), indexing="ij")
            return np.column_stack([g.ravel() for g in grids])
        pts = qmc.Halton(d=dim, scramble=False).random(self.max_starts)
        return lo + (hi - lo) * pts

    def minimize(self, f, dim, lo, hi):
        starts = self.starts(dim, lo, hi)
        vals = np.array([f(x) for x in starts])
        best_x, best_f = starts[int(np.argmin(vals))], float(vals.min())
        for i in np.argsort(vals, kind="stable")[: self.n_refine]:
            res = minimize(f, starts[i], method="Powell", bounds=[(lo, hi)] * dim,
                           options={"xtol": self.xtol, "ftol": self.ftol})
            if not np.isfinite(res.fun):
                raise PlanningError(f"optimizer returned non-finite objective: {res.message}")
            if res.fun < best_f:
                best_x, best_f = np.asarray(res.x, dtype=float), float(res.fun)
        return best_x, best_f


@dataclass
class PlanTrace:
    controls: list = field(default_factory=list)
    observations: list = field(default_factory=list)
    states: list = field(default_factory=list)
    plans: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    realized_cost: float = None


def _run_plan(dyn, posterior, cfg, cost, x0, opt, plant_seed, objective_for):
    opt = opt or PlanOptimizer()
    plant_seed = cfg.seed + 1 if plant_seed is None else plant_seed
    lo, hi = cfg.u_bounds
    N = cfg.horizon
    nus = cfg.nus()
    x_true = np.asarray(x0, dtype=float).reshape(1, -1)
    trace = PlanTrace(states=[x_true[0].copy()])
    try:
        for k in range(N):
            x_post = posterior.sample(cfg.n_s, stream(cfg.seed, POSTERIOR, k))

            def objective(u, k=k, x_post=x_post):
                s = sample_trajectories(dyn, x_post, u, cfg.seed, k)
                return objective_for(s, cost, nus[k])

            u_bar, f_bar = opt.minimize(objective, N - k, lo, hi)
            u_k = float(u_bar[0])
            trace.plans.append(np.asarray(u_bar, dtype=float))
            trace.objective.append(f_bar)
            trace.controls.append(u_k)

            w = stream(plant_seed, PLANT_PROCESS, k).standard_normal((1, dyn.n_w))
            x_true = dyn.step(x_true, u_k, w)
            trace.states.append(x_true[0].copy())
            if k < N - 1:
                z = stream(plant_seed, PLANT_OBSERVATION, k + 1).standard_normal((1, dyn.m))
                y = dyn.observe(x_true, z)[0]
                trace.observations.append(float(y[0]) if y.size == 1 else y)
                posterior = posterior.advance(u_k, y[0] if y.size == 1 else y)
    except PlanningError as exc:
        raise PlanningError(str(exc), trace=trace) from exc
    except Exception as exc:
        raise PlanningError(f"planning failed at step {len(trace.controls)}: {exc}", trace=trace) from exc
    path = np.stack(trace.states)[None, :, :]
    trace.realized_cost = float(cost(path, np.asarray(trace.controls), 0)[0])
    return trace


def ibc_plan(dyn, posterior, cfg, cost, x0, opt=None, plant_seed=None):
    """Receding-horizon information based control of one plant realization.

    At each step ``k`` the reduced objective is minimized over the remaining
    controls, the first one is applied to the plant, the new observation is
    passed to ``posterior.advance`` and the procedure repeats. The last step
    has no future observations, so its information term vanishes.
    """
    return _run_plan(dyn, posterior, cfg, cost, x0, opt, plant_seed,
                     lambda s, c, nu: ibc_cost(s, c, nu))


def olfo_plan(dyn, posterior, cfg, cost, x0, opt=None, plant_seed=None):
    """Open-loop feedback optimal control: :func:`ibc_plan` without the
    information term."""
    return _run_plan(dyn, posterior, cfg, cost, x0, opt, plant_seed,
                     lambda s, c, nu: mc_expectation(s, c))


def first_control_curve(dyn, x_post, grid, cost, nu, seed, u_bounds=(-6.0, 6.0), sigma=None):
    """Two-step reduced objective profiled over the first control.

    For each ``u0`` in ``grid`` the second control is optimized (bounded
    scalar search); the information term depends on ``u0`` only.
    """
    from scipy.optimize import minimize_scalar

    lo, hi = u_bounds
    out = np.empty(len(grid))
    for i, u0 in enumerate(grid):
        s0 = sample_trajectories(dyn, x_post, [u0, 0.0], seed, 0)
        info = 0.0
        if nu > 0 and s0.n_k > 0:
            sig = kde_bandwidth(s0.n_s, s0.n_k) if sigma is None else sigma
            info = nu * float(np.mean(log_kernel_means(s0, sig)))

        def f(u1, u0=u0):
            return mc_expectation(sample_trajectories(dyn, x_post, [u0, u1], seed, 0), cost)

        res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
        out[i] = min(float(res.fun), f(lo), f(hi)) + info
    return out
