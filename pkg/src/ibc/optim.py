"""Deterministic low-dimensional minimization: grid scan with golden-section
refinement, and bisection tuning of the information-penalty weight."""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import BoundaryMinimumWarning, ConvergenceError, NoSolutionError

__all__ = [
    "SearchSpec",
    "GridResult",
    "TuneResult",
    "golden_section",
    "grid_minimize",
    "tune_nu",
]

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SearchSpec:
    """Search interval ``[lo, hi]`` scanned with ``step`` and refined to ``tol``.

    ``value_tol`` decides which refined local minima count as global (those
    within ``value_tol`` of the best); it defaults to ``tol``.
    """

    lo: float = -6.0
    hi: float = 6.0
    step: float = 0.01
    tol: float = 1e-6
    max_iter: int = 200
    value_tol: float = None

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if not self.step > 0:
            raise ValueError("step must be > 0")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.value_tol is not None and self.value_tol < 0:
            raise ValueError("value_tol must be >= 0")

    def grid(self):
        num = int(round((self.hi - self.lo) / self.step)) + 1
        return np.linspace(self.lo, self.hi, num)


@dataclass
class GridResult:
    minimizers: list
    values: list
    grid: np.ndarray
    curve: np.ndarray
    at_boundary: bool = False

    @property
    def multiplicity(self):
        return len(self.minimizers)

    @property
    def fun(self):
        return min(self.values)


@dataclass
class TuneResult:
    nu: float
    argmin: float
    residual: float
    trace: list = field(default_factory=list)


def golden_section(f, a, b, tol=1e-8, max_iter=200, fa=None, fb=None):
    """Minimize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``.

    The returned point is never worse than the interval endpoints when their
    values are supplied.
    """
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = f(x1), f(x2)
    it = 0
    while abs(b - a) > tol:
        if it >= max_iter:
            best = (x1, f1) if f1 <= f2 else (x2, f2)
            raise ConvergenceError(
                f"golden-section search did not reach tol={tol} in {max_iter} iterations",
                best=best, details={"bracket": (a, b)},
            )
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INVPHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INVPHI * (b - a)
            f2 = f(x2)
        it += 1
    candidates = [(x1, f1), (x2, f2)]
    if fa is not None:
        candidates.append((a, fa))
    if fb is not None:
        candidates.append((b, fb))
    return min(candidates, key=lambda c: c[1])


def _local_minima(vals):
    n = len(vals)
    idx = []
    for i in range(n):
        left = vals[i - 1] if i > 0 else np.inf
        right = vals[i + 1] if i < n - 1 else np.inf
        if vals[i] < left and vals[i] <= right:
            idx.append(i)
    return idx


def grid_minimize(f, spec, *, curve=None):
    """Scan ``f`` on ``spec.grid()``, refine every local minimum by golden
    section, and report all refined minima within ``value_tol`` of the best.

    ``curve`` may carry precomputed grid values. A global minimum on the
    interval boundary triggers :class:`BoundaryMinimumWarning`.
    """
    grid = spec.grid()
    vals = np.asarray([f(u) for u in grid] if curve is None else curve, dtype=float)
    if vals.shape != grid.shape:
        raise ValueError("curve does not match the search grid")
    if not np.all(np.isfinite(vals)):
        raise ValueError("objective is not finite on the search grid")

    found = []
    for i in _local_minima(vals):
        if 0 < i < len(grid) - 1:
            x, fx = golden_section(f, grid[i - 1], grid[i + 1], tol=spec.tol,
                                   max_iter=spec.max_iter)
            if fx > vals[i]:
                x, fx = grid[i], vals[i]
            found.append((float(x), float(fx), False))
        else:
            found.append((float(grid[i]), float(vals[i]), True))

    value_tol = spec.tol if spec.value_tol is None else spec.value_tol
    best = min(fx for _, fx, _ in found)
    keep = sorted((c for c in found if c[1] <= best + value_tol), key=lambda c: c[0])
    at_boundary = any(c[2] for c in keep)
    if at_boundary:
        warnings.warn(
            f"minimum on the boundary of [{spec.lo}, {spec.hi}]; widen the search interval",
            BoundaryMinimumWarning, stacklevel=2,
        )
    return GridResult(
        minimizers=[c[0] for c in keep],
        values=[c[1] for c in keep],
        grid=grid,
        curve=vals,
        at_boundary=at_boundary,
    )


def _abs_argmin(objective, spec):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryMinimumWarning)
        res = grid_minimize(objective, spec)
    return max(abs(x) for x in res.minimizers), res


def tune_nu(psi_family, target, spec, *, nu_max=10.0, nu_tol=1e-10, match_tol=0.05,
            sweep_points=21):
    """Find the penalty weight whose objective minimizer matches ``target``.

    ``psi_family(nu)`` must return a one-argument objective. Minimizers are
    compared by absolute value, so symmetric pairs count as a match. The
    search is a bisection on ``|argmin| - |target|`` over ``[0, nu_max]``.
    The returned trace holds a coarse sweep followed by every bisection
    step as ``(nu, |argmin|)`` pairs.
    """
    target = abs(float(target))
    trace = []
    for nu in np.linspace(0.0, nu_max, sweep_points):
        a, _ = _abs_argmin(psi_family(float(nu)), spec)
        trace.append((float(nu), a))

    a0 = trace[0][1]
    if abs(a0 - target) <= spec.tol:
        return TuneResult(nu=0.0, argmin=a0, residual=a0 - target, trace=trace)
    a_max = trace[-1][1]
    if a0 > target or a_max < target:
        raise NoSolutionError(
            f"|argmin| ranges over [{a0:.4g}, {a_max:.4g}] on nu in [0, {nu_max}]; "
            f"target {target:.4g} is not bracketed",
            trace=trace,
        )

    lo, hi = 0.0, float(nu_max)
    # tighten the bracket with the sweep before bisecting
    for nu, a in trace:
        if a < target:
            lo = max(lo, nu)
        elif nu < hi:
            hi = nu
            break
    best = min(trace, key=lambda t: abs(t[1] - target))
    while hi - lo > nu_tol:
        mid = 0.5 * (lo + hi)
        a, _ = _abs_argmin(psi_family(mid), spec)
        trace.append((mid, a))
        if abs(a - target) < abs(best[1] - target):
            best = (mid, a)
        if abs(a - target) <= spec.tol:
            best = (mid, a)
            break
        if a < target:
            lo = mid
        else:
            hi = mid
    nu, a = best
    if abs(a - target) > match_tol:
        raise NoSolutionError(
            f"argmin jumps across the target near nu={nu:.6g} (|argmin|={a:.4g}, "
            f"target {target:.4g})",
            trace=trace,
        )
    return TuneResult(nu=nu, argmin=a, residual=a - target, trace=trace)
