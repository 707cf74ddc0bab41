import warnings

import numpy as np
import pytest

from ibc.analytic import psi
from ibc.dp import dp_solve
from ibc.exceptions import BoundaryMinimumWarning, ConvergenceError, NoSolutionError
from ibc.optim import SearchSpec, golden_section, grid_minimize, tune_nu


def test_single_minimum():
    res = grid_minimize(lambda u: (u - 1.0) ** 2, SearchSpec(lo=-3, hi=3, step=0.1, tol=1e-8))
    assert res.minimizers == pytest.approx([1.0], abs=1e-7)


def test_double_well():
    res = grid_minimize(lambda u: (u * u - 4.0) ** 2, SearchSpec(lo=-3, hi=3, step=0.07, tol=1e-9))
    assert res.multiplicity == 2
    assert res.minimizers == pytest.approx([-2.0, 2.0], abs=1e-6)


def test_refinement_not_worse_than_grid():
    f = lambda u: np.sin(5 * u) + 0.1 * u * u
    spec = SearchSpec(lo=-4, hi=4, step=0.13)
    res = grid_minimize(f, spec)
    assert res.fun <= res.curve.min()
    again = grid_minimize(f, spec)
    assert again.minimizers == res.minimizers


def test_boundary_warning():
    with pytest.warns(BoundaryMinimumWarning):
        res = grid_minimize(lambda u: u, SearchSpec(lo=0, hi=1, step=0.1))
    assert res.at_boundary and res.minimizers == [0.0]


def test_curve_mismatch_and_nonfinite():
    spec = SearchSpec(lo=0, hi=1, step=0.5)
    with pytest.raises(ValueError):
        grid_minimize(lambda u: u, spec, curve=[1.0, 2.0])
    with pytest.raises(ValueError):
        grid_minimize(lambda u: np.nan, spec)


def test_spec_validation():
    for kw in ({"lo": 1, "hi": 0}, {"step": 0}, {"tol": 0}, {"max_iter": 0}):
        with pytest.raises(ValueError):
            SearchSpec(**kw)


def test_golden_section_iteration_cap():
    with pytest.raises(ConvergenceError) as exc:
        golden_section(lambda x: (x - 0.3) ** 2, 0.0, 1.0, tol=1e-12, max_iter=5)
    assert exc.value.best is not None


@pytest.fixture(scope="module")
def psi_family(model, belief, weights):
    return lambda nu: (lambda u: psi(model, belief, u, nu, weights))


@pytest.fixture(scope="module")
def dp_target(model, belief, weights):
    return dp_solve(model, belief, weights).control


def test_tune_to_olfo_gives_zero(psi_family):
    spec = SearchSpec(step=0.05)
    res = grid_minimize(psi_family(0.0), spec)
    out = tune_nu(psi_family, res.minimizers[-1], spec)
    assert out.nu == 0.0


@pytest.fixture(scope="module")
def tuned(psi_family, dp_target):
    return tune_nu(psi_family, dp_target, SearchSpec())


def test_tuned_nu_reproduces_target(psi_family, dp_target, tuned):
    assert abs(tuned.argmin - dp_target) <= 1e-6
    with warnings.catch_warnings():
        warnings.simplefilter("error", BoundaryMinimumWarning)
        again = grid_minimize(psi_family(tuned.nu), SearchSpec())
    assert max(again.minimizers) == pytest.approx(dp_target, abs=1e-6)
    assert again.multiplicity == 2
    assert tuned.nu == pytest.approx(0.05873078, abs=1e-6)


def test_sweep_monotone(tuned):
    sweep = tuned.trace[:21]
    mags = [a for _, a in sweep]
    assert all(b >= a - 1e-9 for a, b in zip(mags, mags[1:]))


def test_unreachable_target(psi_family):
    with pytest.raises(NoSolutionError) as exc:
        tune_nu(psi_family, 7.0, SearchSpec(step=0.1), sweep_points=5)
    assert len(exc.value.trace) == 5
