"""Tests for the banded solve, damped Newton and the stability count."""

import math

import numpy as np
import pytest

from crossflux.errors import InvalidParameterError, SingularMatrixError, SizeMismatchError
from crossflux.mesh import BandedMatrix, assemble_jacobian, grid_for
from crossflux.solver import banded_solve, count_unstable_eigenvalues, damped_newton, newton_solve
from crossflux.types import StateVector

from .factories import constant_state_vector, make_grid, mode_state, reference_params


# --- banded solve ---


def test_banded_solve_matches_dense_solve() -> None:
    rng = np.random.default_rng(0)
    dense = np.triu(np.tril(rng.normal(size=(12, 12)), 3), -3) + 6.0 * np.eye(12)
    rhs = rng.normal(size=12)
    x = banded_solve(BandedMatrix.from_dense(dense, 3, 3), rhs)
    assert np.allclose(dense @ x, rhs)


def test_banded_solve_needs_pivoting() -> None:
    dense = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
    x = banded_solve(BandedMatrix.from_dense(dense, 1, 1), np.array([1.0, 2.0, 3.0]))
    assert np.allclose(dense @ x, [1.0, 2.0, 3.0])


def test_banded_solve_detects_singular_matrix() -> None:
    dense = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(SingularMatrixError, match="singular"):
        banded_solve(BandedMatrix.from_dense(dense, 1, 1), np.ones(3))


def test_banded_solve_rejects_size_mismatch() -> None:
    with pytest.raises(SizeMismatchError, match="length"):
        banded_solve(BandedMatrix.from_dense(np.eye(3), 1, 1), np.ones(4))


# --- damped newton ---


def test_damped_newton_on_scalar_root() -> None:
    w, report = damped_newton(np.array([3.0]), lambda w: w ** 2 - 2.0, lambda w, r: -r / (2.0 * w), tol=1e-12)
    assert report.converged
    assert w[0] == pytest.approx(np.sqrt(2.0))
    assert report.message == "converged"
    assert report.residual_history[0] == pytest.approx(7.0)


def test_damped_newton_reports_iteration_budget() -> None:
    _, report = damped_newton(np.array([3.0]), lambda w: w ** 2 - 2.0, lambda w, r: -r / (2.0 * w),
                              tol=1e-12, max_iter=1)
    assert not report.converged
    assert report.message == "no convergence in 1 iterations"


def test_damped_newton_reports_failed_line_search() -> None:
    # x^2 + 1 has no real root; any step from the minimum increases the residual
    _, report = damped_newton(np.array([0.0]), lambda w: w ** 2 + 1.0, lambda w, r: np.array([1.0]))
    assert not report.converged
    assert report.message == "line search failed"


def test_damped_newton_rejects_nonpositive_tolerance() -> None:
    with pytest.raises(InvalidParameterError, match="tolerance"):
        damped_newton(np.zeros(1), lambda w: w, lambda w, r: -r, tol=0.0)


def test_newton_solve_keeps_constant_state() -> None:
    params = reference_params()
    state, report = newton_solve(constant_state_vector(51), 0.05, params, make_grid(51))
    assert report.converged
    assert report.iterations == 0
    assert np.allclose(state.u, 0.5)


def test_newton_solve_returns_to_constant_above_onset() -> None:
    params = reference_params()
    state, report = newton_solve(mode_state(1, 0.01, n=51), 0.05, params, make_grid(51))
    assert report.converged
    assert np.ptp(state.u) < 1e-8


def test_newton_solve_converges_quadratically() -> None:
    params = reference_params()
    _, report = newton_solve(mode_state(1, 0.1, n=51), 0.05, params, make_grid(51))
    assert report.converged
    history = [r for r in report.residual_history if r > 1e-9]
    assert len(history) >= 3
    r0, r1, r2 = history[-3:]
    # r2 ~ C r1^2 and r1 ~ C r0^2 give an observed order near 2
    assert math.log(r2 / r1) / math.log(r1 / r0) > 1.5


# --- stability ---


def test_constant_state_stability_count() -> None:
    params = reference_params()
    grid = make_grid(101)
    base = constant_state_vector(101)
    stable = assemble_jacobian(base, 0.05, params, grid)
    one_mode = assemble_jacobian(base, 0.02, params, grid)
    assert count_unstable_eigenvalues(stable) == 0
    assert count_unstable_eigenvalues(one_mode) == 1


def test_sparse_and_dense_counts_agree() -> None:
    params = reference_params()
    grid = grid_for(params, 101)
    jacobian = assemble_jacobian(constant_state_vector(101), 0.007, params, grid)
    dense = count_unstable_eigenvalues(jacobian)
    assert dense == 2
    assert count_unstable_eigenvalues(jacobian, dense=False, k=20) == dense


def test_count_matches_mode_analysis_without_flux() -> None:
    params = reference_params(0.0, 0.0)
    grid = make_grid(41)
    state = StateVector.constant(0.5, 0.5, 41)
    assert count_unstable_eigenvalues(assemble_jacobian(state, 0.001, params, grid)) == 0
