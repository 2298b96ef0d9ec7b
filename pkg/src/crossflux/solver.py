"""
Damped Newton iteration on discrete residuals with a direct banded solve.
"""

import logging
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse.linalg
from scipy.linalg import lapack

from .errors import InvalidParameterError, SingularMatrixError, SizeMismatchError
from .mesh import BandedMatrix, assemble_jacobian, assemble_residual
from .model import ModelParams
from .types import Grid, NewtonReport, StateVector

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 25
MAX_HALVINGS = 30
NEGATIVITY_FLOOR = 1e-8
UNSTABLE_THRESHOLD = 1e-8
DENSE_EIGEN_LIMIT = 400


def banded_solve(matrix: BandedMatrix, rhs: np.ndarray) -> np.ndarray:
    """
    Solve A x = b by banded LU with partial pivoting (LAPACK gbsv).

    Args:
        matrix: Square banded matrix
        rhs: Right-hand side of matching length

    Returns:
        Solution vector

    Raises:
        SizeMismatchError: If rhs length differs from the matrix size
        SingularMatrixError: If a pivot of U is zero or negligible against the largest one
    """
    rhs = np.asarray(rhs, dtype=float)
    size = matrix.size
    if rhs.shape[0] != size:
        raise SizeMismatchError(f"Right-hand side has length {rhs.shape[0]}, matrix size is {size}")
    kl, ku = matrix.kl, matrix.ku
    # gbsv wants kl extra rows for the fill-in of the pivoted factorization
    ab = np.zeros((2 * kl + ku + 1, size))
    ab[kl:, :] = matrix.data
    gbsv, = lapack.get_lapack_funcs(("gbsv",), (ab, rhs))
    lu, _, x, info = gbsv(kl, ku, ab, rhs.copy())
    if info > 0:
        raise SingularMatrixError(info - 1)
    if info < 0:
        raise InvalidParameterError(f"gbsv rejected argument {-info}")
    pivots = np.abs(lu[kl + ku])
    largest = pivots.max()
    smallest = int(np.argmin(pivots))
    if largest == 0.0 or pivots[smallest] <= size * np.finfo(float).eps * largest:
        raise SingularMatrixError(smallest)
    return x


def sup_norm(r: np.ndarray) -> float:
    return float(np.max(np.abs(r))) if r.size else 0.0


def damped_newton(
    w0: np.ndarray,
    residual: Callable[[np.ndarray], np.ndarray],
    newton_step: Callable[[np.ndarray, np.ndarray], np.ndarray],
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> Tuple[np.ndarray, NewtonReport]:
    """
    Newton iteration with step halving.

    A step is accepted once the sup-norm of the residual decreases; at most
    ``MAX_HALVINGS`` halvings are tried per iteration.

    Args:
        w0: Initial iterate
        residual: r(w)
        newton_step: (w, r) -> Newton correction solving J(w) dw = -r
        tol: Sup-norm tolerance on the residual
        max_iter: Maximum number of Newton steps

    Returns:
        (final iterate, report); ``report.converged`` implies residual <= tol

    Raises:
        SingularMatrixError: Propagated from the linear solve
    """
    if not tol > 0.0:
        raise InvalidParameterError(f"Newton tolerance must be positive, got {tol}")
    w = np.array(w0, dtype=float)
    r = residual(w)
    r_norm = sup_norm(r)
    report = NewtonReport(converged=False, iterations=0, residual_norm=r_norm, residual_history=[r_norm])
    while True:
        if r_norm <= tol:
            report.converged = True
            report.message = "converged"
            break
        if report.iterations >= max_iter:
            report.message = f"no convergence in {max_iter} iterations"
            break
        step = newton_step(w, r)
        scale = 1.0
        halvings = 0
        while True:
            trial = w + scale * step
            trial_r = residual(trial)
            trial_norm = sup_norm(trial_r)
            if np.isfinite(trial_norm) and trial_norm < r_norm:
                break
            if halvings >= MAX_HALVINGS:
                break
            scale *= 0.5
            halvings += 1
        report.iterations += 1
        if halvings >= MAX_HALVINGS and not (np.isfinite(trial_norm) and trial_norm < r_norm):
            report.message = "line search failed"
            break
        if halvings:
            report.damping_events += 1
        report.step_norms.append(sup_norm(scale * step))
        w, r, r_norm = trial, trial_r, trial_norm
        report.residual_history.append(r_norm)
        logger.debug("newton iteration %d: residual %.3e, damping %g", report.iterations, r_norm, scale)
    report.residual_norm = r_norm
    return w, report


def newton_solve(
    initial: StateVector,
    d2: float,
    params: ModelParams,
    grid: Grid,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> Tuple[StateVector, NewtonReport]:
    """
    Solve F(d2, u, v) = 0 at fixed d2 from ``initial``.

    Non-convergence is reported, not raised. A converged state with a nodal
    value below -1e-8 is rejected as nonphysical (``converged`` set False).
    """

    def residual(w: np.ndarray) -> np.ndarray:
        return assemble_residual(StateVector.from_packed(w), d2, params, grid)

    def newton_step(w: np.ndarray, r: np.ndarray) -> np.ndarray:
        return banded_solve(assemble_jacobian(StateVector.from_packed(w), d2, params, grid), -r)

    w, report = damped_newton(initial.pack(), residual, newton_step, tol=tol, max_iter=max_iter)
    state = StateVector.from_packed(w)
    if report.converged and state.min_value() < -NEGATIVITY_FLOOR:
        report.converged = False
        report.message = f"nonphysical solution: min value {state.min_value():.3e}"
    return state, report


def count_unstable_eigenvalues(matrix: BandedMatrix, dense: bool = True, k: int = 20, shift: float = 0.0) -> Optional[int]:
    """
    Number of eigenvalues of a residual Jacobian with real part above 1e-8.

    The residual is the right-hand side of the time evolution, so these are
    the growing modes. ``dense`` uses a full eigensolve; otherwise the ``k``
    eigenvalues nearest ``shift`` are found by shift-invert Arnoldi. Returns
    None when the eigensolver breaks down.
    """
    try:
        if dense or matrix.size <= k + 2:
            eigenvalues = scipy.linalg.eigvals(matrix.to_dense())
        else:
            eigenvalues = scipy.sparse.linalg.eigs(matrix.to_sparse(), k=k, sigma=shift, which="LM",
                                                   return_eigenvectors=False)
    except (np.linalg.LinAlgError, scipy.sparse.linalg.ArpackError, scipy.sparse.linalg.ArpackNoConvergence,
            RuntimeError) as e:
        logger.warning("Eigensolver breakdown, stability index unknown: %s", e)
        return None
    if not np.all(np.isfinite(eigenvalues)):
        return None
    return int(np.sum(eigenvalues.real > UNSTABLE_THRESHOLD))
