"""
Pseudo-arclength continuation in d2.

Covers bifurcation detection on the trivial branch, switching onto the
nonconstant branches along the kernel direction, tracing them with a Keller
bordered corrector, and classifying the traced states (stability index,
node count, upper/lower side).
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.optimize
import scipy.sparse
import scipy.sparse.linalg

from .enums import BranchKind, BranchSide, TerminationReason
from .errors import (
    BranchSwitchError,
    ClassificationError,
    InvalidParameterError,
    NumericalError,
    SingularMatrixError,
)
from .mesh import integrate
from .model import ModelParams, constant_state
from .problem import SteadyProblem, SystemProblem
from .solver import DEFAULT_MAX_ITER, DEFAULT_TOL, damped_newton
from .spectral import (
    NeumannMode,
    critical_d2,
    discrete_critical_d2,
    mode_block,
    mode_set_and_threshold,
    region_membership,
)
from .types import Branch, BranchOrigin, BranchPoint, Grid, NewtonReport, StateVector

logger = logging.getLogger(__name__)

# Below this switching amplitude a collapse onto the constant state is not retried.
NOISE_FLOOR = 1e-6


@dataclass(frozen=True)
class StepControls:
    """Arclength step-size controls and corrector settings."""
    ds: float = 0.02
    ds_min: float = 1e-5
    ds_max: float = 0.1
    growth: float = 1.3
    easy_iterations: int = 4
    easy_steps: int = 2
    max_corrector_iterations: int = 12
    tol: float = DEFAULT_TOL
    compute_stability: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.ds_min <= self.ds <= self.ds_max:
            raise InvalidParameterError(
                f"Step sizes must satisfy 0 < ds_min <= ds <= ds_max, got {self.ds_min}, {self.ds}, {self.ds_max}"
            )
        if not self.growth > 1.0:
            raise InvalidParameterError(f"Step growth factor must exceed 1, got {self.growth}")
        if not self.tol > 0.0:
            raise InvalidParameterError(f"Corrector tolerance must be positive, got {self.tol}")


@dataclass(frozen=True)
class Termination:
    """Stopping rules for a branch trace."""
    d2_floor: float = 0.002
    d2_ceiling: float = math.inf
    max_points: int = 400
    max_folds: int = 4

    def __post_init__(self) -> None:
        if not 0.0 <= self.d2_floor < self.d2_ceiling:
            raise InvalidParameterError(f"Need 0 <= d2_floor < d2_ceiling, got {self.d2_floor}, {self.d2_ceiling}")
        if self.max_points < 1:
            raise InvalidParameterError(f"max_points must be >= 1, got {self.max_points}")


# --- trivial branch ---


@dataclass
class StabilityProfile:
    """Number of modes j <= j_max with det A_j(d2) < 0 at each sampled d2."""
    d2_values: np.ndarray
    counts: np.ndarray
    unstable_modes: List[Tuple[int, ...]] = field(default_factory=list)


def trivial_branch_stability(params: ModelParams, d2_values: Sequence[float], j_max: int) -> StabilityProfile:
    if j_max < 1:
        raise InvalidParameterError(f"j_max must be >= 1, got {j_max}")
    d2_array = np.asarray(d2_values, dtype=float)
    counts = np.zeros(d2_array.shape[0], dtype=int)
    unstable: List[Tuple[int, ...]] = []
    for i, d2 in enumerate(d2_array):
        modes = tuple(j for j in range(1, j_max + 1) if mode_block(j, float(d2), params).det < 0.0)
        counts[i] = len(modes)
        unstable.append(modes)
    return StabilityProfile(d2_values=d2_array, counts=counts, unstable_modes=unstable)


@dataclass(frozen=True)
class BifurcationPoint:
    """Analytic onset of mode j with its discrete counterparts.

    ``discrete_d_star`` is the closed form with the discrete eigenvalue;
    ``detected_d_star`` is the bracketed sign change of the discrete Jacobian
    determinant at the constant state.
    """
    j: int
    d_star: float
    discrete_d_star: Optional[float] = None
    detected_d_star: Optional[float] = None

    @property
    def gap(self) -> Optional[float]:
        if self.detected_d_star is None:
            return None
        return abs(self.detected_d_star - self.d_star)


def _scaled_determinant(problem: SystemProblem, d2: float, reference: float) -> float:
    """sign(det J) |det J|^(1/N) relative to a reference log-determinant; continuous in d2."""
    sign, logabs = np.linalg.slogdet(problem.jacobian(problem.constant_w(), d2).to_dense())
    if sign == 0.0:
        return 0.0
    return float(sign * math.exp((logabs - reference) / problem.constant_w().size))


def _bracket_root(problem: SystemProblem, d_star: float, width: float) -> Optional[float]:
    _, reference = np.linalg.slogdet(problem.jacobian(problem.constant_w(), d_star).to_dense())

    def scaled(d2: float) -> float:
        return _scaled_determinant(problem, d2, reference)

    for _ in range(4):
        lo, hi = d_star * (1.0 - width), d_star * (1.0 + width)
        f_lo, f_hi = scaled(lo), scaled(hi)
        if f_lo == 0.0:
            return lo
        if f_hi == 0.0:
            return hi
        if f_lo * f_hi < 0.0:
            return float(scipy.optimize.brentq(scaled, lo, hi, xtol=1e-15 * max(1.0, d_star), maxiter=200))
        width = min(2.0 * width, 0.9)
    return None


def detect_bifurcations(params: ModelParams, d2_range: Tuple[float, float], j_max: int,
                        grid: Optional[Grid] = None) -> List[BifurcationPoint]:
    """
    Analytic onsets d_*^(j) inside ``d2_range``, sorted descending.

    With a grid, each onset is also located as a sign change of the
    determinant of the discrete Jacobian at (u*, v*), bracketed away from
    the neighbouring onsets.
    """
    lo, hi = d2_range
    mode_set = mode_set_and_threshold(params, j_max)
    onsets = sorted(((j, d) for j, d in mode_set.d_stars.items() if lo <= d <= hi), key=lambda item: -item[1])
    if grid is None:
        return [BifurcationPoint(j=j, d_star=d) for j, d in onsets]
    problem = SystemProblem(params, grid)
    all_values = sorted(mode_set.d_stars.values())
    points = []
    for j, d_star in onsets:
        neighbours = [abs(other - d_star) / d_star for other in all_values if other != d_star]
        width = min([0.05] + [0.5 * gap for gap in neighbours])
        detected = _bracket_root(problem, d_star, width)
        if detected is None:
            logger.warning("No determinant sign change found near d_*^(%d) = %.6g", j, d_star)
        points.append(BifurcationPoint(j=j, d_star=d_star, discrete_d_star=discrete_critical_d2(j, params, grid),
                                       detected_d_star=detected))
    return points


@dataclass(frozen=True)
class KernelCheck:
    j: int
    d2: float
    eigenvalue: float
    alignment: float


def kernel_alignment(j: int, params: ModelParams, grid: Grid) -> KernelCheck:
    """Smallest-magnitude eigenvalue of the discrete Jacobian at (u*, v*), d2 = d_*^(j), and its kernel alignment."""
    d_star = critical_d2(j, params)
    if d_star is None:
        raise InvalidParameterError(f"(alpha, beta) = ({params.alpha}, {params.beta}) is outside R_{j}")
    problem = SystemProblem(params, grid)
    eigenvalues, vectors = np.linalg.eig(problem.jacobian(problem.constant_w(), d_star).to_dense())
    index = int(np.argmin(np.abs(eigenvalues)))
    vector = vectors[:, index]
    # remove the arbitrary complex phase
    vector = (vector * np.conj(vector[np.argmax(np.abs(vector))])).real
    kernel = problem.kernel_direction(j)
    alignment = abs(float(np.dot(vector, kernel))) / (np.linalg.norm(vector) * np.linalg.norm(kernel))
    return KernelCheck(j=j, d2=d_star, eigenvalue=float(abs(eigenvalues[index])), alignment=alignment)


# --- bordered corrector ---


def _extended_inner(weights: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(weights * a[:-1], b[:-1]) + a[-1] * b[-1])


def _bordered_solve(problem: SteadyProblem, z: np.ndarray, border: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve [[J, R_d2], [W border_w, border_d2]] x = rhs."""
    w, d2 = z[:-1], z[-1]
    jacobian = problem.jacobian(w, d2).to_sparse()
    column = scipy.sparse.csc_matrix(problem.d2_derivative(w, d2)[:, None])
    row = scipy.sparse.csc_matrix((problem.weights() * border[:-1])[None, :])
    corner = scipy.sparse.csc_matrix([[border[-1]]])
    matrix = scipy.sparse.bmat([[jacobian, column], [row, corner]], format="csc")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.sparse.linalg.MatrixRankWarning)
        solution = scipy.sparse.linalg.spsolve(matrix, rhs)
    bad = np.flatnonzero(~np.isfinite(solution))
    if bad.size:
        raise SingularMatrixError(int(bad[0]), "Bordered continuation matrix is singular")
    return solution


def _correct(problem: SteadyProblem, z_pred: np.ndarray, tangent: np.ndarray, z_prev: np.ndarray, ds: float,
             tol: float, max_iter: int) -> Tuple[np.ndarray, NewtonReport]:
    """Newton on R(w, d2) = 0 together with <tangent, z - z_prev> = ds."""
    weights = problem.weights()

    def residual(z: np.ndarray) -> np.ndarray:
        r = np.empty_like(z)
        r[:-1] = problem.residual(z[:-1], z[-1])
        r[-1] = _extended_inner(weights, tangent, z - z_prev) - ds
        return r

    def newton_step(z: np.ndarray, r: np.ndarray) -> np.ndarray:
        return _bordered_solve(problem, z, tangent, -r)

    return damped_newton(z_pred, residual, newton_step, tol=tol, max_iter=max_iter)


def _normalize(problem: SteadyProblem, t: np.ndarray) -> np.ndarray:
    return t / math.sqrt(_extended_inner(problem.weights(), t, t))


def initial_tangent(problem: SteadyProblem, w: np.ndarray, d2: float, guess: np.ndarray) -> np.ndarray:
    """Tangent of the solution curve at (w, d2), oriented along ``guess``."""
    guess = _normalize(problem, guess)
    z = np.append(w, d2)
    rhs = np.zeros(z.size)
    rhs[-1] = 1.0
    tangent = _normalize(problem, _bordered_solve(problem, z, guess, rhs))
    if _extended_inner(problem.weights(), tangent, guess) < 0.0:
        tangent = -tangent
    return tangent


def trace(problem: SteadyProblem, seed_w: np.ndarray, seed_d2: float, guess: np.ndarray, branch: Branch,
          controls: StepControls, termination: Termination) -> Branch:
    """
    Follow the solution curve from a certified seed with pseudo-arclength steps.

    Points are appended to ``branch``; its termination reason and fold count
    are set on return.
    """
    stability = controls.compute_stability
    tangent = initial_tangent(problem, seed_w, seed_d2, guess)
    z = np.append(seed_w, seed_d2)
    seed_residual = float(np.max(np.abs(problem.residual(seed_w, seed_d2))))
    branch.append(problem.make_point(seed_w, seed_d2, seed_residual, s=0.0, tangent=tangent,
                                     with_stability=stability))
    logger.info("Tracing branch %s from d2 = %.6g", branch.id, seed_d2)
    ds = controls.ds
    easy = 0
    s = 0.0
    folds = 0
    reason: Optional[TerminationReason] = None
    while reason is None:
        if len(branch) >= termination.max_points:
            reason = TerminationReason.POINT_BUDGET
            break
        try:
            z_new, report = _correct(problem, z + ds * tangent, tangent, z, ds, controls.tol,
                                     controls.max_corrector_iterations)
            accepted = report.converged and problem.is_admissible(z_new[:-1])
        except SingularMatrixError as e:
            logger.debug("Corrector hit a singular bordered matrix: %s", e)
            report, accepted = None, False
        if not accepted:
            if ds <= controls.ds_min:
                reason = TerminationReason.STEP_FAILURE
                break
            ds = max(0.5 * ds, controls.ds_min)
            easy = 0
            logger.debug("Step rejected on %s, ds -> %.3e", branch.id, ds)
            continue
        secant = z_new - z
        step_length = math.sqrt(_extended_inner(problem.weights(), secant, secant))
        new_tangent = secant / step_length
        if new_tangent[-1] * tangent[-1] < 0.0:
            folds += 1
            logger.info("Fold %d on branch %s near d2 = %.6g", folds, branch.id, z_new[-1])
        s += step_length
        z, tangent = z_new, new_tangent
        branch.append(problem.make_point(z[:-1], z[-1], report.residual_norm, s=s, tangent=tangent,
                                         with_stability=stability))
        if z[-1] < termination.d2_floor:
            reason = TerminationReason.D2_FLOOR
        elif z[-1] > termination.d2_ceiling:
            reason = TerminationReason.D2_CEILING
        elif folds > termination.max_folds:
            reason = TerminationReason.FOLD_COUNT
        easy = easy + 1 if report.iterations <= controls.easy_iterations else 0
        if easy >= controls.easy_steps:
            ds = min(controls.growth * ds, controls.ds_max)
            easy = 0
    branch.termination = reason
    branch.fold_count = folds
    logger.info("Branch %s stopped (%s) after %d points at d2 = %.6g",
                branch.id, reason.value, len(branch), branch.points[-1].d2)
    return branch


# --- branch switching ---


def switch_onto(problem: SteadyProblem, d_star: float, direction: np.ndarray, sign: int, amplitude: float,
                delta: float = 0.02, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> BranchPoint:
    """
    First nonconstant point of the branch leaving the constant state at ``d_star`` along ``direction``.

    Tries Newton at the detuned value d_star (1 - delta) from the predictor
    constant + sign amplitude direction. If that collapses onto the constant
    state, the projection onto ``direction`` is held at the predictor's value
    and d2 is left free.

    Raises:
        BranchSwitchError: If neither correction yields a positive nonconstant solution
    """
    if sign not in (-1, 1):
        raise InvalidParameterError(f"Switching sign must be +1 or -1, got {sign}")
    if not amplitude > 0.0:
        raise InvalidParameterError(f"Switching amplitude must be positive, got {amplitude}")
    base = problem.constant_w()
    predictor = base + sign * amplitude * direction
    d2 = d_star * (1.0 - delta)
    collapsed = False
    try:
        w, report = problem.newton(predictor, d2, tol=tol, max_iter=max_iter)
        if report.converged:
            if not problem.is_constant(w, tol):
                return problem.make_point(w, d2, report.residual_norm)
            collapsed = True
    except SingularMatrixError as e:
        logger.debug("Detuned switching solve singular: %s", e)
    if collapsed and amplitude < NOISE_FLOOR:
        raise BranchSwitchError(
            f"Corrector collapsed to the constant state at d2 = {d2:.6g}; amplitude {amplitude:g} "
            "is below the discretization noise floor",
            collapsed=True,
        )
    logger.warning("Detuned switch at d2 = %.6g %s; retrying with the amplitude held fixed",
                   d2, "collapsed to the constant state" if collapsed else "did not converge")
    size = math.sqrt(problem.inner(direction, direction))
    constraint = np.append(direction / size, 0.0)
    origin = np.append(base, d_star)
    try:
        z, report = _correct(problem, np.append(predictor, d_star), constraint, origin, sign * amplitude * size,
                             tol, max_iter)
    except SingularMatrixError as e:
        raise BranchSwitchError(f"Amplitude-constrained switch failed: {e}; try a smaller amplitude") from e
    if report.converged and problem.is_admissible(z[:-1]) and not problem.is_constant(z[:-1], tol):
        return problem.make_point(z[:-1], z[-1], float(np.max(np.abs(problem.residual(z[:-1], z[-1])))))
    collapsed = collapsed or (report.converged and problem.is_constant(z[:-1], tol))
    raise BranchSwitchError(
        f"Branch switch failed ({report.message}); try a smaller amplitude than {amplitude:g}",
        collapsed=collapsed,
    )


def switch_branch(j: int, sign: int, amplitude: float, params: ModelParams, grid: Grid, delta: float = 0.02,
                  tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> BranchPoint:
    """
    Seed point on Gamma_j from the predictor (u*, v*) + sign amplitude (Phi_j, kappa_j Phi_j).

    Raises:
        InvalidParameterError: If (alpha, beta) is outside R_j
        BranchSwitchError: If the corrector fails or collapses to the constant state
    """
    if not region_membership(j, params):
        raise InvalidParameterError(f"(alpha, beta) = ({params.alpha}, {params.beta}) is outside R_{j}")
    problem = SystemProblem(params, grid)
    return switch_onto(problem, critical_d2(j, params), problem.kernel_direction(j), sign, amplitude,
                       delta=delta, tol=tol, max_iter=max_iter)


# --- tracing ---


def _classify_origin(state: StateVector, grid: Grid, tol: float) -> BranchOrigin:
    if float(np.ptp(state.u)) <= 10.0 * tol:
        return BranchOrigin(BranchKind.TRIVIAL)
    return BranchOrigin(BranchKind.BIFURCATION, j=node_count(state, grid) + 1, side=branch_side(state, grid))


def continue_branch(seed: BranchPoint, params: ModelParams, grid: Grid, controls: Optional[StepControls] = None,
                    termination: Optional[Termination] = None, branch_id: Optional[str] = None,
                    origin: Optional[BranchOrigin] = None, reverse: bool = False) -> Branch:
    """
    Continue a certified seed point into a Branch.

    The first tangent comes from the seed's stored tangent when present,
    otherwise from its deviation from the constant state (or decreasing d2
    for a constant seed). ``reverse`` flips it.

    Raises:
        NumericalError: If the seed is not certified at the controls' tolerance
    """
    controls = controls or StepControls()
    termination = termination or Termination()
    if not seed.residual_norm <= controls.tol:
        raise NumericalError(f"Seed residual {seed.residual_norm:.3e} exceeds tolerance {controls.tol:.1e}")
    problem = SystemProblem(params, grid)
    w = seed.state.pack()
    origin = origin or _classify_origin(seed.state, grid, controls.tol)
    if seed.tangent is not None:
        guess = np.array(seed.tangent, dtype=float)
    elif origin.kind is BranchKind.TRIVIAL:
        guess = np.append(np.zeros_like(w), -1.0)
    else:
        guess = np.append(w - problem.constant_w(), 0.0)
    if reverse:
        guess = -guess
    branch = Branch(id=branch_id or f"branch-{origin.tag}", origin=origin, tol=controls.tol)
    if origin.kind is BranchKind.BIFURCATION and origin.j is not None:
        branch.analytic_onset = critical_d2(origin.j, params)
    return trace(problem, w, seed.d2, guess, branch, controls, termination)


def trace_mode_branch(j: int, side: BranchSide, params: ModelParams, grid: Grid,
                      controls: Optional[StepControls] = None, termination: Optional[Termination] = None,
                      amplitude: float = 0.05, delta: float = 0.02) -> Branch:
    """Switch onto Gamma_j on the requested side and continue it."""
    controls = controls or StepControls()
    seed = switch_branch(j, side.sign, amplitude, params, grid, delta=delta, tol=controls.tol)
    observed = branch_side(seed.state, grid)
    if observed is not side:
        logger.warning("Switch for Gamma_%d %s landed on the %s side", j, side.value, observed.value)
    origin = BranchOrigin(BranchKind.BIFURCATION, j=j, side=observed)
    return continue_branch(seed, params, grid, controls, termination, branch_id=f"gamma{j}-{observed.value}",
                           origin=origin)


# --- classification ---


def stability_index(state: StateVector, d2: float, params: ModelParams, grid: Grid) -> Optional[int]:
    """
    Number of growing modes of the time-evolution linearization at a steady state.

    These are the eigenvalues mu of the linearized problem with Re mu < -1e-8,
    i.e. eigenvalues of the residual Jacobian with real part above 1e-8.
    None when the eigensolver breaks down.
    """
    return SystemProblem(params, grid).stability_index(state.pack(), d2)


def node_count(state: StateVector, grid: Grid) -> int:
    """
    Sign changes of the discrete derivative of v across the interior.

    Derivative values below 1e-8 sup|v| are ignored.

    Raises:
        ClassificationError: For a constant profile
    """
    derivative = np.diff(state.v) / grid.h
    floor = 1e-8 * float(np.max(np.abs(state.v)))
    significant = derivative[np.abs(derivative) > floor]
    if significant.size == 0:
        raise ClassificationError("Node count is undefined for a constant state")
    return int(np.count_nonzero(np.diff(np.sign(significant))))


def branch_side(state: StateVector, grid: Grid) -> BranchSide:
    """Upper when v increases next to the left end."""
    return BranchSide.UPPER if state.v[1] > state.v[0] else BranchSide.LOWER


def mode_amplitude(state: StateVector, j: int, params: ModelParams, grid: Grid) -> float:
    """Projection of v - v* onto Phi_j."""
    phi = NeumannMode.for_params(j, params).sample(grid)
    return integrate((state.v - constant_state(params).v_star) * phi, grid)


def estimate_onset(branch: Branch, params: ModelParams, grid: Grid, samples: int = 3) -> Optional[float]:
    """
    Extrapolate the onset d2 where the branch meets the constant state.

    Fits d2 against the squared mode amplitude over the ``samples``
    smallest-amplitude points and returns the intercept; None without a mode
    index or with fewer than two points.
    """
    j = branch.origin.j
    if j is None or len(branch) < 2:
        return None
    amplitudes = np.array([mode_amplitude(p.state, j, params, grid) for p in branch.points])
    order = np.argsort(np.abs(amplitudes))[:samples]
    squared = amplitudes[order] ** 2
    d2 = branch.d2_values()[order]
    if np.ptp(squared) == 0.0:
        return float(np.mean(d2))
    _, intercept = np.polyfit(squared, d2, 1)
    return float(intercept)

