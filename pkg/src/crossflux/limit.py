"""
The limiting scalar field equation

    d(d2) v'' + xi* v (v - v*) = 0,   v'(x_left) = v'(x_right) = 0,

reached as alpha, beta -> infinity with alpha / beta -> gamma > A tau*. Its
branches are traced with the same grid, Neumann closure and continuation
machinery as the full system; a shooting method provides an independent
oracle, and polyline distances measure how close the system branches are.
"""

import dataclasses
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import scipy.optimize
from scipy.integrate import solve_ivp
from scipy.spatial.distance import directed_hausdorff

from .continuation import StepControls, Termination, estimate_onset, switch_onto, trace
from .enums import BranchKind, BranchSide
from .errors import BranchSwitchError, InvalidParameterError, NoSolutionError
from .mesh import BandedMatrix, apply_laplacian, neumann_laplacian
from .model import ModelParams
from .problem import SteadyProblem
from .spectral import NeumannMode, limit_coefficients, limiting_critical_d2, require_scalar_field
from .types import Branch, BranchOrigin, Gamma, Grid, ScalarBranch, StateVector

logger = logging.getLogger(__name__)

SHOOTING_TOL = 1e-12
RESAMPLE_POINTS = 512


class ScalarProblem(SteadyProblem):
    """
    Discretized scalar field equation on the system's grid.

    The unknown is v; states are reported as (tau* v, v).

    Raises:
        RegimeError: If gamma does not lie above A tau*
    """

    def __init__(self, params: ModelParams, gamma: Gamma, grid: Grid):
        super().__init__(params, grid)
        self.gamma = gamma
        self.coefficients = limit_coefficients(params, gamma)
        require_scalar_field(self.coefficients)
        self.laplacian = neumann_laplacian(grid)

    def residual(self, w: np.ndarray, d2: float) -> np.ndarray:
        c = self.coefficients
        return c.d_eff(d2) * apply_laplacian(w, self.grid) + c.xi_star * w * (w - c.v_star)

    def jacobian(self, w: np.ndarray, d2: float) -> BandedMatrix:
        c = self.coefficients
        data = c.d_eff(d2) * self.laplacian.data
        data[self.laplacian.ku] += c.xi_star * (2.0 * w - c.v_star)
        return BandedMatrix(data, self.laplacian.kl, self.laplacian.ku)

    def d2_derivative(self, w: np.ndarray, d2: float) -> np.ndarray:
        return self.coefficients.d_slope * apply_laplacian(w, self.grid)

    def to_state(self, w: np.ndarray) -> StateVector:
        return StateVector(self.constant.tau_star * w, np.array(w, dtype=float))

    def from_state(self, state: StateVector) -> np.ndarray:
        return state.v.copy()

    def constant_w(self) -> np.ndarray:
        return np.full(self.grid.n, self.coefficients.v_star)

    def kernel_direction(self, j: int) -> np.ndarray:
        return NeumannMode.for_params(j, self.params).sample(self.grid)

    def weights(self) -> np.ndarray:
        return self.grid.volumes


def scalar_residual(v: np.ndarray, d2: float, params: ModelParams, gamma: Gamma, grid: Grid) -> np.ndarray:
    """Discrete d_eff v'' + xi* v (v - v*) with the system's Neumann closure."""
    return ScalarProblem(params, gamma, grid).residual(np.asarray(v, dtype=float), d2)


def trace_scalar_branch(j: int, side: BranchSide, params: ModelParams, gamma: Gamma, grid: Grid,
                        controls: Optional[StepControls] = None, termination: Optional[Termination] = None,
                        amplitude: float = 0.05, delta: float = 0.02) -> ScalarBranch:
    """
    Switch onto S_inf^(j) at its closed-form onset and continue it.

    Raises:
        RegimeError: Outside regime (ii)
        BranchSwitchError: If mode j has no positive onset or the switch fails
    """
    controls = controls or StepControls()
    termination = termination or Termination()
    problem = ScalarProblem(params, gamma, grid)
    onset = limiting_critical_d2(j, params, gamma)
    if onset is None:
        raise BranchSwitchError(f"Mode {j} has no positive onset in the limit for gamma = {gamma}")
    seed = switch_onto(problem, onset, problem.kernel_direction(j), side.sign, amplitude,
                       delta=delta, tol=controls.tol)
    w = seed.state.v
    branch = ScalarBranch(id=f"limit{j}-{side.value}", origin=BranchOrigin(BranchKind.LIMIT, j=j, side=side),
                          tol=controls.tol, analytic_onset=onset, gamma=gamma)
    return trace(problem, w, seed.d2, np.append(w - problem.constant_w(), 0.0), branch, controls, termination)


def trace_scalar_branches(params: ModelParams, gamma: Gamma, j_list: Sequence[int], d2_floor: float, grid: Grid,
                          controls: Optional[StepControls] = None, termination: Optional[Termination] = None,
                          amplitude: float = 0.05, delta: float = 0.02,
                          sides: Sequence[BranchSide] = (BranchSide.UPPER, BranchSide.LOWER)) -> List[ScalarBranch]:
    """
    Upper and lower S_inf^(j) for every j in ``j_list`` down to ``d2_floor``.

    A failed switch skips that branch with a warning; regime violations raise.
    """
    require_scalar_field(limit_coefficients(params, gamma))
    termination = dataclasses.replace(termination or Termination(), d2_floor=d2_floor)
    branches = []
    for j in j_list:
        for side in sides:
            try:
                branches.append(trace_scalar_branch(j, side, params, gamma, grid, controls, termination,
                                                    amplitude=amplitude, delta=delta))
            except BranchSwitchError as e:
                logger.warning("Skipping S_inf^(%d) %s: %s", j, side.value, e)
    return branches


# --- shooting ---


@dataclass(frozen=True)
class ShootingProfile:
    """Solution of the scalar equation found by shooting from the left end."""
    eta: float
    x: np.ndarray
    v: np.ndarray
    mismatch: float
    interior_zeros: int


def _integrate(eta: float, rate: float, v_star: float, length: float, x_left: float,
               dense: bool = False):
    def rhs(x: float, y: np.ndarray) -> List[float]:
        return [y[1], -rate * y[0] * (y[0] - v_star)]

    def slope(x: float, y: np.ndarray) -> float:
        return y[1]

    return solve_ivp(rhs, (x_left, x_left + length), [eta, 0.0], method="DOP853", rtol=SHOOTING_TOL,
                     atol=SHOOTING_TOL, events=slope, dense_output=dense)


def _interior_zeros(solution, length: float, x_left: float) -> int:
    margin = 1e-9 * length
    times = solution.t_events[0]
    return int(np.count_nonzero((times > x_left + margin) & (times < x_left + length - margin)))


def shooting_mismatch(eta: float, d_eff: float, xi_star: float, v_star: float, length: float = 1.0,
                      x_left: float = -0.5) -> float:
    """v'(x_right) for the solution with v(x_left) = eta, v'(x_left) = 0."""
    solution = _integrate(eta, xi_star / d_eff, v_star, length, x_left)
    return float(solution.y[1, -1])


def _eta_scan(v_star: float, side: BranchSide) -> np.ndarray:
    # t -> 0 approaches the homoclinic orbit through v = 0, t -> 1 the constant state
    t = np.unique(np.concatenate([np.geomspace(1e-10, 0.5, 60), np.linspace(0.5, 1.0, 81)[1:-1]]))
    if side is BranchSide.UPPER:
        return v_star * t
    return 1.5 * v_star - 0.5 * v_star * t


def shooting_oracle(d_eff: float, xi_star: float, v_star: float, target_nodes: int,
                    side: BranchSide = BranchSide.UPPER, length: float = 1.0, x_left: float = -0.5,
                    nodes: Optional[np.ndarray] = None) -> ShootingProfile:
    """
    Solve d_eff v'' + xi* v (v - v*) = 0 with Neumann ends by shooting on eta = v(x_left).

    Upper profiles start below v* (v increasing at the left end), lower ones
    between v* and 3 v* / 2. The bracket is where the number of interior zeros
    of v' moves from ``target_nodes`` to ``target_nodes + 1``; the mismatch
    v'(x_right) changes sign there and is bisected.

    Raises:
        InvalidParameterError: For nonpositive coefficients or a negative node count
        NoSolutionError: If no bracket with a sign change exists
    """
    if not (d_eff > 0.0 and xi_star > 0.0 and v_star > 0.0):
        raise InvalidParameterError("Shooting needs positive d_eff, xi* and v*")
    if target_nodes < 0:
        raise InvalidParameterError(f"Node count must be nonnegative, got {target_nodes}")
    rate = xi_star / d_eff
    etas = _eta_scan(v_star, side)
    counts = []
    mismatches = []
    for eta in etas:
        solution = _integrate(eta, rate, v_star, length, x_left)
        counts.append(_interior_zeros(solution, length, x_left))
        mismatches.append(float(solution.y[1, -1]))
    bracket = None
    for i in range(len(etas) - 1):
        if counts[i] == target_nodes and counts[i + 1] == target_nodes + 1 and mismatches[i] * mismatches[i + 1] < 0.0:
            bracket = (etas[i], etas[i + 1])
            break
    if bracket is None:
        raise NoSolutionError(
            f"No {side.value} profile with {target_nodes} interior zeros of v' for d_eff = {d_eff:.6g}"
        )

    def mismatch(eta: float) -> float:
        return shooting_mismatch(eta, d_eff, xi_star, v_star, length, x_left)

    lo, hi = sorted(bracket)
    eta = float(scipy.optimize.bisect(mismatch, lo, hi, xtol=1e-14, maxiter=200))
    solution = _integrate(eta, rate, v_star, length, x_left, dense=True)
    x = np.linspace(x_left, x_left + length, 1001) if nodes is None else np.asarray(nodes, dtype=float)
    return ShootingProfile(eta=eta, x=x, v=solution.sol(x)[0], mismatch=float(solution.y[1, -1]),
                           interior_zeros=_interior_zeros(solution, length, x_left))


# --- branch comparison ---


def _resample(polyline: np.ndarray, samples: int) -> np.ndarray:
    """Resample a polyline at equal arclength spacing."""
    if polyline.shape[0] == 1:
        return np.repeat(polyline, samples, axis=0)
    lengths = np.hypot(*np.diff(polyline, axis=0).T)
    cumulative = np.concatenate([[0.0], np.cumsum(lengths)])
    if cumulative[-1] == 0.0:
        return np.repeat(polyline[:1], samples, axis=0)
    targets = np.linspace(0.0, cumulative[-1], samples)
    return np.column_stack([np.interp(targets, cumulative, polyline[:, k]) for k in range(2)])


@dataclass(frozen=True)
class BranchDistance:
    """Directed and symmetric Hausdorff distances between two branches and their onset gaps."""
    forward: float
    backward: float
    onset_gap: Optional[float] = None
    measured_onset_gap: Optional[float] = None

    @property
    def hausdorff(self) -> float:
        return max(self.forward, self.backward)


def branch_distance(system_branch: Branch, scalar_branch: Branch, measure: str = "sup_v",
                    samples: int = RESAMPLE_POINTS, params: Optional[ModelParams] = None,
                    grid: Optional[Grid] = None) -> BranchDistance:
    """
    Hausdorff distance between two branches in the (d2, measure) plane.

    Both polylines are resampled to ``samples`` points by arclength first.
    ``onset_gap`` compares the analytic onsets; with ``params`` and ``grid``
    the extrapolated onsets are compared as well.

    Raises:
        InvalidParameterError: If either branch is empty
    """
    if len(system_branch) == 0 or len(scalar_branch) == 0:
        raise InvalidParameterError("Branch distance needs two nonempty branches")
    a = _resample(system_branch.polyline(measure), samples)
    b = _resample(scalar_branch.polyline(measure), samples)
    forward = float(directed_hausdorff(a, b)[0])
    backward = float(directed_hausdorff(b, a)[0])
    onset_gap = None
    if system_branch.analytic_onset is not None and scalar_branch.analytic_onset is not None:
        onset_gap = abs(system_branch.analytic_onset - scalar_branch.analytic_onset)
    measured = None
    if params is not None and grid is not None:
        system_onset = estimate_onset(system_branch, params, grid)
        scalar_onset = estimate_onset(scalar_branch, params, grid)
        if system_onset is not None and scalar_onset is not None:
            measured = abs(system_onset - scalar_onset)
    return BranchDistance(forward=forward, backward=backward, onset_gap=onset_gap, measured_onset_gap=measured)


@dataclass(frozen=True)
class RatioDefectProfile:
    values: np.ndarray
    maximum: float


def ratio_defect_profile(branch: Branch) -> RatioDefectProfile:
    """Normalized defect ||u - tau* v||_inf / ||v||_inf per point and its branch maximum."""
    values = np.array([p.ratio_defect / p.norms.sup_v if p.norms.sup_v > 0.0 else 0.0 for p in branch.points])
    return RatioDefectProfile(values=values, maximum=float(values.max()) if values.size else 0.0)
