"""
Discrete steady-state problems shared by the continuation machinery.

A ``SteadyProblem`` hides the unknown layout (interleaved two-field system or
single scalar field) behind residual, Jacobian and d2-derivative hooks so that
Newton, branch switching and arclength continuation are written once.
"""

import logging
from abc import ABC, abstractmethod
from typing import Optional, Tuple

import numpy as np

from .mesh import assemble_jacobian, assemble_residual, d2_derivative, norms, BandedMatrix
from .errors import DomainError
from .model import ModelParams, constant_state, harnack_ratios
from .solver import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    DENSE_EIGEN_LIMIT,
    NEGATIVITY_FLOOR,
    banded_solve,
    count_unstable_eigenvalues,
    damped_newton,
)
from .spectral import NeumannMode, kernel_ratios
from .types import BranchPoint, Grid, NewtonReport, StateVector

logger = logging.getLogger(__name__)


class SteadyProblem(ABC):
    """
    Abstract base class for a discretized steady problem R(w, d2) = 0.

    Subclasses fix the unknown layout; the base class provides the Newton
    solve, admissibility test, stability count and branch-point construction.
    """

    def __init__(self, params: ModelParams, grid: Grid):
        self.params = params
        self.grid = grid
        self.constant = constant_state(params)

    @abstractmethod
    def residual(self, w: np.ndarray, d2: float) -> np.ndarray:
        pass

    @abstractmethod
    def jacobian(self, w: np.ndarray, d2: float) -> BandedMatrix:
        pass

    @abstractmethod
    def d2_derivative(self, w: np.ndarray, d2: float) -> np.ndarray:
        pass

    @abstractmethod
    def to_state(self, w: np.ndarray) -> StateVector:
        pass

    @abstractmethod
    def from_state(self, state: StateVector) -> np.ndarray:
        pass

    @abstractmethod
    def constant_w(self) -> np.ndarray:
        """Unknown vector of the constant coexistence state."""

    @abstractmethod
    def kernel_direction(self, j: int) -> np.ndarray:
        """Sampled null direction of the linearization at the j-th onset."""

    @abstractmethod
    def weights(self) -> np.ndarray:
        """Quadrature weight of each unknown, used for inner products."""

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.dot(self.weights() * a, b))

    def is_admissible(self, w: np.ndarray) -> bool:
        return bool(np.all(np.isfinite(w)) and np.min(w) >= -NEGATIVITY_FLOOR)

    def is_constant(self, w: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
        """True when the u-profile spread is at most 10 tol."""
        spread_u, _ = self.to_state(w).spread()
        return spread_u <= 10.0 * tol

    def newton(self, w0: np.ndarray, d2: float, tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER) -> Tuple[np.ndarray, NewtonReport]:
        """Damped Newton at fixed d2; nonphysical limits are reported as non-converged."""

        def newton_step(w: np.ndarray, r: np.ndarray) -> np.ndarray:
            return banded_solve(self.jacobian(w, d2), -r)

        w, report = damped_newton(w0, lambda w: self.residual(w, d2), newton_step, tol=tol, max_iter=max_iter)
        if report.converged and not self.is_admissible(w):
            report.converged = False
            report.message = f"nonphysical solution: min value {float(np.min(w)):.3e}"
        return w, report

    def stability_index(self, w: np.ndarray, d2: float) -> Optional[int]:
        return count_unstable_eigenvalues(self.jacobian(w, d2), dense=self.grid.n <= DENSE_EIGEN_LIMIT)

    def make_point(self, w: np.ndarray, d2: float, residual_norm: Optional[float] = None, s: float = 0.0,
                   tangent: Optional[np.ndarray] = None, with_stability: bool = True) -> BranchPoint:
        """Wrap a solved unknown vector as a certified BranchPoint with its diagnostics."""
        if residual_norm is None:
            residual_norm = float(np.max(np.abs(self.residual(w, d2))))
        state = self.to_state(w)
        try:
            harnack: Optional[Tuple[float, float]] = harnack_ratios(state)
        except DomainError:
            harnack = None
        return BranchPoint(
            d2=float(d2),
            state=state,
            residual_norm=residual_norm,
            norms=norms(state, self.grid),
            ratio_defect=float(np.max(np.abs(state.u - self.constant.tau_star * state.v))),
            s=s,
            stability_index=self.stability_index(w, d2) if with_stability else None,
            tangent=None if tangent is None else np.array(tangent),
            harnack=harnack,
        )


class SystemProblem(SteadyProblem):
    """The two-field system with interleaved unknowns (u0, v0, u1, v1, ...)."""

    def residual(self, w: np.ndarray, d2: float) -> np.ndarray:
        return assemble_residual(StateVector.from_packed(w), d2, self.params, self.grid)

    def jacobian(self, w: np.ndarray, d2: float) -> BandedMatrix:
        return assemble_jacobian(StateVector.from_packed(w), d2, self.params, self.grid)

    def d2_derivative(self, w: np.ndarray, d2: float) -> np.ndarray:
        return d2_derivative(StateVector.from_packed(w), self.grid)

    def to_state(self, w: np.ndarray) -> StateVector:
        return StateVector.from_packed(w)

    def from_state(self, state: StateVector) -> np.ndarray:
        return state.pack()

    def constant_w(self) -> np.ndarray:
        return StateVector.constant(self.constant.u_star, self.constant.v_star, self.grid.n).pack()

    def kernel_direction(self, j: int) -> np.ndarray:
        phi = NeumannMode.for_params(j, self.params).sample(self.grid)
        kappa, _ = kernel_ratios(j, self.params)
        return StateVector(phi, kappa * phi).pack()

    def weights(self) -> np.ndarray:
        return np.repeat(self.grid.volumes, 2)
