"""
Model coefficients, the constant coexistence state, reaction terms and the
a priori bound checks of the cooperative system with attractive-transition flux.

    d1 u'' + alpha [v^2 (u/v)']' + u (a1 - b1 u + c1 v) = 0
    d2 v'' + beta  [u^2 (v/u)']' + v (-a2 + b2 u - c2 v) = 0

on an interval with homogeneous Neumann conditions.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .errors import DomainError, InvalidParameterError, WeakCooperationError
from .types import StateVector

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def check_weak_cooperative(a1: float, a2: float, b1: float, b2: float, c1: float, c2: float) -> bool:
    """
    Check the weak cooperative condition c1/c2 < b1/b2 < a1/a2.

    Both inequalities are cross-multiplied so that no division rounding enters
    near the boundary of the condition.

    Returns:
        bool: True iff both strict inequalities hold

    Raises:
        InvalidParameterError: If any coefficient is not strictly positive
    """
    for name, value in (("a1", a1), ("a2", a2), ("b1", b1), ("b2", b2), ("c1", c1), ("c2", c2)):
        if not value > 0.0:
            raise InvalidParameterError(f"Coefficient {name} must be positive, got {value}")
    return c1 * b2 < b1 * c2 and b1 * a2 < a1 * b2


@dataclass(frozen=True)
class ModelParams:
    """
    Coefficients of the steady-state problem.

    ``d2`` is the bifurcation parameter; operations that take an explicit d2
    argument ignore this field. ``x_left`` defaults to ``-domain_length / 2``.
    """
    d1: float
    d2: float
    a1: float
    a2: float
    b1: float
    b2: float
    c1: float
    c2: float
    alpha: float = 0.0
    beta: float = 0.0
    domain_length: float = 1.0
    x_left: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("d1", "d2", "domain_length"):
            value = getattr(self, name)
            if not value > 0.0:
                raise InvalidParameterError(f"{name} must be positive, got {value}")
        for name in ("alpha", "beta"):
            value = getattr(self, name)
            if not value >= 0.0:
                raise InvalidParameterError(f"{name} must be nonnegative, got {value}")
        if not check_weak_cooperative(self.a1, self.a2, self.b1, self.b2, self.c1, self.c2):
            raise WeakCooperationError(
                "Weak cooperative condition c1/c2 < b1/b2 < a1/a2 violated for "
                f"(a1, a2, b1, b2, c1, c2) = ({self.a1}, {self.a2}, {self.b1}, {self.b2}, {self.c1}, {self.c2})"
            )
        if self.x_left is None:
            object.__setattr__(self, "x_left", -0.5 * self.domain_length)

    @classmethod
    def reference(cls, alpha: float = 2.0, beta: float = 1.0, d2: float = 0.02) -> "ModelParams":
        """The numerical setting on (-0.5, 0.5) with (d1, a1, a2, b1, b2, c1, c2) = (0.004, 1, 1, 4, 5, 2, 3)."""
        return cls(d1=0.004, d2=d2, a1=1.0, a2=1.0, b1=4.0, b2=5.0, c1=2.0, c2=3.0,
                   alpha=alpha, beta=beta, domain_length=1.0, x_left=-0.5)

    @property
    def x_right(self) -> float:
        return self.x_left + self.domain_length

    @property
    def determinant(self) -> float:
        """b1 c2 - b2 c1, positive under the weak cooperative condition."""
        return self.b1 * self.c2 - self.b2 * self.c1

    def with_flux(self, alpha: float, beta: float) -> "ModelParams":
        return dataclasses.replace(self, alpha=alpha, beta=beta)


@dataclass(frozen=True)
class ConstantState:
    """Positive constant solution and the derived limit-regime data."""
    u_star: float
    v_star: float
    tau_star: float
    A: float
    gamma_threshold: float


def constant_state(params: ModelParams) -> ConstantState:
    """Closed-form positive constant solution (u*, v*) and tau* = u*/v*, A = a1/a2, A tau*."""
    det = params.determinant
    u_star = (params.a1 * params.c2 - params.a2 * params.c1) / det
    v_star = (params.a1 * params.b2 - params.a2 * params.b1) / det
    tau_star = u_star / v_star
    big_a = params.a1 / params.a2
    return ConstantState(u_star=u_star, v_star=v_star, tau_star=tau_star, A=big_a, gamma_threshold=big_a * tau_star)


def reaction(u: ArrayLike, v: ArrayLike, params: ModelParams) -> Tuple[ArrayLike, ArrayLike]:
    """Reaction terms f = u(a1 - b1 u + c1 v), g = v(-a2 + b2 u - c2 v), for any real input."""
    f = u * (params.a1 - params.b1 * u + params.c1 * v)
    g = v * (-params.a2 + params.b2 * u - params.c2 * v)
    return f, g


def reaction_jacobian(u: ArrayLike, v: ArrayLike, params: ModelParams) -> Tuple[ArrayLike, ArrayLike, ArrayLike, ArrayLike]:
    """Pointwise partial derivatives (f_u, f_v, g_u, g_v)."""
    f_u = params.a1 - 2.0 * params.b1 * u + params.c1 * v
    f_v = params.c1 * u
    g_u = params.b2 * v
    g_v = -params.a2 + params.b2 * u - 2.0 * params.c2 * v
    return f_u, f_v, g_u, g_v


def _reaction_factors(u: ArrayLike, v: ArrayLike, params: ModelParams) -> Tuple[ArrayLike, ArrayLike]:
    return params.a1 - params.b1 * u + params.c1 * v, -params.a2 + params.b2 * u - params.c2 * v


def semilinear_potentials(u: ArrayLike, v: ArrayLike, params: ModelParams) -> Tuple[ArrayLike, ArrayLike]:
    """
    Potentials V1, V2 of the equivalent semilinear system u'' + V1 u = 0, v'' + V2 v = 0.

    Args:
        u, v: Nonnegative values (scalars or arrays)
        params: Model coefficients; ``params.d2`` is used

    Returns:
        (V1, V2) with the same shape as the inputs

    Raises:
        DomainError: If the common denominator d1 d2 + d1 beta u + d2 alpha v is not positive
    """
    d1, d2, alpha, beta = params.d1, params.d2, params.alpha, params.beta
    denominator = d1 * d2 + d1 * beta * np.asarray(u) + d2 * alpha * np.asarray(v)
    if np.any(denominator <= 0.0):
        raise DomainError("Semilinear potentials undefined: nonpositive denominator (negative density input)")
    p, q = _reaction_factors(u, v, params)
    v1 = ((d2 + beta * u) * p + alpha * v * q) / denominator
    v2 = ((d1 + alpha * v) * q + beta * u * p) / denominator
    return v1, v2


def potential_bound(u: ArrayLike, v: ArrayLike, params: ModelParams) -> ArrayLike:
    """Common pointwise bound |a1 - b1 u + c1 v| / d1 + |-a2 + b2 u - c2 v| / d2 on |V1| and |V2|."""
    p, q = _reaction_factors(u, v, params)
    return np.abs(p) / params.d1 + np.abs(q) / params.d2


def l2_bounds(params: ModelParams) -> Tuple[float, float]:
    """L2 bounds on any solution, independent of d1, d2, alpha and beta."""
    root_length = math.sqrt(params.domain_length)
    det = params.determinant
    return params.a1 * params.c2 / det * root_length, params.a1 * params.b2 / det * root_length


def nonexistence_check(params: ModelParams, m_emp: float, d2: Optional[float] = None) -> bool:
    """
    Necessary condition for a positive nonconstant solution with sup-norm m_emp.

    Returns True iff
        d1 < (alpha + beta) M / 2 + (a1 + (3 c1 + b2) M / 2) / lambda_1
    or
        d2 < (M / 2) (alpha + beta + (c1 + 3 b2) / lambda_1),
    with lambda_1 = (pi / L)^2. Every nonconstant solution must return True
    when M is its own empirical sup-norm; constant solutions are exempt.

    Raises:
        InvalidParameterError: If m_emp is not positive
    """
    if not m_emp > 0.0:
        raise InvalidParameterError(f"Empirical sup-norm must be positive, got {m_emp}")
    d2 = params.d2 if d2 is None else d2
    lambda_1 = (math.pi / params.domain_length) ** 2
    flux = params.alpha + params.beta
    first = flux * m_emp / 2.0 + (params.a1 + (3.0 * params.c1 + params.b2) * m_emp / 2.0) / lambda_1
    second = m_emp / 2.0 * (flux + (params.c1 + 3.0 * params.b2) / lambda_1)
    return params.d1 < first or d2 < second


def harnack_ratios(state: StateVector) -> Tuple[float, float]:
    """
    Sup/inf ratios (max u / min u, max v / min v) of a positive state.

    Raises:
        DomainError: If any nodal value is not strictly positive
    """
    u_min, v_min = float(state.u.min()), float(state.v.min())
    if not (u_min > 0.0 and v_min > 0.0):
        raise DomainError(f"Harnack ratios need a positive state, got min(u)={u_min:.3e}, min(v)={v_min:.3e}")
    return float(state.u.max()) / u_min, float(state.v.max()) / v_min
