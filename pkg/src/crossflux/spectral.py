"""
Closed-form spectral and bifurcation data on an interval.

Neumann eigenpairs, the 2x2 mode blocks A_j of the linearization at the
constant state, the regions R_j, the critical values d_*^(j), kernel ratios,
the mode set J(alpha, beta) with its stability threshold, and the analogues
for the limiting scalar field equation.

Sign convention: mu is an eigenvalue of the linearization L(d2) in the form
L phi + mu phi = 0, so the constant state is stable when every mu has a
positive real part. A_j = -L restricted to the j-th Fourier mode.
"""

import cmath
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .enums import Regime
from .errors import DomainError, InvalidParameterError, RegimeError
from .model import ModelParams, constant_state
from .types import Gamma, Grid

logger = logging.getLogger(__name__)

# Relative slack when testing x against the interval endpoints.
_DOMAIN_SLACK = 1e-12


def neumann_eigenvalue(j: int, length: float) -> float:
    """Eigenvalue (j pi / L)^2 of -d^2/dx^2 with Neumann conditions."""
    if j < 0:
        raise InvalidParameterError(f"Mode index must be nonnegative, got {j}")
    if not length > 0.0:
        raise InvalidParameterError(f"Interval length must be positive, got {length}")
    return (j * math.pi / length) ** 2


def neumann_eigenfunction(j: int, length: float, x_left: float, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """
    L2-normalized Neumann eigenfunction Phi_j evaluated at x.

    Phi_0 = 1/sqrt(L); Phi_j(x) = sqrt(2/L) cos(j pi (x - x_left) / L) for j >= 1.

    Raises:
        DomainError: If any x lies outside [x_left, x_left + L]
    """
    if j < 0:
        raise InvalidParameterError(f"Mode index must be nonnegative, got {j}")
    x_arr = np.asarray(x, dtype=float)
    slack = _DOMAIN_SLACK * max(1.0, abs(length), abs(x_left))
    if np.any(x_arr < x_left - slack) or np.any(x_arr > x_left + length + slack):
        raise DomainError(f"x outside the interval [{x_left}, {x_left + length}]")
    if j == 0:
        values = np.full_like(x_arr, 1.0 / math.sqrt(length))
    else:
        values = math.sqrt(2.0 / length) * np.cos(j * math.pi * (x_arr - x_left) / length)
    return float(values) if np.ndim(x) == 0 else values


@dataclass(frozen=True)
class NeumannMode:
    """Neumann eigenpair of index j on [x_left, x_left + length]."""
    j: int
    length: float
    x_left: float

    @property
    def lambda_j(self) -> float:
        return neumann_eigenvalue(self.j, self.length)

    def __call__(self, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        return neumann_eigenfunction(self.j, self.length, self.x_left, x)

    def sample(self, grid: Grid) -> np.ndarray:
        return np.asarray(self(grid.nodes))

    @classmethod
    def for_params(cls, j: int, params: ModelParams) -> "NeumannMode":
        return cls(j=j, length=params.domain_length, x_left=params.x_left)


def discrete_neumann_eigenvalue(j: int, grid: Grid) -> float:
    """Eigenvalue of the conservative three-point Neumann Laplacian on ``grid`` for mode j."""
    return (2.0 / grid.h * math.sin(j * math.pi * grid.h / (2.0 * grid.length))) ** 2


@dataclass(frozen=True)
class ModeData:
    """Mode block A_j(d2) and the bifurcation data of mode j."""
    j: int
    d2: float
    lambda_j: float
    matrix: np.ndarray
    trace: float
    det: float
    mu_minus: complex
    mu_plus: complex
    in_region: bool
    d_star: Optional[float]
    kappa: float
    kappa_star: float


def _block(lambda_j: float, d2: float, params: ModelParams) -> np.ndarray:
    cs = constant_state(params)
    u, v = cs.u_star, cs.v_star
    return np.array([
        [params.b1 * u + (params.d1 + params.alpha * v) * lambda_j, -(params.c1 + lambda_j * params.alpha) * u],
        [-(params.b2 + lambda_j * params.beta) * v, params.c2 * v + (d2 + params.beta * u) * lambda_j],
    ])


def _roots(trace: float, det: float) -> Tuple[complex, complex]:
    """Roots of mu^2 - tr mu + det ordered by real part, then imaginary part."""
    root = cmath.sqrt(trace * trace - 4.0 * det)
    first, second = (trace - root) / 2.0, (trace + root) / 2.0
    if (first.real, first.imag) > (second.real, second.imag):
        first, second = second, first
    return first, second


def _region_numerator(lambda_j: float, params: ModelParams) -> float:
    cs = constant_state(params)
    u, v = cs.u_star, cs.v_star
    return (params.a2 * v * lambda_j * params.alpha
            - (params.a1 + params.d1 * lambda_j) * u * lambda_j * params.beta
            - (params.c2 * params.d1 * lambda_j + params.a1 * params.c2 - params.a2 * params.c1) * v)


def _critical_value(lambda_j: float, params: ModelParams) -> Optional[float]:
    numerator = _region_numerator(lambda_j, params)
    if not numerator > 0.0:
        return None
    v = constant_state(params).v_star
    u = constant_state(params).u_star
    denominator = ((params.d1 + params.alpha * v) * lambda_j + params.b1 * u) * lambda_j
    return numerator / denominator


def _kernel_ratios(lambda_j: float, params: ModelParams) -> Tuple[float, float]:
    cs = constant_state(params)
    top = params.b1 * cs.u_star + (params.d1 + params.alpha * cs.v_star) * lambda_j
    return (top / ((params.c1 + lambda_j * params.alpha) * cs.u_star),
            top / ((params.b2 + lambda_j * params.beta) * cs.v_star))


def mode_block(j: int, d2: float, params: ModelParams) -> ModeData:
    """
    Mode block A_j(d2) with trace, determinant, characteristic roots and bifurcation data.

    Args:
        j: Mode index (>= 0)
        d2: Diffusion rate of v at which the block is evaluated
        params: Model coefficients

    Returns:
        ModeData for mode j
    """
    lambda_j = neumann_eigenvalue(j, params.domain_length)
    matrix = _block(lambda_j, d2, params)
    trace = float(matrix[0, 0] + matrix[1, 1])
    det = float(matrix[0, 0] * matrix[1, 1] - matrix[0, 1] * matrix[1, 0])
    mu_minus, mu_plus = _roots(trace, det)
    in_region = j >= 1 and _region_numerator(lambda_j, params) > 0.0
    d_star = _critical_value(lambda_j, params) if j >= 1 else None
    kappa, kappa_star = _kernel_ratios(lambda_j, params)
    return ModeData(j=j, d2=d2, lambda_j=lambda_j, matrix=matrix, trace=trace, det=det,
                    mu_minus=mu_minus, mu_plus=mu_plus, in_region=in_region, d_star=d_star,
                    kappa=kappa, kappa_star=kappa_star)


def _require_bifurcation_index(j: int) -> None:
    if j < 1:
        raise InvalidParameterError(f"Regions R_j are defined for j >= 1, got j = {j}")


def region_membership(j: int, params: ModelParams) -> bool:
    """True iff (alpha, beta) lies in the region R_j."""
    _require_bifurcation_index(j)
    return _region_numerator(neumann_eigenvalue(j, params.domain_length), params) > 0.0


def critical_d2(j: int, params: ModelParams) -> Optional[float]:
    """Critical value d_*^(j)(alpha, beta), or None when (alpha, beta) is outside R_j."""
    _require_bifurcation_index(j)
    return _critical_value(neumann_eigenvalue(j, params.domain_length), params)


def discrete_critical_d2(j: int, params: ModelParams, grid: Grid) -> Optional[float]:
    """Critical value of the discretized problem: d_*^(j) with lambda_j replaced by its grid analogue."""
    _require_bifurcation_index(j)
    return _critical_value(discrete_neumann_eigenvalue(j, grid), params)


def kernel_ratios(j: int, params: ModelParams) -> Tuple[float, float]:
    """
    Kernel and adjoint-kernel ratios (kappa_j, kappa*_j).

    (1, kappa_j) spans the null space of A_j(d_*^(j)); (1, kappa*_j) that of its transpose.
    """
    _require_bifurcation_index(j)
    if not region_membership(j, params):
        logger.debug("kernel_ratios: (alpha, beta) outside R_%d, ratios describe no kernel", j)
    return _kernel_ratios(neumann_eigenvalue(j, params.domain_length), params)


@dataclass(frozen=True)
class ModeSet:
    """Mode set J(alpha, beta) truncated at j_max and the stability threshold."""
    modes: Tuple[int, ...]
    d_stars: Dict[int, float]
    threshold: float
    j_max: int
    certified: bool
    cutoff_lambda: Optional[float] = None


def mode_set_and_threshold(params: ModelParams, j_max: int) -> ModeSet:
    """
    Enumerate J(alpha, beta) up to j_max and the threshold max d_*^(j).

    With beta > 0 membership fails once lambda_j exceeds
    (a2 v* alpha / (u* beta) - a1) / d1, which certifies the cutoff when
    lambda_{j_max} is past that bound. With beta = 0 the set is either empty
    for every j (a2 alpha <= c2 d1) or infinite, and the truncation is flagged.

    Raises:
        InvalidParameterError: If j_max < 1
    """
    if j_max < 1:
        raise InvalidParameterError(f"j_max must be >= 1, got {j_max}")
    cs = constant_state(params)
    d_stars: Dict[int, float] = {}
    for j in range(1, j_max + 1):
        value = critical_d2(j, params)
        if value is not None:
            d_stars[j] = value
    lambda_max = neumann_eigenvalue(j_max, params.domain_length)
    cutoff: Optional[float] = None
    if params.beta > 0.0:
        cutoff = (params.a2 * cs.v_star * params.alpha / (cs.u_star * params.beta) - params.a1) / params.d1
        certified = lambda_max >= cutoff
    else:
        certified = params.a2 * params.alpha <= params.c2 * params.d1
    if not certified:
        logger.warning("Mode set truncated at j_max=%d without a certificate (alpha=%g, beta=%g)",
                       j_max, params.alpha, params.beta)
    threshold = max(d_stars.values()) if d_stars else 0.0
    return ModeSet(modes=tuple(sorted(d_stars)), d_stars=d_stars, threshold=threshold,
                   j_max=j_max, certified=certified, cutoff_lambda=cutoff)


@dataclass(frozen=True)
class LimitCoefficients:
    """Coefficients (d, xi*) of the limiting equation d v'' + xi* v (v - v*) = 0, with d = offset + slope d2."""
    gamma: Gamma
    d_offset: float
    d_slope: float
    xi_star: float
    v_star: float
    regime: Regime

    def d_eff(self, d2: float) -> float:
        return self.d_offset + self.d_slope * d2


def limit_coefficients(params: ModelParams, gamma: Gamma) -> LimitCoefficients:
    """
    Limiting coefficients for alpha, beta -> infinity with alpha / beta -> gamma.

    Finite gamma: d = tau* d1 + gamma d2, xi* = (gamma a2 - tau* a1) / v*.
    Infinite gamma: d = d2, xi* = a2 / v*. Regime (i) when gamma < A tau*,
    (ii) when gamma > A tau*, degenerate on equality.
    """
    cs = constant_state(params)
    if gamma.infinite:
        return LimitCoefficients(gamma=gamma, d_offset=0.0, d_slope=1.0, xi_star=params.a2 / cs.v_star,
                                 v_star=cs.v_star, regime=Regime.SCALAR_FIELD)
    g = gamma.value
    regime = classify_regime(gamma, cs.gamma_threshold)
    xi_star = 0.0 if regime is Regime.DEGENERATE else (g * params.a2 - cs.tau_star * params.a1) / cs.v_star
    return LimitCoefficients(gamma=gamma, d_offset=cs.tau_star * params.d1, d_slope=g, xi_star=xi_star,
                             v_star=cs.v_star, regime=regime)


def require_scalar_field(coefficients: LimitCoefficients) -> None:
    """Raise RegimeError unless the limit is the scalar field equation (regime (ii))."""
    if coefficients.regime is not Regime.SCALAR_FIELD:
        raise RegimeError(
            f"gamma = {coefficients.gamma} is not above A tau*: regime {coefficients.regime.name.lower()}, "
            "the limit is the constant state"
        )


def _limit_onset(lambda_j: float, coefficients: LimitCoefficients) -> Optional[float]:
    value = (coefficients.xi_star * coefficients.v_star / lambda_j - coefficients.d_offset) / coefficients.d_slope
    return value if value > 0.0 else None


def limiting_critical_d2(j: int, params: ModelParams, gamma: Gamma) -> Optional[float]:
    """
    Onset d_{*,inf}^(j) = (xi* v* / lambda_j - tau* d1) / gamma of the scalar branch S_inf^(j).

    Returns None when the value is not positive (mode j never bifurcates in the limit).

    Raises:
        RegimeError: Outside regime (ii)
    """
    _require_bifurcation_index(j)
    coefficients = limit_coefficients(params, gamma)
    require_scalar_field(coefficients)
    return _limit_onset(neumann_eigenvalue(j, params.domain_length), coefficients)


@dataclass(frozen=True)
class RayPoint:
    """d_*^(j) at (s alpha0, s beta0) next to its limit."""
    scale: float
    alpha: float
    beta: float
    d_star: Optional[float]
    d_star_limit: Optional[float]

    @property
    def gap(self) -> Optional[float]:
        if self.d_star is None or self.d_star_limit is None:
            return None
        return abs(self.d_star - self.d_star_limit)


def ray_critical_values(params: ModelParams, ray: Tuple[float, float], scales: Sequence[float], j: int = 1) -> List[RayPoint]:
    """Critical values of mode j along the ray s (alpha0, beta0) and the gamma = alpha0/beta0 limit."""
    alpha0, beta0 = ray
    gamma = Gamma.from_flux(alpha0, beta0)
    coefficients = limit_coefficients(params, gamma)
    limit_value = None
    if coefficients.regime is Regime.SCALAR_FIELD:
        limit_value = _limit_onset(neumann_eigenvalue(j, params.domain_length), coefficients)
    points = []
    for scale in scales:
        scaled = params.with_flux(scale * alpha0, scale * beta0)
        points.append(RayPoint(scale=scale, alpha=scaled.alpha, beta=scaled.beta,
                               d_star=critical_d2(j, scaled), d_star_limit=limit_value))
    return points


def region_boundary(j: int, params: ModelParams, betas: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    """
    Alpha on the boundary line of R_j for each beta.

    R_j is the half plane to the right of this line: (alpha, beta) lies in
    R_j iff alpha exceeds the returned value at that beta.
    """
    _require_bifurcation_index(j)
    lambda_j = neumann_eigenvalue(j, params.domain_length)
    cs = constant_state(params)
    beta_arr = np.asarray(betas, dtype=float)
    offset = (params.c2 * params.d1 * lambda_j + params.a1 * params.c2 - params.a2 * params.c1) * cs.v_star
    slope = (params.a1 + params.d1 * lambda_j) * cs.u_star * lambda_j
    return (slope * beta_arr + offset) / (params.a2 * cs.v_star * lambda_j)


@dataclass(frozen=True)
class RegionMap:
    """Boundaries of R_j and the regime line alpha = A tau* beta on the (alpha, beta) plane."""
    betas: np.ndarray
    boundaries: Dict[int, np.ndarray]
    gamma_threshold: float

    def threshold_line(self) -> np.ndarray:
        return self.gamma_threshold * self.betas

    def regime_at(self, alpha: float, beta: float) -> Regime:
        """Regime of the limit along the ray through (alpha, beta)."""
        return classify_regime(Gamma.from_flux(alpha, beta), self.gamma_threshold)


def classify_regime(gamma: Gamma, gamma_threshold: float) -> Regime:
    """Logistic below A tau*, degenerate on it, scalar field above (and for infinite gamma)."""
    if gamma.infinite:
        return Regime.SCALAR_FIELD
    if math.isclose(gamma.value, gamma_threshold, rel_tol=1e-12, abs_tol=1e-15):
        return Regime.DEGENERATE
    return Regime.LOGISTIC if gamma.value < gamma_threshold else Regime.SCALAR_FIELD


def region_map(params: ModelParams, j_list: Sequence[int], beta_max: float, samples: int = 65) -> RegionMap:
    """Sample the R_j boundaries for ``j_list`` on 0 <= beta <= beta_max."""
    if not beta_max > 0.0:
        raise InvalidParameterError(f"beta_max must be positive, got {beta_max}")
    if samples < 2:
        raise InvalidParameterError(f"Need at least 2 samples, got {samples}")
    betas = np.linspace(0.0, beta_max, samples)
    boundaries = {j: region_boundary(j, params, betas) for j in j_list}
    return RegionMap(betas=betas, boundaries=boundaries, gamma_threshold=constant_state(params).gamma_threshold)


@dataclass
class ModeTable:
    """Rows of the spectral report written by ``analyze``."""
    rows: List[Dict[str, object]] = field(default_factory=list)
    threshold: float = 0.0
    certified: bool = True
    regime: Optional[Regime] = None


def mode_table(params: ModelParams, j_max: int, gamma: Optional[Gamma] = None) -> ModeTable:
    """Per-mode table of lambda_j, membership, d_*^(j), kappa_j, kappa*_j and d_{*,inf}^(j)."""
    mode_set = mode_set_and_threshold(params, j_max)
    coefficients = limit_coefficients(params, gamma) if gamma is not None else None
    rows: List[Dict[str, object]] = []
    for j in range(1, j_max + 1):
        lambda_j = neumann_eigenvalue(j, params.domain_length)
        kappa, kappa_star = _kernel_ratios(lambda_j, params)
        limit_value = None
        if coefficients is not None and coefficients.regime is Regime.SCALAR_FIELD:
            limit_value = _limit_onset(lambda_j, coefficients)
        rows.append({
            "j": j,
            "lambda_j": lambda_j,
            "in_region": j in mode_set.d_stars,
            "d_star": mode_set.d_stars.get(j),
            "kappa": kappa,
            "kappa_star": kappa_star,
            "d_star_limit": limit_value,
        })
    return ModeTable(rows=rows, threshold=mode_set.threshold, certified=mode_set.certified,
                     regime=coefficients.regime if coefficients is not None else None)
