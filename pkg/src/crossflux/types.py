"""
Type definitions for crossflux.

Plain records shared across modules. The model coefficients and the spectral
records live next to the operations that build them (``model`` and
``spectral``).
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .enums import BranchKind, BranchSide, EvolutionOutcome, TerminationReason
from .errors import InvalidParameterError, NumericalError, SizeMismatchError


@dataclass(frozen=True)
class Gamma:
    """Limit of the flux ratio alpha / beta, possibly infinite.

    Build with ``Gamma.finite(x)`` or ``Gamma.infinity()``; ``value`` is only
    meaningful when ``infinite`` is False.
    """
    value: float = 0.0
    infinite: bool = False

    def __post_init__(self) -> None:
        if not self.infinite and not (np.isfinite(self.value) and self.value >= 0.0):
            raise InvalidParameterError(f"gamma must be a finite nonnegative number, got {self.value}")

    @classmethod
    def finite(cls, value: float) -> "Gamma":
        return cls(value=float(value), infinite=False)

    @classmethod
    def infinity(cls) -> "Gamma":
        return cls(value=0.0, infinite=True)

    @classmethod
    def from_flux(cls, alpha: float, beta: float) -> "Gamma":
        """Ratio alpha / beta; infinite when only beta vanishes, zero without cross-diffusion."""
        if alpha == 0.0:
            return cls.finite(0.0)
        if beta == 0.0:
            return cls.infinity()
        return cls.finite(alpha / beta)

    @classmethod
    def parse(cls, text: str) -> "Gamma":
        """Parse ``"inf"``/``"infinity"`` or a nonnegative number."""
        token = text.strip().lower()
        if token in ("inf", "infinity", "+inf"):
            return cls.infinity()
        try:
            return cls.finite(float(token))
        except ValueError as e:
            raise InvalidParameterError(f"Cannot parse gamma from {text!r}") from e

    def __str__(self) -> str:
        return "inf" if self.infinite else repr(self.value)


@dataclass(frozen=True)
class Grid:
    """Uniform grid of n nodes on [x_left, x_left + length]."""
    n: int
    length: float = 1.0
    x_left: float = -0.5

    def __post_init__(self) -> None:
        if self.n < 3:
            raise InvalidParameterError(f"Grid needs at least 3 nodes, got {self.n}")
        if not self.length > 0.0:
            raise InvalidParameterError(f"Grid length must be positive, got {self.length}")

    @property
    def h(self) -> float:
        return self.length / (self.n - 1)

    @property
    def x_right(self) -> float:
        return self.x_left + self.length

    @property
    def nodes(self) -> np.ndarray:
        nodes = self.x_left + self.h * np.arange(self.n)
        nodes[-1] = self.x_right
        return nodes

    @property
    def volumes(self) -> np.ndarray:
        """Control-volume sizes: h inside, h/2 at the two boundary nodes.

        These are also the trapezoid quadrature weights.
        """
        volumes = np.full(self.n, self.h)
        volumes[0] = volumes[-1] = 0.5 * self.h
        return volumes

    def refined(self) -> "Grid":
        """Grid with the spacing halved on the same interval."""
        return Grid(n=2 * self.n - 1, length=self.length, x_left=self.x_left)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Nodal values (u, v) on a grid; the continuation unknown.

    Positivity is diagnosed, never enforced.
    """
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if u.shape != v.shape or u.ndim != 1:
            raise SizeMismatchError(f"u and v must be 1-D arrays of equal length, got {u.shape} and {v.shape}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @classmethod
    def constant(cls, u_value: float, v_value: float, n: int) -> "StateVector":
        return cls(np.full(n, float(u_value)), np.full(n, float(v_value)))

    @classmethod
    def from_packed(cls, w: np.ndarray) -> "StateVector":
        """Inverse of ``pack``: unknowns are interleaved (u0, v0, u1, v1, ...)."""
        w = np.asarray(w, dtype=float)
        if w.ndim != 1 or w.shape[0] % 2:
            raise SizeMismatchError(f"Packed state must have even length, got {w.shape}")
        return cls(w[0::2].copy(), w[1::2].copy())

    def pack(self) -> np.ndarray:
        w = np.empty(2 * self.n)
        w[0::2] = self.u
        w[1::2] = self.v
        return w

    def reflected(self) -> "StateVector":
        """Image under x -> -x about the interval midpoint."""
        return StateVector(self.u[::-1].copy(), self.v[::-1].copy())

    def min_value(self) -> float:
        return float(min(self.u.min(), self.v.min()))

    def max_value(self) -> float:
        return float(max(self.u.max(), self.v.max()))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v)))

    def spread(self) -> Tuple[float, float]:
        """(sup - inf) of u and of v."""
        return float(np.ptp(self.u)), float(np.ptp(self.v))


@dataclass(frozen=True)
class Norms:
    """Discrete norms of a state: trapezoid L2, max-abs sup, H1 seminorms."""
    l2_u: float
    l2_v: float
    sup_u: float
    sup_v: float
    h1_u: float
    h1_v: float


@dataclass
class NewtonReport:
    """Outcome of a damped Newton solve."""
    converged: bool
    iterations: int
    residual_norm: float
    step_norms: List[float] = field(default_factory=list)
    residual_history: List[float] = field(default_factory=list)
    damping_events: int = 0
    message: str = ""


@dataclass(frozen=True)
class BranchOrigin:
    """Provenance of a branch: trivial, bifurcation from mode j, or limit mode j."""
    kind: BranchKind
    j: Optional[int] = None
    side: Optional[BranchSide] = None

    @property
    def tag(self) -> str:
        """Value of the ``j_origin`` CSV column."""
        if self.kind is BranchKind.TRIVIAL:
            return "trivial"
        if self.kind is BranchKind.LIMIT:
            return f"limit:{self.j}"
        return str(self.j)

    @classmethod
    def from_tag(cls, tag: str) -> "BranchOrigin":
        if tag == "trivial":
            return cls(BranchKind.TRIVIAL)
        if tag.startswith("limit:"):
            return cls(BranchKind.LIMIT, j=int(tag.split(":", 1)[1]))
        return cls(BranchKind.BIFURCATION, j=int(tag))


@dataclass(eq=False)
class BranchPoint:
    """A certified point (d2, state) on a branch with its diagnostics."""
    d2: float
    state: StateVector
    residual_norm: float
    norms: Norms
    ratio_defect: float
    s: float = 0.0
    stability_index: Optional[int] = None
    tangent: Optional[np.ndarray] = None
    harnack: Optional[Tuple[float, float]] = None  # (max u / min u, max v / min v)

    def measure(self, name: str) -> float:
        """Value of a named norm measure (``sup_v``, ``l2_u``, ...)."""
        try:
            return float(getattr(self.norms, name))
        except AttributeError as e:
            raise InvalidParameterError(f"Unknown measure {name!r}") from e


@dataclass(eq=False)
class Branch:
    """Ordered, append-only list of certified branch points."""
    id: str
    origin: BranchOrigin
    points: List[BranchPoint] = field(default_factory=list)
    tol: float = 1e-10
    termination: Optional[TerminationReason] = None
    fold_count: int = 0
    measure: str = "sup_v"
    analytic_onset: Optional[float] = None

    def append(self, point: BranchPoint) -> None:
        if not point.residual_norm <= self.tol:
            raise NumericalError(
                f"Refusing uncertified point on branch {self.id}: residual {point.residual_norm:.3e} > {self.tol:.1e}"
            )
        self.points.append(point)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def side(self) -> Optional[BranchSide]:
        return self.origin.side

    def d2_values(self) -> np.ndarray:
        return np.array([p.d2 for p in self.points])

    def measure_values(self, name: Optional[str] = None) -> np.ndarray:
        return np.array([p.measure(name or self.measure) for p in self.points])

    def polyline(self, name: Optional[str] = None) -> np.ndarray:
        """(d2, measure) pairs as an (m, 2) array."""
        return np.column_stack([self.d2_values(), self.measure_values(name)]) if self.points else np.zeros((0, 2))


@dataclass(eq=False)
class ScalarBranch(Branch):
    """Branch of the limiting scalar field equation; u is stored as tau* v."""
    gamma: Optional[Gamma] = None


@dataclass(eq=False)
class EvolutionRun:
    """Trajectory snapshots and termination data of a time integration."""
    snapshots: List[Tuple[float, StateVector]] = field(default_factory=list)
    distances: List[Tuple[float, float]] = field(default_factory=list)
    outcome: Optional[EvolutionOutcome] = None
    accepted_steps: int = 0
    rejected_steps: int = 0
    final_residual: float = float("nan")
    final_dt: float = float("nan")

    @property
    def final_time(self) -> float:
        return self.snapshots[-1][0] if self.snapshots else 0.0

    @property
    def final_state(self) -> StateVector:
        return self.snapshots[-1][1]

    @property
    def final_distance(self) -> float:
        return self.distances[-1][1] if self.distances else float("nan")
