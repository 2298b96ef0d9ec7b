"""
Enums for crossflux.
"""

from enum import Enum, Flag, IntEnum, auto


class Regime(Enum):
    """Limit regime of the flux ratio gamma = alpha / beta."""
    LOGISTIC = auto()  # gamma < A tau*, limit is the constant state
    DEGENERATE = auto()  # gamma == A tau*, xi* vanishes
    SCALAR_FIELD = auto()  # gamma > A tau*, limit solves the scalar field equation


class BranchKind(Enum):
    """Where a branch comes from."""
    TRIVIAL = "trivial"
    BIFURCATION = "bifurcation"
    LIMIT = "limit"


class BranchSide(Enum):
    """Upper branch: v' increasing near the left end. Lower: decreasing."""
    UPPER = "upper"
    LOWER = "lower"

    @property
    def sign(self) -> int:
        """Sign of the kernel-direction predictor that lands on this side.

        Every Neumann cosine has its maximum at the left end, so a positive
        multiple of Phi_j makes v decrease there.
        """
        return -1 if self is BranchSide.UPPER else 1

    @classmethod
    def from_sign(cls, sign: int) -> "BranchSide":
        return cls.UPPER if sign < 0 else cls.LOWER


class TerminationReason(Enum):
    """Why a continuation run stopped."""
    D2_FLOOR = "d2_floor"
    D2_CEILING = "d2_ceiling"
    STEP_FAILURE = "step_failure"
    POINT_BUDGET = "point_budget"
    FOLD_COUNT = "fold_count"


class EvolutionOutcome(Enum):
    """How a time integration run ended."""
    STEADY = "steady"
    BLOWUP = "blowup"
    TIME_BUDGET = "time_budget"


class ExitCode(IntEnum):
    """Process exit codes of the command-line interface."""
    OK = 0
    IO_ERROR = 1
    CONFIG_ERROR = 2
    NUMERICAL_FAILURE = 3
    VERIFICATION_FAILURE = 4


class CheckGroup(Flag):
    """Groups of checks run by the verification suite; combine with |."""
    NONE = 0
    JACOBIAN = auto()
    DETERMINANT_SIGNS = auto()
    KERNELS = auto()
    POTENTIALS = auto()
    LIMIT_RAY = auto()
    BRANCH_AUDIT = auto()

    # Convenience combinations
    ANALYTIC = DETERMINANT_SIGNS | KERNELS | POTENTIALS | LIMIT_RAY
    ALL = JACOBIAN | DETERMINANT_SIGNS | KERNELS | POTENTIALS | LIMIT_RAY | BRANCH_AUDIT
