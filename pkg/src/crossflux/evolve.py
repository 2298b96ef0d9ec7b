"""
Semi-implicit time integration of the parabolic system.

Each step solves (I - dt M(w_n)) w_{n+1} = w_n + dt R(w_n), where M is the
flux operator with coefficients frozen at w_n and R the reaction terms.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .enums import EvolutionOutcome
from .errors import InvalidParameterError, PositivityViolationError, SingularMatrixError
from .mesh import flux_matrix
from .model import ModelParams, constant_state, reaction
from .solver import banded_solve
from .types import EvolutionRun, Grid, StateVector

logger = logging.getLogger(__name__)

POSITIVITY_FLOOR = 1e-6


@dataclass(frozen=True)
class EvolutionControls:
    """Time-stepping controls.

    ``steady_tol`` bounds ||dw/dt||_inf; ``snapshot_every`` counts accepted steps.
    """
    dt: float = 0.05
    dt_min: float = 1e-8
    dt_max: float = 0.2
    t_max: float = 5000.0
    steady_tol: float = 1e-9
    growth: float = 1.2
    growth_after: int = 10
    blowup: float = 1e3
    snapshot_every: int = 100
    reaction: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.dt_min <= self.dt <= self.dt_max:
            raise InvalidParameterError(
                f"Time steps must satisfy 0 < dt_min <= dt <= dt_max, got {self.dt_min}, {self.dt}, {self.dt_max}"
            )
        if not (self.t_max > 0.0 and self.steady_tol > 0.0):
            raise InvalidParameterError("t_max and steady_tol must be positive")
        if self.snapshot_every < 1:
            raise InvalidParameterError(f"snapshot_every must be >= 1, got {self.snapshot_every}")


def _rate(state: StateVector, d2: float, params: ModelParams, grid: Grid, with_reaction: bool) -> np.ndarray:
    """Right-hand side dw/dt of the parabolic system."""
    w = state.pack()
    rate = flux_matrix(state, d2, params, grid).matvec(w)
    if with_reaction:
        f, g = reaction(state.u, state.v, params)
        rate[0::2] += f
        rate[1::2] += g
    return rate


def step_imex(state: StateVector, dt: float, d2: float, params: ModelParams, grid: Grid,
              with_reaction: bool = True) -> StateVector:
    """
    One coefficient-frozen IMEX step: implicit flux, explicit reaction.

    Raises:
        InvalidParameterError: If dt is not positive
        PositivityViolationError: If a nodal value drops below -1e-6
        SingularMatrixError: Propagated from the banded solve
    """
    if not dt > 0.0:
        raise InvalidParameterError(f"Time step must be positive, got {dt}")
    rhs = state.pack()
    if with_reaction:
        f, g = reaction(state.u, state.v, params)
        rhs[0::2] += dt * f
        rhs[1::2] += dt * g
    matrix = flux_matrix(state, d2, params, grid).shifted(-dt, 1.0)
    new_state = StateVector.from_packed(banded_solve(matrix, rhs))
    if new_state.min_value() < -POSITIVITY_FLOOR:
        raise PositivityViolationError(new_state.min_value())
    return new_state


def perturbed_constant(params: ModelParams, n: int, amplitude: float = 0.01, seed: int = 0) -> StateVector:
    """(u*, v*) with independent uniform relative perturbations of size ``amplitude``, from a seeded generator."""
    cs = constant_state(params)
    rng = np.random.default_rng(seed)
    u = cs.u_star * (1.0 + amplitude * rng.uniform(-1.0, 1.0, n))
    v = cs.v_star * (1.0 + amplitude * rng.uniform(-1.0, 1.0, n))
    return StateVector(u, v)


def evolve(state0: StateVector, d2: float, params: ModelParams, grid: Grid,
           controls: Optional[EvolutionControls] = None) -> EvolutionRun:
    """
    Integrate from ``state0`` until steady, blow-up, or the time budget runs out.

    Rejected steps halve dt; ten accepted steps in a row grow it by 1.2 up to
    dt_max. A steady stop also requires the elliptic residual to be within
    10 steady_tol.

    Raises:
        PositivityViolationError: If a step still fails at dt_min
    """
    controls = controls or EvolutionControls()
    cs = constant_state(params)
    target = StateVector.constant(cs.u_star, cs.v_star, grid.n).pack()
    run = EvolutionRun()

    def record(t: float, state: StateVector) -> None:
        if run.snapshots and t <= run.snapshots[-1][0]:
            return
        run.snapshots.append((t, state))
        run.distances.append((t, float(np.max(np.abs(state.pack() - target)))))

    t = 0.0
    state = state0
    dt = controls.dt
    streak = 0
    record(t, state)
    while True:
        if t >= controls.t_max * (1.0 - 1e-12):
            run.outcome = EvolutionOutcome.TIME_BUDGET
            break
        step = min(dt, controls.t_max - t)
        try:
            new_state = step_imex(state, step, d2, params, grid, with_reaction=controls.reaction)
        except (PositivityViolationError, SingularMatrixError):
            run.rejected_steps += 1
            streak = 0
            if step <= controls.dt_min:
                raise
            dt = max(0.5 * step, controls.dt_min)
            logger.debug("Step rejected at t = %.6g, dt -> %.3e", t, dt)
            continue
        if not new_state.is_finite() or new_state.max_value() > controls.blowup:
            t += step
            state = new_state
            run.outcome = EvolutionOutcome.BLOWUP
            logger.warning("Blow-up guard triggered at t = %.6g", t)
            break
        change = float(np.max(np.abs(new_state.pack() - state.pack()))) / step
        t += step
        state = new_state
        run.accepted_steps += 1
        streak += 1
        if streak >= controls.growth_after:
            dt = min(controls.growth * dt, controls.dt_max)
            streak = 0
        if change < controls.steady_tol:
            residual = float(np.max(np.abs(_rate(state, d2, params, grid, controls.reaction))))
            if residual <= 10.0 * controls.steady_tol:
                run.outcome = EvolutionOutcome.STEADY
                break
        if run.accepted_steps % controls.snapshot_every == 0:
            record(t, state)
    record(t, state)
    run.final_residual = float(np.max(np.abs(_rate(state, d2, params, grid, controls.reaction))))
    run.final_dt = dt
    logger.info("Evolution stopped (%s) at t = %.6g after %d steps", run.outcome.value, t, run.accepted_steps)
    return run
