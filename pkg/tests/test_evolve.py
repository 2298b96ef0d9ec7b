"""Tests for the IMEX time stepper and the evolution driver."""

import numpy as np
import pytest

from crossflux.continuation import node_count, switch_branch
from crossflux.enums import BranchSide, EvolutionOutcome
from crossflux.errors import InvalidParameterError
from crossflux.evolve import EvolutionControls, evolve, perturbed_constant, step_imex
from crossflux.mesh import integrate
from crossflux.solver import newton_solve

from .factories import constant_state_vector, make_grid, reference_params, random_positive_state


def test_controls_validate_time_steps() -> None:
    with pytest.raises(InvalidParameterError, match="dt_min <= dt"):
        EvolutionControls(dt=1.0)
    with pytest.raises(InvalidParameterError, match="snapshot_every"):
        EvolutionControls(snapshot_every=0)


def test_step_rejects_nonpositive_dt() -> None:
    with pytest.raises(InvalidParameterError, match="positive"):
        step_imex(constant_state_vector(11), 0.0, 0.02, reference_params(), make_grid(11))


def test_step_keeps_the_equilibrium() -> None:
    state = step_imex(constant_state_vector(21), 0.1, 0.02, reference_params(), make_grid(21))
    assert np.allclose(state.u, 0.5, atol=1e-14)
    assert np.allclose(state.v, 0.5, atol=1e-14)


def test_flux_step_conserves_mass() -> None:
    params = reference_params()
    grid = make_grid(31)
    state = random_positive_state(31, seed=5)
    new_state = step_imex(state, 0.05, 0.02, params, grid, with_reaction=False)
    assert integrate(new_state.u, grid) == pytest.approx(integrate(state.u, grid), abs=1e-12)
    assert integrate(new_state.v, grid) == pytest.approx(integrate(state.v, grid), abs=1e-12)


def test_perturbed_constant_is_seeded() -> None:
    params = reference_params()
    first = perturbed_constant(params, 21, seed=3)
    again = perturbed_constant(params, 21, seed=3)
    other = perturbed_constant(params, 21, seed=4)
    assert np.array_equal(first.u, again.u)
    assert not np.array_equal(first.u, other.u)
    assert np.max(np.abs(first.u - 0.5)) <= 0.005


def test_equilibrium_is_steady_immediately() -> None:
    params = reference_params()
    run = evolve(constant_state_vector(21), 0.05, params, make_grid(21), EvolutionControls(t_max=1.0))
    assert run.outcome is EvolutionOutcome.STEADY
    assert run.accepted_steps == 1
    assert run.final_distance == pytest.approx(0.0, abs=1e-14)


def test_perturbation_decays_above_the_first_onset() -> None:
    params = reference_params(d2=0.05)
    grid = make_grid(51)
    run = evolve(perturbed_constant(params, 51), 0.05, params, grid,
                 EvolutionControls(t_max=400.0, steady_tol=1e-7))
    assert run.outcome is EvolutionOutcome.STEADY
    assert run.final_distance < 1e-5
    assert run.final_distance < run.distances[0][1]


def test_evolution_stays_positive() -> None:
    params = reference_params()
    grid = make_grid(41)
    run = evolve(perturbed_constant(params, 41, amplitude=0.1), 0.02, params, grid,
                 EvolutionControls(t_max=5.0, snapshot_every=5))
    assert run.outcome is EvolutionOutcome.TIME_BUDGET
    assert run.final_time == pytest.approx(5.0)
    for _, state in run.snapshots:
        assert state.min_value() > 0.0


def test_nonconstant_steady_state_stays_put() -> None:
    params = reference_params()
    grid = make_grid(51)
    point = switch_branch(1, BranchSide.UPPER.sign, 0.05, params, grid)
    run = evolve(point.state, point.d2, params, grid, EvolutionControls(t_max=50.0, steady_tol=1e-7))
    assert run.outcome is EvolutionOutcome.STEADY
    assert np.max(np.abs(run.final_state.pack() - point.state.pack())) < 1e-6


def test_evolution_below_the_first_onset_settles_on_a_monotone_pattern() -> None:
    params = reference_params()
    grid = make_grid(51)
    run = evolve(perturbed_constant(params, 51), 0.02, params, grid, EvolutionControls(steady_tol=1e-7))
    assert run.outcome is EvolutionOutcome.STEADY
    polished, report = newton_solve(run.final_state, 0.02, params, grid)
    assert report.converged
    assert np.ptp(polished.v) > 0.05
    assert node_count(polished, grid) == 0
