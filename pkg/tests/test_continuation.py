"""Tests for bifurcation detection, branch switching, arclength tracing and classification."""

import numpy as np
import pytest

from crossflux.continuation import (
    StepControls,
    Termination,
    branch_side,
    continue_branch,
    detect_bifurcations,
    estimate_onset,
    kernel_alignment,
    mode_amplitude,
    node_count,
    stability_index,
    switch_branch,
    trace_mode_branch,
    trivial_branch_stability,
)
from crossflux.enums import BranchKind, BranchSide, TerminationReason
from crossflux.errors import BranchSwitchError, ClassificationError, InvalidParameterError, NumericalError
from crossflux.model import l2_bounds, nonexistence_check
from crossflux.problem import SystemProblem
from crossflux.spectral import discrete_critical_d2
from crossflux.types import StateVector

from .factories import D_STAR, KAPPA_1, constant_state_vector, make_grid, mode_state, reference_params

FAST = StepControls(compute_stability=False)


# --- controls ---


def test_step_controls_validate_ordering() -> None:
    with pytest.raises(InvalidParameterError, match="ds_min"):
        StepControls(ds=1e-6, ds_min=1e-5)
    with pytest.raises(InvalidParameterError, match="growth"):
        StepControls(growth=1.0)


def test_termination_validates_range() -> None:
    with pytest.raises(InvalidParameterError, match="d2_floor"):
        Termination(d2_floor=0.5, d2_ceiling=0.1)


# --- trivial branch ---


def test_trivial_branch_stability_counts() -> None:
    profile = trivial_branch_stability(reference_params(), [0.05, 0.02, 0.007], j_max=20)
    assert list(profile.counts) == [0, 1, 2]
    assert profile.unstable_modes == [(), (1,), (1, 2)]


def test_detect_bifurcations_orders_onsets() -> None:
    points = detect_bifurcations(reference_params(), (0.002, 0.1), j_max=10)
    assert [p.j for p in points] == [1, 2, 3]
    for point in points:
        assert point.d_star == pytest.approx(D_STAR[point.j], rel=1e-4)


def test_detect_bifurcations_includes_fourth_mode_above_a_lower_floor() -> None:
    points = detect_bifurcations(reference_params(), (0.001, 0.1), j_max=10)
    assert [p.j for p in points] == [1, 2, 3, 4]
    assert points[-1].d_star == pytest.approx(0.00109, rel=1e-2)


def test_detect_bifurcations_without_flux_is_empty() -> None:
    assert detect_bifurcations(reference_params(0.0, 0.0), (0.001, 0.1), j_max=10) == []


def test_detected_onset_is_the_discrete_value() -> None:
    params = reference_params()
    grid = make_grid(51)
    points = detect_bifurcations(params, (0.02, 0.1), j_max=5, grid=grid)
    assert len(points) == 1
    assert points[0].detected_d_star == pytest.approx(discrete_critical_d2(1, params, grid), rel=1e-6)
    assert points[0].gap < 1e-2 * D_STAR[1]


def test_kernel_alignment_at_first_onset() -> None:
    check = kernel_alignment(1, reference_params(), make_grid(101))
    assert check.alignment > 0.999
    assert check.eigenvalue < 5e-3


def test_kernel_eigenvalue_vanishes_at_second_order() -> None:
    params = reference_params()
    coarse = make_grid(101)
    fine = coarse.refined()
    ratio = kernel_alignment(1, params, coarse).eigenvalue / kernel_alignment(1, params, fine).eigenvalue
    assert ratio == pytest.approx(4.0, rel=0.05)


def test_kernel_alignment_outside_region() -> None:
    with pytest.raises(InvalidParameterError, match="outside"):
        kernel_alignment(1, reference_params(0.0, 0.0), make_grid(21))


def test_kernel_direction_uses_kernel_ratio() -> None:
    problem = SystemProblem(reference_params(), make_grid(21))
    kernel = StateVector.from_packed(problem.kernel_direction(1))
    assert np.allclose(kernel.v, KAPPA_1 * kernel.u, rtol=1e-5)


# --- switching ---


def test_switch_lands_on_monotone_upper_profile() -> None:
    params = reference_params()
    grid = make_grid(51)
    point = switch_branch(1, BranchSide.UPPER.sign, 0.05, params, grid)
    assert np.ptp(point.state.u) > 1e-9
    assert point.state.min_value() > 0.0
    assert point.residual_norm <= 1e-10
    assert node_count(point.state, grid) == 0
    assert branch_side(point.state, grid) is BranchSide.UPPER
    assert point.d2 < D_STAR[1]


def test_opposite_signs_give_reflected_solutions() -> None:
    params = reference_params()
    grid = make_grid(51)
    upper = switch_branch(1, -1, 0.05, params, grid)
    lower = switch_branch(1, 1, 0.05, params, grid)
    assert upper.d2 == pytest.approx(lower.d2, rel=1e-8)
    assert np.max(np.abs(upper.state.reflected().pack() - lower.state.pack())) < 1e-7


@pytest.mark.parametrize("j", [2, 3])
def test_switch_onto_higher_modes(j) -> None:
    params = reference_params()
    grid = make_grid(101)
    point = switch_branch(j, BranchSide.UPPER.sign, 0.02, params, grid)
    assert point.residual_norm <= 1e-10
    assert point.state.min_value() > 0.0
    assert node_count(point.state, grid) == j - 1
    assert abs(point.d2 - D_STAR[j]) < 0.5 * D_STAR[j]


def test_tiny_amplitude_collapses_to_constant_state() -> None:
    with pytest.raises(BranchSwitchError, match="collapsed") as info:
        switch_branch(1, -1, 1e-8, reference_params(), make_grid(51))
    assert info.value.collapsed


def test_switch_outside_region_is_rejected() -> None:
    with pytest.raises(InvalidParameterError, match="outside R_1"):
        switch_branch(1, -1, 0.05, reference_params(0.0, 0.0), make_grid(21))


def test_switch_rejects_bad_sign() -> None:
    with pytest.raises(InvalidParameterError, match="sign"):
        switch_branch(1, 0, 0.05, reference_params(), make_grid(21))


# --- tracing ---


@pytest.fixture(scope="module")
def gamma1_upper():
    params = reference_params()
    grid = make_grid(51)
    branch = trace_mode_branch(1, BranchSide.UPPER, params, grid, FAST, Termination(d2_floor=0.02, max_points=120))
    return params, grid, branch


def test_traced_branch_provenance(gamma1_upper) -> None:
    _, _, branch = gamma1_upper
    assert branch.id == "gamma1-upper"
    assert branch.origin.kind is BranchKind.BIFURCATION
    assert branch.origin.j == 1
    assert branch.analytic_onset == pytest.approx(D_STAR[1], rel=1e-4)
    assert branch.termination is TerminationReason.D2_FLOOR


def test_traced_points_are_certified_and_positive(gamma1_upper) -> None:
    _, grid, branch = gamma1_upper
    for point in branch.points:
        assert point.residual_norm <= 1e-10
        assert point.state.min_value() > 0.0
        assert node_count(point.state, grid) == 0


def test_traced_points_respect_a_priori_bounds(gamma1_upper) -> None:
    params, _, branch = gamma1_upper
    bound_u, bound_v = l2_bounds(params)
    for point in branch.points:
        assert point.norms.l2_u <= bound_u
        assert point.norms.l2_v <= bound_v
        assert nonexistence_check(params, max(point.norms.sup_u, point.norms.sup_v), d2=point.d2)


def test_harnack_ratios_exceed_one_along_the_branch(gamma1_upper) -> None:
    _, _, branch = gamma1_upper
    for point in branch.points:
        assert point.harnack is not None
        ratio_u, ratio_v = point.harnack
        assert np.isfinite(ratio_u) and np.isfinite(ratio_v)
        assert ratio_u > 1.0
        assert ratio_v > 1.0


def test_sup_norm_grows_as_d2_decreases(gamma1_upper) -> None:
    _, _, branch = gamma1_upper
    d2 = branch.d2_values()
    sup_v = branch.measure_values("sup_v")
    assert d2[-1] < d2[0]
    assert sup_v[-1] > sup_v[0]


def test_onset_extrapolation_recovers_critical_value(gamma1_upper) -> None:
    params, grid, branch = gamma1_upper
    assert estimate_onset(branch, params, grid) == pytest.approx(D_STAR[1], rel=0.02)


@pytest.mark.parametrize("j", [2, 3])
def test_higher_mode_branches_leave_their_onsets(j) -> None:
    params = reference_params()
    grid = make_grid(101)
    branch = trace_mode_branch(j, BranchSide.UPPER, params, grid, FAST, Termination(d2_floor=0.0005, max_points=12))
    assert branch.id.startswith(f"gamma{j}-")
    assert all(node_count(p.state, grid) == j - 1 for p in branch.points)
    assert estimate_onset(branch, params, grid) == pytest.approx(D_STAR[j], rel=0.02)


def test_reversed_seed_heads_back_to_the_onset(gamma1_upper) -> None:
    params, grid, branch = gamma1_upper
    seed = branch.points[3]
    reversed_branch = continue_branch(seed, params, grid, FAST, Termination(max_points=4), reverse=True)
    assert reversed_branch.points[1].d2 > seed.d2
    assert abs(mode_amplitude(reversed_branch.points[1].state, 1, params, grid)) < abs(
        mode_amplitude(seed.state, 1, params, grid))


def test_continue_branch_rejects_uncertified_seed(gamma1_upper) -> None:
    params, grid, branch = gamma1_upper
    seed = branch.points[0]
    with pytest.raises(NumericalError, match="exceeds tolerance"):
        continue_branch(seed, params, grid, StepControls(tol=1e-30, compute_stability=False))


# --- classification ---


def test_stability_index_of_constant_state() -> None:
    params = reference_params()
    grid = make_grid(51)
    assert stability_index(constant_state_vector(51), 0.05, params, grid) == 0
    assert stability_index(constant_state_vector(51), 0.02, params, grid) == 1


def test_node_count_of_mode_profiles() -> None:
    grid = make_grid(101)
    assert node_count(mode_state(1, n=101), grid) == 0
    assert node_count(mode_state(2, n=101), grid) == 1
    assert node_count(mode_state(3, n=101), grid) == 2


def test_node_count_of_constant_state_is_undefined() -> None:
    with pytest.raises(ClassificationError, match="constant"):
        node_count(constant_state_vector(21), make_grid(21))


def test_branch_side_of_kernel_perturbations() -> None:
    grid = make_grid(51)
    assert branch_side(mode_state(1, amplitude=-0.05, n=51), grid) is BranchSide.UPPER
    assert branch_side(mode_state(1, amplitude=0.05, n=51), grid) is BranchSide.LOWER
