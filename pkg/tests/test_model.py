"""Tests for model coefficients, the constant state and the a priori checks."""

import math

import numpy as np
import pytest

from crossflux.errors import DomainError, InvalidParameterError, WeakCooperationError
from crossflux.model import (
    ModelParams,
    check_weak_cooperative,
    constant_state,
    harnack_ratios,
    l2_bounds,
    nonexistence_check,
    potential_bound,
    reaction,
    reaction_jacobian,
    semilinear_potentials,
)
from crossflux.types import StateVector

from .factories import reference_params


# --- weak cooperative condition ---


def test_reference_coefficients_are_weakly_cooperative() -> None:
    assert check_weak_cooperative(1, 1, 4, 5, 2, 3)


def test_equal_ratios_fail_the_strict_inequalities() -> None:
    assert not check_weak_cooperative(1, 1, 1, 1, 1, 1)


def test_nonpositive_coefficient_is_rejected() -> None:
    with pytest.raises(InvalidParameterError, match="b2"):
        check_weak_cooperative(1, 1, 4, 0, 2, 3)


def test_params_reject_violated_condition() -> None:
    with pytest.raises(WeakCooperationError, match="Weak cooperative"):
        ModelParams(d1=0.004, d2=0.02, a1=1, a2=1, b1=1, b2=1, c1=1, c2=1)


def test_params_reject_negative_flux_and_zero_diffusion() -> None:
    with pytest.raises(InvalidParameterError, match="alpha"):
        reference_params(alpha=-1.0)
    with pytest.raises(InvalidParameterError, match="d2"):
        reference_params(d2=0.0)


def test_x_left_defaults_to_symmetric_interval() -> None:
    params = ModelParams(d1=0.004, d2=0.02, a1=1, a2=1, b1=4, b2=5, c1=2, c2=3, domain_length=2.0)
    assert params.x_left == -1.0
    assert params.x_right == 1.0


# --- constant state ---


def test_constant_state_of_reference_setting() -> None:
    cs = constant_state(reference_params())
    assert cs.u_star == pytest.approx(0.5)
    assert cs.v_star == pytest.approx(0.5)
    assert cs.tau_star == pytest.approx(1.0)
    assert cs.A == pytest.approx(1.0)
    assert cs.gamma_threshold == pytest.approx(1.0)


def test_reaction_vanishes_at_constant_state() -> None:
    params = reference_params()
    cs = constant_state(params)
    f, g = reaction(cs.u_star, cs.v_star, params)
    assert abs(f) < 1e-15
    assert abs(g) < 1e-15


def test_reaction_at_zero_and_semitrivial_states() -> None:
    params = reference_params()
    assert reaction(0.0, 0.0, params) == (0.0, 0.0)
    f, g = reaction(0.25, 0.0, params)
    assert f == pytest.approx(0.0)
    assert g == 0.0


def test_reaction_jacobian_matches_differences() -> None:
    params = reference_params()
    u, v, eps = 0.3, 0.7, 1e-7
    f_u, f_v, g_u, g_v = reaction_jacobian(u, v, params)
    f_plus, g_plus = reaction(u + eps, v, params)
    f_minus, g_minus = reaction(u - eps, v, params)
    assert f_u == pytest.approx((f_plus - f_minus) / (2 * eps), rel=1e-7)
    assert g_u == pytest.approx((g_plus - g_minus) / (2 * eps), rel=1e-7)
    f_plus, g_plus = reaction(u, v + eps, params)
    f_minus, g_minus = reaction(u, v - eps, params)
    assert f_v == pytest.approx((f_plus - f_minus) / (2 * eps), rel=1e-7)
    assert g_v == pytest.approx((g_plus - g_minus) / (2 * eps), rel=1e-7)


# --- semilinear potentials ---


def test_potentials_vanish_at_constant_state() -> None:
    params = reference_params()
    v1, v2 = semilinear_potentials(0.5, 0.5, params)
    assert v1 == pytest.approx(0.0, abs=1e-14)
    assert v2 == pytest.approx(0.0, abs=1e-14)


def test_potentials_without_flux_reduce_to_factor_over_diffusion() -> None:
    params = reference_params(alpha=0.0, beta=0.0)
    u, v = 0.2, 0.9
    v1, v2 = semilinear_potentials(u, v, params)
    assert v1 == pytest.approx((1 - 4 * u + 2 * v) / 0.004)
    assert v2 == pytest.approx((-1 + 5 * u - 3 * v) / params.d2)


def test_potentials_are_bounded_pointwise() -> None:
    params = reference_params()
    rng = np.random.default_rng(3)
    u = rng.uniform(0.0, 2.0, 500)
    v = rng.uniform(0.0, 2.0, 500)
    v1, v2 = semilinear_potentials(u, v, params)
    bound = potential_bound(u, v, params)
    assert np.all(np.abs(v1) <= bound * (1 + 1e-12))
    assert np.all(np.abs(v2) <= bound * (1 + 1e-12))


def test_potentials_reject_nonpositive_denominator() -> None:
    with pytest.raises(DomainError, match="denominator"):
        semilinear_potentials(-10.0, 0.0, reference_params())


# --- a priori bounds ---


def test_l2_bounds_of_reference_setting() -> None:
    bound_u, bound_v = l2_bounds(reference_params())
    assert bound_u == pytest.approx(1.5)
    assert bound_v == pytest.approx(2.5)


def test_l2_bounds_do_not_depend_on_flux_or_diffusion() -> None:
    assert l2_bounds(reference_params(alpha=50, beta=25, d2=0.3)) == l2_bounds(reference_params())


def test_l2_bounds_scale_with_root_length() -> None:
    params = ModelParams(d1=0.004, d2=0.02, a1=1, a2=1, b1=4, b2=5, c1=2, c2=3, domain_length=4.0)
    assert l2_bounds(params)[0] == pytest.approx(3.0)


def test_nonexistence_check_for_small_and_large_diffusion() -> None:
    params = reference_params()
    assert nonexistence_check(params, 0.6)
    strong = ModelParams(d1=10.0, d2=10.0, a1=1, a2=1, b1=4, b2=5, c1=2, c2=3)
    assert not nonexistence_check(strong, 0.6)


def test_nonexistence_check_uses_explicit_d2() -> None:
    strong = ModelParams(d1=10.0, d2=10.0, a1=1, a2=1, b1=4, b2=5, c1=2, c2=3)
    second = 0.6 / 2 * (0 + (2 + 15) / math.pi ** 2)
    assert nonexistence_check(strong, 0.6, d2=0.9 * second)


def test_nonexistence_check_rejects_nonpositive_sup_norm() -> None:
    with pytest.raises(InvalidParameterError, match="sup-norm"):
        nonexistence_check(reference_params(), 0.0)


# --- harnack ratios ---


def test_harnack_ratios_of_constant_state_are_one() -> None:
    assert harnack_ratios(StateVector.constant(0.5, 0.5, 11)) == (1.0, 1.0)


def test_harnack_ratios_reject_zero_values() -> None:
    state = StateVector(np.array([0.0, 1.0]), np.array([1.0, 1.0]))
    with pytest.raises(DomainError, match="positive"):
        harnack_ratios(state)
