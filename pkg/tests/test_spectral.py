"""Tests for Neumann eigendata, mode blocks, critical values and the limit coefficients."""

import math

import numpy as np
import pytest

from crossflux.enums import Regime
from crossflux.errors import DomainError, InvalidParameterError, RegimeError
from crossflux.spectral import (
    NeumannMode,
    critical_d2,
    discrete_critical_d2,
    discrete_neumann_eigenvalue,
    kernel_ratios,
    limit_coefficients,
    limiting_critical_d2,
    mode_block,
    mode_set_and_threshold,
    mode_table,
    neumann_eigenfunction,
    neumann_eigenvalue,
    ray_critical_values,
    region_boundary,
    region_map,
    region_membership,
)
from crossflux.mesh import integrate
from crossflux.types import Gamma

from .factories import D_STAR, KAPPA_1, LIMIT_ONSET, make_grid, reference_params


# --- neumann eigendata ---


def test_eigenvalues_on_unit_interval() -> None:
    assert neumann_eigenvalue(0, 1.0) == 0.0
    assert neumann_eigenvalue(2, 1.0) == pytest.approx(4 * math.pi ** 2)


def test_eigenvalue_rejects_negative_index() -> None:
    with pytest.raises(InvalidParameterError, match="nonnegative"):
        neumann_eigenvalue(-1, 1.0)


def test_eigenfunctions_are_orthonormal() -> None:
    grid = make_grid(4001)
    for j in range(4):
        for k in range(4):
            product = integrate(NeumannMode(j, 1.0, -0.5).sample(grid) * NeumannMode(k, 1.0, -0.5).sample(grid), grid)
            assert product == pytest.approx(1.0 if j == k else 0.0, abs=1e-6)


def test_first_eigenfunction_is_extremal_at_the_ends() -> None:
    mode = NeumannMode(j=1, length=1.0, x_left=-0.5)
    assert mode(-0.5) == pytest.approx(math.sqrt(2))
    assert mode(0.5) == pytest.approx(-math.sqrt(2))
    assert mode(0.0) == pytest.approx(0.0, abs=1e-15)


def test_eigenfunction_outside_interval_raises() -> None:
    with pytest.raises(DomainError, match="outside"):
        neumann_eigenfunction(1, 1.0, -0.5, 0.75)


def test_discrete_eigenvalue_converges_quadratically() -> None:
    exact = neumann_eigenvalue(1, 1.0)
    coarse = abs(discrete_neumann_eigenvalue(1, make_grid(51)) - exact)
    fine = abs(discrete_neumann_eigenvalue(1, make_grid(101)) - exact)
    assert coarse / fine == pytest.approx(4.0, rel=0.01)


# --- mode blocks ---


def test_critical_values_of_reference_setting() -> None:
    params = reference_params()
    for j, expected in D_STAR.items():
        assert critical_d2(j, params) == pytest.approx(expected, rel=1e-4)


def test_determinant_vanishes_at_critical_value() -> None:
    for alpha, beta in ((2, 1), (5, 2.5), (10, 5), (20, 10), (50, 25)):
        params = reference_params(alpha, beta)
        for j in range(1, 6):
            d_star = critical_d2(j, params)
            if d_star is None:
                continue
            m = mode_block(j, d_star, params).matrix
            scale = abs(m[0, 0] * m[1, 1]) + abs(m[0, 1] * m[1, 0])
            assert abs(mode_block(j, d_star, params).det) <= 1e-12 * scale


def test_determinant_sign_changes_at_critical_value() -> None:
    params = reference_params()
    d_star = critical_d2(1, params)
    below = mode_block(1, 0.9 * d_star, params)
    above = mode_block(1, 1.1 * d_star, params)
    assert below.det < 0.0
    assert below.mu_minus.real < 0.0 < below.mu_plus.real
    assert above.det > 0.0
    assert above.mu_minus.real > 0.0


def test_zero_mode_block_is_stable() -> None:
    data = mode_block(0, 0.02, reference_params())
    assert data.det > 0.0
    assert data.trace > 0.0
    assert not data.in_region
    assert data.d_star is None


def test_no_flux_means_no_bifurcation() -> None:
    params = reference_params(0.0, 0.0)
    assert not any(region_membership(j, params) for j in range(1, 20))
    assert critical_d2(1, params) is None


def test_region_membership_rejects_zero_index() -> None:
    with pytest.raises(InvalidParameterError, match="j >= 1"):
        region_membership(0, reference_params())


def test_kernel_ratio_spans_the_null_space() -> None:
    params = reference_params()
    kappa, kappa_star = kernel_ratios(1, params)
    assert kappa == pytest.approx(KAPPA_1, rel=1e-5)
    m = mode_block(1, critical_d2(1, params), params).matrix
    assert np.max(np.abs(m @ np.array([1.0, kappa]))) <= 1e-10 * np.max(np.abs(m))
    assert np.max(np.abs(m.T @ np.array([1.0, kappa_star]))) <= 1e-10 * np.max(np.abs(m))


def test_discrete_critical_value_approaches_analytic() -> None:
    params = reference_params()
    gaps = [abs(discrete_critical_d2(1, params, make_grid(n)) - D_STAR[1]) for n in (51, 101)]
    assert gaps[1] < gaps[0]
    assert gaps[0] / gaps[1] == pytest.approx(4.0, rel=0.05)


# --- mode set ---


def test_mode_set_threshold_is_first_critical_value() -> None:
    mode_set = mode_set_and_threshold(reference_params(), 10)
    assert {1, 2, 3}.issubset(mode_set.modes)
    assert mode_set.threshold == pytest.approx(D_STAR[1], rel=1e-4)
    assert mode_set.certified


def test_mode_set_without_flux_is_empty() -> None:
    mode_set = mode_set_and_threshold(reference_params(0.0, 0.0), 10)
    assert mode_set.modes == ()
    assert mode_set.threshold == 0.0


def test_mode_set_rejects_small_j_max() -> None:
    with pytest.raises(InvalidParameterError, match="j_max"):
        mode_set_and_threshold(reference_params(), 0)


def test_mode_table_rows() -> None:
    table = mode_table(reference_params(), 4, Gamma.finite(2.0))
    assert [row["j"] for row in table.rows] == [1, 2, 3, 4]
    assert table.rows[0]["d_star"] == pytest.approx(D_STAR[1], rel=1e-4)
    assert table.rows[0]["d_star_limit"] == pytest.approx(LIMIT_ONSET[1], rel=1e-5)
    assert table.regime is Regime.SCALAR_FIELD


# --- limit coefficients ---


def test_limit_coefficients_for_gamma_two() -> None:
    c = limit_coefficients(reference_params(), Gamma.finite(2.0))
    assert c.regime is Regime.SCALAR_FIELD
    assert c.xi_star == pytest.approx(2.0)
    assert c.d_eff(0.01) == pytest.approx(0.004 + 0.02)


def test_limit_regimes_around_threshold() -> None:
    params = reference_params()
    assert limit_coefficients(params, Gamma.finite(0.5)).regime is Regime.LOGISTIC
    assert limit_coefficients(params, Gamma.finite(1.0)).regime is Regime.DEGENERATE
    assert limit_coefficients(params, Gamma.infinity()).regime is Regime.SCALAR_FIELD


def test_limiting_critical_values() -> None:
    params = reference_params()
    for j, expected in LIMIT_ONSET.items():
        assert limiting_critical_d2(j, params, Gamma.finite(2.0)) == pytest.approx(expected, rel=1e-4)


def test_limiting_critical_value_for_infinite_gamma() -> None:
    expected = (1.0 / 0.5) * 0.5 / math.pi ** 2
    assert limiting_critical_d2(1, reference_params(), Gamma.infinity()) == pytest.approx(expected)


def test_limiting_critical_value_refuses_logistic_regime() -> None:
    with pytest.raises(RegimeError, match="not above"):
        limiting_critical_d2(1, reference_params(), Gamma.finite(0.5))


def test_ray_gaps_decrease_towards_the_limit() -> None:
    points = ray_critical_values(reference_params(), (2.0, 1.0), [1, 2.5, 5, 10, 25])
    gaps = [p.gap for p in points]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert points[-1].d_star == pytest.approx(0.048035, rel=1e-4)
    assert points[-1].gap == pytest.approx(6.3e-4, rel=0.02)


def test_gamma_parsing() -> None:
    assert Gamma.parse("inf").infinite
    assert Gamma.parse(" 2.5 ").value == 2.5
    with pytest.raises(InvalidParameterError, match="gamma"):
        Gamma.parse("two")


def test_gamma_from_flux() -> None:
    assert Gamma.from_flux(2.0, 1.0).value == 2.0
    assert Gamma.from_flux(2.0, 0.0).infinite
    assert Gamma.from_flux(0.0, 0.0) == Gamma.finite(0.0)
    assert limit_coefficients(reference_params(), Gamma.from_flux(0.0, 0.0)).regime is Regime.LOGISTIC


def test_mode_table_without_cross_diffusion_has_no_limit_onsets() -> None:
    params = reference_params(0.0, 0.0)
    table = mode_table(params, 5, Gamma.from_flux(params.alpha, params.beta))
    assert table.regime is Regime.LOGISTIC
    assert all(row["d_star_limit"] is None for row in table.rows)
    assert not any(row["in_region"] for row in table.rows)


# --- region map ---


@pytest.mark.parametrize("beta", [0.0, 1.0, 5.0])
def test_region_boundary_separates_membership(beta) -> None:
    params = reference_params()
    for j in (1, 2, 3):
        alpha = float(region_boundary(j, params, [beta])[0])
        assert alpha > 0.0
        assert region_membership(j, params.with_flux(alpha * 1.001, beta))
        assert not region_membership(j, params.with_flux(alpha * 0.999, beta))


def test_region_map_threshold_line_and_regimes() -> None:
    regions = region_map(reference_params(), [1, 2], beta_max=3.0, samples=4)
    assert sorted(regions.boundaries) == [1, 2]
    assert regions.gamma_threshold == pytest.approx(1.0)
    assert np.allclose(regions.threshold_line(), [0.0, 1.0, 2.0, 3.0])
    assert regions.regime_at(2.0, 1.0) is Regime.SCALAR_FIELD
    assert regions.regime_at(1.0, 2.0) is Regime.LOGISTIC
    assert regions.regime_at(0.0, 0.0) is Regime.LOGISTIC
    assert regions.regime_at(1.0, 1.0) is Regime.DEGENERATE


def test_region_map_rejects_empty_range() -> None:
    with pytest.raises(InvalidParameterError, match="beta_max"):
        region_map(reference_params(), [1], beta_max=0.0)
