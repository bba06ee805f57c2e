"""
test_thermo.py

Purpose:
    Checks the equation-of-state layer: reference values of the ideal gas, the coefficient
    formulas and their abcd cross-check, the compatibility identities, entropy quadrature,
    the van der Waals and tabulated models, and the gas-model validator.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.exceptions import ConfigError, DegenerateState, PathOutOfDomain, StateOutOfDomain
from core.thermo import (
    FunctionGas,
    coefficient_fields,
    coefficient_set,
    coefficients_from_abcd,
    entropy,
    evaluate_state,
    gamma_coefficients,
    gamma_residuals,
    ideal_gas,
    maxwell_residual,
    read_table,
    slow_variables,
    thermo_coefficients,
    validate_gas_model,
    van_der_waals,
    write_table,
)


@pytest.fixture
def gas():
    return ideal_gas(R=1.0, C_V=1.5)


def test_ideal_gas_reference_quantities(gas):
    tc = thermo_coefficients(gas, 1.0, 1.0)
    assert_allclose(tc.Rcal, 1.0, atol=1e-10)
    assert_allclose(tc.C_P, 2.5, atol=1e-10)
    assert_allclose(tc.C_V, 1.5, atol=1e-10)
    assert_allclose(tc.K_T, 1.0, atol=1e-10)
    assert_allclose(tc.K_P, 1.0, atol=1e-10)


def test_ideal_gas_working_coefficients(gas):
    cs = coefficient_set(gas, 0.0, 0.0)
    assert_allclose(cs.chi1, 0.4, atol=1e-10)
    assert_allclose(cs.chi3, 1.0, atol=1e-10)
    assert_allclose(cs.g1, 0.6, atol=1e-10)
    assert_allclose(cs.g2, 1.0, atol=1e-10)
    assert_allclose(cs.g3, 1.5, atol=1e-10)
    assert_allclose(cs.chi2, 1.0, atol=1e-10)
    assert cs.positive()
    assert cs.g4 is None


def test_abcd_cross_check_matches_coefficients(gas):
    for theta, wp in [(0.0, 0.0), (0.3, -0.2), (-0.5, 0.7)]:
        cs = coefficient_set(gas, theta, wp)
        alt = coefficients_from_abcd(gas, theta, wp)
        assert_allclose(alt["g1"], cs.g1, rtol=1e-12)
        assert_allclose(alt["g3"], cs.g3, rtol=1e-12)
        assert_allclose(alt["chi1"], cs.chi1, rtol=1e-12)
        assert_allclose(alt["chi3"], cs.chi3, rtol=1e-12)


def test_symmetrizer_coefficients_at_reference(gas):
    sym = gamma_coefficients(gas, 0.0, 0.0)
    assert_allclose(sym.gamma1, 1.0, atol=1e-12)
    assert_allclose(sym.gamma2, 5.0 / 3.0, atol=1e-12)
    assert_allclose(sym.omega, 5.0 / 3.0, atol=1e-12)


def test_maxwell_and_compatibility_identities(gas):
    rng = np.random.default_rng(0)
    assert maxwell_residual(gas, 1.0, 1.0) < 1e-12
    for theta, wp in rng.uniform(-1.0, 1.0, size=(25, 2)):
        g1_S, g2_rho = gamma_residuals(gas, theta, wp)
        assert abs(g1_S) < 1e-10
        assert abs(g2_rho) < 1e-10


def test_entropy_is_path_independent(gas):
    assert entropy(gas, 1.0, 1.0) == 0.0
    for P, T in [(2.0, 3.0), (0.5, 1.7), (4.0, 0.3)]:
        s_l = entropy(gas, P, T, path="L")
        s_r = entropy(gas, P, T, path="reversed")
        assert abs(s_l - s_r) < 1e-9
        assert_allclose(s_l, 2.5 * np.log(T) - np.log(P), atol=1e-9)


def test_entropy_path_outside_box_raises(gas):
    with pytest.raises(PathOutOfDomain):
        entropy(gas, 1000.0, 1.0)
    with pytest.raises(ValueError):
        entropy(gas, 2.0, 2.0, path="diagonal")


def test_polynomial_heat_capacity_reproduced():
    gas = ideal_gas(R=1.0, C_V=(1.0, 0.5))
    for T in (0.5, 1.0, 2.0):
        assert_allclose(thermo_coefficients(gas, 1.3, T).C_V, 1.0 + 0.5 * T, rtol=1e-12)
    assert_allclose(entropy(gas, 1.5, 2.0), gas.entropy_closed_form(1.5, 2.0), atol=1e-9)


def test_ideal_gas_rejects_bad_parameters():
    with pytest.raises(ConfigError):
        ideal_gas(R=0.0)
    with pytest.raises(ConfigError):
        ideal_gas(C_V=(1.0, -1.0))


def test_evaluation_outside_box_raises(gas):
    with pytest.raises(StateOutOfDomain):
        evaluate_state(gas, 1e6, 1.0)


def test_degenerate_state_detected():
    model = FunctionGas(rho_fn=lambda P, T: 1.0 / np.asarray(T) + 0.0 * np.asarray(P),
                        e_fn=lambda P, T: 1.5 * np.asarray(T) + 0.0 * np.asarray(P))
    with pytest.raises(DegenerateState):
        thermo_coefficients(model, 1.0, 1.0)


def test_vectorized_coefficients_and_species_closures(gas):
    theta = np.array([[0.0, 0.1], [0.2, -0.1]])
    wp = np.array([[0.0, np.log(2.0)], [0.0, 0.0]])
    cs = coefficient_fields(gas, theta, wp, closure="density")
    assert cs.g1.shape == theta.shape
    assert_allclose(cs.g4[0, 0], 1.0)
    assert_allclose(cs.g4[0, 1], 2.0 * np.exp(-0.1), rtol=1e-12)
    assert_allclose(cs.chi4, 1.0)
    unit = coefficient_set(gas, 0.0, 0.0, closure="unit")
    assert unit.g4 == 1.0 and unit.chi4 == 1.0
    with pytest.raises(ConfigError):
        coefficient_set(gas, 0.0, 0.0, closure="bogus")


def test_slow_variables_vanish_at_reference(gas):
    sv = slow_variables(gas, 0.0, 0.0)
    assert_allclose(sv.F, 0.0, atol=1e-14)
    assert_allclose(sv.G, 0.0, atol=1e-14)
    assert sv.F_theta > 0 and sv.G_wp > 0 and sv.G_theta < 0


def test_van_der_waals_reduces_to_ideal_gas():
    vdw = van_der_waals(a=0.0, b=0.0)
    assert_allclose(vdw.rho(2.0, 1.0), 2.0, rtol=1e-13)


def test_van_der_waals_identities():
    vdw = van_der_waals(a=0.1, b=0.05)
    rho = vdw.rho(1.0, 1.0)
    P_back = vdw.R * 1.0 * rho / (1.0 - vdw.b * rho) - vdw.a * rho ** 2
    assert_allclose(P_back, 1.0, rtol=1e-12)
    assert maxwell_residual(vdw, 1.0, 1.0) < 1e-10
    g1_S, g2_rho = gamma_residuals(vdw, 0.1, -0.1)
    assert abs(g1_S) < 1e-10
    assert abs(g2_rho) < 1e-10
    with pytest.raises(ConfigError):
        van_der_waals(a=-1.0, b=0.0)


def test_tabulated_gas_interpolates_ideal_gas(gas):
    grid = np.linspace(0.5, 2.0, 16)
    table = read_table(write_table(gas, grid, grid))
    assert tuple(table.box) == (0.5, 2.0, 0.5, 2.0)
    assert_allclose(table.rho(1.1, 1.05), gas.rho(1.1, 1.05), rtol=1e-3)
    assert_allclose(table.e_T(1.1, 1.05), 1.5, rtol=1e-3)
    with pytest.raises(StateOutOfDomain):
        evaluate_state(table, 3.0, 1.0)


def test_read_table_rejects_malformed_input():
    with pytest.raises(ConfigError):
        read_table("")
    with pytest.raises(ConfigError):
        read_table("4 4\n1 2 3\n")


def test_ideal_gas_validation_passes(gas):
    report = validate_gas_model(gas, samples=6)
    assert report.passed
    assert report.n_points == 36
    assert report.max_identity_residual < 1e-12
    assert "PASS" in report.summary()
    with pytest.raises(ValueError):
        validate_gas_model(gas, samples=3)


def test_validation_records_evaluation_failures():
    vdw = van_der_waals(a=0.5, b=0.5)
    report = validate_gas_model(vdw, samples=5)
    assert report.failures
    assert not report.passed
