"""
test_diagnostics.py

Purpose:
    Verifies the norm machinery and structural diagnostics: state norms, the trajectory
    X-norm with and without the per-step accumulator, the frequency split, the low-Mach
    limit residuals, the periodic energy structure and the div-curl ratios.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.diagnostics import (
    NormReport,
    build_norm_report,
    curl_weight,
    energy_balance_residual,
    hf_lf_norms,
    limit_diagnostics,
    periodic_ansatz,
    skew_energy_residual,
    theorem_norm,
    torus_div_curl_ratio,
    x_norm,
    z_norm,
)
from core.exceptions import ConfigError, DiagnosticError
from core.model import FluidState, ParamPoint, SourceSpec, TransportLaws
from core.spectral import GridSpec, ScalarField, VectorField, div, leray_project, random_band_limited
from core.thermo import ideal_gas
from core.timeloop import InitSpec, IntegratorConfig, make_initial_data, simulate


@pytest.fixture
def gas():
    return ideal_gas(R=1.0, C_V=1.5)


@pytest.fixture
def transport():
    return TransportLaws.constant()


def _run(gas, transport, params, grid=None, t_end=0.02, dt=0.002, seed=0, **init):
    grid = grid or GridSpec(2, 16)
    spec = InitSpec(init.pop("generator", "general"), seed=seed, amplitude=init.pop("amplitude", 0.05), **init)
    state = make_initial_data(spec, grid, params, gas, transport)
    formulation = "combustion" if state.y else "primal"
    return simulate(state, params, gas, transport, SourceSpec.none(),
                    IntegratorConfig(t_end=t_end, fixed_dt=dt), formulation=formulation)


def test_theorem_norm_of_single_mode():
    grid = GridSpec(1, 16)
    (x,) = grid.coordinates()
    z = ScalarField.zeros(grid)
    state = FluidState(ScalarField(grid, np.sin(x)), VectorField((z,)), z)
    assert_allclose(theorem_norm(state, 0.5, 1), np.sqrt(np.pi) + 0.5 * np.sqrt(2 * np.pi), rtol=1e-12)
    assert theorem_norm(FluidState.zeros(grid), 0.5, 2) == 0.0
    with pytest.raises(DiagnosticError):
        theorem_norm(state, 0.5, 0)


def test_accumulated_norm_matches_sampled_norm(gas, transport):
    params = ParamPoint(0.5, 0.1, 0.2)
    traj = _run(gas, transport, params)
    from_steps, comps = x_norm(traj, 2, params)
    traj.accumulator = None
    from_samples, _ = x_norm(traj, 2, params)
    assert_allclose(from_steps, from_samples, rtol=1e-12)
    assert set(comps) == {"x1", "x2", "x3", "x4", "x5", "x6"}
    assert all(value >= 0 for value in comps.values())


def test_dissipation_pieces_vanish_without_viscosity(gas, transport):
    params = ParamPoint(0.5)
    traj = _run(gas, transport, params)
    _, comps = x_norm(traj, 2, params)
    for key in ("x3", "x4", "x5", "x6"):
        assert comps[key] == 0.0
    hf, lf = hf_lf_norms(traj, 2, params)
    assert hf == 0.0
    assert lf > 0.0


def test_trajectory_norms_need_two_samples(gas, transport):
    params = ParamPoint(0.5)
    traj = _run(gas, transport, params)
    traj.times, traj.states, traj.accumulator = traj.times[:1], traj.states[:1], None
    with pytest.raises(DiagnosticError):
        x_norm(traj, 2, params)


def test_z_norm_requires_species(gas, transport):
    params = ParamPoint(0.5, 0.1, 0.1, 1.0)
    traj = _run(gas, transport, params, n_species=1)
    x, _ = x_norm(traj, 2, params)
    assert z_norm(traj, 2, params) > x
    plain = _run(gas, transport, ParamPoint(0.5))
    with pytest.raises(DiagnosticError):
        z_norm(plain, 2, ParamPoint(0.5))


def test_limit_diagnostics_on_solenoidal_isothermal_state(gas, transport):
    grid = GridSpec(2, 16)
    rng = np.random.default_rng(3)
    v = leray_project(VectorField(tuple(0.1 * random_band_limited(grid, rng, 3) for _ in range(2))))
    state = FluidState(ScalarField.zeros(grid), v, ScalarField.zeros(grid))
    diag = limit_diagnostics(state, ParamPoint(0.5, 0.0, 0.3), gas, transport, 2)
    assert diag.div_ve_norm < 1e-12
    assert diag.curl_gamma_v_norm > 0.0


def test_curl_weights_at_rest(gas):
    grid = GridSpec(2, 8)
    state = FluidState.zeros(grid)
    params = ParamPoint(0.5)
    assert_allclose(curl_weight(state, params, gas, "entropy"), 1.0, atol=1e-14)
    assert_allclose(curl_weight(state, params, gas, "density"), 1.0, atol=1e-14)
    assert_allclose(curl_weight(state, params, gas, "custom", lambda th, wp: 2.0 + th), 2.0)
    with pytest.raises(ConfigError):
        curl_weight(state, params, gas, "vorticity")


def test_singular_operator_is_skew(gas, transport):
    grid = GridSpec(2, 16)
    params = ParamPoint(0.5, 0.1, 0.4)
    state = make_initial_data(InitSpec("general", seed=8), grid, params)
    frame = periodic_ansatz(state, params, gas, transport, SourceSpec.none())
    assert skew_energy_residual(frame.U) < 1e-12
    assert frame.energy() > 0.0


def test_ansatz_without_heat_is_identity(gas, transport):
    grid = GridSpec(2, 16)
    params = ParamPoint(0.5)
    state = make_initial_data(InitSpec("general", seed=9), grid, params)
    frame = periodic_ansatz(state, params, gas, transport, SourceSpec.none())
    assert frame.P_mean == 0.0
    assert frame.V.max_abs() == 0.0
    assert_allclose(frame.U.q.values, state.p.values)


def test_energy_balance_closes(gas, transport):
    """Purpose: along a small-data viscous, heat-conducting run the <E U, U> law holds to the centered-difference floor."""
    params = ParamPoint(0.5, 0.05, 0.05)
    traj = _run(gas, transport, params, t_end=0.02, dt=0.001, amplitude=0.01, band=2)
    assert energy_balance_residual(traj, params, gas, transport, SourceSpec.none()) < 1e-6
    # dropping the viscous work from the law must break the balance
    inviscid = ParamPoint(0.5, 0.0, 0.05)
    assert energy_balance_residual(traj, inviscid, gas, transport, SourceSpec.none()) > 1e-6


def test_energy_balance_residual_is_second_order_in_sampling(gas):
    """Purpose: for an acoustic pulse the residual comes only from centered differences, so halving dt quarters it."""
    grid = GridSpec(1, 16)
    params = ParamPoint(0.5)
    transport = TransportLaws.constant()
    state = make_initial_data(InitSpec("acoustic", amplitude=0.1, mode=1), grid, params)
    residuals = []
    for dt in (0.01, 0.005):
        traj = simulate(state, params, gas, transport, SourceSpec.none(),
                        IntegratorConfig(t_end=0.2, fixed_dt=dt, frozen=("theta",)))
        residuals.append(energy_balance_residual(traj, params, gas, transport, SourceSpec.none()))
    assert residuals[1] > 0.0
    assert 3.0 <= residuals[0] / residuals[1] <= 5.0


def test_ansatz_velocity_carries_centered_forcing(gas, transport):
    """Purpose: div V reproduces the mean-removed forcing F - g1 P exactly."""
    grid = GridSpec(2, 16)
    params = ParamPoint(0.5, 0.1, 0.4)
    state = make_initial_data(InitSpec("general", seed=3, amplitude=0.1), grid, params)
    frame = periodic_ansatz(state, params, gas, transport, SourceSpec.prescribed_mode(0.3, (1, 2)))
    assert frame.F_centered.max_abs() > 0.0
    assert abs(frame.F_centered.mean()) < 1e-14
    residual = (div(frame.V) - frame.F_centered).max_abs()
    assert residual <= 1e-12 * frame.F_centered.max_abs()


def test_div_curl_ratio_is_bounded():
    grid = GridSpec(2, 16)
    rng = np.random.default_rng(11)
    for s in (1, 2, 3):
        v = VectorField(tuple(random_band_limited(grid, rng, 5) for _ in range(2)))
        ratio = torus_div_curl_ratio(v, np.ones(grid.shape), s)
        assert 0.0 < ratio <= 2.0


def test_norm_report_roundtrip(gas, transport):
    params = ParamPoint(0.5, 0.1, 0.1)
    traj = _run(gas, transport, params)
    report = build_norm_report(traj, params, gas, transport, SourceSpec.none(), 2)
    assert report.initial_norm > 0.0
    assert report.z_norm is None
    assert report.theorem_norm_sup >= theorem_norm(traj.states[0], params.eps, 2)
    again = NormReport.from_dict(report.to_dict())
    assert again.to_dict() == report.to_dict()
