"""
test_timeloop.py

Purpose:
    Checks step control, the RK4 stepper, the simulation driver (completion, blow-up and
    step-limit terminations, symmetrized runs) and the seeded initial-data generators.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.exceptions import ConfigError
from core.model import FluidState, ParamPoint, SourceSpec, TransportLaws, primal_split, state_coefficients
from core.spectral import GridSpec, ScalarField, VectorField, div
from core.thermo import ideal_gas
from core.timeloop import (
    InitSpec,
    IntegratorConfig,
    TerminationReason,
    make_initial_data,
    rk4_step,
    simulate,
    stable_dt,
    w1inf_norm,
)


@pytest.fixture
def gas():
    return ideal_gas(R=1.0, C_V=1.5)


@pytest.fixture
def transport():
    return TransportLaws.constant()


def _sine_state(grid, amplitude=1.0):
    (x,) = grid.coordinates()
    z = ScalarField.zeros(grid)
    return FluidState(ScalarField(grid, amplitude * np.sin(x)), VectorField((z,)), z)


def test_integrator_config_validation():
    with pytest.raises(ConfigError) as info:
        IntegratorConfig(t_end=0.0, cfl=2.0, frozen=("rho",))
    assert len(info.value.errors) == 3


def test_rk4_reproduces_taylor_polynomial_on_linear_decay():
    grid = GridSpec(1, 16)
    state = _sine_state(grid)
    dt = 0.1
    out = rk4_step(state, dt, lambda s, t: s.scaled(-1.0))
    factor = 1 - dt + dt ** 2 / 2 - dt ** 3 / 6 + dt ** 4 / 24
    assert_allclose(out.p.values, factor * state.p.values, atol=1e-14)
    with pytest.raises(ValueError):
        rk4_step(state, 0.0, lambda s, t: s.scaled(-1.0))


def test_rk4_keeps_frozen_rows():
    grid = GridSpec(1, 16)
    state = _sine_state(grid)
    out = rk4_step(state, 0.1, lambda s, t: s.scaled(-1.0), frozen_rows=[0])
    assert_allclose(out.p.values, state.p.values, atol=1e-14)


def test_w1inf_norm_of_single_mode():
    assert_allclose(w1inf_norm(_sine_state(GridSpec(1, 16))), 2.0, atol=1e-12)


def test_stable_dt_acoustic_limit(gas, transport):
    grid = GridSpec(1, 16)
    state = FluidState.zeros(grid)
    for eps in (1.0, 0.1):
        dt = stable_dt(state, ParamPoint(eps), grid, 0.5, gas, transport)
        # c0 = 1 / sqrt(g1 g2) with g1 = 0.6, g2 = 1 at rest
        assert_allclose(dt, 0.5 * eps * grid.dx * np.sqrt(0.6), rtol=1e-12)


def test_stable_dt_diffusive_limit(gas, transport):
    grid = GridSpec(1, 64)
    state = FluidState.zeros(grid)
    dt = stable_dt(state, ParamPoint(1.0, 1.0, 1.0), grid, 1.0, gas, transport)
    assert dt < 0.5 * grid.dx ** 2


def test_simulate_rest_state_completes(gas, transport):
    grid = GridSpec(2, 8)
    traj = simulate(FluidState.zeros(grid), ParamPoint(0.5), gas, transport, SourceSpec.none(),
                    IntegratorConfig(t_end=0.05, fixed_dt=0.01))
    assert traj.termination is TerminationReason.COMPLETED
    assert_allclose(traj.realized_T, 0.05)
    assert len(traj.times) == 6
    assert len(traj.dt_history) == 5
    assert np.max(np.abs(traj.final_state.pack())) == 0.0


def test_simulate_samples_and_clamps_last_step(gas, transport):
    grid = GridSpec(1, 16)
    state = _sine_state(grid, 0.01)
    traj = simulate(state, ParamPoint(0.5), gas, transport, SourceSpec.none(),
                    IntegratorConfig(t_end=0.1, fixed_dt=0.03, sample_every=2))
    assert traj.termination is TerminationReason.COMPLETED
    assert_allclose(traj.dt_history[-1], 0.01)
    assert_allclose(traj.times, [0.0, 0.06, 0.1])


def test_blowup_threshold_stops_run(gas, transport):
    grid = GridSpec(1, 16)
    traj = simulate(_sine_state(grid, 0.1), ParamPoint(0.5), gas, transport, SourceSpec.none(),
                    IntegratorConfig(t_end=1.0, fixed_dt=0.01, blowup_threshold=0.01))
    assert traj.termination is TerminationReason.BLOWUP
    assert "exceeded" in traj.message
    assert len(traj.dt_history) == 1

def test_blowup_keeps_last_state_below_threshold(gas, transport):
    """Purpose: a threshold blowup must not store the offending state; the trajectory ends on the last accepted step."""
    grid = GridSpec(1, 16)
    z = ScalarField.zeros(grid)
    rest = FluidState(z, VectorField((z,)), z)
    threshold = 0.05
    traj = simulate(rest, ParamPoint(1.0), gas, transport, SourceSpec.prescribed_mode(1.0, (1,)),
                    IntegratorConfig(t_end=1.0, fixed_dt=0.001, blowup_threshold=threshold))
    assert traj.termination is TerminationReason.BLOWUP
    assert len(traj.dt_history) > 1
    assert traj.w1inf_history[-1] > threshold
    assert all(w1inf_norm(st) <= threshold for st in traj.states)
    assert traj.realized_T == pytest.approx(sum(traj.dt_history) - 0.001)
    assert w1inf_norm(traj.final_state) == pytest.approx(traj.w1inf_history[-2])



def test_leaving_state_box_is_blowup(gas, transport):
    grid = GridSpec(1, 16)
    # eps p = 6 puts P = e^6 outside the ideal-gas box
    traj = simulate(_sine_state(grid, 12.0), ParamPoint(0.5), gas, transport, SourceSpec.none(),
                    IntegratorConfig(t_end=1.0, fixed_dt=0.01))
    assert traj.termination is TerminationReason.BLOWUP
    assert "StateOutOfDomain" in traj.message
    assert traj.realized_T == 0.0


def test_max_steps_termination(gas, transport):
    grid = GridSpec(1, 16)
    traj = simulate(_sine_state(grid, 0.01), ParamPoint(0.5), gas, transport, SourceSpec.none(),
                    IntegratorConfig(t_end=1.0, fixed_dt=0.01, max_steps=3, sample_every=10))
    assert traj.termination is TerminationReason.MAX_STEPS
    assert_allclose(traj.realized_T, 0.03)


@pytest.mark.parametrize("eps", [1.0, 0.25])
def test_symmetrized_run_tracks_primal_run(gas, transport, eps):
    """Purpose: the symmetrized and primal formulations integrate the same flow; their final states agree in L2."""
    grid = GridSpec(1, 32)
    params = ParamPoint(eps)
    state = make_initial_data(InitSpec("general", seed=4, amplitude=0.02, band=2), grid, params)
    config = IntegratorConfig(t_end=0.1, fixed_dt=0.0025)
    primal = simulate(state, params, gas, transport, SourceSpec.none(), config)
    sym = simulate(state, params, gas, transport, SourceSpec.none(), config, formulation="symmetrized")
    assert sym.termination is TerminationReason.COMPLETED
    assert sym.realized_T == pytest.approx(0.1)
    diff = sym.final_state.pack() - primal.final_state.pack()
    l2 = np.sqrt(grid.volume * np.mean(np.sum(diff ** 2, axis=0)))
    assert l2 <= 1e-6


def test_simulate_rejects_inconsistent_setups(gas, transport):
    grid = GridSpec(1, 16)
    config = IntegratorConfig(t_end=0.1)
    with pytest.raises(ConfigError):
        simulate(FluidState.zeros(grid), ParamPoint(0.5), gas, transport, SourceSpec.none(), config,
                 formulation="explicit")
    with pytest.raises(ConfigError):
        simulate(FluidState.zeros(grid), ParamPoint(0.5, lam=1.0), gas, transport, SourceSpec.none(), config,
                 formulation="combustion")
    with pytest.raises(ConfigError):
        simulate(FluidState.zeros(grid), ParamPoint(0.5), gas, transport,
                 SourceSpec.prescribed_mode(0.1, (1,)), config, formulation="symmetrized")


def test_generators_are_seeded():
    grid = GridSpec(2, 16)
    params = ParamPoint(0.1)
    a = make_initial_data(InitSpec("general", seed=3), grid, params)
    b = make_initial_data(InitSpec("general", seed=3), grid, params)
    c = make_initial_data(InitSpec("general", seed=4), grid, params)
    assert_allclose(a.pack(), b.pack())
    assert not np.allclose(a.pack(), c.pack())


def test_theta_small_scales_temperature():
    grid = GridSpec(2, 16)
    params = ParamPoint(0.1)
    general = make_initial_data(InitSpec("general", seed=1), grid, params)
    small = make_initial_data(InitSpec("theta-small", seed=1), grid, params)
    assert_allclose(small.theta.values, 0.1 * general.theta.values)
    assert_allclose(small.p.values, general.p.values)


def test_well_prepared_data_without_heat_is_solenoidal():
    grid = GridSpec(2, 16)
    params = ParamPoint(0.1)
    state = make_initial_data(InitSpec("well-prepared", seed=2, amplitude=0.1), grid, params)
    assert div(state.v).max_abs() < 1e-12
    assert state.p.max_abs() <= 0.1 * 0.1 + 1e-15


def test_well_prepared_data_balance_heat_conduction(gas, transport):
    grid = GridSpec(2, 16)
    params = ParamPoint(0.05, 0.0, 0.5)
    state = make_initial_data(InitSpec("well-prepared", seed=5), grid, params, gas, transport)
    _, singular = primal_split(state, params, gas, transport, SourceSpec.none())
    dp = singular.dp.values
    assert np.max(np.abs(dp - dp.mean())) < 1e-9


def test_well_prepared_heat_needs_gas_model():
    with pytest.raises(ConfigError):
        make_initial_data(InitSpec("well-prepared"), GridSpec(2, 16), ParamPoint(0.1, 0.0, 0.5))


def test_single_mode_generators():
    grid = GridSpec(1, 16)
    params = ParamPoint(0.5)
    (x,) = grid.coordinates()
    acoustic = make_initial_data(InitSpec("acoustic", amplitude=0.2, mode=2), grid, params)
    assert_allclose(acoustic.p.values, 0.2 * np.sin(2 * x))
    species = make_initial_data(InitSpec("species", amplitude=0.2), grid, params)
    assert species.n_species == 1
    with pytest.raises(ConfigError):
        make_initial_data(InitSpec("heat", mode=9), grid, params)
    with pytest.raises(ConfigError):
        InitSpec("vortex")


def test_small_acoustic_mode_conserves_energy(gas, transport):
    """Purpose: an inviscid small-amplitude acoustic mode keeps <g1 p^2 + g2 |v|^2> while trading pressure for velocity."""
    grid = GridSpec(1, 16)
    params = ParamPoint(0.5)
    state = make_initial_data(InitSpec("acoustic", amplitude=1e-4, mode=1), grid, params)
    traj = simulate(state, params, gas, transport, SourceSpec.none(),
                    IntegratorConfig(t_end=1.0, fixed_dt=0.01, sample_every=10))
    assert traj.termination is TerminationReason.COMPLETED

    def energy(st):
        C = state_coefficients(st, params, gas)
        return grid.volume * np.mean(C.g1 * st.p.values ** 2 + C.g2 * st.v[0].values ** 2)

    energies = np.array([energy(st) for st in traj.states])
    assert np.max(np.abs(energies - energies[0])) <= 1e-6 * energies[0]
    assert max(st.v[0].max_abs() for st in traj.states) > 1e-5


def test_species_mode_decays_like_heat_kernel(gas):
    """Purpose: with the flow at rest a species mode diffuses as y0 exp(-lambda D k^2 t) under the unit closure."""
    grid = GridSpec(1, 16)
    params = ParamPoint(0.5, 0.0, 0.0, 1.0)
    transport = TransportLaws.constant(D=1.0)
    state = make_initial_data(InitSpec("species", amplitude=0.1, mode=1, n_species=1), grid, params)
    traj = simulate(state, params, gas, transport, SourceSpec.none(),
                    IntegratorConfig(t_end=1.0, fixed_dt=0.01, frozen=("p", "v", "theta")),
                    formulation="combustion", closure="unit")
    assert traj.termination is TerminationReason.COMPLETED
    lam, D, k = 1.0, 1.0, 1
    expected = state.y[0].values * np.exp(-lam * D * k ** 2 * traj.realized_T)
    assert traj.realized_T == pytest.approx(1.0)
    assert np.max(np.abs(traj.final_state.y[0].values - expected)) <= 1e-8
