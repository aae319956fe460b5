import numpy as np
import pytest
from hypothesis import given, strategies as st

from fwdegd.dynamics import (FORCED_SAMPLE_TIMES, ProtocolSpec, SimConfig, logit_distribution,
                             run_simulation, run_simulation_2d, run_sweep, step_logit, step_pairwise)
from fwdegd.errors import InvalidParams, SimulationError, TimestepTooLarge, Unsupported
from fwdegd.grid import Density, Grid1D, Grid2D, density_from_pdf, sup_pdf_diff, uniform_density
from fwdegd.hjb import HjbParams, LambdaWeights
from fwdegd.utility import UtilitySpec

seeds = st.integers(0, 2**32 - 1)


def random_density(grid, rng, zeros=False):
    m = rng.random(grid.size)
    if zeros:
        m[rng.random(grid.size) < 0.4] = 0.0
        m[0] += 0.1
    return Density(m / m.sum(), grid)


# -- protocol ----------------------------------------------------------------

def test_protocol_labels():
    assert ProtocolSpec.replicator().label == "replicator"
    assert ProtocolSpec.bnn().label == "bnn"
    assert ProtocolSpec.logit().label == "logit"
    assert ProtocolSpec("pairwise", 0.25).label == "pairwise(w=0.25)"
    with pytest.raises(InvalidParams):
        ProtocolSpec("pairwise", 1.5)
    with pytest.raises(InvalidParams):
        ProtocolSpec("smith")


@pytest.mark.parametrize("kw", [dict(dt=0), dict(t_max=-1), dict(stationary_tol=-1), dict(sample_every=0)])
def test_config_validation(kw):
    with pytest.raises(InvalidParams):
        SimConfig(grid=Grid1D(4), **kw)


def test_config_initial_on_other_grid():
    with pytest.raises(InvalidParams):
        SimConfig(grid=Grid1D(4), initial=uniform_density(Grid1D(5)))


# -- pairwise step -------------------------------------------------------------

def test_pairwise_constant_phi_is_fixed(backend):
    g = Grid1D(6)
    mu = random_density(g, np.random.default_rng(0))
    out = step_pairwise(mu, np.full(6, 0.4), 0.3, LambdaWeights.mix(mu.masses, 0.3), 0.1)
    np.testing.assert_array_equal(out.masses, mu.masses)


def test_pairwise_two_cells(backend):
    g = Grid1D(2)
    mu = Density([0.5, 0.5], g)
    out = step_pairwise(mu, [0.0, 1.0], 1.0, LambdaWeights(mu.masses), 0.1)
    # brute force: cell i gains lam_i (phi_i - phi_j)_+ mu_j, loses mu_i (phi_j - phi_i)_+ lam_j
    phi, lam, m = [0.0, 1.0], [0.5, 0.5], [0.5, 0.5]
    expected = []
    for i in range(2):
        gain = sum(lam[i] * max(phi[i] - phi[j], 0) * m[j] for j in range(2))
        loss = sum(m[i] * max(phi[j] - phi[i], 0) * lam[j] for j in range(2))
        expected.append(m[i] + 0.1 * (gain - loss))
    np.testing.assert_allclose(expected, [0.475, 0.525], atol=1e-16)
    np.testing.assert_allclose(out.masses, [0.475, 0.525], atol=1e-16)


@given(seeds)
def test_replicator_keeps_zero_cells(seed):
    rng = np.random.default_rng(seed)
    g = Grid1D(int(rng.integers(3, 30)))
    mu = random_density(g, rng, zeros=True)
    phi = rng.uniform(0, 1.5, g.size)
    out = step_pairwise(mu, phi, 1.0, LambdaWeights(mu.masses), 0.05)
    assert np.all(out.masses[mu.masses == 0] <= 1e-15)


@given(seeds, st.floats(0.0, 1.0))
def test_pairwise_conserves_mass(seed, w):
    rng = np.random.default_rng(seed)
    g = Grid1D(int(rng.integers(2, 40)))
    mu = random_density(g, rng)
    phi = rng.uniform(0, 1.5, g.size)
    out = step_pairwise(mu, phi, 1.0, LambdaWeights.mix(mu.masses, w), 0.01)
    assert abs(out.masses.sum() - 1) <= 1e-12 and np.all(out.masses >= 0)


def test_pairwise_timestep_too_large():
    g = Grid1D(2)
    mu = Density([0.5, 0.5], g)
    with pytest.raises(TimestepTooLarge):
        step_pairwise(mu, [0.0, 1.0], 0.01, LambdaWeights(mu.masses), 1.0)


# -- logit step ----------------------------------------------------------------

def test_logit_fixed_point():
    g = Grid1D(5)
    phi = np.linspace(0, 1, 5)
    target = logit_distribution(phi, 0.3, g)
    out = step_logit(target, phi, 0.3, 0.2)
    np.testing.assert_allclose(out.masses, target.masses, rtol=0, atol=1e-16)


def test_logit_full_step_lands_on_target():
    g = Grid1D(5)
    phi = np.linspace(0, 1, 5)
    mu = random_density(g, np.random.default_rng(1))
    np.testing.assert_allclose(step_logit(mu, phi, 0.3, 1.0).masses,
                               logit_distribution(phi, 0.3, g).masses, rtol=0, atol=1e-16)


def test_logit_constant_phi_moves_toward_uniform():
    g = Grid1D(4)
    mu = Density([0.7, 0.1, 0.1, 0.1], g)
    out = step_logit(mu, np.full(4, 2.0), 0.5, 0.1)
    np.testing.assert_allclose(out.masses, mu.masses + 0.1 * (0.25 - mu.masses), atol=1e-16)


def test_logit_dt_above_one():
    g = Grid1D(3)
    with pytest.raises(TimestepTooLarge):
        step_logit(uniform_density(g), np.zeros(3), 1.0, 1.5)


@given(seeds, st.floats(1e-4, 1.0))
def test_logit_conserves_mass(seed, dt):
    rng = np.random.default_rng(seed)
    g = Grid1D(int(rng.integers(2, 60)))
    out = step_logit(random_density(g, rng), rng.uniform(0, 1.5, g.size), float(rng.uniform(1e-3, 2)), dt)
    assert abs(out.masses.sum() - 1) <= 1e-12 and np.all(out.masses >= 0)


# -- driver --------------------------------------------------------------------

def test_zero_horizon_returns_initial():
    g = Grid1D(10)
    init = density_from_pdf(g, g.centers ** 2)
    r = run_simulation(SimConfig(grid=g, t_max=0.0, initial=init))
    assert r.steps_taken == 0 and r.final_density == init and r.times == [0.0]
    assert r.eta_values.size == 0


def test_zero_horizon_2d():
    g = Grid2D(4, 4)
    r = run_simulation(SimConfig(grid=g, t_max=0.0, utility=UtilitySpec("resource2d")))
    assert r.steps_taken == 0 and r.final_density == uniform_density(g)


def test_2d_pairwise_unsupported():
    g = Grid2D(4, 4)
    with pytest.raises(Unsupported):
        run_simulation_2d(SimConfig(grid=g, protocol=ProtocolSpec.bnn(), utility=UtilitySpec("resource2d")))


def test_utility_dimension_checked():
    with pytest.raises(InvalidParams):
        run_simulation(SimConfig(grid=Grid1D(4), utility=UtilitySpec("resource2d")))
    with pytest.raises(InvalidParams):
        run_simulation(SimConfig(grid=Grid2D(4, 4), utility=UtilitySpec("resource")))


def test_errors_carry_step_index():
    cfg = SimConfig(grid=Grid1D(20), dt=50.0, t_max=100.0, protocol=ProtocolSpec.replicator())
    with pytest.raises(SimulationError) as info:
        run_simulation(cfg)
    assert info.value.step == 0 and isinstance(info.value.cause, TimestepTooLarge)
    assert str(info.value).startswith("step 0: TimestepTooLarge")


def test_sampling_cadence_and_history():
    cfg = SimConfig(grid=Grid1D(20), dt=0.01, t_max=2.5, sample_every=70, stationary_tol=0.0)
    r = run_simulation(cfg)
    assert r.steps_taken == 250 and r.t_final == pytest.approx(2.5)
    assert r.eta_values.size == 250 and r.eta_times[1] == pytest.approx(0.01)
    times = r.times
    for t in (0.0, 0.7, 1.0, 1.4, 2.0, 2.1, 2.5):
        assert any(abs(s - t) < 1e-9 for s in times), t
    assert all(abs(s - 10.0) > 1 for s in times)
    assert [t for t, _ in r.eta_history] == r.eta_times.tolist()


def test_forced_times_are_the_figure_times():
    assert FORCED_SAMPLE_TIMES == (0.0, 1.0, 2.0, 10.0)


def test_runs_are_deterministic():
    cfg = SimConfig(grid=Grid1D(30), t_max=1.0, protocol=ProtocolSpec.bnn(), hjb=HjbParams(epsilon=0.3))
    a, b = run_simulation(cfg), run_simulation(cfg)
    assert np.array_equal(a.final_density.masses, b.final_density.masses)
    assert np.array_equal(a.eta_values, b.eta_values)


def test_monitor_sees_every_step():
    seen = []
    cfg = SimConfig(grid=Grid1D(12), t_max=0.1, protocol=ProtocolSpec.replicator())
    r = run_simulation(cfg, monitor=lambda info: seen.append((info.step, info.solution.eta)))
    assert [s for s, _ in seen] == list(range(r.steps_taken))
    assert [e for _, e in seen] == r.eta_values.tolist()


def test_logit_stationary_residual():
    g = Grid1D(40)
    cfg = SimConfig(grid=g, dt=0.05, t_max=200.0, hjb=HjbParams(epsilon=0.3))
    r = run_simulation(cfg)
    assert r.stationary
    target = logit_distribution(r.phi_final, r.eta_values[-1], g)
    assert sup_pdf_diff(r.final_density, target) <= cfg.stationary_tol / cfg.dt


def test_replicator_reaches_quarter_on_coarse_grid():
    cfg = SimConfig(grid=Grid1D(50), t_max=100.0, protocol=ProtocolSpec.replicator())
    r = run_simulation(cfg)
    assert r.stationary
    assert r.samples[-1].mean_action == pytest.approx(0.25, abs=1e-6)
    assert r.samples[-1].nash_gap < 1e-6


def test_sweep_keeps_order():
    base = SimConfig(grid=Grid1D(16), t_max=0.2)
    cfgs = [base.with_(hjb=HjbParams(epsilon=e)) for e in (0.3, 0.15, 0.2)]
    serial = run_sweep(cfgs, jobs=1)
    parallel = run_sweep(cfgs, jobs=2)
    for a, b in zip(serial, parallel):
        assert a.config == b.config
        assert np.array_equal(a.eta_values, b.eta_values)
