import json
from dataclasses import replace

import numpy as np
import pytest

from levyepi.engine import SimConfig, Trajectory, simulate
from levyepi.estimators import (
    SLLN_TERMS,
    EnsembleSummary,
    ensemble_run,
    extinction_rate,
    persistence_check,
    slln_diagnostics,
    summarize,
    time_average,
)
from levyepi.model import JumpMeasure, NoiseParams, endemic_equilibrium


def _synthetic(times, states):
    return Trajectory(times=np.asarray(times, float), states=np.asarray(states, float),
                      jump_times=np.zeros(0), jump_atoms=np.zeros(0, dtype=np.int64),
                      jump_pre_states=np.zeros((0, 4)), clamp_count=0, n_steps=len(times) - 1,
                      brownian_increments_digest="", seed=0, path_index=0, config=None, roles=())


def test_time_average_constant_path():
    traj = _synthetic(np.linspace(0, 3, 31), np.full((31, 4), 1.7))
    assert time_average(traj, "I") == pytest.approx(1.7)
    assert time_average(traj, "I", power=2) == pytest.approx(1.7 ** 2)
    assert time_average(traj, "infected") == pytest.approx(3.4)


def test_time_average_ramp_and_bounds():
    t = np.linspace(0, 1, 10001)
    states = np.column_stack([t, t ** 3, t, t])
    traj = _synthetic(t, states)
    assert time_average(traj, "S") == pytest.approx(0.5, abs=1e-10)
    avg = time_average(traj, "I")
    assert states[:, 1].min() <= avg <= states[:, 1].max()


def test_time_average_empty():
    with pytest.raises(ValueError):
        time_average(_synthetic([0.0], np.ones((1, 4))), "S")


def test_extinction_rate_exact_exponential(extinction):
    t = np.linspace(0, 40, 4001)
    decay = np.exp(-0.3 * t)
    traj = _synthetic(t, np.column_stack([np.ones_like(t), decay, np.ones_like(t), decay]))
    assert extinction_rate(traj, extinction.model) == pytest.approx(-0.3, abs=1e-6)
    scaled = _synthetic(t, np.column_stack([np.ones_like(t), 10 * decay, np.ones_like(t), 10 * decay]))
    assert extinction_rate(scaled, extinction.model) == pytest.approx(
        extinction_rate(traj, extinction.model), abs=1e-10)


def test_extinction_rate_constant_is_zero(extinction):
    t = np.linspace(0, 10, 101)
    traj = _synthetic(t, np.full((101, 4), 0.4))
    assert extinction_rate(traj, extinction.model) == pytest.approx(0.0, abs=1e-12)


def test_extinction_rate_empty_window(extinction):
    t = np.linspace(0, 10, 101)
    traj = _synthetic(t, np.zeros((101, 4)))
    with pytest.raises(ValueError):
        extinction_rate(traj, extinction.model)


def test_persistence_check_zero_paths():
    rep = persistence_check(np.zeros(5), bound=0.01)
    assert rep.fraction_positive == 0 and rep.fraction_above_bound == 0


def test_slln_zero_noise_is_zero(extinction):
    traj = simulate(extinction.model, NoiseParams(), JumpMeasure.empty(),
                    SimConfig(dt=1e-2, t_end=20.0), extinction.init)
    diag = slln_diagnostics(traj, NoiseParams(), JumpMeasure.empty())
    for term in SLLN_TERMS:
        np.testing.assert_array_equal(diag[term], 0.0)
    np.testing.assert_allclose(diag["t"], 20.0 / np.array([16, 8, 4, 2, 1]))


def test_slln_independent_of_record_stride(extinction):
    config = SimConfig(dt=1e-3, t_end=16.0, seed=2)
    full = simulate(extinction.model, extinction.noise, extinction.jumps, config, extinction.init)
    thin = simulate(extinction.model, extinction.noise, extinction.jumps,
                    replace(config, record_stride=10), extinction.init)
    a = slln_diagnostics(full, extinction.noise, extinction.jumps)
    b = slln_diagnostics(thin, extinction.noise, extinction.jumps)
    # Brownian sums only differ through the coarser left-point integrand
    for term in SLLN_TERMS:
        np.testing.assert_allclose(a[term], b[term], atol=0.02)


def test_slln_decays_with_horizon(extinction):
    config = replace(extinction.sim, t_end=400.0, seed=13)
    summary = ensemble_run(extinction, 16, config=config, with_slln=True, workers=1)
    med = summary.slln_residuals["B1:S"]["median_by_checkpoint"]
    # |M(t)/t| shrinks roughly like t^(-1/2): quartering t halves it
    assert med[4] < med[2]
    assert med[4] / med[2] == pytest.approx(0.5, abs=0.35)


def test_single_path_ensemble_matches_path(extinction):
    config = replace(extinction.sim, t_end=30.0, seed=4)
    summary = ensemble_run(extinction, 1, config=config, workers=1)
    traj = simulate(extinction.model, extinction.noise, extinction.jumps, config, extinction.init, 0)
    assert summary.n_paths == 1
    assert summary.terminal_infection["median"] == traj.states[-1, 1] + traj.states[-1, 3]
    assert summary.mean_time_avg_infection["mean"] == time_average(traj, "infected")
    assert summary.lyapunov_rate["mean"] == extinction_rate(traj, extinction.model)


def test_ensemble_reproducible_and_order_free(extinction):
    config = replace(extinction.sim, t_end=20.0, seed=77)
    a = ensemble_run(extinction, 6, config=config, workers=1, with_aux=True, with_slln=True)
    b = ensemble_run(extinction, 6, config=config, workers=3, with_aux=True, with_slln=True)
    assert json.dumps(a.to_dict(True)) == json.dumps(b.to_dict(True))
    shuffled = summarize(list(reversed(a.paths)), config, a.metadata)
    assert json.dumps(shuffled.to_dict(True)) == json.dumps(a.to_dict(True))


def test_quantiles_monotone(extinction):
    summary = ensemble_run(extinction, 8, config=replace(extinction.sim, t_end=10.0), workers=1)
    q = summary.terminal_infection
    assert q["min"] <= q["q05"] <= q["q25"] <= q["median"] <= q["q75"] <= q["q95"] <= q["max"]


def test_endemic_time_average(persistence):
    eq = endemic_equilibrium(persistence.model)
    scenario = replace(persistence, noise=NoiseParams(), jumps=JumpMeasure.empty())
    summary = ensemble_run(scenario, 1, config=replace(persistence.sim, t_end=500.0), workers=1)
    rep = persistence_check(summary, bound=0.0)
    assert rep.mean_time_average == pytest.approx(eq.i + eq.i_m, rel=0.02)


def test_reject_failures_are_counted(extinction):
    wild = replace(extinction, noise=NoiseParams((4.0, 4.0, 4.0, 4.0)), jumps=JumpMeasure.empty())
    config = SimConfig(dt=0.2, t_end=50.0, positivity_policy="Reject")
    summary = ensemble_run(wild, 3, config=config, workers=1)
    assert summary.n_failed == 3
    assert all(m.error for m in summary.paths)


def test_paths_csv(tmp_path, extinction):
    summary = ensemble_run(extinction, 2, config=replace(extinction.sim, t_end=5.0), workers=1)
    assert isinstance(summary, EnsembleSummary)
    summary.write_paths_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "path,terminal_I,terminal_Im,time_avg_infection,lyapunov_rate,clamped"
    assert len(lines) == 3
