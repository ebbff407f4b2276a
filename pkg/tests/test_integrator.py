"""Adaptive propagation: closed forms, stopping, error control, invariants."""

import math

import numpy as np
import pytest

import qchain._stepper as stepper
from qchain import (
    ChainModel,
    DephasingSchedule,
    IntegratorConfig,
    NotConverged,
    SingularSchedule,
    StepSizeUnderflow,
    efficiency,
    integrate,
    resolve_max_step,
)

CASCADE = ChainModel(omega=(1.0,), lam=(), kappa=(0.1,), kappa_sink=0.6)
NO_DEPHASING_1 = (DephasingSchedule(0.0),)
FIG2_MODEL = ChainModel(omega=(1.0, 1.0), lam=(0.3,), kappa=(0.1, 0.1), kappa_sink=0.6)
FIG2_SCHEDS = (DephasingSchedule(0.1, 10.0, 0.8),) * 2


def cascade_p_sink(t):
    # branching-ratio solution of the two-level cascade:
    # rho_11' = -2(k1+ks) rho_11, rho_SS' = 2 ks rho_11
    rate = 2.0 * (0.1 + 0.6)
    return (0.6 / 0.7) * (1.0 - np.exp(-rate * t))


def test_cascade_matches_closed_form_pointwise():
    cfg = IntegratorConfig()
    traj = integrate(CASCADE, NO_DEPHASING_1, cfg)
    assert traj.terminal_flag == "converged"
    assert np.max(np.abs(traj.p_sink - cascade_p_sink(traj.times))) < 1e-7


def test_cascade_efficiency_branching_ratio():
    cfg = IntegratorConfig()
    traj = integrate(CASCADE, NO_DEPHASING_1, cfg)
    eta, unc = efficiency(traj, cfg)
    assert abs(eta - 6.0 / 7.0) <= 1e-6
    assert unc <= 5e-7


def test_rabi_flopping_without_rates():
    model = ChainModel(omega=(1.0, 1.0), lam=(0.5,), kappa=(0.0, 0.0), kappa_sink=0.0)
    cfg = IntegratorConfig(t_max=3 * math.pi / 0.5)
    traj = integrate(model, (DephasingSchedule(0.0),) * 2, cfg)
    assert traj.terminal_flag == "t_max"
    assert np.max(np.abs(traj.populations[:, 0] - np.cos(0.5 * traj.times) ** 2)) < 1e-6
    assert np.max(np.abs(traj.populations[:, 1] - np.sin(0.5 * traj.times) ** 2)) < 1e-6
    assert np.max(np.abs(traj.trace - 1.0)) < 1e-9


def test_zero_sink_rate_gives_zero_efficiency():
    model = ChainModel(omega=(1.0,), lam=(), kappa=(0.3,), kappa_sink=0.0)
    cfg = IntegratorConfig()
    traj = integrate(model, NO_DEPHASING_1, cfg)
    eta, unc = efficiency(traj, cfg)
    assert eta <= cfg.residual_eps
    assert np.all(traj.p_sink == 0.0)


def test_lossless_chain_transfers_everything_to_sink():
    model = ChainModel(omega=(1.0, 1.0), lam=(0.3,), kappa=(0.0, 0.0), kappa_sink=0.6)
    cfg = IntegratorConfig()
    traj = integrate(model, (DephasingSchedule(0.0),) * 2, cfg)
    eta, _ = efficiency(traj, cfg)
    assert abs(eta - 1.0) <= cfg.residual_eps


def test_not_converged_at_t_max():
    cfg = IntegratorConfig(t_max=1.0)
    traj = integrate(CASCADE, NO_DEPHASING_1, cfg)
    assert traj.terminal_flag == "t_max"
    with pytest.raises(NotConverged):
        efficiency(traj, cfg)


def test_monotonicity_invariants_on_benchmark_cell():
    cfg = IntegratorConfig(t_max=500.0)
    traj = integrate(FIG2_MODEL, FIG2_SCHEDS, cfg)
    assert np.min(np.diff(traj.p_sink)) > -1e-9
    assert np.max(np.diff(traj.trace)) < 1e-9
    assert traj.terminal_flag == "converged"


def test_halving_rel_tol_changes_eta_less_than_uncertainty():
    cfg = IntegratorConfig(t_max=500.0)
    eta1, unc1 = efficiency(integrate(FIG2_MODEL, FIG2_SCHEDS, cfg), cfg)
    cfg2 = IntegratorConfig(rel_tol=cfg.rel_tol / 2, t_max=500.0)
    eta2, _ = efficiency(integrate(FIG2_MODEL, FIG2_SCHEDS, cfg2), cfg2)
    assert abs(eta1 - eta2) < unc1


def test_halving_max_step_leaves_eta_invariant():
    # guards against aliasing the period-1/J oscillation of the rates
    base = dict(rel_tol=1e-10, abs_tol=1e-12, t_max=500.0)
    cfg1 = IntegratorConfig(max_step=1e-3, **base)
    cfg2 = IntegratorConfig(max_step=5e-4, **base)
    eta1, _ = efficiency(integrate(FIG2_MODEL, FIG2_SCHEDS, cfg1), cfg1)
    eta2, _ = efficiency(integrate(FIG2_MODEL, FIG2_SCHEDS, cfg2), cfg2)
    assert abs(eta1 - eta2) < 1e-8


def test_recorded_states_are_exactly_hermitian():
    cfg = IntegratorConfig(t_max=5.0)
    traj = integrate(FIG2_MODEL, FIG2_SCHEDS, cfg, record="states")
    assert len(traj.states) == len(traj.times)
    for state in traj.states[:: max(1, len(traj.states) // 25)]:
        assert np.max(np.abs(state - state.conj().T)) == 0.0


def test_checkpoints_are_hit_exactly():
    checkpoints = [0.737, 2.0, 4.1]
    cfg = IntegratorConfig(t_max=5.0)
    traj = integrate(FIG2_MODEL, FIG2_SCHEDS, cfg, record="states",
                     checkpoints=checkpoints)
    assert list(traj.state_times) == [0.0] + checkpoints
    for c in checkpoints:
        assert c in traj.times


def test_step_size_underflow_on_extreme_stiffness():
    model = ChainModel(omega=(1.0,), lam=(), kappa=(1e15,), kappa_sink=0.0)
    with pytest.raises(StepSizeUnderflow):
        integrate(model, NO_DEPHASING_1, IntegratorConfig(t_max=1.0))


def test_singular_schedule_surfaces_from_integration():
    scheds = (DephasingSchedule(0.1, 10.0, math.pi / 4),) * 2
    with pytest.raises((SingularSchedule, StepSizeUnderflow)) as exc:
        integrate(FIG2_MODEL, scheds, IntegratorConfig(t_max=1.0))
    if isinstance(exc.value, SingularSchedule):
        # poles sit at odd multiples of 1/(2J) = 0.05
        ratio = exc.value.t / 0.05
        assert abs(ratio - round(ratio)) < 1e-6
        assert round(ratio) % 2 == 1


def test_numpy_fallback_matches_kernel(monkeypatch):
    if not stepper.HAVE_NUMBA:
        pytest.skip("numba unavailable; only one stepper path to test")
    cfg = IntegratorConfig(t_max=2.0)
    fast = integrate(FIG2_MODEL, FIG2_SCHEDS, cfg)
    monkeypatch.setattr(stepper, "HAVE_NUMBA", False)
    slow = integrate(FIG2_MODEL, FIG2_SCHEDS, cfg)
    assert slow.n_steps == fast.n_steps
    assert np.max(np.abs(slow.p_sink - fast.p_sink)) < 1e-9
    assert np.max(np.abs(np.asarray(slow.times) - np.asarray(fast.times))) < 1e-9


def test_hermitize_flag_can_be_disabled():
    cfg = IntegratorConfig(hermitize_every_step=False)
    traj = integrate(CASCADE, NO_DEPHASING_1, cfg)
    assert np.max(np.abs(traj.p_sink - cascade_p_sink(traj.times))) < 1e-7


def test_resolve_max_step_defaults():
    cfg = IntegratorConfig()
    assert resolve_max_step(cfg, (DephasingSchedule(0.1, 10.0, 0.8),)) == 0.001
    assert resolve_max_step(cfg, (DephasingSchedule(0.1),)) == 0.1
    assert resolve_max_step(cfg, (DephasingSchedule(0.1, 10.0, 0.8),
                                  DephasingSchedule(0.1, 20.0, 0.8))) == 0.01 / 20.0
    explicit = IntegratorConfig(max_step=0.05)
    assert resolve_max_step(explicit, (DephasingSchedule(0.1, 10.0, 0.8),)) == 0.05


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(abs_tol=-1e-10)
    with pytest.raises(ValueError):
        IntegratorConfig(max_step=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(t_max=-1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(residual_eps=-1e-6)


def test_invalid_record_mode_and_state_shape():
    with pytest.raises(ValueError):
        integrate(CASCADE, NO_DEPHASING_1, IntegratorConfig(), record="everything")
    with pytest.raises(ValueError):
        integrate(CASCADE, NO_DEPHASING_1, IntegratorConfig(),
                  rho0=np.zeros((3, 3), complex))
