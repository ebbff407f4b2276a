"""Sweep configuration, cell realization, execution, CSV output, claims."""

import math
from dataclasses import replace

import numpy as np
import pytest

from qchain import (
    ChainModel,
    ConfigError,
    DephasingSchedule,
    ExperimentConfig,
    IntegratorConfig,
    Scenario,
    markovian,
    no_dephasing,
    non_markovian,
    preset_fig2,
    preset_fig3,
    preset_fig4,
    run_sweep,
)
from qchain.sweep import (
    SUMMARY_HEADER,
    Claim,
    SweepResult,
    SweepRow,
    evaluate_fig2_claims,
    evaluate_fig3_claims,
    evaluate_fig4_claims,
    realize,
    trajectory_filename,
    write_summary_csv,
    write_trajectories,
)

BASE = ChainModel(omega=(1.0, 1.0), lam=(0.3,), kappa=(0.1, 0.1), kappa_sink=0.6)


def small_config(**overrides):
    fields = dict(
        name="unit",
        model=BASE,
        gamma0=(0.1, 0.1),
        dephased_sites=(1, 2),
        scenarios=(markovian(), non_markovian(10.0, 0.8)),
        sweep_param="lambda_uniform",
        sweep_values=(0.3, 0.5),
        integrator=IntegratorConfig(t_max=200.0),
    )
    fields.update(overrides)
    return ExperimentConfig(**fields)


def test_config_rejects_bad_input():
    with pytest.raises(ConfigError):
        small_config(sweep_values=())
    with pytest.raises(ConfigError):
        small_config(sweep_values=(0.1, float("nan")))
    with pytest.raises(ConfigError):
        small_config(sweep_param="couplings")
    with pytest.raises(ConfigError):
        small_config(gamma0=(0.1,))
    with pytest.raises(ConfigError):
        small_config(gamma0=(-0.1, 0.1))
    with pytest.raises(ConfigError):
        small_config(scenarios=(markovian(), markovian()))
    with pytest.raises(ConfigError):
        small_config(scenarios=())
    with pytest.raises(ConfigError):
        small_config(dephased_sites=(0,))
    with pytest.raises(ConfigError):
        small_config(sweep_param="gamma_site")          # missing sweep_site
    with pytest.raises(ConfigError):
        small_config(sweep_param="gamma_site", sweep_site=2, sweep_values=(-0.1,))
    with pytest.raises(ConfigError):
        small_config(sweep_param="n_sites", sweep_values=(2.5,))
    with pytest.raises(ConfigError):
        small_config(sweep_param="J", sweep_values=(1.0, 2.0))  # markovian scenario
    with pytest.raises(ConfigError):
        # non-uniform base chain cannot be replicated over n_sites
        small_config(model=ChainModel(omega=(1.0, 2.0), lam=(0.3,),
                                      kappa=(0.1, 0.1), kappa_sink=0.6),
                     sweep_param="n_sites", sweep_values=(2.0, 3.0))


def test_config_round_trips_through_serialization():
    for config in (preset_fig2(), preset_fig3(), preset_fig4(), small_config()):
        assert ExperimentConfig.from_dict(config.to_dict()) == config


def test_realize_lambda_uniform():
    model, scheds = realize(small_config(), markovian(), 0.5)
    assert model.lam == (0.5,)
    assert all(s.J == 0.0 for s in scheds)
    assert [s.gamma0 for s in scheds] == [0.1, 0.1]


def test_realize_n_sites():
    config = small_config(sweep_param="n_sites", sweep_values=(2.0, 5.0),
                          gamma0=(0.1, 0.1))
    model, scheds = realize(config, non_markovian(10.0, 0.8), 5.0)
    assert model.n_sites == 5
    assert model.omega == (1.0,) * 5
    assert model.lam == (0.3,) * 4
    assert model.kappa == (0.1,) * 5
    assert len(scheds) == 5
    assert all(s == DephasingSchedule(0.1, 10.0, 0.8) for s in scheds)


def test_realize_gamma_site_only_touches_target_site():
    config = small_config(sweep_param="gamma_site", sweep_site=2,
                          gamma0=(0.0, 0.0), dephased_sites=(2,))
    model, scheds = realize(config, non_markovian(10.0, 0.8, include_shift=False), 0.7)
    assert scheds[0] == DephasingSchedule(0.0)
    assert scheds[1] == DephasingSchedule(0.7, 10.0, 0.8, include_shift=False)
    assert model == BASE


def test_realize_j_theta_and_kappa_sink():
    config = small_config(scenarios=(non_markovian(10.0, 0.8),),
                          sweep_param="J", sweep_values=(5.0,))
    _, scheds = realize(config, config.scenarios[0], 5.0)
    assert all(s.J == 5.0 for s in scheds)

    config = small_config(scenarios=(non_markovian(10.0, 0.8),),
                          sweep_param="theta", sweep_values=(1.1,))
    _, scheds = realize(config, config.scenarios[0], 1.1)
    assert all(s.theta == 1.1 for s in scheds)

    config = small_config(sweep_param="kappa_sink", sweep_values=(0.25,))
    model, _ = realize(config, markovian(), 0.25)
    assert model.kappa_sink == 0.25


def test_realize_no_dephasing_kills_all_schedules():
    _, scheds = realize(small_config(scenarios=(no_dephasing(),)), no_dephasing(), 0.3)
    assert all(s == DephasingSchedule(0.0) for s in scheds)


def test_run_sweep_row_order_and_determinism():
    config = small_config()
    r1 = run_sweep(config, workers=1)
    r2 = run_sweep(config, workers=2)
    assert [(r.sweep_value, r.scenario) for r in r1.rows] == [
        (0.3, "markovian"), (0.3, "non_markovian"),
        (0.5, "markovian"), (0.5, "non_markovian")]
    assert r1.rows == r2.rows


def test_run_sweep_csv_bytes_identical_across_worker_counts(tmp_path):
    config = small_config()
    paths = []
    for w in (1, 3):
        result = run_sweep(config, workers=w)
        path = tmp_path / f"summary_w{w}.csv"
        write_summary_csv(result, path)
        paths.append(path.read_bytes())
    assert paths[0] == paths[1]


def test_run_sweep_records_not_converged_rows():
    config = small_config(integrator=IntegratorConfig(t_max=0.5))
    result = run_sweep(config)
    assert all(row.status.startswith("not_converged") for row in result.rows)
    assert all(row.eta is None for row in result.rows)
    with pytest.raises(Exception):
        result.eta("markovian", 0.3)


def test_run_sweep_records_singular_schedule_rows():
    config = small_config(scenarios=(non_markovian(10.0, math.pi / 4, name="pole"),),
                          sweep_values=(0.3,))
    result = run_sweep(config)
    assert result.rows[0].status in ("singular_schedule", "step_underflow")
    assert result.rows[0].eta is None


def test_summary_csv_format(tmp_path):
    result = run_sweep(small_config())
    path = tmp_path / "summary.csv"
    write_summary_csv(result, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == ",".join(SUMMARY_HEADER)
    assert len(lines) == 1 + 4
    first = lines[1].split(",")
    assert first[0] == "lambda_uniform"
    assert float(first[1]) == 0.3
    assert 0.0 <= float(first[3]) <= 1.0
    assert float(first[4]) <= 1e-6


def test_trajectory_files(tmp_path):
    config = small_config(sweep_values=(0.3,), record_to=5.0)
    result = run_sweep(config, keep_trajectories=True)
    names = write_trajectories(result, tmp_path)
    assert names == [trajectory_filename("unit", "markovian", 0.3),
                     trajectory_filename("unit", "non_markovian", 0.3)]
    lines = (tmp_path / names[0]).read_text().strip().splitlines()
    assert lines[0] == "t,p_sink,p_site_1,p_site_2,trace"
    last_t = float(lines[-1].split(",")[0])
    assert last_t <= 5.0
    parts = lines[-1].split(",")
    assert len(parts) == 5


def test_eta_accessors():
    result = run_sweep(small_config())
    etas = result.etas("markovian")
    assert etas.shape == (2,)
    assert np.all((etas >= 0.0) & (etas <= 1.0))
    assert result.eta("markovian", 0.3) == etas[0]
    with pytest.raises(KeyError):
        result.eta("markovian", 0.9)


def test_preset_fig2_structure():
    config = preset_fig2()
    assert config.sweep_values == (0.1, 0.3, 0.5, 0.7)
    assert [s.name for s in config.scenarios] == [
        "markovian", "non_markovian_a", "non_markovian_b"]
    assert config.scenarios[1].theta == 0.8
    assert config.scenarios[2].theta == pytest.approx(math.pi / 3)
    assert config.model.kappa == (0.1, 0.1)
    assert config.gamma0 == (0.1, 0.1)
    assert config.record_to == 50.0
    assert len(config.sweep_values) * len(config.scenarios) == 12


def test_preset_fig3_structure():
    config = preset_fig3(0.2)
    assert config.sweep_param == "n_sites"
    assert config.sweep_values == tuple(float(n) for n in range(2, 9))
    assert config.model.omega == (2.0, 2.0)
    assert config.gamma0 == (0.2, 0.2)
    assert {s.name for s in config.scenarios} == {
        "markovian", "non_markovian", "no_dephasing"}


def test_preset_fig4_structure():
    config = preset_fig4()
    assert config.model.omega == (0.5, 2.0, 0.5)
    assert config.model.lam == (0.2, 0.2)
    assert config.model.kappa == (0.05, 0.05, 0.05)
    assert config.dephased_sites == (2,)
    assert config.sweep_param == "gamma_site" and config.sweep_site == 2
    assert len(config.sweep_values) == 41
    assert config.sweep_values[0] == 0.0 and config.sweep_values[-1] == 1.0
    nm = dict((s.name, s) for s in config.scenarios)["non_markovian"]
    assert nm.include_shift is False
    assert len(config.sweep_values) * len(config.scenarios) == 82


def synthetic_fig4_result(nm_curve, m_curve, values):
    config = preset_fig4(n_points=len(values))
    config = replace(config, sweep_values=tuple(values))
    rows = []
    for v, nm, m in zip(values, nm_curve, m_curve):
        rows.append(SweepRow("gamma_site", v, "markovian", m, 1e-7, 10.0, 5, "ok"))
        rows.append(SweepRow("gamma_site", v, "non_markovian", nm, 1e-7, 10.0, 5, "ok"))
    return SweepResult(config=config, rows=rows)


def test_fig4_claim_logic():
    values = [0.0, 0.25, 0.5, 0.75, 1.0]
    good = synthetic_fig4_result(
        nm_curve=[0.069, 0.095, 0.1017, 0.095, 0.085],
        m_curve=[0.020, 0.035, 0.0392, 0.037, 0.032], values=values)
    assert all(c.passed for c in evaluate_fig4_claims(good))

    edge_peak = synthetic_fig4_result(
        nm_curve=[0.069, 0.08, 0.09, 0.096, 0.1017],
        m_curve=[0.020, 0.030, 0.035, 0.038, 0.0392], values=values)
    claims = evaluate_fig4_claims(edge_peak)
    assert not all(c.passed for c in claims)
    assert any("interior" in c.description and not c.passed for c in claims)

    wrong_gain = synthetic_fig4_result(
        nm_curve=[0.069, 0.16, 0.18, 0.15, 0.12],
        m_curve=[0.020, 0.035, 0.0392, 0.037, 0.032], values=values)
    claims = evaluate_fig4_claims(wrong_gain)
    assert any("non_markovian" in c.description and not c.passed for c in claims)


def test_claim_line_format():
    c = Claim("some check", 0.123456, True)
    assert c.line().startswith("PASS  some check: 0.123456")
    assert Claim("other", -1.0, False).line().startswith("FAIL")


def test_workers_validation():
    with pytest.raises(ConfigError):
        run_sweep(small_config(), workers=0)
