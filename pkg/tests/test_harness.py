import numpy as np
import pytest

from comp_swipt.harness import (ExperimentConfig, MetricsRecord,
                                emit_results, load_config, read_results_csv,
                                record_from_report, run_experiment,
                                stable_csv_bytes, summarize, swept_params)
from comp_swipt.params import SystemParams
from comp_swipt.reweighted import SolverBreakdownError, lower_bounds

R15 = float(np.log2(1.0 + 10.0 ** 1.5))


def small_params(**kw):
    # compact geometry and mild loss so tiny instances solve fast and feasibly
    base = dict(n_rrh=2, n_ir=2, n_er=1, n_t=2, path_loss_ref_db=0.0,
                rrh_spacing_m=20.0, disc_radius_m=30.0, min_harvest_mw=1e-4,
                reweight_iterations=4)
    base.update(kw)
    return SystemParams(**base)


def small_cfg(**kw):
    base = dict(schemes=["full-coop", "colocated"], sweep_parameter="nt",
                sweep_values=[2, 3], trials=3, master_seed=99)
    base.update(kw)
    return ExperimentConfig(**base)


def fake_record(scheme="full-coop", sweep=2, trial=0, feasible=True,
                bh=10.0, tot=20.0, tx=5.0, hv=2.0):
    return MetricsRecord(trial, scheme, sweep, bh, tot, tx, 10 * np.log10(tx),
                         hv, 10 * np.log10(hv), feasible, False, 1.0)


# ----------------------------------------------------------------- config

def test_config_validation_errors():
    with pytest.raises(ValueError, match="non-empty"):
        ExperimentConfig(schemes=[])
    with pytest.raises(ValueError, match="unknown scheme"):
        ExperimentConfig(schemes=["proposed", "magic"])
    with pytest.raises(ValueError, match="sweepable"):
        ExperimentConfig(sweep_parameter="delta")
    with pytest.raises(ValueError, match="positive integers"):
        ExperimentConfig(sweep_values=[2, 0])
    with pytest.raises(ValueError, match="trials"):
        ExperimentConfig(trials=0)


def test_load_config_roundtrip(tmp_path):
    cfg_file = tmp_path / "exp.yaml"
    cfg_file.write_text(
        "ir_count: 2\n"
        "er_count: 1\n"
        "rrh_count: 2\n"
        "antennas_per_rrh: 3\n"
        "sinr_target_db: 12\n"
        "experiment:\n"
        "  schemes: [full-coop]\n"
        "  trials: 2\n"
        "  sweep_values: [2, 4]\n"
        "  master_seed: 7\n")
    params, cfg = load_config(cfg_file)
    assert params.n_ir == 2 and params.n_t == 3
    assert params.sinr_target == pytest.approx(10 ** 1.2)
    assert cfg.schemes == ["full-coop"]
    assert cfg.trials == 2 and cfg.master_seed == 7
    assert cfg.sweep_values == [2, 4]


def test_load_config_unknown_experiment_key(tmp_path):
    cfg_file = tmp_path / "exp.yaml"
    cfg_file.write_text("experiment:\n  cadence: daily\n")
    with pytest.raises(KeyError, match="cadence"):
        load_config(cfg_file)


def test_shipped_default_config():
    import pathlib

    path = pathlib.Path(__file__).resolve().parents[1] / "configs" / "default.yaml"
    params, cfg = load_config(path)
    assert (params.n_rrh, params.n_ir, params.n_er, params.n_t) == (3, 5, 2, 4)
    assert params.frequency_hz == 1.9e9
    assert params.path_loss_exponent == 3.6
    assert params.noise_mw == pytest.approx(10 ** -2.3, rel=1e-12)
    assert np.all(params.sinr_target == pytest.approx(10 ** 1.5, rel=1e-12))
    assert params.cp_circuit_mw == pytest.approx(1e4, rel=1e-12)
    assert params.cp_max_supply_mw == pytest.approx(1e5, rel=1e-12)
    assert np.all(params.rrh_circuit_mw == pytest.approx(1e3, rel=1e-12))
    assert params.amplifier_efficiency == 0.38
    assert np.all(params.rrh_max_tx_mw == pytest.approx(10 ** 4.6, rel=1e-12))
    assert np.all(params.min_harvest_mw == pytest.approx(1.0, rel=1e-12))
    assert params.rf_efficiency == 0.5
    assert params.line_loss_fraction == 0.2
    assert (params.delta, params.eta) == (1.0, 0.0)
    assert params.kappa == 1e-4 and params.reweight_iterations == 20
    assert params.rrh_spacing_m == 500.0 and params.disc_radius_m == 1000.0
    assert params.ref_distance_m == 10.0 and params.min_distance_m == 10.0
    assert params.path_loss_ref_db == -45.0
    assert cfg.sweep_parameter == "nt" and cfg.sweep_values == [2, 3, 4, 5, 6]
    assert cfg.trials == 50 and cfg.master_seed == 1234
    assert cfg.schemes == ["proposed", "full-coop", "colocated"]


def test_swept_params_counts_and_rebroadcast():
    p = small_params()
    q = swept_params(p, "nt", 5)
    assert q.n_t == 5 and q.n_rrh == p.n_rrh
    q = swept_params(p, "ir_count", 4)
    assert q.n_ir == 4 and q.sinr_target.shape == (4,)
    nonuniform = small_params(n_ir=2, sinr_target=np.array([10.0, 20.0]))
    with pytest.raises(ValueError, match="non-uniform"):
        swept_params(nonuniform, "ir_count", 3)


# ------------------------------------------------------------- experiment

def test_record_count_and_order():
    params = small_params()
    cfg = small_cfg()
    records, summaries = run_experiment(params, cfg)
    assert len(records) == 2 * 3 * 2  # sweeps x trials x schemes
    keys = [(r.sweep_value, r.trial_id, r.scheme) for r in records]
    assert keys == sorted(keys, key=lambda k: (k[0], k[1],
                                               cfg.schemes.index(k[2])))
    assert all(r.feasible for r in records)
    assert {(s.scheme, s.sweep_value) for s in summaries} == {
        ("full-coop", 2), ("full-coop", 3),
        ("colocated", 2), ("colocated", 3)}


def test_dbm_columns_match_mw():
    params = small_params()
    records, _ = run_experiment(params, small_cfg(trials=2, sweep_values=[2]))
    for r in records:
        if np.isfinite(r.tx_power_mw):
            assert r.tx_power_dbm == pytest.approx(
                10 * np.log10(r.tx_power_mw), abs=1e-9)
        if r.harvested_power_mw > 0:
            assert r.harvested_power_dbm == pytest.approx(
                10 * np.log10(r.harvested_power_mw), abs=1e-9)


def test_determinism_across_runs(tmp_path):
    params = small_params()
    cfg = small_cfg(trials=2)
    rec_a, sum_a = run_experiment(params, cfg)
    rec_b, sum_b = run_experiment(params, cfg)
    for a, b in zip(rec_a, rec_b):
        for name in ("max_link_backhaul", "total_backhaul", "tx_power_mw",
                     "harvested_power_mw", "feasible", "rank_failure"):
            assert getattr(a, name) == getattr(b, name)
    emit_results(rec_a, sum_a, tmp_path / "a")
    emit_results(rec_b, sum_b, tmp_path / "b")
    assert stable_csv_bytes(tmp_path / "a" / "results.csv") == \
        stable_csv_bytes(tmp_path / "b" / "results.csv")


def test_infeasible_trials_recorded_not_raised():
    # one single-antenna RRH cannot serve two 15 dB users: every trial of
    # every scheme lands infeasible but the sweep still completes
    params = small_params(n_rrh=1, n_ir=2, n_er=0, n_t=1)
    cfg = small_cfg(schemes=["full-coop"], sweep_values=[1], trials=2)
    records, summaries = run_experiment(params, cfg)
    assert len(records) == 2
    assert not any(r.feasible for r in records)
    assert all(np.isnan(r.tx_power_mw) for r in records)
    row = summaries[0]
    assert row.n_records == 2 and row.n_used == 0 and row.n_excluded == 2
    assert np.isnan(row.mean_tx_power_mw)


def test_breakdown_logged_and_recorded(monkeypatch, caplog):
    import comp_swipt.harness as hmod

    def boom(*a, **k):
        raise SolverBreakdownError("synthetic breakdown")

    monkeypatch.setattr(hmod, "full_cooperation", boom)
    params = small_params()
    with caplog.at_level("WARNING", logger="comp_swipt.harness"):
        records, _ = run_experiment(
            params, small_cfg(schemes=["full-coop"], sweep_values=[2],
                              trials=1))
    assert len(records) == 1 and not records[0].feasible
    assert "broke down" in caplog.text


def test_exhaustive_autodisabled_over_cap(caplog):
    params = small_params()  # 9 assignments
    cfg = small_cfg(schemes=["exhaustive", "full-coop"], sweep_values=[2],
                    trials=1, enumeration_cap=5)
    with caplog.at_level("WARNING", logger="comp_swipt.harness"):
        records, _ = run_experiment(params, cfg)
    assert [r.scheme for r in records] == ["full-coop"]
    assert "disabling exhaustive" in caplog.text


# ---------------------------------------------------------------- summary

def test_summary_excludes_infeasible_and_reports_bounds():
    params = SystemParams(n_ir=5, n_rrh=3, n_er=2, n_t=4)
    bounds = {4: lower_bounds(params)}
    records = [fake_record(sweep=4, trial=0, bh=12.0),
               fake_record(sweep=4, trial=1, bh=14.0),
               fake_record(sweep=4, trial=2, feasible=False, bh=999.0)]
    rows = summarize(records, bounds)
    assert len(rows) == 1
    row = rows[0]
    assert row.n_records == 3 and row.n_used == 2 and row.n_excluded == 1
    assert row.mean_max_link_backhaul == pytest.approx(13.0)
    assert row.bound_per_link == pytest.approx(10.0558, abs=1e-3)
    assert row.bound_total == pytest.approx(25.1396, abs=1e-3)


def test_summary_empty_cell_null_means():
    params = SystemParams(n_ir=5, n_rrh=3, n_er=2, n_t=4)
    records = [fake_record(sweep=4, feasible=False)]
    row = summarize(records, {4: lower_bounds(params)})[0]
    assert row.n_used == 0
    assert np.isnan(row.mean_max_link_backhaul)
    assert np.isnan(row.mean_tx_power_dbm)


def test_summary_dbm_from_mean_mw():
    params = SystemParams(n_ir=2, n_rrh=2, n_er=1, n_t=2)
    records = [fake_record(tx=10.0, trial=0), fake_record(tx=1000.0, trial=1)]
    row = summarize(records, {2: lower_bounds(params)})[0]
    # dBm of the mean, not the mean of dBms (which would be 20)
    assert row.mean_tx_power_dbm == pytest.approx(10 * np.log10(505.0))


def test_summary_ci_single_sample_is_nan():
    params = SystemParams(n_ir=2, n_rrh=2, n_er=1, n_t=2)
    row = summarize([fake_record()], {2: lower_bounds(params)})[0]
    assert np.isnan(row.ci_tx_power_mw)
    assert row.mean_tx_power_mw == pytest.approx(5.0)


# --------------------------------------------------------------- emission

def test_emit_files_and_round_trip(tmp_path):
    params = SystemParams(n_ir=2, n_rrh=2, n_er=1, n_t=2)
    records = [fake_record(trial=0), fake_record(trial=1, feasible=False,
                                                 bh=float("nan"))]
    rows = summarize(records, {2: lower_bounds(params)})
    paths = emit_results(records, rows, tmp_path)
    names = {p.name for p in paths}
    assert names == {"results.csv", "results.jsonl", "summary.csv"}
    back = read_results_csv(tmp_path / "results.csv")
    assert len(back) == 2
    for orig, rt in zip(records, back):
        for name in MetricsRecord.__dataclass_fields__:
            a, b = getattr(orig, name), getattr(rt, name)
            if isinstance(a, float) and np.isnan(a):
                assert np.isnan(b)
            else:
                assert a == b


def test_emit_jsonl_nan_becomes_null(tmp_path):
    import json
    records = [fake_record(bh=float("nan"))]
    params = SystemParams(n_ir=2, n_rrh=2, n_er=1, n_t=2)
    emit_results(records, summarize(records, {2: lower_bounds(params)}),
                 tmp_path)
    line = (tmp_path / "results.jsonl").read_text().splitlines()[0]
    doc = json.loads(line)  # strict JSON must parse
    assert doc["max_link_backhaul"] is None
    assert doc["tx_power_mw"] == 5.0


def test_emit_unwritable_path_raises():
    records = [fake_record()]
    with pytest.raises(OSError, match="not writable|denied|file"):
        emit_results(records, [], "/proc/definitely/not/writable")


def test_record_from_report_zero_harvest_dbm():
    class Stub:
        max_link_backhaul = 1.0
        total_backhaul = 1.0
        tx_power_mw = 2.0
        harvested = np.zeros(0)
        feasible = True
        rank_failure = False

    rec = record_from_report(Stub(), 0, "full-coop", 2, 0.5)
    assert rec.harvested_power_mw == 0.0
    assert rec.harvested_power_dbm == -np.inf
