import math

import numpy as np
import pytest

from blocktest.changetests import TestKind
from blocktest.decorrelate import CovForm, RepairMethod
from blocktest.errors import InsufficientNullSample, UnknownKind
from blocktest.fieldgen import DepKind, NoiseDist
from blocktest.montecarlo import (
    REPORT_COLUMNS,
    ExperimentConfig,
    emit_report,
    empirical_critical_value,
    load_config,
    parse_dependence,
    parse_report,
    replication_rng,
    run_experiment,
    run_report,
    simulate_power,
    simulate_size,
    size_corrected_power,
)


def _small(**kw):
    base = dict(n_values=[10], master_seed=7, reps=100, amplitudes=[0.0, 1.0])
    base.update(kw)
    return ExperimentConfig(**base)


def test_parse_dependence_forms():
    assert parse_dependence("iid").kind is DepKind.IID
    d = parse_dependence("sma:1:0.2")
    assert (d.kind, d.q, d.rho) == (DepKind.SMA, 1, 0.2)
    s = parse_dependence("sar:0.3")
    assert (s.kind, s.q, s.rho) == (DepKind.SAR_APPROX, 40, 0.3)
    assert parse_dependence("sar:45:0.1").q == 45
    with pytest.raises(ValueError):
        parse_dependence("sma:0.2")
    with pytest.raises(UnknownKind):
        parse_dependence("arma:1:1")


def test_config_normalizes_and_validates():
    c = _small(tests=["GMD"], noise=["t3"], decorrelate=True, repair="floor")
    assert c.tests == [TestKind.GMD] and c.noise == [NoiseDist.STUDENT_T3]
    assert c.decorrelate is CovForm.FULL and c.repair is RepairMethod.FLOOR
    assert _small(decorrelate="none").decorrelate is None
    with pytest.raises(ValueError):
        _small(master_seed=None)
    with pytest.raises(ValueError):
        _small(alpha=0.0)
    with pytest.raises(ValueError):
        _small(amplitudes=[1.0], size_corrected=True)
    with pytest.raises(ValueError):
        ExperimentConfig.from_mapping({"n_values": [10], "master_seed": 1, "bogus": 2})
    with pytest.raises(ValueError):
        ExperimentConfig.from_mapping({"n_values": [10]})


def test_replication_streams_are_independent_and_stable():
    dep = parse_dependence("iid")
    a = replication_rng(1, 10, NoiseDist.STD_NORMAL, dep, 0).standard_normal(4)
    b = replication_rng(1, 10, NoiseDist.STD_NORMAL, dep, 0).standard_normal(4)
    c = replication_rng(1, 10, NoiseDist.STD_NORMAL, dep, 1).standard_normal(4)
    d = replication_rng(1, 20, NoiseDist.STD_NORMAL, dep, 0).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)


def test_results_do_not_depend_on_worker_count():
    one = run_experiment(_small(dep=["sma:1:0.1"], decorrelate="separable"))
    many = run_experiment(_small(dep=["sma:1:0.1"], decorrelate="separable", workers=4))
    for key, v in one.cells[0].statistic.items():
        np.testing.assert_array_equal(v, many.cells[0].statistic[key])


def test_null_statistics_are_shared_across_surfaces():
    res = run_experiment(_small(surfaces=["a2", "a4"]))
    st = res.cells[0].statistic
    for t in (TestKind.GMD, TestKind.VAR):
        np.testing.assert_array_equal(st[(t, "a2", 0.0)], st[(t, "a4", 0.0)])


def test_size_and_power_reports():
    c = _small(amplitudes=[0.0, 3.0])
    res = run_experiment(c)
    size = simulate_size(c, res)
    assert len(size.rows) == 2 and all(r.surface == "constant" for r in size.rows)
    power = simulate_power(c, res)
    for t in ("gmd", "var"):
        assert power.rate(test=t, amplitude=3.0) > power.rate(test=t, amplitude=0.0)
        row = power.find(test=t, amplitude=0.0)[0]
        assert row.se == pytest.approx(math.sqrt(row.rate * (1 - row.rate) / 100))
    with pytest.raises(ValueError):
        simulate_size(_small(reps=50))


def test_size_correction_holds_level_on_matched_null():
    c = _small(amplitudes=[0.0, 1.0], size_corrected=True)
    rep = size_corrected_power(c)
    for t in ("gmd", "var"):
        row = rep.find(test=t, amplitude=0.0)[0]
        assert row.rate <= c.alpha
        assert not math.isnan(row.crit_value)
    with pytest.raises(InsufficientNullSample):
        empirical_critical_value(np.zeros(99), 0.05)
    assert empirical_critical_value(np.arange(1000.0), 0.05) == pytest.approx(np.quantile(np.arange(1000.0), 0.95))


def test_csv_round_trip():
    c = _small(size_corrected=True)
    rep = run_report(c)
    text = emit_report(rep)
    assert text.splitlines()[0] == ",".join(REPORT_COLUMNS)
    back = parse_report(text)
    assert len(back.rows) == len(rep.rows)
    for a, b in zip(rep.rows, back.rows):
        assert a.csv_values() == b.csv_values()
    # raw rows have no critical value and leave the field empty
    raw = [line for line in text.splitlines()[1:] if line.endswith(",")]
    assert len(raw) == len(rep.rows) // 2
    assert "rate" in emit_report(rep, "text").splitlines()[0]
    with pytest.raises(ValueError):
        emit_report(rep, "json")


def test_load_config_and_overrides(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(
        'n_values = [10]\nmaster_seed = 3\nreps = 100\ndep = ["sma:1:0.1"]\n'
        'amplitudes = [0.0, 2.0]\ndecorrelate = "full"\n'
    )
    c = load_config(path)
    assert c.master_seed == 3 and c.decorrelate is CovForm.FULL and c.dep[0].rho == 0.1
    assert load_config(path, master_seed=11, workers=None).master_seed == 11
    a = emit_report(run_report(c))
    b = emit_report(run_report(load_config(path)))
    assert a == b
