import csv
import math
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from fluidbeam import harness
from fluidbeam.config import ConfigError, ScenarioConfig, SchemeId, watt_to_dbm
from fluidbeam.harness import (RECORD_COLUMNS, SUMMARY_COLUMNS, SweepSpec, TrialRecord, aggregate,
                               paired_db_gap, read_summary, run_sweep, trial_seed, write_plot_data,
                               write_records, write_summary)

TINY = ScenarioConfig(N=3, K=2, L=2, trials=2, seed=5, schemes=(SchemeId.FA, SchemeId.FPA))


def record(power, scheme="FA", value=10.0, trial=0, converged=True, digest="x"):
    return TrialRecord(scheme, "sinr_db", value, trial, 1, digest, watt_to_dbm(power), power,
                       converged, 1, 1)


class TestSweepSpec:
    def test_validation(self):
        with pytest.raises(ConfigError):
            SweepSpec("bogus", [1.0])
        with pytest.raises(ConfigError):
            SweepSpec("sinr_db", [])
        with pytest.raises(ConfigError):
            SweepSpec("sinr_db", [4.0, 4.0])
        with pytest.raises(ConfigError):
            SweepSpec("num_users", [2.5]).apply(TINY, 2.5)

    def test_apply(self):
        assert SweepSpec("num_users", [3]).apply(TINY, 3.0).K == 3
        assert SweepSpec("region_size", [1]).apply(TINY, 1.0).region_size == 1.0
        assert SweepSpec("sinr_db", [4]).apply(TINY, 4.0).sinr_target_db == 4.0


class TestRunSweep:
    def test_cardinality(self):
        cfg = replace(TINY, trials=1, schemes=(SchemeId.FPA,))
        recs = run_sweep(cfg, SweepSpec("sinr_db", [10.0]), workers=1)
        assert len(recs) == 1
        assert recs[0].scheme == "FPA" and recs[0].trial == 0

    def test_paired_digests_and_order(self):
        recs = run_sweep(TINY, SweepSpec("sinr_db", [6.0, 10.0]), workers=1)
        assert len(recs) == 2 * 2 * 2
        assert [(r.scheme, r.axis_value, r.trial) for r in recs] == sorted(
            [(r.scheme, r.axis_value, r.trial) for r in recs], key=lambda k: (k[0] != "FA", k[1], k[2]))
        by = {}
        for r in recs:
            by.setdefault((r.axis_value, r.trial), set()).add(r.scenario_digest)
        assert all(len(d) == 1 for d in by.values())
        # the draw is shared across axis values too
        assert len({r.scenario_digest for r in recs if r.trial == 0}) == 1
        assert trial_seed(5, 0) != trial_seed(5, 1)

    def test_parallel_matches_serial(self, tmp_path):
        sweep_values = SweepSpec("sinr_db", [6.0, 10.0])
        a = run_sweep(TINY, sweep_values, workers=1)
        b = run_sweep(TINY, sweep_values, workers=2)
        write_records(a, tmp_path / "a.csv")
        write_records(b, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_byte_identical_and_golden(self, tmp_path, request):
        sweep_values = SweepSpec("sinr_db", [6.0, 10.0])
        write_records(run_sweep(TINY, sweep_values, workers=1), tmp_path / "r1.csv")
        write_records(run_sweep(TINY, sweep_values, workers=1), tmp_path / "r2.csv")
        got = (tmp_path / "r1.csv").read_bytes()
        assert got == (tmp_path / "r2.csv").read_bytes()
        golden = request.path.parent / "golden" / "records_tiny.csv"
        assert got == golden.read_bytes()

    def test_worker_env(self, monkeypatch):
        monkeypatch.setenv("FLUIDBEAM_THREADS", "3")
        assert harness.worker_count() == 3
        monkeypatch.setenv("FLUIDBEAM_THREADS", "many")
        with pytest.raises(ConfigError):
            harness.worker_count()


class TestAggregate:
    def test_single_record(self):
        (row,) = aggregate([record(0.02)])
        assert row.n == 1 and row.mean_power_w == 0.02
        assert_allclose(row.mean_power_dbm, watt_to_dbm(0.02))
        assert math.isnan(row.ci95_half_width_w)

    def test_equal_records_zero_width(self):
        (row,) = aggregate([record(0.5, trial=0), record(0.5, trial=1)])
        assert row.ci95_half_width_w == 0.0
        assert_allclose([row.ci95_low_dbm, row.ci95_high_dbm], watt_to_dbm(0.5))

    def test_hand_computed(self):
        p = [0.01, 0.02, 0.04, 0.03]
        recs = [record(x, trial=i, converged=i != 3) for i, x in enumerate(p)]
        (row,) = aggregate(recs)
        mean = 0.025
        sd = math.sqrt(sum((x - mean) ** 2 for x in p) / 3)
        half = 3.182446305284263 * sd / 2.0   # t_{0.975, 3}
        assert_allclose(row.mean_power_w, mean)
        assert_allclose(row.mean_power_dbm, 10 * math.log10(mean) + 30)
        assert_allclose(row.ci95_half_width_w, half, rtol=1e-12)
        assert_allclose(row.ci95_low_dbm, 10 * math.log10(mean - half) + 30)
        assert row.converged_rate == 0.75

    def test_linear_not_db_average(self):
        (row,) = aggregate([record(1.0, trial=0), record(0.01, trial=1)])
        assert_allclose(row.mean_power_dbm, watt_to_dbm(0.505))

    def test_groups(self):
        recs = [record(0.1, "FA", 4.0), record(0.2, "FPA", 4.0), record(0.3, "FA", 6.0)]
        rows = aggregate(recs)
        assert [(r.scheme, r.axis_value) for r in rows] == [("FA", 4.0), ("FA", 6.0), ("FPA", 4.0)]

    def test_empty(self):
        with pytest.raises(ValueError):
            aggregate([])

    def test_paired_gap(self):
        recs = [record(0.1, "FA", trial=0), record(0.2, "FPA", trial=0),
                record(0.1, "FA", trial=1), record(1.0, "FPA", trial=1)]
        assert_allclose(paired_db_gap(recs, "FA", "FPA", 10.0), [-3.0103, -10.0], atol=1e-4)
        recs[1] = record(0.2, "FPA", trial=0, digest="y")
        with pytest.raises(ValueError):
            paired_db_gap(recs, "FA", "FPA", 10.0)


class TestCsv:
    def test_schema_and_round_trip(self, tmp_path):
        recs = [record(0.1, "FA", 4.0), record(0.2, "FPA", 4.0, trial=1)]
        write_records(recs, tmp_path / "r.csv")
        with open(tmp_path / "r.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == RECORD_COLUMNS
        assert rows[1][RECORD_COLUMNS.index("converged")] == "1"
        summary = aggregate(recs)
        write_summary(summary, tmp_path / "s.csv")
        with open(tmp_path / "s.csv", newline="") as fh:
            assert tuple(next(csv.reader(fh))) == SUMMARY_COLUMNS
        back = read_summary(tmp_path / "s.csv")
        assert [r.scheme for r in back] == ["FA", "FPA"]
        assert_allclose([r.mean_power_w for r in back], [0.1, 0.2])

    def test_plot_data(self, tmp_path):
        rows = aggregate([record(0.1, "FA", 4.0), record(0.2, "FPA", 4.0), record(0.3, "FA", 6.0)])
        write_plot_data(rows, tmp_path / "fig2.dat", "sinr_db")
        lines = (tmp_path / "fig2.dat").read_text().splitlines()
        assert lines[0] == "# sinr_db FA_dbm FPA_dbm"
        assert lines[1].split()[0] == "4"
        assert lines[2].split()[2] == "nan"
