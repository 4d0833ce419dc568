import numpy as np
import pytest

from knr import harness, systems
from knr.controller import RunResult


def make_trace(errors, k=1, dt=0.01):
    """Build a trace whose output differs from the zero reference by the
    given per-sample error vectors."""
    errors = np.atleast_2d(np.asarray(errors, dtype=float).reshape(len(errors), k))
    n = errors.shape[0]
    t = dt * np.arange(1, n + 1)
    return RunResult(t=t, x=errors.copy(), y=errors.copy(),
                     r=np.zeros_like(errors), u=np.zeros((n, 1)),
                     track_time=0.0, effective_T=0.15, n_fallback_steps=0)


ZERO_REF = systems.ReferenceSignal(fn=lambda t: np.zeros(1), t_max=100.0)


class TestMse:
    def test_perfect_tracking(self):
        assert harness.mse(make_trace(np.zeros(50)), ZERO_REF) == 0.0

    def test_constant_offset(self):
        assert harness.mse(make_trace(np.full(40, 0.1)), ZERO_REF) == pytest.approx(0.01)

    def test_two_sample_arithmetic(self):
        assert harness.mse(make_trace([0.3, 0.4]), ZERO_REF) == pytest.approx(0.125)

    def test_empty_trace_rejected(self):
        with pytest.raises(ValueError):
            harness.mse(make_trace(np.zeros(0)), ZERO_REF)


class TestRunExperiment:
    def test_report_mse_matches_recomputation(self):
        cfg = harness.default_config("vdp").with_overrides(t_f=2.0)
        report = harness.run_experiment(cfg, "nr", seed=0)
        ref = systems.get_reference("vdp")
        assert report.mse == pytest.approx(harness.mse(report.trace, ref), abs=1e-12)

    def test_trace_length_is_sample_count(self):
        cfg = harness.default_config("vdp").with_overrides(t_f=2.0)
        report = harness.run_experiment(cfg, "nr", seed=0)
        assert report.trace.t.size == 200

    def test_knr_records_identification_time(self):
        cfg = harness.default_config("vdp").with_overrides(t_f=1.0)
        report = harness.run_experiment(cfg, "knr", seed=1)
        assert report.id_time > 0.0
        assert report.controller == "knr"

    def test_unknown_controller_rejected(self):
        with pytest.raises(ValueError):
            harness.run_experiment(harness.default_config("vdp"), "pid", seed=0)


class TestCampaign:
    def test_summary_means_are_arithmetic_means(self):
        summary = harness.run_campaign(
            "vdp", runs=3, base_seed=11,
            config=harness.default_config("vdp").with_overrides(t_f=2.0))
        mean = sum(r.mse for r in summary.knr_reports) / 3
        assert summary.mean_mse["knr"] == pytest.approx(mean, abs=1e-15)
        assert len(summary.nr_reports) == 3
        assert [r.seed for r in summary.knr_reports] == [11, 12, 13]

    def test_nr_runs_are_identical_across_seeds(self):
        summary = harness.run_campaign(
            "vdp", runs=2, base_seed=0,
            config=harness.default_config("vdp").with_overrides(t_f=1.0))
        a, b = summary.nr_reports
        assert a.mse == b.mse
        assert np.array_equal(a.trace.u, b.trace.u)

    def test_worker_pool_matches_serial(self):
        cfg = harness.default_config("vdp").with_overrides(t_f=1.0)
        serial = harness.run_campaign("vdp", runs=2, base_seed=4, config=cfg, workers=1)
        pooled = harness.run_campaign("vdp", runs=2, base_seed=4, config=cfg, workers=2)
        assert serial.mean_mse["knr"] == pooled.mean_mse["knr"]
        for a, b in zip(serial.knr_reports, pooled.knr_reports):
            assert np.array_equal(a.trace.y, b.trace.y)

    def test_campaign_rejects_bad_runs(self):
        with pytest.raises(ValueError):
            harness.run_campaign("vdp", runs=0, base_seed=0)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_campaign_aborts_when_too_many_runs_fail(self):
        # a destabilizing gain makes every run diverge, tripping the 20%
        # failure policy
        cfg = harness.default_config("vdp").with_overrides(alpha=1e9, t_f=2.0)
        from knr.errors import NumericalFailure
        with pytest.raises(NumericalFailure) as info:
            harness.run_campaign("vdp", runs=1, base_seed=0, config=cfg)
        assert "failed" in str(info.value)


class TestCsvOutputs:
    def _report(self, tmp_path):
        cfg = harness.default_config("vdp").with_overrides(t_f=1.0)
        return harness.run_experiment(cfg, "nr", seed=0)

    def test_trajectory_header_and_row_count(self, tmp_path):
        report = self._report(tmp_path)
        path = tmp_path / "traj.csv"
        harness.write_trajectory_csv(report, path)
        lines = path.read_text().split("\n")
        assert lines[0] == "t,x1,x2,y1,r1,u1"
        assert len([l for l in lines if l]) == 100 + 1
        assert path.read_bytes().count(b"\r") == 0

    def test_trajectory_roundtrip_precision(self, tmp_path):
        report = self._report(tmp_path)
        path = tmp_path / "traj.csv"
        harness.write_trajectory_csv(report, path)
        data = np.genfromtxt(path, delimiter=",", names=True)
        assert np.array_equal(data["y1"], report.trace.y[:, 0])

    def test_trajectory_bytes_deterministic(self, tmp_path):
        cfg = harness.default_config("vdp").with_overrides(t_f=1.0)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        harness.write_trajectory_csv(harness.run_experiment(cfg, "knr", seed=3), p1)
        harness.write_trajectory_csv(harness.run_experiment(cfg, "knr", seed=3), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_report_csv_layout_and_determinism(self, tmp_path):
        cfg = harness.default_config("vdp").with_overrides(t_f=1.0)
        summary = harness.run_campaign("vdp", runs=2, base_seed=7, config=cfg)
        path = tmp_path / "report.csv"
        harness.write_report_csv(summary, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "system,controller,runs,mean_mse,mean_id_time_s,mean_track_time_s,seed"
        assert len(lines) == 3
        nr_row = lines[1].split(",")
        assert nr_row[0] == "vdp" and nr_row[1] == "nr" and nr_row[2] == "2"
        assert nr_row[4] == "0" and nr_row[5] == "0"  # timing suppressed by default
        assert nr_row[6] == "7"
        summary2 = harness.run_campaign("vdp", runs=2, base_seed=7, config=cfg)
        path2 = tmp_path / "report2.csv"
        harness.write_report_csv(summary2, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_report_csv_optional_timing(self, tmp_path):
        cfg = harness.default_config("vdp").with_overrides(t_f=1.0)
        summary = harness.run_campaign("vdp", runs=1, base_seed=0, config=cfg)
        path = tmp_path / "timed.csv"
        harness.write_report_csv(summary, path, include_timing=True)
        knr_row = path.read_text().splitlines()[2].split(",")
        assert float(knr_row[4]) > 0.0


def test_comparison_table_mentions_both_controllers():
    cfg = harness.default_config("vdp").with_overrides(t_f=1.0)
    summary = harness.run_campaign("vdp", runs=1, base_seed=0, config=cfg)
    table = harness.format_comparison_table(summary)
    assert "NR" in table and "KNR" in table and "MSE" in table


def test_default_config_rejects_unknown_system():
    with pytest.raises(ValueError):
        harness.default_config("pendulum")
