"""Tests for the harness experiments and report emission."""
import numpy as np
import pytest

from loewnerlab.config import build_experiment_config
from loewnerlab.errors import InvalidInputError
from loewnerlab.experiments import (
    ExperimentReport,
    ExperimentRunner,
    run_commutation_experiment,
    run_experiment,
    run_stability_experiment,
    run_warning_example,
    twist_map,
    warning_limit_curve,
)
from loewnerlab.render import format_value, render_svg, write_report


@pytest.fixture(scope="module")
def runner():
    return ExperimentRunner(max_workers=2)


class TestTwistMap:
    def test_identity_inside_ring(self):
        z = np.array([0.0, 0.3 + 0.4j, -0.9, 0.9j])
        assert np.array_equal(twist_map(z, 10, 1.0), z)

    def test_identity_on_circle(self):
        z = np.exp(1j * np.linspace(0, 2 * np.pi, 9))
        assert np.allclose(twist_map(z, 10, 1.0), z)

    def test_full_turn_at_ring_centre(self):
        n, alpha = 10, 1.0
        rho = 1 - 0.5 / n
        assert twist_map(rho, n, alpha) == pytest.approx(rho * np.exp(1j * alpha))

    def test_preserves_modulus(self):
        z = np.linspace(0.9, 1.0, 11).astype(complex)
        assert np.allclose(np.abs(twist_map(z, 10, 2.0)), np.abs(z))


class TestWarningExample:
    def test_no_twist_means_no_gap(self):
        report = run_warning_example([8, 16], 0.0)
        assert all(row["gap"] == pytest.approx(0.0, abs=1e-3) for row in report.rows)

    def test_gap_does_not_decay(self):
        report = run_warning_example([16, 64, 256], 1.0)
        gaps = report.column("gap")
        assert min(gaps) > 0.5
        assert report.summary["last_gap"] >= report.summary["first_gap"] - 1e-3

    def test_discretized_diameter_matches(self):
        report = run_warning_example([16, 64], 1.0)
        assert report.column("disc_gap") == pytest.approx([0.0, 0.0], abs=1e-3)

    def test_converges_to_limit_curve(self):
        report = run_warning_example([16, 64], 1.0)
        limit_gaps = report.column("limit_gap")
        assert limit_gaps[1] < limit_gaps[0]
        assert limit_gaps[1] < 0.05

    def test_rows_sorted_by_resolution(self):
        report = run_warning_example([64, 16], 0.5)
        assert report.column("n") == [16, 64]

    def test_limit_curve_ends(self):
        z = warning_limit_curve(1.0)
        assert z[0] == pytest.approx(-1)
        assert z[-1] == pytest.approx(1)
        assert np.allclose(np.abs(np.delete(z, z.size // 2)), 1.0)

    @pytest.mark.parametrize("alpha", [-0.1, np.pi, 4.0])
    def test_alpha_range(self, alpha):
        with pytest.raises(InvalidInputError):
            run_warning_example([8], alpha)

    def test_resolutions_positive(self):
        with pytest.raises(InvalidInputError):
            run_warning_example([0], 1.0)

    def test_writes_report(self, tmp_path):
        run_warning_example([8, 16], 1.0, out=tmp_path)
        assert (tmp_path / "warning.csv").exists()
        assert (tmp_path / "warning.svg").exists()
        assert (tmp_path / "manifest.txt").exists()


class TestStability:
    def test_rows_and_summary(self, runner):
        report = run_stability_experiment(2.0, [2.5, 2.1], samples=2, seed=1, T=0.1, dt=1e-3, curve_points=64, runner=runner)
        assert len(report.rows) == 4
        assert [r["kappa_m"] for r in report.rows[:2]] == [2.5, 2.1]
        assert 0.0 <= report.summary["monotone_fraction"] <= 1.0
        assert all(r["distance"] >= 0 for r in report.rows)

    def test_same_kappa_has_zero_distance(self, runner):
        report = run_stability_experiment(2.0, [2.0], samples=2, seed=4, T=0.1, dt=1e-3, curve_points=64, runner=runner)
        assert all(r["distance"] == pytest.approx(0.0, abs=1e-3) for r in report.rows)

    def test_deterministic(self, runner):
        a = run_stability_experiment(3.0, [3.3], samples=2, seed=7, T=0.1, dt=1e-3, curve_points=64, runner=runner)
        b = run_stability_experiment(3.0, [3.3], samples=2, seed=7, T=0.1, dt=1e-3, curve_points=64, runner=runner)
        assert a.rows == b.rows
        assert a.provenance["config_hash"] == b.provenance["config_hash"]

    def test_kappa_range(self, runner):
        with pytest.raises(InvalidInputError):
            run_stability_experiment(8.0, [3.0], samples=1, seed=0, runner=runner)

    def test_zero_samples(self, runner):
        with pytest.raises(InvalidInputError):
            run_stability_experiment(3.0, [3.1], samples=0, seed=0, runner=runner)


class TestCommutation:
    def test_sle_rows(self, runner):
        cfg = build_experiment_config(
            {
                "seed": 5,
                "n_values": [8],
                "eps_values": [0.2, 0.1],
                "samples": 2,
                "T": 1.0,
                "dt": 0.01,
                "curve_points": 64,
            }
        )
        report = run_commutation_experiment(cfg, runner)
        assert report.column("eps") == [0.2, 0.1]
        for row in report.rows:
            assert row["samples"] == 2
            assert 0.0 <= row["exceedance"] <= 1.0
            assert row["q50"] <= row["q90"] <= row["max"]
            assert row["driving_metric"] is None
        assert report.provenance["config_hash"] == cfg.config_hash()

    def test_kappa_zero_never_exceeds(self, runner):
        cfg = build_experiment_config(
            {"seed": 2, "kappa": 0.0, "n_values": [8], "eps_values": [0.1], "ell": 0.5, "samples": 2, "T": 1.0, "dt": 0.01, "curve_points": 64}
        )
        report = run_commutation_experiment(cfg, runner)
        assert report.rows[0]["exceedance"] == 0.0
        # κ = 0 is deterministic, every seed gives the same curve
        assert report.rows[0]["q50"] == pytest.approx(report.rows[0]["max"])

    @pytest.mark.slow
    def test_square_sle3_exceedance_falls_with_eps(self, runner):
        cfg = build_experiment_config(
            {"seed": 42, "kappa": 3.0, "n_values": [32], "eps_values": [0.2, 0.1, 0.05, 0.025], "ell": 0.2, "samples": 200}
        )
        report = run_commutation_experiment(cfg, runner)
        exceed = np.array(report.column("exceedance"))
        stderr = np.array(report.column("stderr"))
        slack = 2 * np.hypot(stderr[:-1], stderr[1:])
        assert np.all(np.diff(exceed) <= slack + 1e-12)
        assert exceed[-1] <= 0.05

    def test_run_experiment_writes_outputs(self, tmp_path):
        cfg = build_experiment_config({"experiment": "warning", "seed": 0, "n_values": [8], "alpha": 0.5, "out": str(tmp_path)})
        report = run_experiment(cfg)
        assert report.name == "warning"
        assert (tmp_path / "warning.csv").read_text().splitlines()[0].startswith("n,alpha,seed,samples")


class TestRender:
    @pytest.mark.parametrize(
        "value, text",
        [(None, ""), (True, "1"), (3, "3"), (0.1, "0.1"), (np.float64(0.5), "0.5"), ("lerw", "lerw")],
    )
    def test_format_value(self, value, text):
        assert format_value(value) == text

    def test_svg_has_one_polyline_per_curve(self):
        svg = render_svg({"a": np.array([0, 1 + 1j]), "b": np.array([1j, 1])}, title="two")
        assert svg.count("<polyline") == 2
        assert "<title>two</title>" in svg

    def test_report_files(self, tmp_path):
        report = ExperimentReport(
            name="demo",
            columns=["n", "value"],
            rows=[{"n": 8, "value": 0.25}, {"n": 16, "value": None}],
            provenance={"config_hash": "abc123", "loewnerlab": "0", "numpy": "1", "scipy": "1", "params": {"seed": 1}},
            summary={"best": 0.25},
        )
        written = write_report(report, tmp_path)
        assert set(written) == {"csv", "manifest"}
        assert (tmp_path / "demo.csv").read_text() == "n,value\n8,0.25\n16,\n"
        manifest = (tmp_path / "manifest.txt").read_text()
        assert "config_hash: abc123" in manifest
        assert "seed = 1" in manifest
        assert "demo.csv" in manifest
