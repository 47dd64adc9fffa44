import math

import numpy as np
import pytest
import yaml

from blobflow import ConfigError, parse_config
from blobflow.runner import convergence_sweep, ks2d_criticality, run_scenario


def heat_cfg(tmp_path, **over):
    raw = {
        "name": "tiny_heat",
        "dimension": 1,
        "initial": {"kind": "heat", "tau": 0.0625},
        "grid": {"h": 0.1, "R": 1.5},
        "integrator": {"t_final": 0.02, "record_times": [0.01, 0.02]},
        "output": str(tmp_path / "run"),
    }
    raw.update(over)
    return parse_config(raw)


class TestRunScenario:
    def test_artifacts_and_manifest(self, tmp_path):
        cfg = heat_cfg(tmp_path, diagnostics=["nonlocal_sobolev"])
        res = run_scenario(cfg)
        out = res.out_dir
        for name in ("diagnostics.csv", "errors.csv", "series.csv", "manifest.yaml",
                     "density_000.csv", "density_001.csv", "density_002.csv"):
            assert (out / name).exists(), name
        assert not (out / "density_003.csv").exists()

        header = (out / "errors.csv").read_text().splitlines()[0]
        assert header == "t,w2,l1,linf"
        assert len(res.errors) == 3 and res.errors[0]["t"] == 0.0

        manifest = yaml.safe_load((out / "manifest.yaml").read_text())
        assert parse_config(manifest) == cfg
        assert manifest["derived"]["n_particles"] == res.trajectory.ensembles[0].n
        assert manifest["derived"]["epsilon"] == pytest.approx(0.1**0.99)
        assert manifest["result"]["blow_up"] == {"occurred": False, "time": None}
        assert manifest["result"]["final_time"] == 0.02

    def test_no_reference_means_no_errors_csv(self, tmp_path):
        cfg = heat_cfg(tmp_path, reference="none", metrics=[])
        res = run_scenario(cfg)
        assert res.errors == []
        assert not (res.out_dir / "errors.csv").exists()

    def test_reruns_are_bit_identical(self, tmp_path):
        cfg = heat_cfg(tmp_path, diagnostics=["nonlocal_sobolev", "bv_eps_norm"])
        a = run_scenario(cfg, out_dir=tmp_path / "a").out_dir
        b = run_scenario(cfg, out_dir=tmp_path / "b").out_dir
        names = sorted(p.name for p in a.iterdir())
        assert names == sorted(p.name for p in b.iterdir())
        for name in names:
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_heat_errors_shrink_after_start(self, tmp_path):
        # against the exactly-evolved reference the t=0 discretization error
        # dominates; later snapshots should not be wildly worse
        res = run_scenario(heat_cfg(tmp_path))
        l1 = [row["l1"] for row in res.errors]
        assert max(l1) == l1[0]
        assert l1[-1] < l1[0]
        assert all(v < 0.2 for v in l1)


class TestConvergenceSweep:
    def test_validation(self, tmp_path):
        base = heat_cfg(tmp_path)
        with pytest.raises(ConfigError, match="at least 3"):
            convergence_sweep(base, [0.1, 0.05], out_dir=tmp_path / "s")
        with pytest.raises(ConfigError, match="positive and distinct"):
            convergence_sweep(base, [0.1, 0.1, 0.05], out_dir=tmp_path / "s")
        with pytest.raises(ConfigError, match="needs a reference"):
            convergence_sweep(heat_cfg(tmp_path, reference="none", metrics=[]),
                              [0.1, 0.05, 0.025], out_dir=tmp_path / "s")
        with pytest.raises(ConfigError, match="t_eval"):
            convergence_sweep(base, [0.1, 0.05, 0.025], t_eval=0.0,
                              out_dir=tmp_path / "s")

    def test_slope_fit_through_seam(self, tmp_path):
        # fake per-level results with exact power laws; the fitted slopes
        # must recover the exponents to rounding
        def fake(cfg):
            return {"w2": 0.7 * cfg.h, "l1": 0.3 * cfg.h**2}

        base = heat_cfg(tmp_path)
        rep = convergence_sweep(base, [0.4, 0.2, 0.1, 0.05], run_fn=fake,
                                out_dir=tmp_path / "s")
        assert rep.slopes["w2"] == pytest.approx(1.0, abs=1e-12)
        assert rep.slopes["l1"] == pytest.approx(2.0, abs=1e-12)
        assert "linf" not in rep.slopes
        assert (tmp_path / "s" / "errors.csv").exists()
        text = (tmp_path / "s" / "slopes.csv").read_text().splitlines()
        assert text[0] == "metric,slope"
        assert len(text) == 3

    def test_zero_error_gives_nan_slope(self, tmp_path):
        rep = convergence_sweep(heat_cfg(tmp_path), [0.4, 0.2, 0.1],
                                run_fn=lambda cfg: {"l1": 0.0},
                                out_dir=tmp_path / "s")
        assert math.isnan(rep.slopes["l1"])

    def test_failures_name_the_level(self, tmp_path):
        def boom(cfg):
            raise ValueError("synthetic")

        with pytest.raises(RuntimeError, match="sweep run failed at h=0.2"):
            convergence_sweep(heat_cfg(tmp_path), [0.2, 0.1, 0.05],
                              run_fn=boom, out_dir=tmp_path / "s")

    def test_real_sweep_parallel_workers(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BLOBFLOW_WORKERS", "2")
        base = heat_cfg(tmp_path, metrics=["l1"])
        rep = convergence_sweep(base, [0.3, 0.2, 0.15], t_eval=0.01,
                                out_dir=tmp_path / "s")
        assert all(e > 0 for e in rep.errors["l1"])
        for h in rep.h_list:
            assert (tmp_path / "s" / f"h_{h:g}" / "manifest.yaml").exists()


class TestKS2DCriticality:
    def ks_cfg(self, tmp_path, **over):
        raw = {
            "name": "tiny_ks",
            "dimension": 2,
            "interaction": {"variant": "log2d", "chi": 1.0 / (4.0 * math.pi)},
            "initial": {"kind": "heat", "tau": 0.05},
            "mass": 1.0,
            "grid": {"h": 0.25, "R": 0.75},
            "integrator": {"t_final": 0.01, "record_times": [0.005, 0.01]},
            "metrics": [],
            "output": str(tmp_path / "ks"),
        }
        raw.update(over)
        return parse_config(raw)

    def test_validation(self, tmp_path):
        base = self.ks_cfg(tmp_path)
        with pytest.raises(ConfigError, match="nonempty"):
            ks2d_criticality([], base, out_dir=tmp_path / "o")
        with pytest.raises(ConfigError, match="must be positive"):
            ks2d_criticality([1.0, -2.0], base, out_dir=tmp_path / "o")
        with pytest.raises(ConfigError, match="log2d"):
            ks2d_criticality([1.0], heat_cfg(tmp_path), out_dir=tmp_path / "o")

    def test_tiny_subcritical_fit(self, tmp_path):
        base = self.ks_cfg(tmp_path)
        rows = ks2d_criticality([0.5, 1.0], base, out_dir=tmp_path / "o")
        assert [r["mass"] for r in rows] == [0.5, 1.0]
        for r in rows:
            # subcritical masses spread: growing second moment
            assert r["fitted_slope"] > 0
            assert r["r_squared"] > 0.9
        # reference slope is the sharp identity 2 d M - 2 chi M^2
        assert rows[1]["reference_slope"] == pytest.approx(
            4.0 - 2.0 * (1.0 / (4.0 * math.pi)), rel=1e-12)
        text = (tmp_path / "o" / "criticality.csv").read_text().splitlines()
        assert text[0] == "mass,fitted_slope,reference_slope,r_squared"
        assert len(text) == 3
        assert (tmp_path / "o" / "mass_0.5" / "manifest.yaml").exists()


class TestWorkerCount:
    def test_env_and_override(self, monkeypatch):
        from blobflow.runner import _worker_count

        monkeypatch.delenv("BLOBFLOW_WORKERS", raising=False)
        assert _worker_count() == 1
        monkeypatch.setenv("BLOBFLOW_WORKERS", "3")
        assert _worker_count() == 3
        assert _worker_count(workers=5) == 5
        monkeypatch.setenv("BLOBFLOW_WORKERS", "junk")
        assert _worker_count() == 1
        monkeypatch.setenv("BLOBFLOW_WORKERS", "0")
        assert _worker_count() == 1
