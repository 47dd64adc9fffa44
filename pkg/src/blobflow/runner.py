"""Experiment pipelines: single runs, convergence sweeps, KS criticality.

Every artifact is a CSV (or the YAML manifest) written atomically into
the run directory.  Identical configs produce bit-identical outputs:
summation orders are fixed and nothing wall-clock-dependent is recorded.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import metrics as met
from .config import ConfigError, ScenarioConfig
from .diagnostics import QuadratureGrid, assemble_series
from .ensemble import GridField, GridSpec, sample_on_grid
from .integrator import Trajectory, simulate
from .reference import ks_second_moment_slope

__all__ = ["run_scenario", "convergence_sweep", "ks2d_criticality", "RunResult", "SweepReport"]

WORKERS_ENV = "BLOBFLOW_WORKERS"
_METRIC_ORDER = ("w2", "l1", "linf")


def _worker_count(workers=None) -> int:
    if workers is not None:
        return max(1, int(workers))
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _replace_into(path: Path, write):
    tmp = path.with_name(path.name + ".tmp")
    write(tmp)
    os.replace(tmp, path)


def _write_csv(path: Path, header, rows):
    import csv

    def write(tmp):
        with open(tmp, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow(row)

    _replace_into(path, write)


def _fmt(x) -> str:
    return repr(float(x))


@dataclass
class RunResult:
    config: ScenarioConfig
    trajectory: Trajectory
    errors: list          # one dict per snapshot when a reference exists
    out_dir: Path


def _transport_grid(cfg: ScenarioConfig) -> GridSpec:
    """Grid used to quantize measures for 2-D W2 (capped node count)."""
    spacing = cfg.w2_spacing if cfg.w2_spacing is not None else cfg.h
    max_extent = (cfg.w2_max_nodes - 1) // 2
    grid = GridSpec(spacing=spacing, radius=cfg.R, dimension=cfg.dimension)
    if grid.index_extent > max_extent:
        spacing = cfg.R / max_extent
        grid = GridSpec(spacing=spacing, radius=cfg.R, dimension=cfg.dimension)
    return grid


def _normalized_measure(field: GridField) -> met.DiscreteMeasure:
    mu = met.measure_from_field(field)
    return met.DiscreteMeasure(mu.points, mu.weights / mu.total_mass)


def _snapshot_errors(cfg, mol, grid, reference, t, ens, blob_field):
    row = {"t": t}
    ref_t = reference.evolved(t)
    if "l1" in cfg.metrics or "linf" in cfg.metrics:
        ref_field = GridField(grid=grid, values=np.asarray(ref_t(grid.points()), dtype=float))
        if "l1" in cfg.metrics:
            row["l1"] = met.l1_error(blob_field, ref_field)
        if "linf" in cfg.metrics:
            row["linf"] = met.linf_error(blob_field, ref_field)
    if "w2" in cfg.metrics:
        if cfg.dimension == 1:
            row["w2"] = met.w2_1d(met.measure_from_ensemble(ens), ref_t)
        else:
            tg = _transport_grid(cfg)
            blob_t = sample_on_grid(ens, mol, tg)
            ref_vals = np.asarray(ref_t(tg.points()), dtype=float)
            ref_on_t = GridField(grid=tg, values=ref_vals)
            row["w2"] = met.w2_2d(_normalized_measure(blob_t), _normalized_measure(ref_on_t))
    return row


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> RunResult:
    """Simulate one scenario and write its artifacts.

    Artifacts: diagnostics.csv, density_<i>.csv per snapshot, errors.csv
    when a reference solution exists, series.csv when extra diagnostics
    are requested, and manifest.yaml echoing the resolved config.
    Blow-up truncation is recorded in the manifest, not raised.
    """
    out = Path(out_dir) if out_dir is not None else Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)

    ens0 = cfg.initial_ensemble()
    prob = cfg.problem()
    mol = prob.mollifier
    grid = cfg.grid_spec()
    traj = simulate(ens0, prob, cfg.integrator_config())

    _replace_into(out / "diagnostics.csv", traj.diagnostics_to_csv)

    fields = []
    for i, ens in enumerate(traj.ensembles):
        f = sample_on_grid(ens, mol, grid)
        fields.append(f)
        _replace_into(out / f"density_{i:03d}.csv", f.to_csv)

    reference = cfg.reference_density()
    errors = []
    if reference is not None and cfg.metrics:
        cols = [m for m in _METRIC_ORDER if m in cfg.metrics]
        for t, ens, f in zip(traj.times, traj.ensembles, fields):
            errors.append(_snapshot_errors(cfg, mol, grid, reference, t, ens, f))
        _write_csv(out / "errors.csv", ["t"] + cols,
                   [[_fmt(row["t"])] + [_fmt(row[c]) for c in cols] for row in errors])

    if cfg.diagnostics:
        allpos = np.concatenate([e.positions for e in traj.ensembles])
        pad = 6.0 * mol.epsilon
        qgrid = QuadratureGrid(tuple(allpos.min(axis=0) - pad),
                               tuple(allpos.max(axis=0) + pad), mol.epsilon / 2.0)
        series = assemble_series(traj, prob, qgrid, cfg.diagnostics)
        _replace_into(out / "series.csv", series.to_csv)

    manifest = cfg.resolved_dict()
    manifest["derived"] = {"epsilon": cfg.epsilon, "n_particles": ens0.n}
    manifest["result"] = {
        "final_time": float(traj.times[-1]),
        "blow_up": {"occurred": bool(traj.blew_up),
                    "time": None if traj.blow_up_time is None else float(traj.blow_up_time)},
    }

    def write_manifest(tmp):
        with open(tmp, "w", encoding="utf-8") as fh:
            yaml.safe_dump(manifest, fh, default_flow_style=False, sort_keys=False)

    _replace_into(out / "manifest.yaml", write_manifest)
    return RunResult(config=cfg, trajectory=traj, errors=errors, out_dir=out)


# ---------------------------------------------------------------------------
# convergence sweep


@dataclass
class SweepReport:
    h_list: list
    errors: dict   # metric -> list of errors aligned with h_list
    slopes: dict   # metric -> least-squares slope of log(err) vs log(h)
    out_dir: Path


def _sweep_point(cfg: ScenarioConfig) -> dict:
    res = run_scenario(cfg)
    if not res.errors:
        raise RuntimeError("run produced no error rows (missing reference?)")
    return {k: v for k, v in res.errors[-1].items() if k != "t"}


def _sweep_config(base: ScenarioConfig, h: float, t_eval: float,
                  w2_spacing, out: Path) -> ScenarioConfig:
    return base.with_updates(
        h=h, t_final=t_eval, record_times=(t_eval,),
        w2_spacing=w2_spacing, name=f"{base.name}_h{h:g}",
        output=str(out / f"h_{h:g}"))


def convergence_sweep(base: ScenarioConfig, h_list, t_eval=None, out_dir=None,
                      run_fn=None, workers=None) -> SweepReport:
    """Run the scenario at each grid spacing and fit log-log error slopes."""
    h_list = [float(h) for h in h_list]
    if len(h_list) < 3:
        raise ConfigError(["h_list: need at least 3 grid spacings for a slope fit"])
    if any(h <= 0 for h in h_list) or len(set(h_list)) != len(h_list):
        raise ConfigError(["h_list: spacings must be positive and distinct"])
    if base.reference == "none" or not base.metrics:
        raise ConfigError(["reference: a convergence sweep needs a reference solution"])
    t_eval = float(t_eval) if t_eval is not None else base.t_final
    if not t_eval > 0:
        raise ConfigError(["t_eval: must be positive"])
    out = Path(out_dir) if out_dir is not None else Path(base.output)
    out.mkdir(parents=True, exist_ok=True)

    # All levels quantize W2 on the coarsest level's transport grid so the
    # quantization error is common-mode and cannot break monotonicity.
    w2_spacing = base.w2_spacing
    if base.dimension == 2 and "w2" in base.metrics:
        w2_spacing = _transport_grid(base.with_updates(h=max(h_list))).spacing

    cfgs = [_sweep_config(base, h, t_eval, w2_spacing, out) for h in h_list]
    fn = run_fn if run_fn is not None else _sweep_point
    results = []
    nw = 1 if run_fn is not None else _worker_count(workers)
    if nw > 1:
        with ProcessPoolExecutor(max_workers=nw) as pool:
            futures = [pool.submit(fn, c) for c in cfgs]
            for h, fut in zip(h_list, futures):
                try:
                    results.append(fut.result())
                except Exception as exc:
                    raise RuntimeError(f"sweep run failed at h={h:g}: {exc}") from exc
    else:
        for h, c in zip(h_list, cfgs):
            try:
                results.append(fn(c))
            except Exception as exc:
                raise RuntimeError(f"sweep run failed at h={h:g}: {exc}") from exc

    metric_names = [m for m in _METRIC_ORDER if all(m in r for r in results)]
    errors = {m: [float(r[m]) for r in results] for m in metric_names}
    slopes = {}
    for m in metric_names:
        ys = np.asarray(errors[m])
        if np.any(ys <= 0):
            slopes[m] = float("nan")
        else:
            slopes[m] = float(np.polyfit(np.log(h_list), np.log(ys), 1)[0])

    _write_csv(out / "errors.csv", ["metric", "h", "error"],
               [[m, _fmt(h), _fmt(err)] for m in metric_names
                for h, err in zip(h_list, errors[m])])
    _write_csv(out / "slopes.csv", ["metric", "slope"],
               [[m, _fmt(slopes[m])] for m in metric_names])
    return SweepReport(h_list=h_list, errors=errors, slopes=slopes, out_dir=out)


# ---------------------------------------------------------------------------
# 2-D Keller-Segel criticality


def _linear_fit(ts, ys):
    ts = np.asarray(ts, dtype=float)
    ys = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(ts, ys, 1)
    pred = slope * ts + intercept
    ss_res = float(((ys - pred) ** 2).sum())
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def ks2d_criticality(masses, base: ScenarioConfig, out_dir=None, workers=None):
    """Fit the second-moment slope for each total mass; compare to theory."""
    masses = [float(M) for M in masses]
    if not masses:
        raise ConfigError(["masses: must be a nonempty list"])
    if any(M <= 0 for M in masses):
        raise ConfigError(["masses: must be positive"])
    if base.dimension != 2 or base.interaction_variant != "log2d":
        raise ConfigError(["interaction.variant: ks2d needs a 2-D scenario with log2d interaction"])
    out = Path(out_dir) if out_dir is not None else Path(base.output)
    out.mkdir(parents=True, exist_ok=True)

    cfgs = [base.with_updates(mass=M, name=f"{base.name}_M{M:g}",
                              output=str(out / f"mass_{M:g}"))
            for M in masses]
    nw = _worker_count(workers)
    if nw > 1:
        with ProcessPoolExecutor(max_workers=nw) as pool:
            runs = list(pool.map(_ks_point, cfgs))
    else:
        runs = [_ks_point(c) for c in cfgs]

    rows = []
    for M, (ts, m2s) in zip(masses, runs):
        slope, _, r2 = _linear_fit(ts, m2s)
        rows.append({"mass": M, "fitted_slope": slope,
                     "reference_slope": ks_second_moment_slope(M, base.chi, base.dimension),
                     "r_squared": r2})
    _write_csv(out / "criticality.csv",
               ["mass", "fitted_slope", "reference_slope", "r_squared"],
               [[_fmt(r["mass"]), _fmt(r["fitted_slope"]),
                 _fmt(r["reference_slope"]), _fmt(r["r_squared"])] for r in rows])
    return rows


def _ks_point(cfg: ScenarioConfig):
    res = run_scenario(cfg)
    ts = [row["t"] for row in res.trajectory.diagnostics]
    m2 = [row["second_moment"] for row in res.trajectory.diagnostics]
    if len(ts) < 2:
        raise RuntimeError(f"run {cfg.name}: too few snapshots for a slope fit")
    return ts, m2
