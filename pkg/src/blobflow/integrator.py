"""Time integration of the particle ODE system with trajectory recording.

Two schemes: classical fixed-step RK4 and adaptive Dormand-Prince RK45
(embedded 4th/5th order, FSAL).  Record times are hit exactly by shrinking
the last step onto the target, never by interpolation.  A step-size
underflow (dt < 1e-12 t_final) is treated as blow-up: the integrator
returns the trajectory truncated at the current time with a marker set,
which is the expected exit for supercritical aggregation runs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import dynamics as dyn
from .ensemble import ParticleEnsemble, second_moment

__all__ = ["RK4Fixed", "RK45Adaptive", "IntegratorConfig", "Trajectory", "integrate", "step_rk4", "simulate"]

DIAGNOSTIC_COLUMNS = ("t", "energy", "dissipation", "second_moment", "n_particles")

# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])

UNDERFLOW_FRACTION = 1e-12


@dataclass(frozen=True)
class RK4Fixed:
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class RK45Adaptive:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    dt_init: float | None = None
    dt_max: float | None = None

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        for name in ("dt_init", "dt_max"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: RK4Fixed | RK45Adaptive
    t_final: float
    record_times: tuple

    def __post_init__(self):
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        rec = tuple(float(t) for t in self.record_times)
        if not rec or rec[0] != 0.0:
            rec = (0.0,) + rec
        if any(b <= a for a, b in zip(rec, rec[1:])):
            raise ValueError("record_times must be strictly increasing")
        if rec[-1] > self.t_final:
            raise ValueError("record_times must lie in [0, t_final]")
        if rec[-1] != self.t_final:
            rec = rec + (float(self.t_final),)
        object.__setattr__(self, "record_times", rec)


@dataclass
class Trajectory:
    """Snapshots (time, ensemble) plus per-snapshot diagnostics."""

    times: list = field(default_factory=list)
    ensembles: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)  # dicts keyed by DIAGNOSTIC_COLUMNS
    blew_up: bool = False
    blow_up_time: float | None = None

    @property
    def final(self) -> ParticleEnsemble:
        return self.ensembles[-1]

    def diagnostics_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(DIAGNOSTIC_COLUMNS)
            for row in self.diagnostics:
                w.writerow([repr(float(row[c])) if c != "n_particles" else str(int(row[c]))
                            for c in DIAGNOSTIC_COLUMNS])


def _rk4_step_positions(X: np.ndarray, f, dt: float) -> np.ndarray:
    k1 = f(X)
    k2 = f(X + 0.5 * dt * k1)
    k3 = f(X + 0.5 * dt * k2)
    k4 = f(X + dt * k3)
    return X + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(e: ParticleEnsemble, p: dyn.ProblemSpec, dt: float) -> ParticleEnsemble:
    """One classical four-stage step of the full particle system."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    f = lambda X: dyn.velocity_field(e.with_positions(X), p)
    if dt == 0.0:
        return e
    X1 = _rk4_step_positions(np.array(e.positions), f, dt)
    if not np.all(np.isfinite(X1)):
        raise dyn.DynamicsError("non-finite position after RK4 step")
    return e.with_positions(X1)


def _error_norm(err: np.ndarray, X0: np.ndarray, X1: np.ndarray, rel: float, abs_: float) -> float:
    scale = abs_ + rel * np.maximum(np.abs(X0), np.abs(X1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def integrate(e0: ParticleEnsemble, velocity, cfg: IntegratorConfig, observer=None) -> Trajectory:
    """Advance the ensemble, recording snapshots at exactly cfg.record_times.

    ``velocity`` maps a position array (N, d) to velocities (N, d); the
    experiment pipeline wires in the particle dynamics but tests may pass
    any field.  ``observer(t, ensemble)`` builds one diagnostics row per
    snapshot; by default only time, second moment, and particle count.
    """
    if observer is None:
        observer = lambda t, e: {"t": t, "energy": float("nan"), "dissipation": float("nan"),
                                 "second_moment": second_moment(e), "n_particles": e.n}
    traj = Trajectory()

    def record(t: float, e: ParticleEnsemble) -> None:
        traj.times.append(t)
        traj.ensembles.append(e)
        row = dict(observer(t, e))
        row["t"] = t
        traj.diagnostics.append(row)

    def record_truncated(t: float, e: ParticleEnsemble) -> None:
        # Final state before a blow-up exit; diagnostics may be unevaluable.
        if traj.times and t <= traj.times[-1]:
            return
        traj.times.append(t)
        traj.ensembles.append(e)
        try:
            row = dict(observer(t, e))
        except dyn.DynamicsError:
            row = {"energy": float("nan"), "dissipation": float("nan"),
                   "second_moment": second_moment(e), "n_particles": e.n}
        row["t"] = t
        traj.diagnostics.append(row)

    t = 0.0
    e = e0
    record(t, e)
    targets = [rt for rt in cfg.record_times if rt > 0.0]

    scheme = cfg.scheme
    if isinstance(scheme, RK4Fixed):
        X = np.array(e.positions)
        for target in targets:
            while t < target:
                dt = min(scheme.dt, target - t)
                covers = dt >= target - t
                X = _rk4_step_positions(X, velocity, dt)
                if not np.all(np.isfinite(X)):
                    raise dyn.DynamicsError(f"non-finite position at t={t}")
                t = target if covers else t + dt
            e = e.with_positions(X)
            record(target, e)
        return traj

    # Adaptive Dormand-Prince with FSAL.
    rel, abs_ = scheme.rel_tol, scheme.abs_tol
    dt_max = scheme.dt_max if scheme.dt_max is not None else cfg.t_final
    dt = scheme.dt_init if scheme.dt_init is not None else min(dt_max, cfg.t_final / 100.0)
    floor = UNDERFLOW_FRACTION * cfg.t_final
    X = np.array(e.positions)
    k = [None] * 7
    k[0] = velocity(X)
    for target in targets:
        while t < target:
            landing = dt >= target - t
            dt_try = min(dt, target - t)
            while True:
                try:
                    for s in range(1, 7):
                        Xs = X + dt_try * sum(a * ks for a, ks in zip(_A[s], k[:s]))
                        k[s] = velocity(Xs)
                    X5 = X + dt_try * sum(b * ks for b, ks in zip(_B5, k) if b != 0.0)
                    err = dt_try * sum((b5 - b4) * ks for b5, b4, ks in zip(_B5, _B4, k))
                except dyn.DynamicsError:
                    X5 = err = None
                if X5 is None or not (np.all(np.isfinite(X5)) and np.all(np.isfinite(err))):
                    enorm = float("inf")
                else:
                    enorm = _error_norm(err, X, X5, rel, abs_)
                if enorm <= 1.0:
                    break
                landing = False
                dt_try *= max(0.2, 0.9 * enorm ** -0.2) if np.isfinite(enorm) else 0.2
                if dt_try < floor:
                    traj.blew_up = True
                    traj.blow_up_time = t
                    record_truncated(t, e.with_positions(X))
                    return traj
            X = X5
            t = target if landing else t + dt_try
            factor = 5.0 if enorm == 0.0 else min(5.0, max(0.2, 0.9 * enorm ** -0.2))
            dt = min(dt_max, dt_try * factor)
            if dt < floor:
                traj.blew_up = True
                traj.blow_up_time = t
                record_truncated(t, e.with_positions(X))
                return traj
            k[0] = k[6]  # FSAL: last stage was evaluated at (t, X)
        e = e.with_positions(X)
        record(target, e)
    return traj


def make_observer(p: dyn.ProblemSpec):
    """Diagnostics row builder using the problem's energy and dissipation."""

    def observer(t: float, e: ParticleEnsemble) -> dict:
        v = dyn.velocity_field(e, p)
        return {
            "t": t,
            "energy": dyn.discrete_energy(e, p),
            "dissipation": float((e.masses * (v * v).sum(axis=1)).sum()),
            "second_moment": second_moment(e),
            "n_particles": e.n,
        }

    return observer


def simulate(e0: ParticleEnsemble, p: dyn.ProblemSpec, cfg: IntegratorConfig) -> Trajectory:
    """Integrate the particle dynamics of ``p`` with full diagnostics."""
    velocity = lambda X: dyn.velocity_field(e0.with_positions(X), p)
    return integrate(e0, velocity, cfg, observer=make_observer(p))
