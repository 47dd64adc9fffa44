"""Scenario configuration: schema, validation, and resolution.

Configs are YAML mappings (see configs/ for presets and README for the
field list).  Validation collects field-level messages and raises one
ConfigError naming every offending field.  A resolved config is a plain
dataclass of primitives; the heavyweight objects (densities, ensembles,
problems) are built on demand so that validation stays cheap.  The run
manifest is the resolved config re-serialized with all defaults filled
in, so re-running a manifest reproduces the run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .dynamics import ProblemSpec
from .ensemble import GridSpec, discretize_density
from .integrator import IntegratorConfig, RK4Fixed, RK45Adaptive
from .mollifier import Mollifier
from .potentials import DriftPotential, InteractionPotential
from .reference import Barenblatt, FPSteadyState, HeatKernel, Mixture

__all__ = ["ConfigError", "ScenarioConfig", "load_config", "parse_config"]

_TOP_KEYS = {
    "name", "dimension", "m", "drift", "interaction", "initial", "mass",
    "grid", "epsilon", "quadrature", "normalize", "integrator", "metrics",
    "reference", "diagnostics", "w2_grid", "output", "long_running",
    # run-manifest bookkeeping sections, ignored on load
    "derived", "result",
}
_METRICS = ("w2", "l1", "linf")
_DIAGNOSTICS = ("nonlocal_sobolev", "bv_eps_norm")


class ConfigError(ValueError):
    """Validation failure; ``messages`` lists one string per bad field."""

    def __init__(self, messages):
        self.messages = list(messages)
        super().__init__("invalid config:\n" + "\n".join(f"  {m}" for m in self.messages))


@dataclass(frozen=True)
class InitialComponent:
    kind: str                 # heat | barenblatt
    tau: float
    weight: float = 1.0
    shift: tuple = ()
    m: float | None = None    # barenblatt exponent


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    dimension: int
    m: float
    drift: str
    interaction_variant: str
    chi: float
    components: tuple          # of InitialComponent; singleton unless a mixture
    mass: float
    h: float
    R: float
    epsilon_p: float | None
    epsilon_value: float | None
    quadrature: str
    normalize: bool
    scheme: str
    rel_tol: float
    abs_tol: float
    dt: float | None
    dt_init: float | None
    dt_max: float | None
    t_final: float
    record_times: tuple
    metrics: tuple
    reference: str             # evolve | fp_steady | none
    diagnostics: tuple
    w2_spacing: float | None
    w2_max_nodes: int
    output: str
    long_running: bool = False

    # -- derived quantities ------------------------------------------------

    @property
    def epsilon(self) -> float:
        if self.epsilon_value is not None:
            return float(self.epsilon_value)
        return float(self.h ** (1.0 - self.epsilon_p))

    def grid_spec(self) -> GridSpec:
        return GridSpec(spacing=self.h, radius=self.R, dimension=self.dimension)

    def mollifier(self) -> Mollifier:
        return Mollifier(epsilon=self.epsilon, dimension=self.dimension)

    def initial_density(self):
        built = []
        for c in self.components:
            if c.kind == "heat":
                built.append(HeatKernel(c.tau, self.dimension, c.shift, c.weight * self.mass))
            else:
                built.append(Barenblatt(c.m if c.m is not None else self.m, c.tau,
                                        self.dimension, c.shift, c.weight * self.mass))
        return built[0] if len(built) == 1 else Mixture(tuple(built))

    def initial_ensemble(self):
        return discretize_density(
            self.initial_density(), self.grid_spec(),
            normalize=self.mass if self.normalize else None,
            quadrature=self.quadrature)

    def problem(self) -> ProblemSpec:
        eps = self.epsilon
        return ProblemSpec(
            m=self.m,
            V=DriftPotential(self.drift),
            W=InteractionPotential(self.interaction_variant, chi=self.chi, epsilon=eps),
            mollifier=Mollifier(epsilon=eps, dimension=self.dimension),
            dimension=self.dimension)

    def integrator_config(self) -> IntegratorConfig:
        if self.scheme == "rk4":
            scheme = RK4Fixed(dt=self.dt)
        else:
            scheme = RK45Adaptive(rel_tol=self.rel_tol, abs_tol=self.abs_tol,
                                  dt_init=self.dt_init, dt_max=self.dt_max)
        return IntegratorConfig(scheme=scheme, t_final=self.t_final,
                                record_times=self.record_times)

    def reference_density(self):
        if self.reference == "none":
            return None
        if self.reference == "fp_steady":
            return FPSteadyState(dimension=self.dimension)
        return self.initial_density()  # evolve: call .evolved(t) per snapshot

    def with_updates(self, **kw) -> "ScenarioConfig":
        from dataclasses import replace
        return replace(self, **kw)

    def resolved_dict(self) -> dict:
        """Plain mapping in config schema order, defaults filled in."""
        d = {
            "name": self.name,
            "dimension": self.dimension,
            "m": self.m,
            "drift": self.drift,
            "interaction": {"variant": self.interaction_variant, "chi": self.chi},
            "initial": self._initial_dict(),
            "mass": self.mass,
            "grid": {"h": self.h, "R": self.R},
            "epsilon": ({"value": self.epsilon_value} if self.epsilon_value is not None
                        else {"p": self.epsilon_p}),
            "quadrature": self.quadrature,
            "normalize": self.normalize,
            "integrator": self._integrator_dict(),
            "metrics": list(self.metrics),
            "reference": self.reference,
            "diagnostics": list(self.diagnostics),
            "w2_grid": {"spacing": self.w2_spacing, "max_nodes_per_side": self.w2_max_nodes},
            "output": self.output,
            "long_running": self.long_running,
        }
        return d

    def _initial_dict(self) -> dict:
        def comp(c: InitialComponent) -> dict:
            out = {"kind": c.kind, "tau": c.tau, "weight": c.weight, "shift": list(c.shift)}
            if c.m is not None:
                out["m"] = c.m
            return out

        if len(self.components) == 1 and self.components[0].weight == 1.0:
            single = comp(self.components[0])
            del single["weight"]
            return single
        return {"kind": "mixture", "components": [comp(c) for c in self.components]}

    def _integrator_dict(self) -> dict:
        d = {"scheme": self.scheme, "t_final": self.t_final,
             "record_times": list(self.record_times)}
        if self.scheme == "rk4":
            d["dt"] = self.dt
        else:
            d.update(rel_tol=self.rel_tol, abs_tol=self.abs_tol)
            if self.dt_init is not None:
                d["dt_init"] = self.dt_init
            if self.dt_max is not None:
                d["dt_max"] = self.dt_max
        return d


# ---------------------------------------------------------------------------
# parsing / validation


class _Check:
    def __init__(self):
        self.errors = []

    def fail(self, path: str, msg: str):
        self.errors.append(f"{path}: {msg}")

    def num(self, d, key, path, *, default=None, required=False, cond=None, cond_msg=""):
        if key not in d or d[key] is None:
            if required:
                self.fail(f"{path}{key}", "required")
            return default
        v = d[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(f"{path}{key}", f"expected a number, got {v!r}")
            return default
        v = float(v)
        if cond is not None and not cond(v):
            self.fail(f"{path}{key}", cond_msg)
            return default
        return v

    def choice(self, d, key, path, options, *, default=None, required=False):
        if key not in d or d[key] is None:
            if required:
                self.fail(f"{path}{key}", f"required (one of {'/'.join(options)})")
            return default
        v = d[key]
        if v not in options:
            self.fail(f"{path}{key}", f"must be one of {'/'.join(options)}, got {v!r}")
            return default
        return v

    def mapping(self, d, key, path, *, default=None):
        v = d.get(key)
        if v is None:
            return dict(default) if default is not None else {}
        if not isinstance(v, dict):
            self.fail(f"{path}{key}", f"expected a mapping, got {type(v).__name__}")
            return dict(default) if default is not None else {}
        return v


def _parse_component(raw, dimension, default_m, ck: _Check, path: str) -> InitialComponent | None:
    kind = ck.choice(raw, "kind", path, ("heat", "barenblatt"), required=True)
    tau = ck.num(raw, "tau", path, required=True, cond=lambda v: v > 0,
                 cond_msg="must be positive")
    weight = ck.num(raw, "weight", path, default=1.0, cond=lambda v: v > 0,
                    cond_msg="must be positive")
    mm = ck.num(raw, "m", path, default=None, cond=lambda v: v >= 1,
                cond_msg="must satisfy m >= 1")
    shift_raw = raw.get("shift", [])
    try:
        shift = tuple(float(s) for s in np.atleast_1d(np.asarray(shift_raw, dtype=float))) \
            if np.size(shift_raw) else ()
    except (TypeError, ValueError):
        ck.fail(f"{path}shift", f"expected a list of {dimension} numbers, got {shift_raw!r}")
        shift = ()
    if shift and len(shift) != dimension:
        ck.fail(f"{path}shift", f"expected {dimension} entries, got {len(shift)}")
        shift = ()
    if kind is None or tau is None:
        return None
    return InitialComponent(kind=kind, tau=tau, weight=weight, shift=shift, m=mm)


def parse_config(raw: dict, *, name_hint: str = "scenario") -> ScenarioConfig:
    """Validate a raw mapping and return the resolved ScenarioConfig."""
    if not isinstance(raw, dict):
        raise ConfigError(["top level: expected a mapping"])
    ck = _Check()
    for key in raw:
        if key not in _TOP_KEYS:
            ck.fail(key, "unknown field")

    name = raw.get("name", name_hint)
    if not isinstance(name, str) or not name:
        ck.fail("name", "expected a nonempty string")
        name = name_hint

    dim_raw = raw.get("dimension")
    if dim_raw not in (1, 2):
        ck.fail("dimension", f"must be 1 or 2, got {dim_raw!r}")
        dimension = 1
    else:
        dimension = int(dim_raw)

    m = ck.num(raw, "m", "", default=1.0, cond=lambda v: v >= 1,
               cond_msg="must satisfy m >= 1 (degenerate diffusion exponent)")
    if m is None:
        m = 1.0

    drift = ck.choice(raw, "drift", "", ("none", "quadratic"), default="none")

    inter = raw.get("interaction", "none")
    if isinstance(inter, str):
        inter = {"variant": inter}
    inter = inter if isinstance(inter, dict) else {}
    if not isinstance(raw.get("interaction", "none"), (str, dict)):
        ck.fail("interaction", "expected a variant name or mapping")
    variant = ck.choice(inter, "variant", "interaction.", ("none", "log1d", "log2d"),
                        default="none")
    chi = ck.num(inter, "chi", "interaction.", default=0.0,
                 cond=lambda v: v >= 0, cond_msg="must be nonnegative")
    if variant == "log1d" and dimension != 1:
        ck.fail("interaction.variant", "log1d requires dimension 1")
    if variant == "log2d" and dimension != 2:
        ck.fail("interaction.variant", "log2d requires dimension 2")
    if variant != "none" and not (chi or 0) > 0:
        ck.fail("interaction.chi", "must be positive for an active interaction")

    initial = ck.mapping(raw, "initial", "")
    if not initial:
        ck.fail("initial", "required")
    kind = ck.choice(initial, "kind", "initial.", ("heat", "barenblatt", "mixture"),
                     required=True)
    components: list[InitialComponent] = []
    if kind == "mixture":
        comps = initial.get("components")
        if not isinstance(comps, list) or not comps:
            ck.fail("initial.components", "required nonempty list for a mixture")
        else:
            for i, c in enumerate(comps):
                if not isinstance(c, dict):
                    ck.fail(f"initial.components[{i}]", "expected a mapping")
                    continue
                comp = _parse_component(c, dimension, m, ck, f"initial.components[{i}].")
                if comp is not None:
                    components.append(comp)
    elif kind is not None:
        comp = _parse_component(initial, dimension, m, ck, "initial.")
        if comp is not None:
            components.append(comp)

    mass = ck.num(raw, "mass", "", default=1.0, cond=lambda v: v > 0,
                  cond_msg="must be positive")

    grid = ck.mapping(raw, "grid", "")
    h = ck.num(grid, "h", "grid.", required=True, cond=lambda v: v > 0,
               cond_msg="must be positive")
    R = ck.num(grid, "R", "grid.", required=True, cond=lambda v: v > 0,
               cond_msg="must be positive")

    eps = ck.mapping(raw, "epsilon", "", default={"p": 0.01})
    eps_p = ck.num(eps, "p", "epsilon.", default=None,
                   cond=lambda v: 0 < v < 1, cond_msg="must lie in (0,1)")
    eps_value = ck.num(eps, "value", "epsilon.", default=None,
                       cond=lambda v: v > 0, cond_msg="must be positive")
    if eps_value is None and eps_p is None:
        eps_p = 0.01
    if eps_value is not None and eps_p is not None:
        ck.fail("epsilon", "give either p or value, not both")
    if eps_value is not None and h is not None and eps_value <= h:
        ck.fail("epsilon.value", f"must exceed the grid spacing h={h} (blob regime h = o(eps))")

    quadrature = ck.choice(raw, "quadrature", "", ("midpoint", "cell"), default="midpoint")
    normalize = raw.get("normalize", True)
    if not isinstance(normalize, bool):
        ck.fail("normalize", f"expected true/false, got {normalize!r}")
        normalize = True

    integ = ck.mapping(raw, "integrator", "")
    if not integ:
        ck.fail("integrator", "required")
    scheme = ck.choice(integ, "scheme", "integrator.", ("rk45", "rk4"), default="rk45")
    rel_tol = ck.num(integ, "rel_tol", "integrator.", default=1e-6,
                     cond=lambda v: v > 0, cond_msg="must be positive")
    abs_tol = ck.num(integ, "abs_tol", "integrator.", default=1e-9,
                     cond=lambda v: v > 0, cond_msg="must be positive")
    dt = ck.num(integ, "dt", "integrator.", default=None,
                cond=lambda v: v > 0, cond_msg="must be positive")
    dt_init = ck.num(integ, "dt_init", "integrator.", default=None,
                     cond=lambda v: v > 0, cond_msg="must be positive")
    dt_max = ck.num(integ, "dt_max", "integrator.", default=None,
                    cond=lambda v: v > 0, cond_msg="must be positive")
    if scheme == "rk4" and dt is None:
        ck.fail("integrator.dt", "required for the rk4 scheme")
    t_final = ck.num(integ, "t_final", "integrator.", required=True,
                     cond=lambda v: v > 0, cond_msg="must be positive")
    rec_raw = integ.get("record_times")
    if rec_raw is None:
        record_times = (t_final,) if t_final else (1.0,)
    elif not isinstance(rec_raw, list) or not all(
            isinstance(t, (int, float)) and not isinstance(t, bool) for t in rec_raw):
        ck.fail("integrator.record_times", "expected a list of numbers")
        record_times = (t_final,) if t_final else (1.0,)
    else:
        record_times = tuple(float(t) for t in rec_raw)
        if any(b <= a for a, b in zip(record_times, record_times[1:])):
            ck.fail("integrator.record_times", "must be strictly increasing")
        if t_final and record_times and record_times[-1] > t_final:
            ck.fail("integrator.record_times", f"must not exceed t_final={t_final}")

    metrics_raw = raw.get("metrics", ["w2", "l1", "linf"])
    if not isinstance(metrics_raw, list) or any(x not in _METRICS for x in metrics_raw):
        ck.fail("metrics", f"expected a list drawn from {'/'.join(_METRICS)}")
        metrics_raw = []
    diag_raw = raw.get("diagnostics", [])
    if not isinstance(diag_raw, list) or any(x not in _DIAGNOSTICS for x in diag_raw):
        ck.fail("diagnostics", f"expected a list drawn from {'/'.join(_DIAGNOSTICS)}")
        diag_raw = []

    for i, c in enumerate(components):
        eff_m = c.m if c.m is not None else m
        if c.kind == "barenblatt" and eff_m <= 1.0:
            where = f"initial.components[{i}].m" if kind == "mixture" else "initial.m"
            ck.fail(where, "barenblatt profiles need an exponent m > 1")

    reference = ck.choice(raw, "reference", "", ("evolve", "fp_steady", "none"),
                          default=None)
    if reference is None:
        reference = _default_reference(drift, variant, kind, components, m)
    if reference == "evolve":
        msg = _evolve_obstruction(drift, variant, kind, components, m)
        if msg:
            ck.fail("reference", msg)
    if reference == "fp_steady" and (drift != "quadratic" or m != 2.0):
        ck.fail("reference", "fp_steady requires drift=quadratic and m=2")

    w2g = ck.mapping(raw, "w2_grid", "")
    w2_spacing = ck.num(w2g, "spacing", "w2_grid.", default=None,
                        cond=lambda v: v > 0, cond_msg="must be positive")
    w2_max_nodes = w2g.get("max_nodes_per_side", 64)
    if isinstance(w2_max_nodes, bool) or not isinstance(w2_max_nodes, int) or w2_max_nodes < 3:
        ck.fail("w2_grid.max_nodes_per_side", f"expected an integer >= 3, got {w2_max_nodes!r}")
        w2_max_nodes = 64

    output = raw.get("output", f"runs/{name}")
    if not isinstance(output, str) or not output:
        ck.fail("output", "expected a nonempty path string")
        output = f"runs/{name}"
    long_running = raw.get("long_running", False)
    if not isinstance(long_running, bool):
        ck.fail("long_running", f"expected true/false, got {long_running!r}")
        long_running = False

    if not components and not ck.errors:
        ck.fail("initial", "no valid components")
    if ck.errors:
        raise ConfigError(ck.errors)

    return ScenarioConfig(
        name=name, dimension=dimension, m=m, drift=drift,
        interaction_variant=variant, chi=chi, components=tuple(components),
        mass=mass, h=h, R=R, epsilon_p=eps_p, epsilon_value=eps_value,
        quadrature=quadrature, normalize=normalize, scheme=scheme,
        rel_tol=rel_tol, abs_tol=abs_tol, dt=dt, dt_init=dt_init, dt_max=dt_max,
        t_final=t_final, record_times=record_times,
        metrics=tuple(metrics_raw), reference=reference,
        diagnostics=tuple(diag_raw), w2_spacing=w2_spacing,
        w2_max_nodes=w2_max_nodes, output=output, long_running=long_running)


def _evolve_obstruction(drift, variant, kind, components, m) -> str | None:
    """Why exact time evolution of the initial density is unavailable, if so."""
    if drift != "none" or variant != "none":
        return "'evolve' needs a drift- and interaction-free flow (heat or porous medium)"
    if kind == "mixture" or len(components) > 1:
        if m != 1.0 or any(c.kind != "heat" for c in components):
            return "'evolve' for mixtures needs m=1 with heat components (linear superposition)"
    elif components:
        c = components[0]
        if c.kind == "heat" and m != 1.0:
            return "'evolve' of a heat profile needs m=1"
        if c.kind == "barenblatt" and (c.m if c.m is not None else m) != m:
            return "'evolve' of a barenblatt profile needs its exponent to match m"
    return None


def _default_reference(drift, variant, kind, components, m) -> str:
    if drift == "quadratic" and m == 2.0 and variant == "none":
        return "fp_steady"
    if _evolve_obstruction(drift, variant, kind, components, m) is None:
        return "evolve"
    return "none"


def load_config(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    import os
    hint = os.path.splitext(os.path.basename(str(path)))[0]
    return parse_config(raw if raw is not None else {}, name_hint=hint)
