"""Closed-form reference solutions and theoretical quantities.

Fundamental solutions psi_m(tau, .) of d/dt rho = Lap rho^m:

    m = 1   heat kernel      psi_1(tau, x) = (4 pi tau)^(-d/2) exp(-|x|^2/(4 tau))
    m > 1   Barenblatt       psi_m(tau, x) = tau^(-d beta) (K - kappa tau^(-2 beta) |x|^2)_+^(1/(m-1))

with beta = 1/(2 + d(m-1)), kappa = (beta/2)(m-1)/m, and K = K(m, d) fixed by
unit mass.  K is computed by root-finding on the quadrature mass rather than
hard-coded; closed forms exist for small m and d and are used as test oracles.

Both families are self-similar: initial data psi_m(tau, .) evolves to
psi_m(tau + t, .), which is what the convergence experiments test against.

ks_second_moment_slope gives the virial law d/dt M2 = 2 d M - 2 chi M^2 for
the aggregation equation with W = 2 chi log|.| and linear diffusion (m = 1);
it is a reconstruction (derived by symmetrizing the interaction term with
(x - y) . grad W(x - y) = 2 chi), not a quoted formula.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

__all__ = [
    "heat_kernel",
    "barenblatt",
    "barenblatt_beta",
    "barenblatt_kappa",
    "barenblatt_K",
    "barenblatt_support_radius",
    "fp_steady_state",
    "ks_second_moment_slope",
    "HeatKernel",
    "Barenblatt",
    "Mixture",
    "FPSteadyState",
]


def _r2(x, d: int) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if d == 1 and (a.ndim == 0 or a.shape[-1] != 1):
        a = a[..., None]
    return (a * a).sum(axis=-1)


def heat_kernel(tau: float, d: int, x) -> np.ndarray:
    """psi_1(tau, x), a probability density for every tau > 0."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    return (4.0 * math.pi * tau) ** (-d / 2.0) * np.exp(-_r2(x, d) / (4.0 * tau))


def barenblatt_beta(m: float, d: int) -> float:
    return 1.0 / (2.0 + d * (m - 1.0))


def barenblatt_kappa(m: float, d: int) -> float:
    return 0.5 * barenblatt_beta(m, d) * (m - 1.0) / m


_K_cache: dict[tuple[float, int], float] = {}
_K_lock = threading.Lock()


def _profile_mass(K: float, m: float, d: int) -> float:
    """Mass of (K - kappa |y|^2)_+^(1/(m-1)); tau-independent by scaling."""
    kappa = barenblatt_kappa(m, d)
    R = math.sqrt(K / kappa)
    p = 1.0 / (m - 1.0)
    if d == 1:
        val, _ = quad(lambda y: (max(K - kappa * y * y, 0.0)) ** p, 0.0, R,
                      epsabs=1e-13, epsrel=1e-13, limit=200)
        return 2.0 * val
    val, _ = quad(lambda r: (max(K - kappa * r * r, 0.0)) ** p * r, 0.0, R,
                  epsabs=1e-13, epsrel=1e-13, limit=200)
    return 2.0 * math.pi * val


def barenblatt_K(m: float, d: int) -> float:
    """The unique K > 0 giving psi_m unit mass, to relative 1e-10 (memoized)."""
    if not m > 1:
        raise ValueError("Barenblatt profiles need m > 1")
    key = (float(m), int(d))
    with _K_lock:
        if key in _K_cache:
            return _K_cache[key]
    # mass(K) is strictly increasing in K, so bracket and bisect.
    lo, hi = 1e-6, 1.0
    while _profile_mass(hi, m, d) < 1.0:
        hi *= 2.0
    while _profile_mass(lo, m, d) > 1.0:
        lo *= 0.5
    K = brentq(lambda k: _profile_mass(k, m, d) - 1.0, lo, hi, xtol=1e-14, rtol=1e-12)
    with _K_lock:
        _K_cache[key] = K
    return K


def barenblatt_support_radius(m: float, tau: float, d: int) -> float:
    """tau^beta sqrt(K / kappa)."""
    beta = barenblatt_beta(m, d)
    return tau**beta * math.sqrt(barenblatt_K(m, d) / barenblatt_kappa(m, d))


def barenblatt(m: float, tau: float, d: int, x) -> np.ndarray:
    """psi_m(tau, x) for m > 1: compactly supported, unit mass."""
    if not (m > 1 and tau > 0):
        raise ValueError("barenblatt needs m > 1 and tau > 0")
    beta = barenblatt_beta(m, d)
    kappa = barenblatt_kappa(m, d)
    K = barenblatt_K(m, d)
    body = K - kappa * tau ** (-2.0 * beta) * _r2(x, d)
    return tau ** (-d * beta) * np.maximum(body, 0.0) ** (1.0 / (m - 1.0))


def fp_steady_state(x) -> np.ndarray:
    """Steady profile of the quadratic-drift flow with m = 2 in d = 2: psi_2(1/4, x)."""
    return barenblatt(2.0, 0.25, 2, x)


def ks_second_moment_slope(total_mass: float, chi: float, dimension: int) -> float:
    """Virial slope d/dt M2 = 2 d M - 2 chi M^2 for W = 2 chi log|.|, m = 1.

    With the classical 2-D kernel W = (1/2 pi) log|.| (chi = 1/(4 pi)) this is
    4 M (1 - M/(8 pi)): positive below the critical mass 8 pi, zero at it,
    negative above.
    """
    return 2.0 * dimension * total_mass - 2.0 * chi * total_mass**2


# Density objects used by the experiment pipeline: callables on point arrays
# with enough structure (domain, time shift) for references and quantiles.


@dataclass(frozen=True)
class HeatKernel:
    tau: float
    dimension: int
    shift: tuple = ()
    weight: float = 1.0

    def __post_init__(self):
        shift = tuple(float(s) for s in np.atleast_1d(np.asarray(self.shift, dtype=float))) if len(np.atleast_1d(self.shift)) else (0.0,) * self.dimension
        if len(shift) != self.dimension:
            raise ValueError("shift dimension mismatch")
        object.__setattr__(self, "shift", shift)

    def __call__(self, x) -> np.ndarray:
        a = np.asarray(x, dtype=float)
        if self.dimension == 1 and (a.ndim == 0 or a.shape[-1] != 1):
            a = a[..., None]
        return self.weight * heat_kernel(self.tau, self.dimension, a - np.asarray(self.shift))

    def evolved(self, t: float) -> "HeatKernel":
        return HeatKernel(self.tau + t, self.dimension, self.shift, self.weight)

    @property
    def domain(self) -> tuple[float, float]:
        sigma = math.sqrt(2.0 * self.tau)
        (c,) = self.shift if self.dimension == 1 else (0.0,)
        return (c - 14.0 * sigma, c + 14.0 * sigma)


@dataclass(frozen=True)
class Barenblatt:
    m: float
    tau: float
    dimension: int
    shift: tuple = ()
    weight: float = 1.0

    def __post_init__(self):
        if not (self.m > 1 and self.tau > 0):
            raise ValueError("barenblatt needs m > 1 and tau > 0")
        shift = tuple(float(s) for s in np.atleast_1d(np.asarray(self.shift, dtype=float))) if len(np.atleast_1d(self.shift)) else (0.0,) * self.dimension
        if len(shift) != self.dimension:
            raise ValueError("shift dimension mismatch")
        object.__setattr__(self, "shift", shift)

    def __call__(self, x) -> np.ndarray:
        a = np.asarray(x, dtype=float)
        if self.dimension == 1 and (a.ndim == 0 or a.shape[-1] != 1):
            a = a[..., None]
        return self.weight * barenblatt(self.m, self.tau, self.dimension, a - np.asarray(self.shift))

    def evolved(self, t: float) -> "Barenblatt":
        return Barenblatt(self.m, self.tau + t, self.dimension, self.shift, self.weight)

    @property
    def support_radius(self) -> float:
        return barenblatt_support_radius(self.m, self.tau, self.dimension)

    @property
    def domain(self) -> tuple[float, float]:
        (c,) = self.shift if self.dimension == 1 else (0.0,)
        R = self.support_radius
        return (c - R, c + R)


@dataclass(frozen=True)
class Mixture:
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        dims = {c.dimension for c in self.components}
        if len(dims) != 1:
            raise ValueError("mixture components must share a dimension")

    @property
    def dimension(self) -> int:
        return self.components[0].dimension

    def __call__(self, x) -> np.ndarray:
        return sum(c(x) for c in self.components)

    def evolved(self, t: float) -> "Mixture":
        # Exact only for linear diffusion; the config layer enforces m = 1.
        return Mixture(tuple(c.evolved(t) for c in self.components))

    @property
    def domain(self) -> tuple[float, float]:
        doms = [c.domain for c in self.components]
        return (min(a for a, _ in doms), max(b for _, b in doms))


@dataclass(frozen=True)
class FPSteadyState:
    dimension: int = 2

    def __call__(self, x) -> np.ndarray:
        return fp_steady_state(x)

    def evolved(self, t: float) -> "FPSteadyState":
        return self

    @property
    def domain(self) -> tuple[float, float]:
        R = barenblatt_support_radius(2.0, 0.25, 2)
        return (-R, R)
