"""Gaussian mollifier pair used to regularize internal energies.

The pair consists of a base kernel and its self-convolution:

    zeta_eps(x) = (4 pi eps^2)^(-d/2) exp(-|x|^2 / (4 eps^2))
    phi_eps     = zeta_eps * zeta_eps
                = (8 pi eps^2)^(-d/2) exp(-|x|^2 / (8 eps^2))

Both are probability densities on R^d with closed-form gradients

    grad zeta_eps(x) = -x / (2 eps^2) * zeta_eps(x)
    grad phi_eps(x)  = -x / (4 eps^2) * phi_eps(x)

Only Gaussians are supported; the closed forms are what make the particle
velocity and the energy gradients exact.  Kernel values underflow to exact
zero once |x|^2/(8 eps^2) exceeds the range of exp; callers that divide by
mollified densities must guard against that themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["Mollifier"]


def _points(x, dimension: int) -> np.ndarray:
    """Coerce input into an (..., d) float array.

    Accepts a scalar (d=1 only), a single point of shape (d,), or any
    batch of points with trailing axis d.  For d=1 a bare batch of shape
    (n,) is interpreted as n scalar points.
    """
    a = np.asarray(x, dtype=float)
    if dimension == 1:
        if a.ndim == 0 or a.shape[-1] != 1:
            a = a[..., None]
        return a
    if a.ndim == 0 or a.shape[-1] != dimension:
        raise ValueError(f"expected points with trailing axis {dimension}, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class Mollifier:
    """Bandwidth-parameterized Gaussian pair (zeta_eps, phi_eps) in d = 1 or 2."""

    epsilon: float
    dimension: int

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")

    @classmethod
    def from_spacing(cls, h: float, dimension: int, p: float = 0.01) -> "Mollifier":
        """Bandwidth rule eps = h^(1-p); the default p=0.01 keeps h = o(eps)."""
        if not (h > 0):
            raise ValueError(f"grid spacing must be positive, got {h}")
        return cls(epsilon=h ** (1.0 - p), dimension=dimension)

    # Normalizing constants and gradient prefactors.  These are plain
    # attributes of the closed forms; the dynamics engine reuses them so that
    # its inlined kernel evaluations match zeta/phi/phi_grad bitwise.

    @property
    def zeta_norm(self) -> float:
        return (4.0 * math.pi * self.epsilon**2) ** (-self.dimension / 2.0)

    @property
    def phi_norm(self) -> float:
        return (8.0 * math.pi * self.epsilon**2) ** (-self.dimension / 2.0)

    @property
    def zeta_inv_scale(self) -> float:
        """Coefficient of -|x|^2 in the zeta exponent: 1/(4 eps^2)."""
        return 1.0 / (4.0 * self.epsilon**2)

    @property
    def phi_inv_scale(self) -> float:
        """Coefficient of -|x|^2 in the phi exponent: 1/(8 eps^2)."""
        return 1.0 / (8.0 * self.epsilon**2)

    @property
    def zeta_grad_coeff(self) -> float:
        """Prefactor of x*zeta(x) in grad zeta: -1/(2 eps^2)."""
        return -1.0 / (2.0 * self.epsilon**2)

    @property
    def phi_grad_coeff(self) -> float:
        """Prefactor of x*phi(x) in grad phi: -1/(4 eps^2)."""
        return -1.0 / (4.0 * self.epsilon**2)

    # Radial forms on squared distance, the engine's inner kernels.

    def zeta_of_r2(self, r2: np.ndarray) -> np.ndarray:
        return self.zeta_norm * np.exp(r2 * (-self.zeta_inv_scale))

    def phi_of_r2(self, r2: np.ndarray) -> np.ndarray:
        return self.phi_norm * np.exp(r2 * (-self.phi_inv_scale))

    # Pointwise evaluations.

    def zeta(self, x) -> np.ndarray:
        a = _points(x, self.dimension)
        return self.zeta_of_r2((a * a).sum(axis=-1))

    def phi(self, x) -> np.ndarray:
        a = _points(x, self.dimension)
        return self.phi_of_r2((a * a).sum(axis=-1))

    def zeta_grad(self, x) -> np.ndarray:
        a = _points(x, self.dimension)
        z = self.zeta_of_r2((a * a).sum(axis=-1))
        return a * (z * self.zeta_grad_coeff)[..., None]

    def phi_grad(self, x) -> np.ndarray:
        a = _points(x, self.dimension)
        p = self.phi_of_r2((a * a).sum(axis=-1))
        return a * (p * self.phi_grad_coeff)[..., None]
