"""Energy model: internal-energy law, external potential, reference density.

The solver needs the nonlinearity bundle (h, ht, ht', ht'', P, P') where
ht(s) = s*h(1/s) is the internal energy density in map variables, together
with an external potential (V, grad V, hess V) and the per-triangle masses
of the reference density.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "InternalEnergy",
    "Potential",
    "EnergyModel",
    "ReferenceDensity",
    "make_power_law",
    "zero_potential",
    "quadratic_potential",
    "quartic_potential",
    "init_reference_density",
    "preset_initial_density",
]


@dataclass(frozen=True)
class InternalEnergy:
    """Nonlinearity bundle. All evaluators accept scalars or arrays.

    ht is the transformed entropy ht(s) = s*h(1/s); the pressure satisfies
    P(r) = r*h'(r) - h(r) and therefore ht'(s) = -P(1/s).
    """

    name: str
    h: Callable
    ht: Callable
    ht_p: Callable
    ht_pp: Callable
    P: Callable
    P_p: Callable


@dataclass(frozen=True)
class Potential:
    """External potential with hand-coded first and second derivatives.

    V maps (N, 2) points to (N,); grad to (N, 2); hess to (N, 2, 2).
    """

    name: str
    V: Callable
    grad: Callable
    hess: Callable
    params: tuple = ()


@dataclass(frozen=True)
class EnergyModel:
    internal: InternalEnergy
    potential: Potential


def make_power_law(m: float) -> InternalEnergy:
    """Porous-medium nonlinearity h(r) = r^m/(m-1), P(r) = r^m, for m > 1.

    The transformed entropy is ht(s) = s^(1-m)/(m-1), so ht'(s) = -s^(-m)
    = -P(1/s) and ht''(s) = m*s^(-m-1) > 0.
    """
    if not m > 1.0:
        raise ValueError(f"power law requires m > 1 (fast diffusion m <= 1 unsupported), got m={m}")
    m = float(m)

    def h(r):
        return np.power(r, m) / (m - 1.0)

    def ht(s):
        return np.power(s, 1.0 - m) / (m - 1.0)

    def ht_p(s):
        return -np.power(s, -m)

    def ht_pp(s):
        return m * np.power(s, -m - 1.0)

    def P(r):
        return np.power(r, m)

    def P_p(r):
        return m * np.power(r, m - 1.0)

    return InternalEnergy(f"power_law(m={m:g})", h, ht, ht_p, ht_pp, P, P_p)


def zero_potential() -> Potential:
    def V(x):
        x = np.atleast_2d(x)
        return np.zeros(x.shape[0])

    def grad(x):
        x = np.atleast_2d(x)
        return np.zeros_like(x)

    def hess(x):
        x = np.atleast_2d(x)
        return np.zeros((x.shape[0], 2, 2))

    return Potential("zero", V, grad, hess)


def quadratic_potential(lam: float) -> Potential:
    """Confinement V(x) = lam*|x|^2/2."""
    lam = float(lam)

    def V(x):
        x = np.atleast_2d(x)
        return 0.5 * lam * np.sum(x * x, axis=1)

    def grad(x):
        x = np.atleast_2d(x)
        return lam * x

    def hess(x):
        x = np.atleast_2d(x)
        H = np.zeros((x.shape[0], 2, 2))
        H[:, 0, 0] = lam
        H[:, 1, 1] = lam
        return H

    return Potential("quadratic", V, grad, hess, params=(lam,))


def quartic_potential() -> Potential:
    """Double-well confinement V(x, y) = 5*(x^2 + (1 - y^2)^2)/2."""

    def V(x):
        x = np.atleast_2d(x)
        return 2.5 * (x[:, 0] ** 2 + (1.0 - x[:, 1] ** 2) ** 2)

    def grad(x):
        x = np.atleast_2d(x)
        g = np.empty_like(x)
        g[:, 0] = 5.0 * x[:, 0]
        g[:, 1] = -10.0 * x[:, 1] * (1.0 - x[:, 1] ** 2)
        return g

    def hess(x):
        x = np.atleast_2d(x)
        H = np.zeros((x.shape[0], 2, 2))
        H[:, 0, 0] = 5.0
        H[:, 1, 1] = 30.0 * x[:, 1] ** 2 - 10.0
        return H

    return Potential("quartic", V, grad, hess)


@dataclass(frozen=True)
class ReferenceDensity:
    """Per-triangle masses and piecewise-constant values of the reference density.

    tri_mass[m] is the mass carried by triangle m for the whole run;
    total_mass is their sum in triangle-index order and is the conserved
    quantity reported in diagnostics.
    """

    tri_mass: np.ndarray
    tri_value: np.ndarray
    total_mass: float = field(default=0.0)

    def __post_init__(self):
        object.__setattr__(self, "tri_mass", np.asarray(self.tri_mass, dtype=float))
        object.__setattr__(self, "tri_value", np.asarray(self.tri_value, dtype=float))
        if self.total_mass == 0.0:
            object.__setattr__(self, "total_mass", float(np.sum(self.tri_mass)))


def init_reference_density(mesh, rho0: Callable) -> ReferenceDensity:
    """Centroid-rule masses: mu_m = rho0(centroid_m) * |triangle_m|.

    rho0 maps (N, 2) points to (N,) values and must be positive at every
    triangle centroid.
    """
    cen = mesh.centroids()
    vals = np.asarray(rho0(cen), dtype=float)
    bad = np.flatnonzero(vals <= 0.0)
    if bad.size:
        t = int(bad[0])
        raise ValueError(
            f"initial density must be positive at triangle centroids; "
            f"triangle {t} has rho0={vals[t]:g} at centroid {cen[t]}"
        )
    mu = vals * mesh.areas()
    return ReferenceDensity(tri_mass=mu, tri_value=vals)


def _barenblatt_t0_field(t0: float):
    # free Barenblatt of unit mass at time t0 (see analysis.barenblatt_free)
    from .analysis import barenblatt_free

    if not t0 > 0.0:
        raise ValueError(f"barenblatt_t0 needs t0 > 0, got {t0}")

    def field(x):
        return barenblatt_free(t0, x, mass=1.0)

    return field


def _exp2_field(x):
    x = np.atleast_2d(x)
    r2 = x[:, 0] ** 2 + x[:, 1] ** 2
    return 3000.0 * r2 * np.exp(-5.0 * (np.abs(x[:, 0]) + np.abs(x[:, 1]))) + 0.1


def _two_peaks_field(x):
    x = np.atleast_2d(x)
    d1 = (x[:, 0] - 0.35) ** 2 + (x[:, 1] - 0.35) ** 2
    d2 = (x[:, 0] + 0.35) ** 2 + (x[:, 1] + 0.35) ** 2
    return np.exp(-20.0 * d1) + np.exp(-20.0 * d2) + 0.001


def _bump_field(x):
    x = np.atleast_2d(x)
    return 1.0 - (x[:, 0] ** 2 + x[:, 1] ** 2)


def preset_initial_density(name: str, t0: float | None = None) -> Callable:
    """Closed-form initial data used by the four canned experiments."""
    if name == "barenblatt_t0":
        return _barenblatt_t0_field(0.01 if t0 is None else t0)
    if name == "exp2":
        return _exp2_field
    if name == "two_peaks":
        return _two_peaks_field
    if name == "bump":
        return _bump_field
    raise ValueError(f"unknown initial-density preset {name!r}")
