"""Ring trap and stirring potentials.

The static trap is a Gaussian well along the circle r = 1; the stirrer
modulates it with an angular harmonic rotating at angular rate omega. The
split-step scheme never samples the stirrer pointwise in time: it uses the
exact time integral over a step (phase_integral), which keeps the potential
half-flow exact for any step size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fv import Field
from .mesh import RingMesh

# Below this |omega| the stirrer is treated as static (the closed-form
# integral divides by omega).
OMEGA_STATIC_TOL = 1e-12


@dataclass(frozen=True)
class PotentialParams:
    """Trap/stirrer parameters: depth V0, width scale m, stirring (V_p, n_theta, omega)."""

    m: float
    V0: float
    V_p: float = 0.0
    n_theta: int = 0
    omega: float = 0.0

    def __post_init__(self):
        if self.m <= 0.0:
            raise ValueError("m must be positive")
        if not 0.0 <= self.V_p <= 1.0:
            raise ValueError("V_p must lie in [0, 1]")


def _radius_angle(points):
    pts = np.asarray(points, dtype=float)
    r = np.hypot(pts[..., 0], pts[..., 1])
    theta = np.arctan2(pts[..., 1], pts[..., 0])
    return r, theta


def eval_trap(params: PotentialParams, points) -> np.ndarray:
    """Static trap V_pot(r) = -V0 exp(-2 m (r - 1)^2); minimum -V0 on r = 1."""
    r, _ = _radius_angle(points)
    return -params.V0 * np.exp(-2.0 * params.m * (r - 1.0) ** 2)


def eval_rotating(params: PotentialParams, t: float, points) -> np.ndarray:
    """Stirring term V_p V_pot(r) sin(n_theta theta - omega t)."""
    r, theta = _radius_angle(points)
    trap = -params.V0 * np.exp(-2.0 * params.m * (r - 1.0) ** 2)
    return params.V_p * trap * np.sin(params.n_theta * theta - params.omega * t)


def eval_total(params: PotentialParams, t: float, points) -> np.ndarray:
    """Full potential V(t, x) = trap + stirrer."""
    return eval_trap(params, points) + eval_rotating(params, t, points)


def phase_integral(params: PotentialParams, t: float, dt: float, points) -> np.ndarray:
    """Exact integral_0^dt V(t + s, x) ds.

    The trap contributes V_pot dt. For |omega| > 1e-12 the stirrer integrates
    to V_p V_pot [cos(n th - omega (t+dt)) - cos(n th - omega t)] / omega;
    below that threshold it is static and contributes V_p V_pot sin(n th) dt.
    """
    r, theta = _radius_angle(points)
    trap = -params.V0 * np.exp(-2.0 * params.m * (r - 1.0) ** 2)
    out = trap * dt
    if params.V_p != 0.0:
        phase = params.n_theta * theta
        if abs(params.omega) > OMEGA_STATIC_TOL:
            rot = (np.cos(phase - params.omega * (t + dt))
                   - np.cos(phase - params.omega * t)) / params.omega
        else:
            rot = np.sin(phase) * dt
        out = out + params.V_p * trap * rot
    return out


def trap_field(params: PotentialParams, mesh: RingMesh) -> Field:
    """Static trap sampled at circumcenters."""
    return Field(mesh, eval_trap(params, mesh.centers))


def total_field(params: PotentialParams, t: float, mesh: RingMesh) -> Field:
    """Full potential at time t sampled at circumcenters."""
    return Field(mesh, eval_total(params, t, mesh.centers))
