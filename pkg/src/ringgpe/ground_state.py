"""Ground states by the normalized gradient flow.

Imaginary-time descent with a semi-implicit linearized step followed by
renormalization to the unit-mass sphere. A step is accepted only if the
energy strictly decreases; otherwise the step size kappa is halved and never
re-grown. Iteration stops when the projected gradient (the residual of the
Euler-Lagrange equation on the sphere) drops below epsilon.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import NumericalError
from .fv import Field, LaplacianOperator, inner_product, norm, normalize

# Relative residual contract for every inner linear solve.
SOLVER_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class GradientFlowConfig:
    kappa0: float = 1e-2
    epsilon: float = 5e-3
    max_iters: int = 50000
    kappa_min: float = 1e-14

    def __post_init__(self):
        if self.kappa0 <= 0.0 or self.epsilon <= 0.0:
            raise ValueError("kappa0 and epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class GroundStateResult:
    field: Field
    energies: np.ndarray
    residuals: np.ndarray
    iterations: int
    n_rejections: int
    final_kappa: float
    converged: bool

    @property
    def energy(self) -> float:
        return float(self.energies[-1])

    @property
    def residual(self) -> float:
        return float(self.residuals[-1])


def energy(u: Field, trap: Field, op: LaplacianOperator, m: float, gamma: float) -> float:
    """E(U) = -(1/2m) <U, A_T U> + <U, V U> + (gamma/2) <U, |U|^2 U>."""
    a = u.mesh.areas
    dens = u.abs2()
    kin = -0.5 / m * op.quadratic_form(u)
    pot = float(np.sum(trap.values.real * dens * a))
    quart = 0.5 * gamma * float(np.sum(dens * dens * a))
    return kin + pot + quart


def energy_gradient(u: Field, trap: Field, op: LaplacianOperator,
                    m: float, gamma: float) -> Field:
    """Gradient for the area-weighted real inner product:
    -(1/m) A_T U + 2 V U + 2 gamma |U|^2 U."""
    g = (-1.0 / m) * (op.A_T @ u.values) \
        + 2.0 * trap.values.real * u.values \
        + 2.0 * gamma * u.abs2() * u.values
    return Field(u.mesh, g)


def residual_criterion(u: Field, grad: Field) -> float:
    """Norm of the gradient projected on the tangent of the unit sphere at u."""
    proj = grad.values - inner_product(grad, u) * u.values
    return norm(Field(u.mesh, proj))


def _solve_checked(lu, mat, rhs):
    # Real factorization; complex right-hand sides split into two solves.
    if np.iscomplexobj(rhs):
        x = lu.solve(rhs.real) + 1j * lu.solve(rhs.imag)
    else:
        x = lu.solve(rhs)
    scale = np.linalg.norm(rhs)
    res = np.linalg.norm(mat @ x - rhs) / scale
    if res > SOLVER_RESIDUAL_TOL:
        # One pass of iterative refinement before giving up.
        d = rhs - mat @ x
        if np.iscomplexobj(d):
            x = x + lu.solve(d.real) + 1j * lu.solve(d.imag)
        else:
            x = x + lu.solve(d)
        res = np.linalg.norm(mat @ x - rhs) / scale
        if res > SOLVER_RESIDUAL_TOL:
            raise NumericalError(f"linear solve residual {res:.3e} above contract")
    return x


def gradient_flow_step(u: Field, trap: Field, op: LaplacianOperator,
                       m: float, gamma: float, kappa: float) -> Field:
    """One semi-implicit descent step followed by renormalization.

    Solves (I - kappa [(1/m) A_T - 2V - 2 gamma |U^n|^2]) W = U^n and returns
    W / ||W||. The linearization freezes the density at the current iterate.
    """
    n = u.mesh.n_triangles
    diag = kappa * (2.0 * trap.values.real + 2.0 * gamma * u.abs2())
    mat = (sp.identity(n, format="csr")
           - (kappa / m) * op.A_T
           + sp.diags(diag)).tocsc()
    w = _solve_checked(splu(mat), mat, u.values)
    return normalize(Field(u.mesh, w))


def compute_ground_state(trap: Field, op: LaplacianOperator, m: float, gamma: float,
                         config: GradientFlowConfig = GradientFlowConfig(),
                         u0: Field | None = None) -> GroundStateResult:
    """Run the normalized gradient flow to the stopping residual.

    Starts from the normalized constant field unless u0 is given. Raises
    NumericalError if kappa underflows config.kappa_min (the flow can no
    longer decrease the energy); returns converged=False if max_iters runs
    out first.
    """
    mesh = op.mesh
    if trap.mesh is not mesh or (u0 is not None and u0.mesh is not mesh):
        raise ValueError("trap/initial field mesh does not match operator mesh")
    u = normalize(u0 if u0 is not None else Field.constant(mesh, 1.0))

    e = energy(u, trap, op, m, gamma)
    res = residual_criterion(u, energy_gradient(u, trap, op, m, gamma))
    energies = [e]
    residuals = [res]
    kappa = config.kappa0
    rejections = 0
    iterations = 0
    converged = res <= config.epsilon

    while not converged and iterations < config.max_iters:
        candidate = gradient_flow_step(u, trap, op, m, gamma, kappa)
        e_new = energy(candidate, trap, op, m, gamma)
        if e_new < e:
            u = candidate
            e = e_new
            iterations += 1
            res = residual_criterion(u, energy_gradient(u, trap, op, m, gamma))
            energies.append(e)
            residuals.append(res)
            converged = res <= config.epsilon
        else:
            rejections += 1
            kappa *= 0.5
            if kappa < config.kappa_min:
                raise NumericalError(
                    f"gradient-flow step size underflow (kappa={kappa:.3e}) "
                    f"at iteration {iterations}, residual {res:.3e}")

    return GroundStateResult(
        field=u,
        energies=np.asarray(energies),
        residuals=np.asarray(residuals),
        iterations=iterations,
        n_rejections=rejections,
        final_kappa=kappa,
        converged=converged,
    )
