"""Analytic annulus eigenfunctions and the radial mode decomposition.

Two spectral paths over the ring r_min < r < r_max:

* Bessel path: Dirichlet Laplacian eigenfunctions
  u(r, theta) = [J_a(r sqrt(l)) + c Y_a(r sqrt(l))] cos/sin(a theta), with
  sqrt(l) running over the zeros of the cross-product determinant
  f_a(x) = J_a(r_min x) Y_a(r_max x) - J_a(r_max x) Y_a(r_min x);
* finite-difference path: the radial Sturm-Liouville operator
  H = -(1/2m)(d_rr + d_r / r - ell^2 / r^2) - V0 exp(-2m(r-1)^2)
  on a uniform grid, giving the radial profiles used to build the mode
  basis Phi_{p,ell} = phi_p(r) exp(i ell theta) on the triangulation.

Snapshots are decomposed against the basis with the complex volume pairing,
keeping the phase information a real-part pairing would destroy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq
from scipy.special import jv, yv

from .errors import NumericalError
from .fv import Field, complex_pairing, norm
from .mesh import RingMesh

ROOT_XTOL = 1e-12
RESIDUAL_TOL = 1e-8


def bessel_j(order: int, x) -> np.ndarray:
    """First-kind Bessel function of integer order >= 0."""
    if not (isinstance(order, (int, np.integer)) and order >= 0):
        raise ValueError("order must be a nonnegative integer")
    return jv(order, x)


def bessel_y(order: int, x) -> np.ndarray:
    """Second-kind Bessel function of integer order >= 0, x > 0 only."""
    if not (isinstance(order, (int, np.integer)) and order >= 0):
        raise ValueError("order must be a nonnegative integer")
    if np.any(np.asarray(x) <= 0.0):
        raise ValueError("second-kind Bessel function requires x > 0")
    return yv(order, x)


@dataclass(frozen=True)
class AnnulusEigenpair:
    """One Dirichlet Laplacian eigenvalue of the ring with its mixing weight.

    The eigenfunction radial profile is J_alpha(r sqrt(lam)) +
    c Y_alpha(r sqrt(lam)); beta counts the zeros of the determinant in
    ascending order starting at 1.
    """

    alpha: int
    beta: int
    lam: float
    c: float


def _cross_determinant(alpha: int, r_min: float, r_max: float):
    def f(x):
        return (jv(alpha, r_min * x) * yv(alpha, r_max * x)
                - jv(alpha, r_max * x) * yv(alpha, r_min * x))
    return f


def annulus_eigenpairs(alpha: int, count: int, r_min: float,
                       r_max: float) -> list[AnnulusEigenpair]:
    """First `count` Dirichlet eigenvalues of -Laplace for angular order alpha.

    Zeros of the cross-product determinant are bracketed on a scan grid four
    times finer than the asymptotic zero spacing pi/(r_max - r_min), then
    refined by bisection to ROOT_XTOL.
    """
    if not (isinstance(alpha, (int, np.integer)) and alpha >= 0):
        raise ValueError("alpha must be a nonnegative integer")
    if count < 1:
        raise ValueError("count must be >= 1")
    if not 0.0 < r_min < r_max:
        raise ValueError("need 0 < r_min < r_max")

    f = _cross_determinant(alpha, r_min, r_max)
    spacing = np.pi / (r_max - r_min)
    step = spacing / 4.0
    # The first zero sits right of the order (Bessel oscillation onset).
    x_hi = (count + 2) * spacing + (alpha + 4) / r_min
    grid = np.arange(step * 1e-3, x_hi, step)
    vals = f(grid)
    roots: list[float] = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            roots.append(float(a))
        elif fa * fb < 0.0:
            roots.append(brentq(f, a, b, xtol=ROOT_XTOL))
        if len(roots) >= count:
            break
    if len(roots) < count:
        raise RuntimeError(
            f"found only {len(roots)} zeros on (0, {x_hi:.3f}] for alpha={alpha}; "
            f"asked for {count}")

    pairs = []
    for beta, x in enumerate(roots[:count], start=1):
        lam = x * x
        c = -jv(alpha, r_max * x) / yv(alpha, r_max * x)
        pairs.append(AnnulusEigenpair(alpha=int(alpha), beta=beta, lam=lam, c=float(c)))
    return pairs


def annulus_eigenfunction_field(mesh: RingMesh, pair: AnnulusEigenpair,
                                sigma: int) -> Field:
    """Eigenfunction sampled at circumcenters, L2-normalized on the mesh.

    sigma selects the angular factor: 1 for cos(alpha theta), 2 for
    sin(alpha theta) (only when alpha > 0).
    """
    if sigma not in (1, 2):
        raise ValueError("sigma must be 1 or 2")
    if sigma == 2 and pair.alpha == 0:
        raise ValueError("sigma=2 requires alpha > 0, the sine branch vanishes")
    r = np.hypot(mesh.centers[:, 0], mesh.centers[:, 1])
    theta = np.arctan2(mesh.centers[:, 1], mesh.centers[:, 0])
    root = np.sqrt(pair.lam)
    radial = jv(pair.alpha, r * root) + pair.c * yv(pair.alpha, r * root)
    angular = np.cos(pair.alpha * theta) if sigma == 1 else np.sin(pair.alpha * theta)
    u = Field(mesh, radial * angular)
    return Field(mesh, u.values / norm(u))


@dataclass(frozen=True)
class RadialProblem:
    """Interval and physical constants of the radial eigenvalue problem."""

    r_min: float
    r_max: float
    m: float
    V0: float

    def __post_init__(self):
        if not 0.0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")
        if not self.m > 0.0:
            raise ValueError("m must be positive")
        if self.V0 < 0.0:
            raise ValueError("V0 must be nonnegative")

    def grid(self, n: int) -> np.ndarray:
        """n+1 equidistant points covering [r_min, r_max]."""
        return np.linspace(self.r_min, self.r_max, n + 1)


def assemble_radial_operator(ell: int, n: int, problem: RadialProblem) -> sp.csr_matrix:
    """Interior finite-difference matrix of the radial operator, size n-1.

    Second-order central differences for both derivative terms; the Dirichlet
    boundary points are eliminated rather than kept as zero rows, so the
    spectrum has no spurious zero eigenvalues.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    r = problem.grid(n)[1:-1]
    h = (problem.r_max - problem.r_min) / n
    inv2m = 1.0 / (2.0 * problem.m)
    diag = inv2m * (2.0 / h ** 2 + ell ** 2 / r ** 2) \
        - problem.V0 * np.exp(-2.0 * problem.m * (r - 1.0) ** 2)
    sub = -inv2m * (1.0 / h ** 2 - 1.0 / (2.0 * h * r[1:]))
    sup = -inv2m * (1.0 / h ** 2 + 1.0 / (2.0 * h * r[:-1]))
    return sp.diags([sub, diag, sup], offsets=[-1, 0, 1]).tocsr()


def radial_modes(ell: int, P: int, n: int,
                 problem: RadialProblem) -> tuple[np.ndarray, np.ndarray]:
    """First P+1 radial eigenpairs for angular index ell.

    Returns eigenvalues (ascending) and eigenvectors on the full n+1 point
    grid including the zero boundary values, each vector l2-normalized with
    its largest-magnitude entry positive. The nonsymmetric tridiagonal
    operator is balanced into symmetric form by an exact diagonal similarity
    (the scaling agrees with sqrt(r) up to O(h^2)); the residual is verified
    against the original operator.
    """
    if not P >= 0:
        raise ValueError("P must be >= 0")
    if not P + 1 <= n - 1:
        raise ValueError("need P + 1 <= n - 1 interior points")
    H = assemble_radial_operator(ell, n, problem)
    dense_diag = H.diagonal()
    sub = H.diagonal(-1)
    sup = H.diagonal(1)
    if np.any(sub * sup <= 0.0):
        raise NumericalError("radial operator cannot be balanced into symmetric form")
    # d_{k+1}/d_k = sqrt(sub/sup) makes D^{-1} H D symmetric with
    # off-diagonal -sqrt(sub*sup) and unchanged diagonal.
    log_ratio = 0.5 * np.log(sub / sup)
    d = np.exp(np.concatenate(([0.0], np.cumsum(log_ratio))))
    off = -np.sqrt(sub * sup)
    w, v = eigh_tridiagonal(dense_diag, off, select="i", select_range=(0, P))

    vectors = np.zeros((P + 1, n + 1))
    for p in range(P + 1):
        phi = d * v[:, p]
        phi /= np.linalg.norm(phi)
        if phi[np.argmax(np.abs(phi))] < 0.0:
            phi = -phi
        res = np.linalg.norm(H @ phi - w[p] * phi)
        if not res <= RESIDUAL_TOL:
            raise NumericalError(
                f"radial eigenpair p={p}, ell={ell} residual {res:.3e} above contract")
        vectors[p, 1:-1] = phi
    return w.copy(), vectors


@dataclass(frozen=True)
class ModeBasis:
    """Normalized mesh samples of phi_p(r) exp(i ell theta).

    fields[p][ell + L] is the mode (p, ell); eigenvalues follows the same
    layout. Radial profiles are linearly interpolated from the grid of
    resolution n onto the circumcenter radii, then normalized in L2(T).
    """

    mesh: RingMesh
    P: int
    L: int
    n: int
    eigenvalues: np.ndarray
    fields: list[list[Field]]

    @property
    def n_modes(self) -> int:
        return (self.P + 1) * (2 * self.L + 1)

    def field(self, p: int, ell: int) -> Field:
        return self.fields[p][ell + self.L]

    def eigenvalue(self, p: int, ell: int) -> float:
        return float(self.eigenvalues[p, ell + self.L])


def mode_basis(mesh: RingMesh, P: int, L: int, n: int,
               m: float, V0: float) -> ModeBasis:
    """Build the (P+1) x (2L+1) mode family on a mesh.

    Radial problems share the interval of the mesh; profiles for -ell reuse
    the ell computation since the operator depends on ell^2 only.
    """
    problem = RadialProblem(mesh.params.r_min, mesh.params.r_max, m, V0)
    grid = problem.grid(n)
    r = np.hypot(mesh.centers[:, 0], mesh.centers[:, 1])
    theta = np.arctan2(mesh.centers[:, 1], mesh.centers[:, 0])

    eigenvalues = np.zeros((P + 1, 2 * L + 1))
    columns: dict[int, list[Field]] = {}
    for ell_abs in range(L + 1):
        lam, vecs = radial_modes(ell_abs, P, n, problem)
        samples = [np.interp(r, grid, vecs[p]) for p in range(P + 1)]
        for ell in ({ell_abs, -ell_abs} if ell_abs else {0}):
            phase = np.exp(1j * ell * theta)
            col = []
            for p in range(P + 1):
                u = Field(mesh, samples[p] * phase)
                col.append(Field(mesh, u.values / norm(u)))
                eigenvalues[p, ell + L] = lam[p]
            columns[ell] = col

    fields = [[columns[ell][p] for ell in range(-L, L + 1)] for p in range(P + 1)]
    return ModeBasis(mesh=mesh, P=P, L=L, n=n,
                     eigenvalues=eigenvalues, fields=fields)


def decompose(u: Field, basis: ModeBasis) -> np.ndarray:
    """Complex coefficient grid c[p, ell + L] = <u, Phi_{p, ell}>_T."""
    if u.mesh is not basis.mesh:
        raise ValueError("field mesh does not match basis mesh")
    c = np.zeros((basis.P + 1, 2 * basis.L + 1), dtype=np.complex128)
    for p in range(basis.P + 1):
        for j, phi in enumerate(basis.fields[p]):
            c[p, j] = complex_pairing(u, phi)
    return c
