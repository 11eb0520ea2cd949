"""Two-point flux operators and weighted inner products on a RingMesh.

The discrete Laplacian comes in two guises: A is the symmetric flux form,
A_T = diag(1/|K|) A the area-scaled form consistent with the continuous
Laplacian. A_T is self-adjoint for the area-weighted inner product and
negative (semi-)definite: its quadratic form is minus a weighted sum of
squared jumps. All of this rests on the mesh orthogonality property
(circumcenter segments perpendicular to edges).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import RingMesh

_BCS = ("dirichlet", "neumann")


@dataclass(eq=False)
class Field:
    """Per-triangle complex (or real) values tied to a mesh."""

    mesh: RingMesh
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 1 or v.shape[0] != self.mesh.n_triangles:
            raise ValueError("field length must equal the triangle count")
        if np.iscomplexobj(v):
            v = v.astype(np.complex128, copy=False)
        else:
            v = v.astype(np.float64, copy=False)
        if not np.isfinite(v).all():
            raise ValueError("field contains non-finite entries")
        self.values = v

    @classmethod
    def constant(cls, mesh: RingMesh, value: complex = 1.0) -> "Field":
        return cls(mesh, np.full(mesh.n_triangles, value))

    @classmethod
    def from_function(cls, mesh: RingMesh, fn) -> "Field":
        """Evaluate fn(x, y) at the circumcenters."""
        return cls(mesh, fn(mesh.centers[:, 0], mesh.centers[:, 1]))

    def copy(self) -> "Field":
        return Field(self.mesh, self.values.copy())

    def abs2(self) -> np.ndarray:
        return self.values.real**2 + self.values.imag**2


def _check_same_mesh(u: Field, v: Field):
    if u.mesh is not v.mesh:
        raise ValueError("fields live on different meshes")


def complex_pairing(u: Field, v: Field) -> complex:
    """Sesquilinear pairing sum_K u_K conj(v_K) |K|."""
    _check_same_mesh(u, v)
    return complex(np.sum(u.values * np.conj(v.values) * u.mesh.areas))


def inner_product(u: Field, v: Field) -> float:
    """Real part of the area-weighted pairing; the inner product of the scheme."""
    return complex_pairing(u, v).real


def norm(u: Field) -> float:
    """L2(T) norm, sqrt(sum |u_K|^2 |K|)."""
    return float(np.sqrt(np.sum(u.abs2() * u.mesh.areas)))


def normalize(u: Field) -> Field:
    n = norm(u)
    if n == 0.0:
        raise ValueError("cannot normalize the zero field")
    return Field(u.mesh, u.values / n)


@dataclass(eq=False)
class LaplacianOperator:
    """Assembled discrete Laplacian pair (A, A_T) with its boundary condition."""

    mesh: RingMesh
    bc: str
    A: sp.csr_matrix
    A_T: sp.csr_matrix

    def apply(self, u: Field) -> Field:
        if u.mesh is not self.mesh:
            raise ValueError("field mesh does not match operator mesh")
        return Field(self.mesh, self.A_T @ u.values)

    def quadratic_form(self, u: Field) -> float:
        """<u, A_T u>_T; always <= 0."""
        if u.mesh is not self.mesh:
            raise ValueError("field mesh does not match operator mesh")
        return float(np.real(np.conj(u.values) @ (self.A @ u.values)))


def assemble_laplacian(mesh: RingMesh, bc: str = "dirichlet") -> LaplacianOperator:
    """Assemble the two-point flux Laplacian on the mesh.

    Interior edge sigma between K and L contributes the flux
    |sigma| (U_L - U_K)/d_{K,L} to row K (and its negative to row L).
    Dirichlet boundary edges contribute -|sigma| U_K / d_{K,sigma} to row K
    (ghost value 0 on the boundary); Neumann boundary edges contribute nothing.
    Assembly walks edges in their stored sorted order, so the matrices are
    reproducible bit for bit.
    """
    if bc not in _BCS:
        raise ValueError(f"bc must be one of {_BCS}")
    n = mesh.n_triangles
    ie = mesh.interior_edges
    k = mesh.edge_K[ie]
    l = mesh.edge_L[ie]
    c = mesh.edge_length[ie] / mesh.edge_d[ie]

    rows = [k, l, k, l]
    cols = [l, k, k, l]
    vals = [c, c, -c, -c]
    if bc == "dirichlet":
        be = mesh.boundary_edges
        kb = mesh.edge_K[be]
        cb = mesh.edge_length[be] / mesh.edge_d[be]
        rows.append(kb)
        cols.append(kb)
        vals.append(-cb)
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    A_T = (sp.diags(1.0 / mesh.areas) @ A).tocsr()
    A_T.sort_indices()
    return LaplacianOperator(mesh=mesh, bc=bc, A=A, A_T=A_T)


def discrete_gradient(u: Field, bc: str = "dirichlet") -> np.ndarray:
    """Diamond-point gradient reconstruction, one 2-vector per triangle.

    grad(K) = (1/|K|) sum_sigma t_sigma du_sigma (x_sigma - x_K) with
    t_sigma = |sigma|/d and du the jump toward the neighbour (toward the
    ghost value 0 across Dirichlet boundary edges, zero across Neumann ones).
    Exact for affine fields on triangles with no boundary edge.
    """
    if bc not in _BCS:
        raise ValueError(f"bc must be one of {_BCS}")
    mesh = u.mesh
    vals = u.values
    out = np.zeros((mesh.n_triangles, 2),
                   dtype=np.complex128 if np.iscomplexobj(vals) else np.float64)

    ie = mesh.interior_edges
    k = mesh.edge_K[ie]
    l = mesh.edge_L[ie]
    t = mesh.edge_length[ie] / mesh.edge_d[ie]
    jump = t * (vals[l] - vals[k])
    mid = mesh.edge_mid[ie]
    np.add.at(out, k, jump[:, None] * (mid - mesh.centers[k]))
    np.add.at(out, l, -jump[:, None] * (mid - mesh.centers[l]))

    if bc == "dirichlet":
        be = mesh.boundary_edges
        kb = mesh.edge_K[be]
        tb = mesh.edge_length[be] / mesh.edge_d[be]
        jump_b = -tb * vals[kb]
        np.add.at(out, kb, jump_b[:, None] * (mesh.edge_mid[be] - mesh.centers[kb]))

    out /= mesh.areas[:, None]
    return out


def discrete_curl(mesh: RingMesh, v: np.ndarray) -> np.ndarray:
    """Discrete curl: per-triangle circulation density of a vector field.

    curl(K) = (1/|K|) sum_sigma |sigma| v(sigma) . tau_sigma with tau the unit
    tangent oriented counterclockwise around K. Accepts v per edge (shape
    (n_edges, 2)) or per triangle (shape (N, 2)); per-triangle input is
    averaged onto edges (adjacent-value mean, inside value at the boundary).
    """
    v = np.asarray(v)
    if v.ndim != 2 or v.shape[1] != 2:
        raise ValueError("vector field must have shape (*, 2)")
    if v.shape[0] == mesh.n_edges:
        v_edge = v
    elif v.shape[0] == mesh.n_triangles:
        v_edge = v[mesh.edge_K].copy()
        ie = mesh.interior_edges
        v_edge[ie] = 0.5 * (v[mesh.edge_K[ie]] + v[mesh.edge_L[ie]])
    else:
        raise ValueError("vector field length matches neither edges nor triangles")

    # |sigma| tau for side K: the exact edge vector, signed so that the
    # (outward normal, tangent) frame of K is positively oriented. Using the
    # raw vertex difference (not a normalized rotate of the normal) lets the
    # closed-loop sum for a constant field telescope to round-off.
    evec = mesh.vertices[mesh.edge_vertices[:, 1]] - mesh.vertices[mesh.edge_vertices[:, 0]]
    s = np.sign(-mesh.edge_normal[:, 1] * evec[:, 0]
                + mesh.edge_normal[:, 0] * evec[:, 1])
    circ = s * np.einsum("ij,ij->i", v_edge, evec)
    out = np.zeros(mesh.n_triangles,
                   dtype=np.complex128 if np.iscomplexobj(v) else np.float64)
    np.add.at(out, mesh.edge_K, circ)
    ie = mesh.interior_edges
    np.add.at(out, mesh.edge_L[ie], -circ[ie])
    out /= mesh.areas
    return out
