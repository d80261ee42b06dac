"""P1 tetrahedral assembly of the linear-elastic stiffness matrix and load vector.

Displacements are stored nodewise as (N, 3) arrays; the global DOF vector is
node-major interleaved, dof = 3 * node + component.  The elastic energy of a
nodal displacement u is 0.5 * u^T K u with the quadratic density
mu * |e|^2 + (lambda / 2) * tr(e)^2 of the symmetrized strain e = sym(grad u).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, MeshError
from .mesh import TetMesh


@dataclass
class Material:
    """Isotropic material; Lame parameters derived from E and nu."""

    youngs_modulus: float
    poisson_ratio: float
    lam: float = field(init=False)
    mu: float = field(init=False)

    def __post_init__(self):
        e, nu = self.youngs_modulus, self.poisson_ratio
        self.lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
        self.mu = e / (2.0 * (1.0 + nu))
        if not (self.mu > 0.0 and self.lam > -2.0 / 3.0 * self.mu):
            raise ConfigError(f"material outside the convexity range: lam={self.lam}, mu={self.mu}")


@dataclass
class BodyForce:
    """Vertical force density pressing the pincer arms together.

    profile "tips": component_3 = -g_load * H(x1-2) * H(x1-4) * sign(x3-1.5),
    active only for x1 > 4 (H(0) = 0, sign(0) = 0 at the jumps).
    profile "band" replaces H(x1-2)*H(x1-4) by H(x1-2) - H(x1-4).
    """

    g_load: float
    profile: str = "tips"

    def __post_init__(self):
        if self.profile not in ("tips", "band"):
            raise ConfigError(f"unknown body-force profile {self.profile!r}")

    def density(self, points: np.ndarray) -> np.ndarray:
        x1 = points[:, 0]
        x3 = points[:, 2]
        h2 = (x1 > 2.0).astype(float)
        h4 = (x1 > 4.0).astype(float)
        gate = h2 * h4 if self.profile == "tips" else h2 - h4
        out = np.zeros_like(points)
        out[:, 2] = -self.g_load * gate * np.sign(x3 - 1.5)
        return out


def element_geometry(mesh: TetMesh):
    """Volumes and P1 shape-function gradients, (M,) and (M, 4, 3)."""
    x = mesh.nodes[mesh.tets]
    d = x[:, 1:] - x[:, :1]
    vol = np.linalg.det(d) / 6.0
    if np.any(vol <= 0.0):
        raise MeshError("degenerate or inverted tetrahedron in assembly")
    grads = np.empty((len(mesh.tets), 4, 3))
    grads[:, 1:, :] = np.linalg.inv(d).transpose(0, 2, 1)
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
    return vol, grads


def deformation_gradients(mesh: TetMesh, u: np.ndarray) -> np.ndarray:
    """Per-element F = I + grad(u) of the P1 interpolant, (M, 3, 3)."""
    _, grads = element_geometry(mesh)
    gu = np.einsum("mia,mib->mab", u[mesh.tets], grads)
    return np.eye(3)[None] + gu


def elastic_energy_density(mesh: TetMesh, material: Material, u: np.ndarray) -> np.ndarray:
    """Per-element density mu * |e|^2 + lambda/2 * tr(e)^2."""
    _, grads = element_geometry(mesh)
    gu = np.einsum("mia,mib->mab", u[mesh.tets], grads)
    e = 0.5 * (gu + gu.transpose(0, 2, 1))
    tr = np.trace(e, axis1=1, axis2=2)
    return material.mu * np.einsum("mab,mab->m", e, e) + 0.5 * material.lam * tr**2


def assemble_stiffness(mesh: TetMesh, material: Material) -> sp.csr_matrix:
    """Global stiffness matrix K, symmetric positive semidefinite, 3N x 3N."""
    vol, g = element_geometry(mesh)
    mu, lam = material.mu, material.lam

    gg = np.einsum("mik,mjk->mij", g, g)
    # ke[m, i, a, j, b] = vol * (mu*(g_i.g_j delta_ab + g_j[a] g_i[b]) + lam*g_i[a] g_j[b])
    ke = mu * np.einsum("mij,ab->miajb", gg, np.eye(3))
    ke += mu * np.einsum("mja,mib->miajb", g, g)
    ke += lam * np.einsum("mia,mjb->miajb", g, g)
    ke *= vol[:, None, None, None, None]
    # Symmetrize exactly against round-off asymmetry of the einsum order.
    ke = 0.5 * (ke + ke.transpose(0, 3, 4, 1, 2))

    dofs = (3 * mesh.tets[:, :, None] + np.arange(3)[None, None, :]).reshape(-1, 12)
    rows = np.repeat(dofs, 12, axis=1).ravel()
    cols = np.tile(dofs, (1, 12)).ravel()
    n = 3 * mesh.num_nodes
    k = sp.coo_matrix((ke.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()
    k.sum_duplicates()
    return k


def assemble_load(mesh: TetMesh, body_force: BodyForce) -> np.ndarray:
    """Load vector b with b^T u ~ integral of g_body . u (centroid quadrature)."""
    vol, _ = element_geometry(mesh)
    centroids = mesh.nodes[mesh.tets].mean(axis=1)
    ge = body_force.density(centroids) * vol[:, None] / 4.0
    b = np.zeros((mesh.num_nodes, 3))
    for i in range(4):
        np.add.at(b, mesh.tets[:, i], ge)
    return b.ravel()


def elastic_energy(k: sp.spmatrix, u: np.ndarray) -> float:
    """0.5 * u^T K u for a flat DOF vector u."""
    u = np.ravel(u)
    if k.shape[1] != u.size:
        raise ValueError(f"dimension mismatch: K is {k.shape}, u has {u.size} entries")
    return 0.5 * float(u @ (k @ u))


def body_energy(b: np.ndarray, u: np.ndarray) -> float:
    """b^T u (the work of the body force on the displacement)."""
    u = np.ravel(u)
    if b.size != u.size:
        raise ValueError(f"dimension mismatch: b has {b.size} entries, u has {u.size}")
    return float(b @ u)
