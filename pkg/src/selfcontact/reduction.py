"""Dirichlet elimination, Schur complement onto non-penetration DOFs, recovery.

The global DOF vector is node-major interleaved (dof = 3 * node + component)
and splits into the Dirichlet block D (prescribed zero), the non-penetration
block NP, and the remaining block R.  Eliminating R exactly yields the dense
reduced quadratic 0.5 u^T S u - bhat^T u - chat on the NP DOFs, whose
Cholesky factor doubles as the preconditioner.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ReductionError
from .mesh import NodeSets


def _node_dofs(nodes: np.ndarray) -> np.ndarray:
    return (3 * np.asarray(nodes, dtype=np.int64)[:, None] + np.arange(3)).ravel()


@dataclass
class DofPartition:
    """Disjoint DOF index blocks covering all 3N degrees of freedom."""

    np_nodes: np.ndarray
    dirichlet_nodes: np.ndarray
    rest_nodes: np.ndarray
    np_dofs: np.ndarray
    dirichlet_dofs: np.ndarray
    rest_dofs: np.ndarray
    num_nodes: int

    @classmethod
    def from_node_sets(cls, sets: NodeSets) -> "DofPartition":
        num_nodes = len(sets.all)
        np_nodes = np.sort(np.asarray(sets.nonpenetration, dtype=np.int64))
        dir_nodes = np.sort(np.asarray(sets.dirichlet, dtype=np.int64))
        rest = np.setdiff1d(np.arange(num_nodes), np.concatenate([np_nodes, dir_nodes]))
        return cls(
            np_nodes=np_nodes,
            dirichlet_nodes=dir_nodes,
            rest_nodes=rest,
            np_dofs=_node_dofs(np_nodes),
            dirichlet_dofs=_node_dofs(dir_nodes),
            rest_dofs=_node_dofs(rest),
            num_nodes=num_nodes,
        )


@dataclass
class ReducedSystem:
    """Schur complement S on the NP block plus everything needed for recovery.

    S = K_NP,NP - K_NP,R K_RR^-1 K_R,NP (dense symmetric positive definite),
    bhat = b_NP - K_NP,R K_RR^-1 b_R, chat = 0.5 b_R^T K_RR^-1 b_R; chol is
    upper-triangular with S = chol^T chol.
    """

    s: np.ndarray
    bhat: np.ndarray
    chat: float
    chol: np.ndarray
    partition: DofPartition
    solve_rr: Callable[[np.ndarray], np.ndarray]
    k_r_np: sp.spmatrix
    b_r: np.ndarray
    k: sp.spmatrix
    b: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.bhat)


def schur_reduce(k: sp.spmatrix, b: np.ndarray, partition: DofPartition,
                 rhs_block: int = 256) -> ReducedSystem:
    """Eliminate the R block of 0.5 u^T K u - b^T u onto the NP DOFs.

    The Schur complement is formed densely by multi-RHS solves against one
    sparse factorization of K_RR; K_RR singular (no Dirichlet data) raises
    ReductionError.
    """
    k = k.tocsr()
    rest, npd = partition.rest_dofs, partition.np_dofs
    k_rr = k[rest][:, rest].tocsc()
    k_r_np = k[rest][:, npd].tocsc()
    k_np_np = k[npd][:, npd].toarray()
    b_r = b[rest]
    try:
        lu = spla.splu(k_rr)
    except RuntimeError as exc:
        raise ReductionError(f"interior block is singular (missing Dirichlet data?): {exc}") from exc
    if not np.all(np.isfinite(lu.U.diagonal())) or np.any(lu.U.diagonal() == 0.0):
        raise ReductionError("interior block is singular (missing Dirichlet data?)")

    nnp = len(npd)
    s = k_np_np
    for start in range(0, nnp, rhs_block):
        cols = slice(start, min(start + rhs_block, nnp))
        z = lu.solve(k_r_np[:, cols].toarray())
        s[:, cols] -= k_r_np.T @ z
    s = 0.5 * (s + s.T)

    w = lu.solve(b_r)
    bhat = b[npd] - k_r_np.T @ w
    chat = 0.5 * float(b_r @ w)

    if nnp:
        try:
            chol = sla.cholesky(s, lower=False)
        except np.linalg.LinAlgError as exc:
            raise ReductionError(f"Schur complement not positive definite: {exc}") from exc
    else:
        chol = np.zeros((0, 0))
    return ReducedSystem(s=s, bhat=bhat, chat=chat, chol=chol, partition=partition,
                         solve_rr=lu.solve, k_r_np=k_r_np, b_r=b_r, k=k, b=b)


def recover_interior(sys: ReducedSystem, u_np: np.ndarray) -> np.ndarray:
    """Full nodewise displacement (N, 3) from NP values: u_R = K_RR^-1 (b_R - K_R,NP u_NP)."""
    u_np = np.ravel(u_np)
    part = sys.partition
    u = np.zeros(3 * part.num_nodes)
    u[part.np_dofs] = u_np
    u[part.rest_dofs] = sys.solve_rr(sys.b_r - sys.k_r_np @ u_np)
    return u.reshape(-1, 3)


def reduced_quadratic(sys: ReducedSystem, u_np: np.ndarray) -> float:
    """0.5 u^T S u - bhat^T u - chat; equals the full quadratic energy after recovery."""
    u_np = np.ravel(u_np)
    return 0.5 * float(u_np @ (sys.s @ u_np)) - float(sys.bhat @ u_np) - sys.chat


class Preconditioner:
    """Change of variables v = R u_NP with S = R^T R.

    In v the quadratic part of the reduced energy has identity Hessian;
    gradients pull back via g_v = R^-T g_u.
    """

    def __init__(self, sys: ReducedSystem):
        if sys.dim and not np.all(np.diag(sys.chol) > 0.0):
            raise ReductionError("Cholesky factor has nonpositive pivots")
        self._r = sys.chol

    def to_v(self, u_np: np.ndarray) -> np.ndarray:
        return self._r @ np.ravel(u_np)

    def to_u(self, v: np.ndarray) -> np.ndarray:
        if len(v) == 0:
            return np.asarray(v, dtype=float)
        return sla.solve_triangular(self._r, v, lower=False)

    def pull_gradient(self, g_u: np.ndarray) -> np.ndarray:
        if len(g_u) == 0:
            return np.asarray(g_u, dtype=float)
        return sla.solve_triangular(self._r, np.ravel(g_u), trans="T", lower=False)


def precondition_transform(sys: ReducedSystem) -> Preconditioner:
    return Preconditioner(sys)
