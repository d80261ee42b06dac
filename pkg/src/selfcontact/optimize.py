"""Total-energy minimization on the reduced non-penetration variables.

The reduced objective in preconditioned variables v = R u_NP is
f(v) = 0.5 v^T v - (R^-T bhat)^T v - chat + mu * E_surface(R^-1 v), whose
quadratic part has identity Hessian; it is minimized by dense BFGS with a
strong-Wolfe line search.  The reported objective equals the total energy
(elastic + body contribution + penalty) of the recovered full displacement.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla
from scipy.optimize import line_search as wolfe_line_search

from .errors import ConfigError, SolverError
from .fem import BodyForce, Material, assemble_load, assemble_stiffness, body_energy, elastic_energy
from .mesh import NodeSets, TetMesh
from .penalty import PenaltyConfig, SurfaceQuadrature, surface_penalty_energy, surface_penalty_gradient
from .reduction import DofPartition, ReducedSystem, Preconditioner, recover_interior, schur_reduce


@dataclass
class EnergyBreakdown:
    """Energy columns in table convention: body is the (negative) contribution -b^T u."""

    elastic: float
    penalty: float
    body: float

    @property
    def total(self) -> float:
        return self.elastic + self.penalty + self.body


@dataclass
class SolveReport:
    breakdown: EnergyBreakdown
    iterations: int
    wall_time: float
    gradient_norm: float
    converged: bool
    history: list = field(default_factory=list)


@dataclass
class OptimizerOptions:
    gtol: float = 1e-6
    max_iter: int = 500
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    # Non-interpenetration guard: a line-search trial may not bring any NP
    # pair closer than barrier_floor * epsilon * |x_i - x_j|.  Crossed states
    # are the global minima of the discretized energy, so an unguarded search
    # can tunnel through the finite penalty wall; the guard makes the contact
    # basins attracting while staying inactive at converged press depths
    # (ratios ~0.9 against a floor of 0.2).  Only applied when the penalty
    # weight is positive; None disables.
    barrier_floor: float | None = 0.2
    # Optional cap on the per-node displacement increment of one trial step,
    # in multiples of epsilon.  None (default) leaves steps uncapped.
    step_cap_factor: float | None = None
    log: bool = False


def energy_breakdown(k, b, u, penalty_eval) -> EnergyBreakdown:
    """Breakdown of the total energy at a full displacement u (N, 3)."""
    uf = np.ravel(u)
    return EnergyBreakdown(
        elastic=elastic_energy(k, uf),
        penalty=float(penalty_eval(u)),
        body=-body_energy(b, uf),
    )


def solve_linear_elastic(mesh: TetMesh, material: Material, body_force: BodyForce,
                         sets: NodeSets):
    """Direct solve of the Dirichlet-reduced sparse system (penalty off)."""
    if len(sets.dirichlet) == 0:
        raise ConfigError("linear solve requires a nonempty Dirichlet set")
    t0 = time.perf_counter()
    k = assemble_stiffness(mesh, material)
    b = assemble_load(mesh, body_force)
    fixed = (3 * np.asarray(sets.dirichlet)[:, None] + np.arange(3)).ravel()
    free = np.setdiff1d(np.arange(3 * mesh.num_nodes), fixed)
    lu = spla.splu(k[free][:, free].tocsc())
    u = np.zeros(3 * mesh.num_nodes)
    u[free] = lu.solve(b[free])
    grad_norm = float(np.abs(k[free][:, free] @ u[free] - b[free]).max())
    breakdown = energy_breakdown(k, b, u, lambda _: 0.0)
    report = SolveReport(breakdown=breakdown, iterations=1,
                         wall_time=time.perf_counter() - t0,
                         gradient_norm=grad_norm, converged=True)
    return u.reshape(-1, 3), report


def initial_symmetric(u_elast: np.ndarray) -> np.ndarray:
    """Scaled-back elastic solution, out of self-contact: u = 0.05 u_elast."""
    return 0.05 * np.asarray(u_elast, dtype=float)


def initial_asymmetric(mesh: TetMesh, sets: NodeSets) -> np.ndarray:
    """Twisted start that threads the pincer arms past each other.

    Around the center X = (3, 0.25, 1.5), with planar polar radius r and the
    continuous angle theta to the (-1, 0) direction in the (x1, x3) plane,
    the free nodes move to
    (-r cos((1+0.2T) theta), x2 + 0.3 T (x3 - 1.5), r sin((1+0.2T) theta)),
    T(x1) = 0.5 min([x1 - 3.5]^+, 2); Dirichlet nodes stay at zero.
    """
    x = mesh.nodes
    dx = x[:, 0] - 3.0
    dz = x[:, 2] - 1.5
    r = np.hypot(dx, dz)
    if np.any(r == 0.0):
        raise SolverError("mesh node coincides with the twist axis")
    phi = np.arctan2(dz, dx)
    theta = np.sign(dz) * (np.pi - np.abs(phi))
    t = 0.5 * np.minimum(np.maximum(x[:, 0] - 3.5, 0.0), 2.0)
    ang = (1.0 + 0.2 * t) * theta
    y0 = np.stack([-r * np.cos(ang),
                   x[:, 1] + 0.3 * t * dz,
                   r * np.sin(ang)], axis=1)
    u = y0 - x
    u[sets.dirichlet] = 0.0
    return u


def minimize_total(sys: ReducedSystem, quad: SurfaceQuadrature, cfg: PenaltyConfig,
                   u_init: np.ndarray, opts: OptimizerOptions | None = None):
    """BFGS on the preconditioned reduced energy; returns (u_full, report).

    u_init is a full nodewise displacement; only its NP restriction seeds the
    iteration.  With an empty NP set this degenerates to the pure linear solve.
    """
    opts = opts or OptimizerOptions()
    t0 = time.perf_counter()

    if sys.dim == 0:
        u = recover_interior(sys, np.zeros(0))
        breakdown = energy_breakdown(sys.k, sys.b, u, lambda _: 0.0)
        return u, SolveReport(breakdown=breakdown, iterations=1,
                              wall_time=time.perf_counter() - t0,
                              gradient_norm=0.0, converged=True)

    pre = Preconditioner(sys)
    x_np = quad.ref_positions
    mu = cfg.weight
    btilde = pre.pull_gradient(sys.bhat)
    nquad = len(quad.np_nodes)
    if not np.array_equal(quad.np_nodes, sys.partition.np_nodes):
        # Quadrature may drop zero-weight nodes; map into the NP DOF layout.
        sel = np.searchsorted(sys.partition.np_nodes, quad.np_nodes)
    else:
        sel = np.arange(nquad)
    sel_dofs = (3 * sel[:, None] + np.arange(3)).ravel()

    def penalty_and_grad(u_np):
        if mu == 0.0:
            return 0.0, np.zeros_like(u_np)
        y = x_np + u_np[sel_dofs].reshape(-1, 3)
        e = surface_penalty_energy(quad, y, cfg)
        g = np.zeros_like(u_np)
        g[sel_dofs] = surface_penalty_gradient(quad, y, cfg).ravel()
        return mu * e, mu * g

    def objective(v):
        u_np = pre.to_u(v)
        pen, g_u = penalty_and_grad(u_np)
        f = 0.5 * float(v @ v) - float(btilde @ v) - sys.chat + pen
        g = v - btilde + pre.pull_gradient(g_u)
        return f, g

    v = pre.to_v(np.ravel(np.asarray(u_init, dtype=float))[sys.partition.np_dofs])
    f, g = objective(v)
    if not np.isfinite(f):
        raise SolverError(f"non-finite energy at the initial iterate: {f}")

    cap = None
    if mu > 0.0 and opts.step_cap_factor is not None:
        cap = opts.step_cap_factor * cfg.epsilon

    guard_floor = None
    if mu > 0.0 and opts.barrier_floor is not None and nquad > 1:
        iu = np.triu_indices(nquad, k=1)
        ref_d = np.linalg.norm(x_np[iu[0]] - x_np[iu[1]], axis=1)
        guard_floor = opts.barrier_floor * cfg.epsilon * ref_d
        # A start already inside the nominal floor (deeply twisted initial
        # deformations) lowers the floor for those pairs instead of freezing.
        u0_np = np.ravel(np.asarray(u_init, dtype=float))[sys.partition.np_dofs]
        y0 = x_np + u0_np[sel_dofs].reshape(-1, 3)
        d0 = np.linalg.norm(y0[iu[0]] - y0[iu[1]], axis=1)
        guard_floor = np.minimum(guard_floor, 0.8 * d0)

    def guard_amax(u_np, p_u):
        # First step length at which some NP pair hits its distance floor,
        # exact for straight-line node motion: solve |y_ij + a p_ij| = floor.
        y = x_np + u_np[sel_dofs].reshape(-1, 3)
        dy = y[iu[0]] - y[iu[1]]
        dp = p_u[sel_dofs].reshape(-1, 3)
        dp = dp[iu[0]] - dp[iu[1]]
        a2 = np.einsum("ij,ij->i", dp, dp)
        b = np.einsum("ij,ij->i", dy, dp)
        c = np.einsum("ij,ij->i", dy, dy) - guard_floor**2
        disc = b * b - a2 * c
        hit = (a2 > 1e-300) & (disc >= 0.0) & (b < 0.0) & (c > 0.0)
        if not np.any(hit):
            return None
        alpha = (-b[hit] - np.sqrt(disc[hit])) / a2[hit]
        alpha = alpha[alpha > 0.0]
        # Stop a hair short of the floor so iterates stay strictly feasible.
        return 0.95 * float(alpha.min()) if len(alpha) else None

    n = len(v)
    hinv = np.eye(n)
    history = []
    converged = False
    iterations = 0
    for it in range(1, opts.max_iter + 1):
        gnorm = float(np.abs(g).max())
        if gnorm <= opts.gtol * max(1.0, abs(f)):
            converged = True
            break
        p = -(hinv @ g)
        if float(p @ g) >= 0.0:  # safeguard: reset a non-descent direction
            hinv = np.eye(n)
            p = -g
        amax = None
        p_u = pre.to_u(p)
        if cap is not None:
            p_disp = np.linalg.norm(p_u.reshape(-1, 3), axis=1).max()
            if p_disp > 0.0:
                amax = cap / p_disp
        if guard_floor is not None:
            a_guard = guard_amax(pre.to_u(v), p_u)
            if a_guard is not None:
                a_guard = max(a_guard, 1e-12)
                amax = a_guard if amax is None else min(amax, a_guard)
        ls = wolfe_line_search(lambda z: objective(z)[0], lambda z: objective(z)[1],
                               v, p, gfk=g, old_fval=f,
                               c1=opts.wolfe_c1, c2=opts.wolfe_c2, maxiter=40,
                               amax=amax)
        alpha = ls[0]
        if alpha is None:
            # Fall back to plain backtracking on the Armijo condition.
            alpha = min(1.0, amax) if amax is not None else 1.0
            dphi0 = float(g @ p)
            while alpha > 1e-16:
                f_try, _ = objective(v + alpha * p)
                if f_try <= f + opts.wolfe_c1 * alpha * dphi0:
                    break
                alpha *= 0.5
            else:
                break  # line search failure: report best iterate
        v_new = v + alpha * p
        if not np.any(v_new != v):
            break  # guard or line search collapsed the step: no progress
        f_new, g_new = objective(v_new)
        if not np.isfinite(f_new):
            raise SolverError(f"non-finite energy at iteration {it}: {f_new}")
        s = v_new - v
        yk = g_new - g
        sy = float(s @ yk)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yk):
            rho = 1.0 / sy
            sy_outer = np.outer(s, yk)
            hinv = hinv - rho * (sy_outer @ hinv) - rho * (hinv @ sy_outer.T) \
                + (rho * rho * float(yk @ (hinv @ yk)) + rho) * np.outer(s, s)
        v, f, g = v_new, f_new, g_new
        iterations = it
        history.append({"iter": it, "f": f, "gnorm_inf": float(np.abs(g).max()),
                        "step": float(alpha)})
        if opts.log:
            import json
            print(json.dumps(history[-1]))

    u = recover_interior(sys, pre.to_u(v))
    breakdown = energy_breakdown(
        sys.k, sys.b, u,
        lambda uu: mu * surface_penalty_energy(
            quad, x_np + np.ravel(uu)[sys.partition.np_dofs][sel_dofs].reshape(-1, 3), cfg)
        if mu else 0.0,
    )
    report = SolveReport(breakdown=breakdown, iterations=max(iterations, 1),
                         wall_time=time.perf_counter() - t0,
                         gradient_norm=float(np.abs(g).max()),
                         converged=converged, history=history)
    return u, report
