"""A-posteriori checks on computed deformations.

All checks are read-only analyses of the P1 deformation y = x + u: local
orientation (per-element determinant), the two-sided gradient bounds via
singular values, and a discrete boundary-injectivity certificate (minimal
deformed distance among boundary node pairs that are far apart in the
reference configuration).
"""

from dataclasses import dataclass, field

import numpy as np

from .fem import deformation_gradients
from .mesh import TetMesh


@dataclass
class ValidationReport:
    min_det: float
    max_sigma: float
    min_sigma: float
    min_boundary_gap: float
    nearest_pair: tuple
    gap_threshold: float
    sigma_lower: float
    sigma_upper: float
    violations: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v == 0 for v in self.violations.values())

    def lines(self):
        yield f"min det F          : {self.min_det:.6g}"
        yield f"singular values    : [{self.min_sigma:.6g}, {self.max_sigma:.6g}]"
        yield (f"min boundary gap   : {self.min_boundary_gap:.6g} "
               f"(pair {self.nearest_pair}, threshold {self.gap_threshold:.6g})")
        for name, count in self.violations.items():
            yield f"violations[{name}]: {count}"


def check_orientation(mesh: TetMesh, u: np.ndarray):
    """Per-element det F of the P1 deformation; positive means orientation kept."""
    dets = np.linalg.det(deformation_gradients(mesh, u))
    return dets, float(dets.min())


def check_singular_values(mesh: TetMesh, u: np.ndarray, lower: float = 0.5, upper: float = 2.0):
    """Extreme singular values of F per element and the indices violating [lower, upper]."""
    sv = np.linalg.svd(deformation_gradients(mesh, u), compute_uv=False)
    smax, smin = sv[:, 0], sv[:, -1]
    bad = np.where((smax > upper) | (smin < lower))[0]
    return float(smax.max()), float(smin.min()), bad


def check_boundary_gap(mesh: TetMesh, u: np.ndarray, rho: float = 1.0, chunk: int = 2048):
    """Minimum deformed distance among boundary node pairs with reference
    separation above rho/2; a positive gap certifies discrete boundary
    injectivity, and a gap at mesh scale signals (near-)interpenetration.

    Returns (gap, (node_i, node_j)).
    """
    bnodes = mesh.boundary_nodes()
    x = mesh.nodes[bnodes]
    y = x + np.asarray(u, dtype=float)[bnodes]
    best = np.inf
    pair = (-1, -1)
    for s in range(0, len(bnodes), chunk):
        dref = np.linalg.norm(x[s:s + chunk, None, :] - x[None, :, :], axis=2)
        ddef = np.linalg.norm(y[s:s + chunk, None, :] - y[None, :, :], axis=2)
        ddef[dref <= rho / 2.0] = np.inf
        i, j = np.unravel_index(np.argmin(ddef), ddef.shape)
        if ddef[i, j] < best:
            best = float(ddef[i, j])
            pair = (int(bnodes[s + i]), int(bnodes[j]))
    return best, pair


def validate_state(mesh: TetMesh, u: np.ndarray, rho: float = 1.0,
                   sigma_lower: float = 0.5, sigma_upper: float = 2.0,
                   gap_threshold: float | None = None) -> ValidationReport:
    """Run all checks; the gap threshold defaults to half the grid spacing
    (far-reference points closer than that are treated as interpenetrating).
    """
    if gap_threshold is None:
        gap_threshold = 0.5 * mesh.h
    dets, min_det = check_orientation(mesh, u)
    max_sigma, min_sigma, sigma_bad = check_singular_values(mesh, u, sigma_lower, sigma_upper)
    gap, pair = check_boundary_gap(mesh, u, rho=rho)
    violations = {
        "orientation": int((dets <= 0.0).sum()),
        "singular_values": int(len(sigma_bad)),
        "interpenetration": int(gap < gap_threshold),
    }
    return ValidationReport(min_det=min_det, max_sigma=max_sigma, min_sigma=min_sigma,
                            min_boundary_gap=gap, nearest_pair=pair,
                            gap_threshold=gap_threshold, sigma_lower=sigma_lower,
                            sigma_upper=sigma_upper, violations=violations)
