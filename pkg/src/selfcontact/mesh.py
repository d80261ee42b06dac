"""Structured tetrahedral meshing of the pincer domain.

The pincer is a union of three axis-aligned blocks (two long arms joined by
a short vertical bridge on the left).  Each refinement level halves the grid
spacing, every grid cube is split into six tetrahedra sharing the main cube
diagonal, and duplicate lattice nodes on the block interfaces are merged by
exact integer-lattice keys.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, MeshError

# Pincer blocks (x0, x1, y0, y1, z0, z1): upper arm, bridge, lower arm.
PINCER_BLOCKS = (
    (0.0, 6.0, 0.0, 0.5, 2.5, 3.0),
    (0.0, 0.5, 0.0, 0.5, 0.5, 2.5),
    (0.0, 6.0, 0.0, 0.5, 0.0, 0.5),
)

SUPPORTED_LEVELS = (1, 2, 3, 4)

BASE_SPACING = 0.25


def grid_spacing(level: int) -> float:
    if level not in SUPPORTED_LEVELS:
        raise ConfigError(f"unsupported level {level}; expected one of {SUPPORTED_LEVELS}")
    return BASE_SPACING / 2 ** (level - 1)


def _kuhn_templates() -> np.ndarray:
    """Corner-offset templates of the 6-tet cube subdivision, positively oriented.

    Corners are (i, j, k) offsets in {0,1}^3.  The six tetrahedra are the
    chains 0 -> e_p1 -> e_p1+e_p2 -> (1,1,1) over all axis permutations; they
    conform across translated copies of the cube.
    """
    import itertools

    tets = []
    for perm in itertools.permutations(range(3)):
        corners = [np.zeros(3, dtype=np.int64)]
        for axis in perm:
            nxt = corners[-1].copy()
            nxt[axis] += 1
            corners.append(nxt)
        corners = np.array(corners)
        d = (corners[1:] - corners[0]).astype(float)
        if np.linalg.det(d) < 0.0:
            corners[[2, 3]] = corners[[3, 2]]
        tets.append(corners)
    return np.array(tets)  # (6, 4, 3)


_KUHN = _kuhn_templates()

# Faces of a positively oriented tet (v0..v3), wound so normals point outward.
_TET_FACES = np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])


@dataclass
class TetMesh:
    """Tetrahedral mesh with oriented boundary triangles.

    nodes: (N, 3) vertex coordinates
    tets: (M, 4) vertex indices, positive signed volume each
    boundary_tris: (B, 3) vertex indices, outward orientation
    level: refinement level; h: grid spacing 0.25 / 2**(level-1)
    """

    nodes: np.ndarray
    tets: np.ndarray
    boundary_tris: np.ndarray
    level: int
    h: float

    def __post_init__(self):
        for arr in (self.nodes, self.tets, self.boundary_tris):
            arr.setflags(write=False)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def tet_volumes(self) -> np.ndarray:
        """Signed volume of every tetrahedron."""
        x = self.nodes[self.tets]
        d = x[:, 1:] - x[:, :1]
        return np.linalg.det(d) / 6.0

    def boundary_areas(self) -> np.ndarray:
        """Area of every boundary triangle."""
        x = self.nodes[self.boundary_tris]
        cross = np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def boundary_nodes(self) -> np.ndarray:
        """Sorted indices of nodes lying on the boundary surface."""
        return np.unique(self.boundary_tris)


@dataclass
class NodeSets:
    """Tagged node index sets: all, Dirichlet, and non-penetration."""

    all: np.ndarray
    dirichlet: np.ndarray
    nonpenetration: np.ndarray


def generate_pincer_mesh(level: int) -> TetMesh:
    """Mesh the pincer domain at the given refinement level.

    Vertices are the union of the three block lattices at spacing h with
    duplicates merged; every grid cube is split into six positive tets.
    """
    h = grid_spacing(level)

    block_ranges = []
    for x0, x1, y0, y1, z0, z1 in PINCER_BLOCKS:
        lo = np.array([x0, y0, z0]) / h
        hi = np.array([x1, y1, z1]) / h
        ilo = np.rint(lo).astype(np.int64)
        ihi = np.rint(hi).astype(np.int64)
        if not (np.allclose(lo, ilo) and np.allclose(hi, ihi)):
            raise ConfigError(f"grid spacing {h} does not divide block extents")
        block_ranges.append((ilo, ihi))

    # Integer lattice points of all blocks, deduplicated into sorted order.
    def lattice(ilo, ihi, cells=False):
        end = ihi if cells else ihi + 1
        axes = [np.arange(ilo[d], end[d]) for d in range(3)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return pts.reshape(-1, 3)

    all_pts = np.concatenate([lattice(*br) for br in block_ranges])
    imax = int(all_pts.max()) + 2
    keys = (all_pts[:, 0] * imax + all_pts[:, 1]) * imax + all_pts[:, 2]
    unique_keys, first = np.unique(keys, return_index=True)
    lattice_pts = all_pts[first]

    # Six tets per grid cube; cube corners resolved through the key table.
    # Ordering is deterministic: block-major, cube lexicographic, template.
    tet_blocks = []
    for ilo, ihi in block_ranges:
        base = lattice(ilo, ihi, cells=True)
        if len(base) == 0:
            continue
        pts = base[:, None, None, :] + _KUHN[None, :, :, :]
        k = (pts[..., 0] * imax + pts[..., 1]) * imax + pts[..., 2]
        tet_blocks.append(np.searchsorted(unique_keys, k).reshape(-1, 4))
    tets = np.concatenate(tet_blocks)

    nodes = lattice_pts.astype(float) * h
    mesh = TetMesh(nodes=nodes, tets=tets.astype(np.int64), boundary_tris=np.empty((0, 3), dtype=np.int64), level=level, h=h)
    tris = extract_boundary(mesh)
    return TetMesh(nodes=nodes, tets=mesh.tets, boundary_tris=tris, level=level, h=h)


def extract_boundary(mesh: TetMesh) -> np.ndarray:
    """Oriented boundary triangles: faces owned by exactly one tetrahedron."""
    faces = mesh.tets[:, _TET_FACES].reshape(-1, 3)
    keys = np.sort(faces, axis=1)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    if counts.max(initial=1) > 2:
        raise MeshError("non-manifold face shared by more than two tetrahedra")
    boundary = counts[inverse] == 1
    return faces[boundary]


def tag_node_sets(mesh: TetMesh, dirichlet_region, np_region) -> NodeSets:
    """Tag boundary nodes by region membership.

    Both predicates take an (n, 3) coordinate array and return a boolean
    mask; see config.Region.  The Dirichlet set must be nonempty (the
    elastic energy is otherwise non-coercive) and must not intersect the
    non-penetration set.
    """
    bnodes = mesh.boundary_nodes()
    coords = mesh.nodes[bnodes]
    dirichlet = bnodes[np.asarray(dirichlet_region(coords), dtype=bool)]
    nonpen = bnodes[np.asarray(np_region(coords), dtype=bool)]
    if len(dirichlet) == 0:
        raise ConfigError("Dirichlet region selects no boundary nodes")
    if np.intersect1d(dirichlet, nonpen).size:
        raise ConfigError("Dirichlet and non-penetration regions overlap")
    return NodeSets(all=np.arange(mesh.num_nodes), dirichlet=dirichlet, nonpenetration=nonpen)
