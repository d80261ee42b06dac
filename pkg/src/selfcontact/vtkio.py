"""Legacy ASCII VTK output (and a minimal reader for our own files).

Unstructured grids with tetrahedral cells (VTK cell type 10), point data as
scalars or 3-vectors, cell data as scalars.  Values are written with 17
significant digits so a round trip preserves doubles.
"""

import numpy as np

from .errors import MeshError


def write_vtk(path, nodes, tets, point_data=None, cell_data=None, title="selfcontact output"):
    nodes = np.asarray(nodes, dtype=float)
    tets = np.asarray(tets, dtype=np.int64)
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write(f"{title}\n")
        f.write("ASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {len(nodes)} double\n")
        for p in nodes:
            f.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        f.write(f"\nCELLS {len(tets)} {5 * len(tets)}\n")
        for t in tets:
            f.write(f"4 {t[0]} {t[1]} {t[2]} {t[3]}\n")
        f.write(f"\nCELL_TYPES {len(tets)}\n")
        f.write("\n".join(["10"] * len(tets)))
        f.write("\n")
        if point_data:
            f.write(f"\nPOINT_DATA {len(nodes)}\n")
            for name, values in point_data.items():
                values = np.asarray(values, dtype=float)
                if values.ndim == 2 and values.shape[1] == 3:
                    f.write(f"VECTORS {name} double\n")
                    for v in values:
                        f.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
                else:
                    f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                    for v in values:
                        f.write(f"{v:.17g}\n")
        if cell_data:
            f.write(f"\nCELL_DATA {len(tets)}\n")
            for name, values in cell_data.items():
                values = np.asarray(values, dtype=float)
                f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                for v in values:
                    f.write(f"{v:.17g}\n")


def read_vtk(path):
    """Parse a legacy VTK file written by write_vtk.

    Returns (nodes, tets, point_data, cell_data); point vectors come back as
    (N, 3) arrays, scalars as flat arrays.
    """
    with open(path) as f:
        tokens = f.read().split()
    pos = 0

    def expect(word):
        nonlocal pos
        if tokens[pos].upper() != word:
            raise MeshError(f"unexpected VTK token {tokens[pos]!r}, wanted {word}")
        pos += 1

    def find(word):
        nonlocal pos
        while pos < len(tokens) and tokens[pos].upper() != word:
            pos += 1
        return pos < len(tokens)

    if not find("DATASET"):
        raise MeshError("not a VTK dataset file")
    pos += 1
    if tokens[pos].upper() != "UNSTRUCTURED_GRID":
        raise MeshError(f"unsupported dataset {tokens[pos]!r}")

    find("POINTS")
    pos += 1
    n = int(tokens[pos]); pos += 2  # skip dtype
    nodes = np.array(tokens[pos:pos + 3 * n], dtype=float).reshape(n, 3)
    pos += 3 * n

    find("CELLS")
    pos += 1
    m = int(tokens[pos]); total = int(tokens[pos + 1]); pos += 2
    raw = np.array(tokens[pos:pos + total], dtype=np.int64).reshape(m, 5)
    if not np.all(raw[:, 0] == 4):
        raise MeshError("only tetrahedral cells supported")
    tets = raw[:, 1:]
    pos += total

    point_data, cell_data = {}, {}
    section, count = None, 0
    while pos < len(tokens):
        word = tokens[pos].upper()
        if word == "POINT_DATA":
            section, count = point_data, int(tokens[pos + 1]); pos += 2
        elif word == "CELL_DATA":
            section, count = cell_data, int(tokens[pos + 1]); pos += 2
        elif word == "SCALARS" and section is not None:
            name = tokens[pos + 1]; pos += 4  # SCALARS name dtype ncomp
            expect("LOOKUP_TABLE"); pos += 1  # table name
            section[name] = np.array(tokens[pos:pos + count], dtype=float)
            pos += count
        elif word == "VECTORS" and section is not None:
            name = tokens[pos + 1]; pos += 3
            section[name] = np.array(tokens[pos:pos + 3 * count], dtype=float).reshape(count, 3)
            pos += 3 * count
        else:
            pos += 1
    return nodes, tets, point_data, cell_data
