"""Legacy-VTK (ASCII) output of deformed surfaces and a matching reader."""

import numpy as np

VTK_TRIANGLE = 5


def _fmt(x):
    return "%.17g" % x


def export_surface(y, mesh, path, title="deformed surface"):
    """Write the deformed triangulation as an ASCII unstructured grid.

    Points are the deformed nodal positions; the point scalar
    ``vertical_displacement`` is the third component of the deformation
    (the reference domain lies in the plane ``z = 0``). Numbers are printed
    with 17 significant digits so output is byte-reproducible.
    """
    P = np.asarray(y.dofs if hasattr(y, "dofs") else y, dtype=float).reshape(-1, 3)
    tris = np.asarray(mesh.triangles)
    if P.shape[0] != mesh.n_vertices:
        raise ValueError("deformation does not match the mesh")
    out = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
           "DATASET UNSTRUCTURED_GRID", "POINTS %d double" % P.shape[0]]
    out += [" ".join(map(_fmt, p)) for p in P]
    out.append("CELLS %d %d" % (tris.shape[0], 4 * tris.shape[0]))
    out += ["3 %d %d %d" % tuple(t) for t in tris]
    out.append("CELL_TYPES %d" % tris.shape[0])
    out += [str(VTK_TRIANGLE)] * tris.shape[0]
    out += ["POINT_DATA %d" % P.shape[0], "SCALARS vertical_displacement double 1",
            "LOOKUP_TABLE default"]
    out += [_fmt(z) for z in P[:, 2]]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
    return path


def read_vtk(path):
    """Parse a file written by :func:`export_surface`.

    Returns ``(points (V, 3), triangles (T, 3), scalars (V,))``.
    """
    with open(path) as fh:
        tokens = fh.read().split("\n")
    if not tokens[0].startswith("# vtk DataFile"):
        raise ValueError("not a legacy VTK file")
    it = iter(tokens[2:])
    points = tris = scalars = None
    for line in it:
        parts = line.split()
        if not parts:
            continue
        key = parts[0]
        if key == "POINTS":
            nv = int(parts[1])
            points = np.array([[float(v) for v in next(it).split()] for _ in range(nv)])
        elif key == "CELLS":
            nc = int(parts[1])
            rows = [list(map(int, next(it).split())) for _ in range(nc)]
            if any(r[0] != 3 for r in rows):
                raise ValueError("only triangular cells are supported")
            tris = np.array([r[1:] for r in rows], dtype=np.int64)
        elif key == "CELL_TYPES":
            types = [int(next(it)) for _ in range(int(parts[1]))]
            if any(t != VTK_TRIANGLE for t in types):
                raise ValueError("unexpected cell type")
        elif key == "LOOKUP_TABLE":
            scalars = np.array([float(next(it)) for _ in range(points.shape[0])])
    if points is None or tris is None:
        raise ValueError("missing POINTS or CELLS section")
    return points, tris, scalars
