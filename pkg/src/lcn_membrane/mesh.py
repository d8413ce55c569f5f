"""Structured triangulations of rectangles with interior-edge adjacency.

Two cell patterns are supported: ``"diagonal"`` splits each grid cell along
its lower-left to upper-right diagonal, ``"crisscross"`` adds a node at the
cell centre and splits the cell into four triangles. The criss-cross pattern
contains both diagonals of every cell, so on an ``n x n`` grid of a square it
is fitted to the two diagonals of the square.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError, UnfittedCreaseError


def _frozen(a, dtype=None):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CreaseSpec:
    """Folding set given as a list of segments ``((x0, y0), (x1, y1))``.

    ``subdomain_labels`` is filled in by :func:`crease_fitted_square`.
    """

    segments: tuple
    subdomain_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        segs = np.asarray(self.segments, dtype=float).reshape(-1, 2, 2)
        object.__setattr__(
            self, "segments", tuple(tuple(tuple(map(float, pt)) for pt in seg) for seg in segs)
        )

    @property
    def array(self):
        return np.asarray(self.segments, dtype=float).reshape(-1, 2, 2)

    @classmethod
    def square_diagonals(cls, domain=((0.0, 1.0), (0.0, 1.0))):
        (x0, x1), (y0, y1) = domain
        return cls(segments=(((x0, y0), (x1, y1)), ((x0, y1), (x1, y0))))

    @classmethod
    def diagonals_and_midlines(cls, domain=((0.0, 1.0), (0.0, 1.0))):
        (x0, x1), (y0, y1) = domain
        xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        return cls(
            segments=(
                ((x0, y0), (x1, y1)),
                ((x0, y1), (x1, y0)),
                ((xm, y0), (xm, y1)),
                ((x0, ym), (x1, ym)),
            )
        )


@dataclass(frozen=True)
class TriMesh:
    """Conforming triangulation with edge adjacency and geometric factors.

    Interior edge ``k`` joins ``edge_vertices[k] = (a, b)`` with ``a < b``;
    ``edge_left[k]`` is the triangle that traverses ``a -> b``
    counterclockwise and ``edge_normal[k]`` points from the left triangle to
    the right one.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edge_vertices: np.ndarray
    edge_left: np.ndarray
    edge_right: np.ndarray
    edge_length: np.ndarray
    edge_normal: np.ndarray
    boundary_edges: np.ndarray
    boundary_owner: np.ndarray
    crease_edge: np.ndarray
    subdomain: Optional[np.ndarray] = None
    areas: np.ndarray = field(init=False, repr=False)
    grad_basis: np.ndarray = field(init=False, repr=False)
    barycenters: np.ndarray = field(init=False, repr=False)
    h_max: float = field(init=False)

    def __post_init__(self):
        p = self.vertices[self.triangles]  # (T, 3, 2)
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(det <= 0):
            raise InvalidArgumentError("triangles must be counterclockwise and non-degenerate")
        # gradients of the barycentric basis functions, (T, 3, 2)
        grads = np.empty((len(det), 3, 2))
        grads[:, 1] = np.stack([e2[:, 1], -e2[:, 0]], axis=1) / det[:, None]
        grads[:, 2] = np.stack([-e1[:, 1], e1[:, 0]], axis=1) / det[:, None]
        grads[:, 0] = -grads[:, 1] - grads[:, 2]
        lengths = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)
        object.__setattr__(self, "areas", _frozen(0.5 * det))
        object.__setattr__(self, "grad_basis", _frozen(grads))
        object.__setattr__(self, "barycenters", _frozen(p.mean(axis=1)))
        object.__setattr__(self, "h_max", float(lengths.max()))

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @property
    def n_interior_edges(self):
        return self.edge_vertices.shape[0]

    @property
    def n_dofs(self):
        return 3 * self.vertices.shape[0]

    @property
    def area(self):
        return float(self.areas.sum())

    def all_edges(self):
        """Interior edges followed by boundary edges, as vertex pairs."""
        return np.vstack([self.edge_vertices, self.boundary_edges])

    @classmethod
    def from_arrays(cls, vertices, triangles, crease_edge=None, subdomain=None):
        vertices = np.asarray(vertices, dtype=float)
        triangles = np.asarray(triangles, dtype=np.int64)
        T = triangles.shape[0]
        oriented = np.stack(
            [triangles, np.roll(triangles, -1, axis=1)], axis=2
        ).reshape(-1, 2)
        owner = np.repeat(np.arange(T), 3)
        key = np.sort(oriented, axis=1)
        uniq, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.ravel()
        if np.any(counts > 2):
            raise InvalidArgumentError("non-manifold edge in triangulation")
        forward = oriented[:, 0] < oriented[:, 1]
        n_e = uniq.shape[0]
        left = np.full(n_e, -1, dtype=np.int64)
        right = np.full(n_e, -1, dtype=np.int64)
        left[inverse[forward]] = owner[forward]
        right[inverse[~forward]] = owner[~forward]
        interior = counts == 2
        if np.any(interior & ((left < 0) | (right < 0))):
            raise InvalidArgumentError("inconsistent triangle orientation")
        ev = uniq[interior]
        d = vertices[ev[:, 1]] - vertices[ev[:, 0]]
        length = np.linalg.norm(d, axis=1)
        normal = np.stack([d[:, 1], -d[:, 0]], axis=1) / length[:, None]
        bmask = ~interior
        bowner = np.where(left[bmask] >= 0, left[bmask], right[bmask])
        if crease_edge is None:
            crease_edge = np.zeros(ev.shape[0], dtype=bool)
        return cls(
            vertices=_frozen(vertices),
            triangles=_frozen(triangles),
            edge_vertices=_frozen(ev),
            edge_left=_frozen(left[interior]),
            edge_right=_frozen(right[interior]),
            edge_length=_frozen(length),
            edge_normal=_frozen(normal),
            boundary_edges=_frozen(uniq[bmask]),
            boundary_owner=_frozen(bowner),
            crease_edge=_frozen(np.asarray(crease_edge, dtype=bool)),
            subdomain=None if subdomain is None else _frozen(subdomain, np.int64),
        )

    def with_creases(self, crease_edge, subdomain=None):
        return TriMesh(
            vertices=self.vertices,
            triangles=self.triangles,
            edge_vertices=self.edge_vertices,
            edge_left=self.edge_left,
            edge_right=self.edge_right,
            edge_length=self.edge_length,
            edge_normal=self.edge_normal,
            boundary_edges=self.boundary_edges,
            boundary_owner=self.boundary_owner,
            crease_edge=_frozen(np.asarray(crease_edge, dtype=bool)),
            subdomain=None if subdomain is None else _frozen(subdomain, np.int64),
        )


def structured_square(n, domain=((0.0, 1.0), (0.0, 1.0)), pattern="diagonal", ny=None):
    """Uniform triangulation of an axis-aligned rectangle.

    Parameters
    ----------
    n : int
        Number of cells along x (and along y unless ``ny`` is given).
    domain : ((x0, x1), (y0, y1))
    pattern : {"diagonal", "crisscross"}
    ny : int, optional
        Cells along y; a value different from ``n`` yields a grid whose cell
        diagonals are not parallel to the diagonals of a square domain.
    """
    ny = n if ny is None else ny
    if int(n) != n or int(ny) != ny or n < 1 or ny < 1:
        raise InvalidArgumentError("subdivision count must be a positive integer, got %r" % n)
    n, ny = int(n), int(ny)
    (x0, x1), (y0, y1) = domain
    if not (x1 > x0 and y1 > y0):
        raise InvalidArgumentError("empty domain %r" % (domain,))
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    corners = np.column_stack([X.ravel(), Y.ravel()])
    I, Jc = np.meshgrid(np.arange(n), np.arange(ny), indexing="xy")
    I, Jc = I.ravel(), Jc.ravel()
    v00 = Jc * (n + 1) + I
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    if pattern == "diagonal":
        tris = np.concatenate(
            [np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])]
        )
        verts = corners
    elif pattern == "crisscross":
        centers = np.column_stack(
            [0.5 * (xs[I] + xs[I + 1]), 0.5 * (ys[Jc] + ys[Jc + 1])]
        )
        c = corners.shape[0] + np.arange(n * ny)
        tris = np.concatenate(
            [
                np.column_stack([v00, v10, c]),
                np.column_stack([v10, v11, c]),
                np.column_stack([v11, v01, c]),
                np.column_stack([v01, v00, c]),
            ]
        )
        verts = np.vstack([corners, centers])
    else:
        raise InvalidArgumentError("unknown pattern %r" % pattern)
    return TriMesh.from_arrays(verts, tris)


def _segments_cover(mesh, segments, tol=1e-12):
    """Flag interior edges lying on a segment and the covered length per segment."""
    segs = np.asarray(segments, dtype=float).reshape(-1, 2, 2)
    scale = max(np.ptp(mesh.vertices[:, 0]), np.ptp(mesh.vertices[:, 1]))
    edges = mesh.all_edges()
    a = mesh.vertices[edges[:, 0]]
    b = mesh.vertices[edges[:, 1]]
    on = np.zeros((segs.shape[0], edges.shape[0]), dtype=bool)
    covered = np.zeros(segs.shape[0])
    for k, (p, q) in enumerate(segs):
        d = q - p
        L = np.linalg.norm(d)
        if L == 0:
            raise InvalidArgumentError("zero-length crease segment")
        t = d / L
        nrm = np.array([-t[1], t[0]])
        da = (a - p) @ nrm
        db = (b - p) @ nrm
        sa = (a - p) @ t
        sb = (b - p) @ t
        eps = tol * scale
        hit = (
            (np.abs(da) <= eps)
            & (np.abs(db) <= eps)
            & (np.minimum(sa, sb) >= -eps)
            & (np.maximum(sa, sb) <= L + eps)
        )
        on[k] = hit
        covered[k] = np.abs(sb[hit] - sa[hit]).sum() / L
    n_int = mesh.n_interior_edges
    return on[:, :n_int].any(axis=0), covered


def _label_components(mesh, crease_edge):
    """Connected components of triangles glued along non-crease interior edges."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    keep = ~np.asarray(crease_edge, dtype=bool)
    T = mesh.n_triangles
    A = coo_matrix(
        (np.ones(keep.sum()), (mesh.edge_left[keep], mesh.edge_right[keep])), shape=(T, T)
    )
    _, labels = connected_components(A, directed=False)
    return labels


def crease_fitted_square(n, creases, domain=((0.0, 1.0), (0.0, 1.0))):
    """Criss-cross mesh of ``domain`` whose edges cover every crease segment.

    Returns the mesh with ``crease_edge`` flags and ``subdomain`` labels set
    (labels are the connected components left after cutting along the
    creases).

    Raises
    ------
    UnfittedCreaseError
        If some segment is not a union of mesh edges at this resolution.
    """
    mesh = structured_square(n, domain, pattern="crisscross")
    flags, covered = _segments_cover(mesh, creases.array)
    bad = np.flatnonzero(np.abs(covered - 1.0) > 1e-10)
    if bad.size:
        raise UnfittedCreaseError(
            "crease segment %d is not covered by mesh edges at n=%d (covered fraction %.3f)"
            % (bad[0], n, covered[bad[0]])
        )
    labels = _label_components(mesh, flags)
    return mesh.with_creases(flags, labels)


def is_fitted(mesh, creases):
    _, covered = _segments_cover(mesh, creases.array)
    return bool(np.all(np.abs(covered - 1.0) <= 1e-10))


def point_segment_distance(points, segments):
    """Distance from each point to the union of segments, shape ``(P,)``."""
    pts = np.asarray(points, dtype=float)
    segs = np.asarray(segments, dtype=float).reshape(-1, 2, 2)
    best = np.full(pts.shape[0], np.inf)
    for p, q in segs:
        d = q - p
        t = np.clip(((pts - p) @ d) / (d @ d), 0.0, 1.0)
        dist = np.linalg.norm(pts - (p + t[:, None] * d), axis=1)
        best = np.minimum(best, dist)
    return best


def crease_strip_mask(mesh, creases, d):
    """Triangles whose barycentre lies strictly within distance ``d`` of the creases."""
    if not d > 0:
        raise InvalidArgumentError("strip half-width must be positive")
    return point_segment_distance(mesh.barycenters, creases.array) < d


def write_mesh_txt(mesh, path):
    """Plain-text dump: ``x y`` per vertex, a blank line, then ``i j k`` per triangle."""
    with open(path, "w") as fh:
        for x, y in mesh.vertices:
            fh.write("%r %r\n" % (float(x), float(y)))
        fh.write("\n")
        for i, j, k in mesh.triangles:
            fh.write("%d %d %d\n" % (i, j, k))


def read_mesh_txt(path):
    with open(path) as fh:
        text = fh.read()
    head, _, tail = text.partition("\n\n")
    verts = np.array([list(map(float, ln.split())) for ln in head.splitlines() if ln.strip()])
    tris = np.array([list(map(int, ln.split())) for ln in tail.splitlines() if ln.strip()])
    return TriMesh.from_arrays(verts, tris)
