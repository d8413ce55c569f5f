"""Named director fields, initial deformations and experiment definitions."""

import numpy as np

from ..errors import InvalidArgumentError, SingularDirectorError

UNIT_SQUARE = ((0.0, 1.0), (0.0, 1.0))
CENTERED_SQUARE = ((-0.5, 0.5), (-0.5, 0.5))


def _center(domain):
    (x0, x1), (y0, y1) = domain
    return np.array([0.5 * (x0 + x1), 0.5 * (y0 + y1)])


def _smooth(p, domain):
    v = p + 1.0
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _defect(p, domain):
    q = p - _center(domain)
    r = np.linalg.norm(q, axis=-1)
    if np.any(r == 0.0):
        raise SingularDirectorError("degree-3/2 defect director is undefined at its centre")
    theta = np.arctan2(q[..., 1], q[..., 0])
    return np.stack([np.cos(1.5 * theta), np.sin(1.5 * theta)], axis=-1)


def _pyramid(p, domain):
    # director runs along the nearest side, counterclockwise around the centre
    q = p - _center(domain)
    (x0, x1), (y0, y1) = domain
    u = q[..., 0] / (x1 - x0)
    v = q[..., 1] / (y1 - y0)
    out = np.empty(q.shape)
    horiz = np.abs(v) >= np.abs(u)
    out[..., 0] = np.where(horiz, -np.sign(v), 0.0)
    out[..., 1] = np.where(horiz, 0.0, np.sign(u))
    # the centre itself: pick the bottom value
    zero = (u == 0) & (v == 0)
    out[zero] = (1.0, 0.0)
    return out


def _uniform_x(p, domain):
    out = np.zeros(np.shape(p))
    out[..., 0] = 1.0
    return out


DIRECTORS = {
    "smooth": _smooth,
    "defect": _defect,
    "pyramid": _pyramid,
    "pyramid_right": _pyramid,
    "uniform": _uniform_x,
}


def director_preset(name, point, domain=UNIT_SQUARE):
    """Evaluate a named director field at ``point`` (shape ``(2,)`` or ``(P, 2)``).

    Presets
    -------
    smooth
        ``(x1 + 1, x2 + 1)`` normalized.
    defect
        ``(cos 1.5 theta, sin 1.5 theta)`` about the domain centre.
    pyramid, pyramid_right
        Piecewise constant, parallel to the nearest side of the square and
        circulating counterclockwise: ``(1, 0)`` in the bottom quarter,
        ``(0, 1)`` right, ``(-1, 0)`` top, ``(0, -1)`` left. The two names
        share the field and differ only in their crease layout.
    uniform
        ``(1, 0)`` everywhere.
    """
    try:
        f = DIRECTORS[name]
    except KeyError:
        raise InvalidArgumentError("unknown director preset %r" % name) from None
    return f(np.asarray(point, dtype=float), domain)


def _bubble(x1, x2, domain):
    (a0, a1), (b0, b1) = domain
    return x1, x2, 0.8 * (x1 - a0) * (x1 - a1) * (x2 - b0) * (x2 - b1)


def _folds(x1, x2, domain):
    (a0, a1), (b0, b1) = domain
    xm = 0.5 * (a0 + a1)
    return x1, x2, 0.2 * np.cos(7 * np.pi * (x1 - xm)) * (x2 - b0) * (x2 - b1)


def _flat(x1, x2, domain):
    return x1, x2, np.zeros_like(x1)


INITIALIZERS = {"bubble": _bubble, "folds": _folds, "flat": _flat}


def initializer_preset(name, domain=UNIT_SQUARE):
    """Return ``f(x1, x2) -> (y1, y2, y3)`` for a named initial deformation.

    ``bubble`` lifts the domain by ``0.8 (x1-a0)(x1-a1)(x2-b0)(x2-b1)``;
    ``folds`` uses ``0.2 cos(7 pi (x1 - xm)) (x2-b0)(x2-b1)``; ``flat`` is the
    identity embedding.
    """
    try:
        f = INITIALIZERS[name]
    except KeyError:
        raise InvalidArgumentError("unknown initializer preset %r" % name) from None
    return lambda x1, x2: f(np.asarray(x1, float), np.asarray(x2, float), domain)


def cells_for_h(h, domain):
    """Grid cells per side for mesh-size label ``h``.

    A label ``h`` denotes a structured grid of cell width ``2h``, i.e. the
    distance from a cell corner to the cell centre along an axis is ``h``.
    """
    (x0, x1), _ = domain
    n = (x1 - x0) / (2.0 * h)
    k = int(round(n))
    if k < 1 or abs(n - k) > 1e-9 * max(1.0, n):
        raise InvalidArgumentError("h=%r does not divide the domain width into whole cells" % h)
    return k


def _exp(name, **kw):
    base = dict(
        name=name,
        domain=CENTERED_SQUARE,
        mesh="structured",
        pattern="diagonal",
        h=1.0 / 32,
        director="smooth",
        s=0.1,
        s0=1.0,
        c_r=0.0,
        c_r_crease=None,
        tau=0.8,
        tol1=1e-10,
        tol2=1e-9,
        initializer="bubble",
    )
    base.update(kw)
    return base


PRESETS = {
    "experiment1": _exp("experiment1"),
    "experiment2": _exp("experiment2", c_r=1.0),
    "experiment3": _exp("experiment3", director="defect", tau="auto"),
    "defect": _exp("defect", director="defect", c_r=1.0, h=1.0 / 128, tau="auto"),
    "pyramid1": _exp(
        "pyramid1",
        domain=UNIT_SQUARE,
        mesh="crease-fitted",
        creases="diagonals",
        h=1.0 / 64,
        director="pyramid",
        c_r=100.0,
        c_r_crease=0.0,
        tau=1.0,
        tol2=1e-6,
    ),
    "pyramid2": _exp(
        "pyramid2",
        domain=UNIT_SQUARE,
        mesh="crease-fitted",
        creases="diagonals_and_midlines",
        h=1.0 / 64,
        director="pyramid_right",
        c_r=100.0,
        c_r_crease=0.0,
        tau=0.4,
        tol2=1e-6,
    ),
    "pyramid3": _exp(
        "pyramid3",
        domain=UNIT_SQUARE,
        mesh="crease-fitted",
        creases="diagonals_and_midlines",
        h=1.0 / 64,
        director="pyramid_right",
        c_r=100.0,
        c_r_crease=0.0,
        tau=0.5,
        tol2=1e-6,
        initializer="folds",
    ),
    "pyramid4": _exp(
        "pyramid4",
        domain=UNIT_SQUARE,
        mesh="strip-mask",
        creases="diagonals",
        strip_width=0.02,
        h=1.0 / 64,
        director="pyramid",
        c_r=100.0,
        c_r_crease=0.0,
        tau=0.25,
        tol2=1e-6,
    ),
}
