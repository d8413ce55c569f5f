"""Blueprinted director data and the membrane stretching energy density.

All routines broadcast over leading batch dimensions, so per-element
arrays (``m`` of shape ``(T, 2)``, ``s`` of shape ``(T,)``, ``F`` of shape
``(T, 3, 2)``) are evaluated in one call.

The production path evaluates the density through the first fundamental
form ``C = F^T F``::

    W = k1 (tr C + 1/det C) + k2 m.Cm + k3 |Cm|^2 / m.Cm - 3

which is algebraically identical to the trace formula
``|L_n^{-1/2} [F, b] L_m^{1/2}|^2 - 3`` (see :func:`density_W_trace`)
and makes frame indifference and the derivatives explicit.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateElementError, InvalidMaterialError

J_FLOOR = 1e-10


def _check_order(*values):
    for v in values:
        v = np.asarray(v, dtype=float)
        if np.any(~np.isfinite(v)) or np.any(v <= -1.0):
            raise InvalidMaterialError(
                "order parameters must satisfy s > -1 and s0 > -1; got min %r"
                % float(np.min(v))
            )


def actuation(s, s0):
    """Actuation parameter ``lambda = ((s + 1) / (s0 + 1))**(1/3)``."""
    _check_order(s, s0)
    return np.cbrt((np.asarray(s, float) + 1.0) / (np.asarray(s0, float) + 1.0))


def perp(m):
    """Rotate 2-vectors by +90 degrees."""
    m = np.asarray(m, dtype=float)
    return np.stack([-m[..., 1], m[..., 0]], axis=-1)


def target_metric(m, lam):
    """``g = lam^2 m(x)m + lam^-1 m_perp(x)m_perp``, shape ``(..., 2, 2)``."""
    m = np.asarray(m, dtype=float)
    lam = np.asarray(lam, dtype=float)[..., None, None]
    mp = perp(m)
    return lam**2 * (m[..., :, None] * m[..., None, :]) + (
        mp[..., :, None] * mp[..., None, :]
    ) / lam


def _embed(m):
    m = np.asarray(m, dtype=float)
    return np.concatenate([m, np.zeros(m.shape[:-1] + (1,))], axis=-1)


def _two_level(v, along, across):
    # along * v(x)v + across * (I - v(x)v)
    along = np.asarray(along, float)[..., None, None]
    across = np.asarray(across, float)[..., None, None]
    vv = v[..., :, None] * v[..., None, :]
    return along * vv + across * (np.eye(3) - vv)


def step_tensor_m(m, s0):
    """Reference step-length tensor ``(s0+1)^(-1/3) (I + s0 m^ (x) m^)``."""
    _check_order(s0)
    mh = _embed(m)
    s0 = np.asarray(s0, float)
    scale = (s0 + 1.0) ** (-1.0 / 3.0)
    return scale[..., None, None] * (
        np.eye(3) + s0[..., None, None] * mh[..., :, None] * mh[..., None, :]
    )


def step_tensor_n(n, s):
    """Deformed step-length tensor ``(s+1)^(-1/3) (I + s n (x) n)``."""
    _check_order(s)
    n = np.asarray(n, float)
    s = np.asarray(s, float)
    scale = (s + 1.0) ** (-1.0 / 3.0)
    return scale[..., None, None] * (
        np.eye(3) + s[..., None, None] * n[..., :, None] * n[..., None, :]
    )


def step_tensor_m_sqrt(m, s0):
    """Square root of the reference step-length tensor (unimodular, SPD)."""
    _check_order(s0)
    sig0 = np.asarray(s0, float) + 1.0
    return _two_level(_embed(m), sig0 ** (1.0 / 3.0), sig0 ** (-1.0 / 6.0))


def step_tensor_n_inv_sqrt(n, s):
    """Inverse square root of the deformed step-length tensor."""
    _check_order(s)
    sig = np.asarray(s, float) + 1.0
    return _two_level(np.asarray(n, float), sig ** (-1.0 / 3.0), sig ** (1.0 / 6.0))


@dataclass(frozen=True)
class FrameQuantities:
    n: np.ndarray  # deformed director F m / |F m|
    J: np.ndarray  # det(F^T F)
    b: np.ndarray  # (F_1 x F_2) / J


def _raise_degenerate(J):
    J = np.atleast_1d(J)
    bad = np.flatnonzero(~(J >= J_FLOOR))
    k = int(bad[0])
    raise DegenerateElementError(
        "degenerate element: det(F^T F) = %.3e below floor %.1e" % (J.flat[k], J_FLOOR),
        value=float(J.flat[k]),
        element=k,
    )


def frame(F, m):
    """Deformed director, area factor ``J`` and scaled normal for ``F`` (3x2)."""
    F = np.asarray(F, dtype=float)
    m = np.asarray(m, dtype=float)
    cross = np.cross(F[..., :, 0], F[..., :, 1])
    J = np.einsum("...i,...i->...", cross, cross)
    if not np.all(J >= J_FLOOR):
        _raise_degenerate(J)
    u = np.einsum("...ia,...a->...i", F, m)
    n = u / np.linalg.norm(u, axis=-1, keepdims=True)
    return FrameQuantities(n=n, J=J, b=cross / J[..., None])


def _coefficients(s, s0):
    _check_order(s, s0)
    sig = np.asarray(s, float) + 1.0
    sig0 = np.asarray(s0, float) + 1.0
    k1 = np.cbrt(sig / sig0)
    k2 = sig ** (-2.0 / 3.0) * (sig0 ** (2.0 / 3.0) - sig0 ** (-1.0 / 3.0))
    k3 = (sig ** (-2.0 / 3.0) - sig ** (1.0 / 3.0)) * sig0 ** (-1.0 / 3.0)
    return k1, k2, k3


def metric_components(F):
    """Entries ``(c11, c22, c12)`` of ``C = F^T F`` for ``F`` of shape ``(..., 3, 2)``."""
    F1 = F[..., :, 0]
    F2 = F[..., :, 1]
    c11 = np.einsum("...i,...i->...", F1, F1)
    c22 = np.einsum("...i,...i->...", F2, F2)
    c12 = np.einsum("...i,...i->...", F1, F2)
    return c11, c22, c12


def density_in_metric(c11, c22, c12, m, s, s0, order=2):
    """Energy density as a function of ``C = F^T F`` and its derivatives.

    ``W = k1 (tr C + 1/det C) + k2 m.Cm + k3 |Cm|^2 / m.Cm - 3`` with
    constants depending on ``s`` and ``s0`` only. Derivatives are taken with
    respect to the independent entries ``(c11, c22, c12)``.

    Returns
    -------
    tuple
        ``(W,)``, ``(W, g)`` or ``(W, g, H)`` with ``g`` of shape ``(..., 3)``
        and ``H`` of shape ``(..., 3, 3)``.
    """
    k1, k2, k3 = _coefficients(s, s0)
    det = c11 * c22 - c12 * c12
    if not np.all(det >= J_FLOOR):
        _raise_degenerate(det)
    m = np.asarray(m, dtype=float)
    m1 = m[..., 0]
    m2 = m[..., 1]
    p = m1 * m1 * c11 + m2 * m2 * c22 + 2.0 * m1 * m2 * c12
    w1 = c11 * m1 + c12 * m2
    w2 = c12 * m1 + c22 * m2
    q = w1 * w1 + w2 * w2
    W = k1 * (c11 + c22 + 1.0 / det) + k2 * p + k3 * q / p - 3.0
    if order == 0:
        return (W,)

    gd = np.stack([c22, c11, -2.0 * c12], axis=-1)
    gp = np.stack([m1 * m1, m2 * m2, 2.0 * m1 * m2], axis=-1)
    zero = np.zeros_like(p)
    gw1 = np.stack([m1 + zero, zero, m2 + zero], axis=-1)
    gw2 = np.stack([zero, m2 + zero, m1 + zero], axis=-1)
    gq = 2.0 * (w1[..., None] * gw1 + w2[..., None] * gw2)
    ones = np.stack([zero + 1.0, zero + 1.0, zero], axis=-1)
    pe = p[..., None]
    g = (
        k1[..., None] * (ones - gd / (det**2)[..., None])
        + k2[..., None] * gp
        + k3[..., None] * (gq / pe - q[..., None] * gp / pe**2)
    )
    if order == 1:
        return W, g

    outer = lambda a, b: a[..., :, None] * b[..., None, :]  # noqa: E731
    Hd = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -2.0]])
    d2, d3 = (det**2)[..., None, None], (det**3)[..., None, None]
    H_invdet = 2.0 * outer(gd, gd) / d3 - Hd / d2
    Hq = 2.0 * (outer(gw1, gw1) + outer(gw2, gw2))
    pp = p[..., None, None]
    gqp = outer(gq, gp)
    H_ratio = (
        Hq / pp
        - (gqp + np.swapaxes(gqp, -1, -2)) / pp**2
        + 2.0 * q[..., None, None] * outer(gp, gp) / pp**3
    )
    H = k1[..., None, None] * H_invdet + k3[..., None, None] * H_ratio
    return W, g, H


def density_derivatives(F, m, s, s0, order=2):
    """Energy density and its derivatives with respect to ``F``.

    Parameters
    ----------
    F : array_like, shape (..., 3, 2)
    m : array_like, shape (..., 2)
        Unit blueprinted director.
    s, s0 : array_like, shape (...)
    order : {0, 1, 2}

    Returns
    -------
    tuple
        ``(W,)``, ``(W, dW)`` or ``(W, dW, d2W)`` with ``dW`` of shape
        ``(..., 3, 2)`` and ``d2W`` of shape ``(..., 3, 2, 3, 2)``.

    Raises
    ------
    DegenerateElementError
        If ``det(F^T F) < J_FLOOR`` anywhere.
    """
    F = np.asarray(F, dtype=float)
    out = density_in_metric(*metric_components(F), m, s, s0, order=order)
    if order == 0:
        return out
    W, g = out[0], out[1]
    F1 = F[..., :, 0]
    F2 = F[..., :, 1]
    g11, g22, g12 = g[..., 0], g[..., 1], g[..., 2]
    dW = np.empty(F.shape)
    dW[..., :, 0] = 2.0 * g11[..., None] * F1 + g12[..., None] * F2
    dW[..., :, 1] = 2.0 * g22[..., None] * F2 + g12[..., None] * F1
    if order == 1:
        return W, dW

    # rows of d(c11, c22, c12)/dF as 6-vectors laid out [column a][component i]
    Z = np.zeros_like(F1)
    r11 = np.stack([2.0 * F1, Z], axis=-2)
    r22 = np.stack([Z, 2.0 * F2], axis=-2)
    r12 = np.stack([F2, F1], axis=-2)
    R = np.stack([r11, r22, r12], axis=-3).reshape(F.shape[:-2] + (3, 6))
    H6 = np.einsum("...ka,...kl,...lb->...ab", R, out[2], R)
    eye3 = np.eye(3)
    H6[..., 0:3, 0:3] += 2.0 * g11[..., None, None] * eye3
    H6[..., 3:6, 3:6] += 2.0 * g22[..., None, None] * eye3
    H6[..., 0:3, 3:6] += g12[..., None, None] * eye3
    H6[..., 3:6, 0:3] += g12[..., None, None] * eye3
    # [a, i, b, j] -> [i, a, j, b]
    d2W = H6.reshape(F.shape[:-2] + (2, 3, 2, 3)).transpose(
        tuple(range(F.ndim - 2)) + tuple(F.ndim - 2 + k for k in (1, 0, 3, 2))
    )
    return W, dW, np.ascontiguousarray(d2W)


def density_W(F, m, s, s0):
    """Stretching energy density ``W(F)``; nonnegative, zero iff ``F^T F = g``."""
    return density_derivatives(F, m, s, s0, order=0)[0]


def density_grad(F, m, s, s0):
    """``dW/dF`` with the same shape as ``F``."""
    return density_derivatives(F, m, s, s0, order=1)[1]


def density_hess(F, m, s, s0):
    """``d2W/dF2`` flattened to ``(..., 6, 6)`` in row-major order of ``F``."""
    H = density_derivatives(F, m, s, s0, order=2)[2]
    return H.reshape(H.shape[:-4] + (6, 6))


def density_W_trace(F, m, s, s0):
    """The trace formula evaluated literally with explicit 3x3 matrices.

    Slower than :func:`density_W`; kept as an independent evaluation path.
    """
    F = np.asarray(F, dtype=float)
    fq = frame(F, m)
    A = np.concatenate([F, fq.b[..., :, None]], axis=-1)
    M = step_tensor_n_inv_sqrt(fq.n, s) @ A @ step_tensor_m_sqrt(m, s0)
    return np.einsum("...ij,...ij->...", M, M) - 3.0


def coercivity_constant(s, s0):
    """``lambda_min(L_m) / lambda_max(L_n)`` from the explicit spectra."""
    _check_order(s, s0)
    sig = np.asarray(s, float) + 1.0
    sig0 = np.asarray(s0, float) + 1.0
    lm = np.minimum(sig0 ** (2.0 / 3.0), sig0 ** (-1.0 / 3.0))
    ln = np.maximum(sig ** (2.0 / 3.0), sig ** (-1.0 / 3.0))
    return lm / ln


@dataclass
class MaterialField:
    """Per-element director, order parameters and regularization weight."""

    m: np.ndarray
    s: np.ndarray
    s0: np.ndarray
    c_r: np.ndarray

    def __post_init__(self):
        self.m = np.atleast_2d(np.asarray(self.m, dtype=float))
        T = self.m.shape[0]
        self.s = np.broadcast_to(np.asarray(self.s, dtype=float), (T,)).copy()
        self.s0 = np.broadcast_to(np.asarray(self.s0, dtype=float), (T,)).copy()
        self.c_r = np.broadcast_to(np.asarray(self.c_r, dtype=float), (T,)).copy()
        norms = np.linalg.norm(self.m, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise InvalidMaterialError("director field must have unit length")
        _check_order(self.s, self.s0)
        if np.any(self.c_r < 0) or not np.all(np.isfinite(self.c_r)):
            raise InvalidMaterialError("regularization weight must be finite and >= 0")

    @property
    def n_elements(self):
        return self.m.shape[0]

    @property
    def lam(self):
        return actuation(self.s, self.s0)

    @property
    def g(self):
        return target_metric(self.m, self.lam)
