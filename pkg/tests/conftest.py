import numpy as np
import pytest

from lcn_membrane.material import MaterialField, actuation

LAM = float(np.cbrt(0.55))


def random_rank2(rng, size, scale=1.0):
    """Random 3x2 matrices kept well away from rank deficiency."""
    F = rng.normal(scale=scale, size=(size, 3, 2))
    F[:, :2, :] += np.eye(2)
    J = np.linalg.det(np.einsum("tia,tib->tab", F, F))
    return F[J > 1e-3]


def random_unit(rng, size):
    th = rng.uniform(0, 2 * np.pi, size)
    return np.column_stack([np.cos(th), np.sin(th)])


def random_rotation(rng, size):
    Q, R = np.linalg.qr(rng.normal(size=(size, 3, 3)))
    Q *= np.sign(np.diagonal(R, axis1=1, axis2=2))[:, None, :]
    Q[np.linalg.det(Q) < 0, :, 0] *= -1
    return Q


def dist_so3_sq(M):
    """Squared Frobenius distance to SO(3) via the SVD."""
    U, S, Vt = np.linalg.svd(M)
    d = np.sign(np.linalg.det(U @ Vt))
    D = np.zeros_like(M)
    D[..., 0, 0] = 1.0
    D[..., 1, 1] = 1.0
    D[..., 2, 2] = d
    R = U @ D @ Vt
    return np.einsum("...ij,...ij->...", M - R, M - R)


def material_for(mesh, m=(1.0, 0.0), s=0.1, s0=1.0, c_r=0.0):
    T = mesh.n_triangles
    return MaterialField(np.broadcast_to(np.asarray(m, float), (T, 2)), s, s0, c_r)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# -- acceptance summary --------------------------------------------------------
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
