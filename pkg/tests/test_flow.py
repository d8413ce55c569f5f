import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from lcn_membrane.errors import (
    DivergedNewtonError,
    InvalidArgumentError,
    NoDivergingTauError,
    NotSPDError,
    SingularMatrixError,
)
from lcn_membrane.fem import Deformation, EnergyBreakdown, h1_matrix, interpolate
from lcn_membrane.flow import (
    CholeskySolver,
    FlowConfig,
    GradientFlow,
    SparseSymSystem,
    find_tau_max,
    newton_substep,
    run_flow,
    solve_sym_system,
)
from lcn_membrane.harness.presets import director_preset, initializer_preset
from lcn_membrane.material import MaterialField
from lcn_membrane.mesh import structured_square

from conftest import material_for

DOMAIN = ((-0.5, 0.5), (-0.5, 0.5))


class QuadraticEnergy:
    """``1/2 (y - c)^T A (y - c)`` on the H1 sparsity pattern."""

    def __init__(self, mesh, c, weight=3.0):
        self.mesh = mesh
        self.h1 = h1_matrix(mesh)
        self.h1.sort_indices()
        self.A = weight * self.h1
        self.c = c
        self.indptr, self.indices = self.h1.indptr, self.h1.indices
        self.h1_data = self.h1.data.copy()

    def breakdown(self, y):
        d = y - self.c
        return EnergyBreakdown(0.5 * float(d @ (self.A @ d)), 0.0)

    def evaluate(self, y):
        return self.breakdown(y), self.A @ (y - self.c), self.A.data.copy()


def exp1_flow(n, c_r=0.0):
    mesh = structured_square(n, DOMAIN)
    mat = MaterialField(director_preset("smooth", mesh.barycenters, DOMAIN), 0.1, 1.0, c_r)
    y0 = interpolate(initializer_preset("bubble", DOMAIN), mesh)
    return GradientFlow(mesh, mat), y0


def test_identity_solve(rng):
    r = rng.normal(size=7)
    x = solve_sym_system(SparseSymSystem(sp.identity(7, format="csr"), r))
    assert np.array_equal(x, r)


def test_manufactured_h1_solution(rng):
    mesh = structured_square(12)
    A = h1_matrix(mesh)
    u = rng.normal(size=mesh.n_dofs)
    x = solve_sym_system(SparseSymSystem(A, A @ u))
    assert np.abs(x - u).max() <= 1e-10


def test_not_spd():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(NotSPDError):
        solve_sym_system(SparseSymSystem(A, np.ones(2)))
    with pytest.raises(NotSPDError):
        solve_sym_system(SparseSymSystem(sp.diags([1.0, -1.0, 2.0]).tocsr(), np.ones(3)))


def test_singular_matrix():
    A = sp.csr_matrix(np.diag([1.0, 0.0, 2.0]))
    with pytest.raises(SingularMatrixError):
        solve_sym_system(SparseSymSystem(A, np.ones(3)))


def test_solver_reuses_symbolic(rng):
    mesh = structured_square(5)
    A = h1_matrix(mesh)
    solver, data = CholeskySolver.for_matrix(A)
    for scale in (1.0, 2.0, 0.5):
        solver.factor(scale * data)
        b = rng.normal(size=A.shape[0])
        assert np.allclose(scale * (A @ solver.solve(b)), b, atol=1e-10)


def test_flow_config_validation():
    with pytest.raises(InvalidArgumentError):
        FlowConfig(tau=0.0)
    with pytest.raises(InvalidArgumentError):
        FlowConfig(tau=1.0, tol1=-1.0)
    with pytest.raises(InvalidArgumentError):
        FlowConfig(tau=1.0, max_newton=0)


def test_quadratic_surrogate_one_newton_step(rng):
    mesh = structured_square(6)
    c = rng.normal(size=mesh.n_dofs)
    en = QuadraticEnergy(mesh, c)
    flow = GradientFlow(mesh, material_for(mesh), energy=en)
    yi = rng.normal(size=mesh.n_dofs)
    tau = 0.7
    y, M, _ = flow.newton_substep(yi, FlowConfig(tau=tau))
    # exact minimizer of 1/(2 tau)|y - yi|^2_H1 + E
    K = (en.A + en.h1 / tau).toarray()
    exact = np.linalg.solve(K, en.A @ c + en.h1 @ yi / tau)
    assert M == 1
    assert np.abs(y - exact).max() <= 1e-9


def test_convex_surrogate_has_no_diverging_tau(rng):
    mesh = structured_square(4)
    en = QuadraticEnergy(mesh, rng.normal(size=mesh.n_dofs))
    flow = GradientFlow(mesh, material_for(mesh), energy=en)
    y0 = np.zeros(mesh.n_dofs)

    def probe(t):
        return flow.run(y0, FlowConfig(tau=t))[0].status == "converged"

    with pytest.raises(NoDivergingTauError):
        find_tau_max(probe, cap=64.0)


@given(st.floats(0.3, 5.0), st.floats(0.01, 0.2))
@settings(max_examples=30, deadline=None)
def test_find_tau_max_brackets_threshold(threshold, tol):
    history = []
    t = find_tau_max(lambda x: x <= threshold, tau0=1.0, tol=tol, history=history)
    assert t <= threshold < t + tol + 1e-12
    assert all(ok == (x <= threshold) for x, ok in history)


def test_find_tau_max_never_converging():
    with pytest.raises(InvalidArgumentError):
        find_tau_max(lambda t: False)


def test_fixed_point():
    mesh = structured_square(4)
    mat = material_for(mesh, s=0.0, s0=0.0, c_r=1.0)
    y0 = interpolate(initializer_preset("flat"), mesh)
    y = newton_substep(y0, FlowConfig(tau=1.0), mat)
    assert np.array_equal(y.dofs, y0.dofs)
    report, y = run_flow(y0, FlowConfig(tau=1.0), mat)
    assert report.status == "converged" and report.N == 1
    assert abs(report.energies[-1].total) <= 1e-12
    assert report.newton_counts == [0]


def test_energy_decrease_and_telescoping():
    flow, y0 = exp1_flow(6, c_r=1.0)
    tau = 0.5
    report, _ = flow.run(y0, FlowConfig(tau=tau, tol2=1e-6))
    assert report.status == "converged"
    E = report.totals
    assert np.all(np.diff(E) <= 1e-12)
    lhs = E[-1] + np.sum(report.step_h1_sq) / (2 * tau)
    assert lhs <= E[0] + 1e-10 * report.N
    assert len(report.newton_counts) == report.N == len(E) - 1


def test_newton_cap_is_divergence():
    flow, y0 = exp1_flow(4)
    report, y = flow.run(y0, FlowConfig(tau=0.5, max_newton=1))
    assert report.status == "diverged"
    assert "outer step 0" in report.message
    assert np.array_equal(y.dofs, y0.dofs)
    with pytest.raises(DivergedNewtonError) as err:
        flow.newton_substep(y0, FlowConfig(tau=0.5, max_newton=1))
    assert err.value.reason == "cap"


def test_large_tau_diverges():
    flow, y0 = exp1_flow(16)
    report, _ = flow.run(y0, FlowConfig(tau=3.2))
    assert report.status == "diverged"


def test_degenerate_start_is_diverged():
    mesh = structured_square(2)
    mat = material_for(mesh)
    report, _ = run_flow(Deformation(mesh, np.zeros(mesh.n_dofs)), FlowConfig(tau=1.0), mat)
    assert report.status == "diverged"


def test_cap_reached():
    flow, y0 = exp1_flow(4)
    report, _ = flow.run(y0, FlowConfig(tau=0.1, max_flow=3))
    assert report.status == "cap-reached" and report.N == 3


def test_iteration_log_is_deterministic(tmp_path):
    logs = []
    for _ in range(2):
        flow, y0 = exp1_flow(4)
        report, _ = flow.run(y0, FlowConfig(tau=0.8, tol2=1e-7))
        logs.append(report.iteration_log())
    assert logs[0] == logs[1]
    head, first = logs[0].splitlines()[:2]
    assert head == "iteration,stretch,regularization,total,newton_count"
    assert first.startswith("0,") and first.endswith(",0")
    report.write_log(tmp_path / "log.csv")
    assert (tmp_path / "log.csv").read_text() == logs[0]
