"""Implicit H1 gradient flow with Newton sub-iterations.

Each outer step minimizes ``1/(2 tau) ||y - y_i||_H1^2 + E_h[y]`` by solving
its Euler-Lagrange system with undamped Newton steps. A step is rejected
as diverged when the Newton matrix is not positive definite, when Newton
fails to reach ``tol1``, or when the accepted iterate violates the
one-step energy stability inequality.
"""

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.sparse as sp

from .errors import (
    DegenerateElementError,
    DivergedNewtonError,
    InvalidArgumentError,
    NoDivergingTauError,
    NotSPDError,
    SingularMatrixError,
)
from .fem import Deformation, DiscreteEnergy, EnergyBreakdown, metric_deviation

log = logging.getLogger(__name__)

try:
    from cvxopt import cholmod as _cholmod
    from cvxopt import matrix as _cvx_matrix
    from cvxopt import spmatrix as _cvx_spmatrix

    _cholmod.options["supernodal"] = 2
    HAVE_CHOLMOD = True
except ImportError:  # pragma: no cover - exercised only without cvxopt
    HAVE_CHOLMOD = False


@dataclass
class SparseSymSystem:
    matrix: sp.spmatrix
    rhs: np.ndarray


class CholeskySolver:
    """Sparse Cholesky factorization for a fixed sparsity pattern.

    ``indptr``/``indices`` describe a CSR pattern; values are supplied per
    factorization as an array aligned with that pattern. The symbolic
    analysis is computed once and reused.
    """

    def __init__(self, indptr, indices, n):
        self.n = int(n)
        rows = np.repeat(np.arange(self.n), np.diff(indptr))
        cols = np.asarray(indices)
        self._lower = rows >= cols
        self._rows = rows[self._lower]
        self._cols = cols[self._lower]
        self._symbolic = None
        self._factor = None
        self._lu = None
        self._indptr, self._indices = indptr, indices
        if HAVE_CHOLMOD:
            self._I = _cvx_matrix(self._rows.astype(np.int64))
            self._J = _cvx_matrix(self._cols.astype(np.int64))

    @classmethod
    def for_matrix(cls, A):
        A = sp.csr_matrix(A)
        A.sort_indices()
        solver = cls(A.indptr, A.indices, A.shape[0])
        return solver, A.data

    def factor(self, data):
        data = np.ascontiguousarray(data, dtype=float)
        if not np.all(np.isfinite(data)):
            raise NotSPDError("matrix has non-finite entries")
        if HAVE_CHOLMOD:
            A = _cvx_spmatrix(_cvx_matrix(data[self._lower]), self._I, self._J, (self.n, self.n))
            if self._symbolic is None:
                self._symbolic = _cholmod.symbolic(A)
            try:
                _cholmod.numeric(A, self._symbolic)
            except ArithmeticError as err:
                self._factor = None
                raise NotSPDError("Cholesky factorization met a non-positive pivot (%s)" % err)
            self._factor = self._symbolic
        else:  # pragma: no cover
            from scipy.sparse.linalg import splu

            A = sp.csc_matrix(sp.csr_matrix((data, self._indices, self._indptr), shape=(self.n, self.n)))
            lu = splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0)
            if np.any(lu.U.diagonal() <= 0):
                raise NotSPDError("non-positive pivot in symmetric factorization")
            self._lu = lu

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if HAVE_CHOLMOD:
            if self._factor is None:
                raise RuntimeError("factor() must succeed before solve()")
            B = _cvx_matrix(rhs.copy())
            _cholmod.solve(self._factor, B)
            return np.array(B).ravel()
        return self._lu.solve(rhs)  # pragma: no cover


def solve_sym_system(system):
    """Solve a symmetric positive definite sparse system.

    Raises
    ------
    SingularMatrixError
        If the matrix has an empty row (structurally singular).
    NotSPDError
        If the Cholesky factorization meets a non-positive pivot.
    """
    A = sp.csr_matrix(system.matrix)
    if A.shape[0] != A.shape[1]:
        raise InvalidArgumentError("matrix must be square")
    if np.any(np.diff(A.indptr) == 0) or np.any(np.abs(A).sum(axis=1).A1 == 0):
        raise SingularMatrixError("matrix has an empty row")
    solver, data = CholeskySolver.for_matrix(A)
    solver.factor(data)
    x = solver.solve(system.rhs)
    # one step of iterative refinement keeps the relative residual at roundoff
    r = system.rhs - A @ x
    x = x + solver.solve(r)
    return x


@dataclass
class FlowConfig:
    tau: float
    tol1: float = 1e-10
    tol2: float = 1e-9
    max_newton: int = 30
    max_flow: int = 20000
    crease_aware: bool = False
    decrease_slack: float = 1e-12

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidArgumentError("tau must be positive")
        if not (self.tol1 > 0 and self.tol2 > 0):
            raise InvalidArgumentError("tolerances must be positive")
        if self.max_newton < 1 or self.max_flow < 1:
            raise InvalidArgumentError("iteration caps must be >= 1")


@dataclass
class FlowReport:
    tau: float
    energies: List[EnergyBreakdown] = field(default_factory=list)
    newton_counts: List[int] = field(default_factory=list)
    step_h1_sq: List[float] = field(default_factory=list)
    status: str = "running"
    N: int = 0
    final_e_h: float = float("nan")
    message: str = ""

    @property
    def totals(self):
        return np.array([e.total for e in self.energies])

    def iteration_log(self):
        """CSV text with one row per outer iteration (row 0 is the initial state)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "stretch", "regularization", "total", "newton_count"])
        counts = [0] + list(self.newton_counts)
        for i, (e, c) in enumerate(zip(self.energies, counts)):
            w.writerow([i, repr(e.stretch), repr(e.regularization), repr(e.total), c])
        return buf.getvalue()

    def write_log(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.iteration_log())


class GradientFlow:
    """Reusable flow driver: assembly data and symbolic factorization are shared."""

    def __init__(self, mesh, material, crease_aware=False, energy=None):
        self.energy = energy or DiscreteEnergy(mesh, material, crease_aware)
        self.mesh = mesh
        self.material = material
        self.solver = CholeskySolver(self.energy.indptr, self.energy.indices, mesh.n_dofs)

    def newton_substep(self, y_i, config):
        """Minimize the augmented functional around ``y_i``.

        Returns ``(y_next, M, breakdown)`` where ``M`` is the number of Newton
        increments applied and ``breakdown`` is the energy at ``y_next``.
        """
        en = self.energy
        tau = config.tau
        yi = y_i.dofs if isinstance(y_i, Deformation) else np.asarray(y_i, float)
        y = yi.copy()
        h1_data = en.h1_data / tau
        prev = math.inf
        growth = 0
        for n in range(config.max_newton + 1):
            try:
                bd, grad, hdata = en.evaluate(y)
            except DegenerateElementError as err:
                raise DivergedNewtonError(str(err), iteration=n, reason="degenerate-element")
            r = grad + (en.h1 @ (y - yi)) / tau
            try:
                self.solver.factor(hdata + h1_data)
            except NotSPDError as err:
                raise DivergedNewtonError(str(err), iteration=n, reason="not-spd")
            dy = self.solver.solve(-r)
            dec = math.sqrt(abs(float(r @ dy)))
            if not math.isfinite(dec):
                raise DivergedNewtonError("non-finite Newton decrement", iteration=n, reason="nan")
            if dec <= config.tol1:
                return y, n, bd
            if n == config.max_newton:
                raise DivergedNewtonError(
                    "Newton cap %d reached (decrement %.3e)" % (n, dec), iteration=n, reason="cap"
                )
            growth = growth + 1 if dec > prev else 0
            if growth >= 3:
                raise DivergedNewtonError(
                    "Newton decrement grew for 3 consecutive iterations", iteration=n, reason="growth"
                )
            prev = dec
            y = y + dy
        raise AssertionError("unreachable")  # pragma: no cover

    def run(self, y0, config, callback=None):
        """Iterate Newton sub-steps until the energy-slope test passes.

        Returns ``(report, y)`` where ``y`` is the last accepted state.
        """
        en = self.energy
        tau = config.tau
        y = y0.dofs.copy() if isinstance(y0, Deformation) else np.asarray(y0, float).copy()
        report = FlowReport(tau=tau)
        try:
            current = en.breakdown(y)
        except DegenerateElementError as err:
            report.status = "diverged"
            report.message = str(err)
            return report, Deformation(self.mesh, y)
        report.energies.append(current)
        report.status = "cap-reached"
        for i in range(config.max_flow):
            try:
                y_new, M, bd = self.newton_substep(y, config)
            except DivergedNewtonError as err:
                report.status = "diverged"
                report.message = "outer step %d: %s" % (i, err)
                log.info("tau=%g diverged at outer step %d (%s)", tau, i, err.reason)
                break
            d = y_new - y
            dist = float(d @ (en.h1 @ d))
            if bd.total + dist / (2.0 * tau) > current.total + config.decrease_slack:
                report.status = "diverged"
                report.message = "outer step %d violated energy stability" % i
                break
            report.energies.append(bd)
            report.newton_counts.append(M)
            report.step_h1_sq.append(dist)
            slope = abs(bd.total - current.total) / tau
            y, current = y_new, bd
            report.N = i + 1
            if callback is not None:
                callback(i + 1, y, bd, M)
            if slope <= config.tol2:
                report.status = "converged"
                break
        y_out = Deformation(self.mesh, y)
        report.final_e_h = metric_deviation(y_out, self.material)
        return report, y_out


def newton_substep(y_i, config, material):
    flow = GradientFlow(y_i.mesh, material, config.crease_aware)
    y, _, _ = flow.newton_substep(y_i, config)
    return Deformation(y_i.mesh, y)


def run_flow(y0, config, material):
    """Run the gradient flow from ``y0``; returns ``(FlowReport, Deformation)``."""
    return GradientFlow(y0.mesh, material, config.crease_aware).run(y0, config)


def find_tau_max(probe, tau0=1.0, tol=0.01, cap=64.0, history=None):
    """Largest ``tau`` for which ``probe(tau)`` reports convergence.

    A diverging step is bracketed by doubling from ``tau0``; the bracket is
    then bisected until its width is at most ``tol``. The converging end of
    the bracket is returned.

    Raises
    ------
    NoDivergingTauError
        If every probe up to ``cap`` converges.
    """
    if history is None:
        history = []

    def check(t):
        ok = bool(probe(t))
        history.append((t, ok))
        log.info("tau probe %.6g -> %s", t, "converged" if ok else "diverged")
        return ok

    lo, hi = None, None
    if check(tau0):
        lo, t = tau0, tau0
        while True:
            t *= 2.0
            if t > cap:
                raise NoDivergingTauError("no diverging tau up to cap %g" % cap, cap=cap)
            if check(t):
                lo = t
            else:
                hi = t
                break
    else:
        hi, t = tau0, tau0
        while True:
            t *= 0.5
            if t < 1e-8:
                raise InvalidArgumentError("problem does not converge for any tau >= 1e-8")
            if check(t):
                lo = t
                break
            hi = t
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if check(mid):
            lo = mid
        else:
            hi = mid
    return lo
