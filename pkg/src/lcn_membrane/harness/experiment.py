"""Experiment specification, resolution into solver inputs, and drivers."""

import csv
import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ..errors import InsufficientPointsError, InvalidArgumentError
from ..fem import interpolate
from ..flow import FlowConfig, GradientFlow, find_tau_max
from ..material import MaterialField
from ..mesh import CreaseSpec, crease_fitted_square, crease_strip_mask, structured_square
from . import presets
from .vtk import export_surface

log = logging.getLogger(__name__)

MESH_KINDS = ("structured", "crease-fitted", "strip-mask")
CREASE_LAYOUTS = {
    "diagonals": CreaseSpec.square_diagonals,
    "diagonals_and_midlines": CreaseSpec.diagonals_and_midlines,
}


def _pair(v):
    return tuple(tuple(float(x) for x in row) for row in v)


@dataclass
class ExperimentSpec:
    """Complete description of one flow run.

    ``h`` is a mesh-size label (see :func:`presets.cells_for_h`); ``n``
    overrides it with an explicit number of cells per side. ``tau`` is a
    positive float or ``"auto"`` for the largest admissible step.
    ``c_r_crease`` is the weight on the folding set: crease edges for
    ``crease-fitted`` meshes, strip elements for ``strip-mask`` meshes.
    """

    name: str = "experiment"
    domain: tuple = presets.CENTERED_SQUARE
    mesh: str = "structured"
    pattern: str = "diagonal"
    h: Optional[float] = 1.0 / 32
    n: Optional[int] = None
    creases: Optional[str] = None
    strip_width: Optional[float] = None
    director: str = "smooth"
    s: float = 0.1
    s0: float = 1.0
    c_r: float = 0.0
    c_r_crease: Optional[float] = None
    tau: Union[float, str] = 0.8
    tol1: float = 1e-10
    tol2: float = 1e-9
    max_newton: int = 30
    max_flow: int = 20000
    initializer: str = "bubble"
    tau_search: dict = field(default_factory=lambda: {"tau0": 1.0, "tol": 0.01, "cap": 64.0})
    outputs: dict = field(
        default_factory=lambda: {"surface": "surface.vtk", "log": "log.csv", "summary": "summary.json"}
    )

    def __post_init__(self):
        self.domain = _pair(self.domain)
        if self.mesh not in MESH_KINDS:
            raise InvalidArgumentError("mesh kind must be one of %s" % (MESH_KINDS,))
        if self.mesh != "structured" and self.creases not in CREASE_LAYOUTS:
            raise InvalidArgumentError("mesh kind %r needs a crease layout" % self.mesh)
        if self.h is None and self.n is None:
            raise InvalidArgumentError("either h or n must be given")
        if isinstance(self.tau, str):
            if self.tau != "auto":
                raise InvalidArgumentError("tau must be a positive number or 'auto'")
        elif not self.tau > 0:
            raise InvalidArgumentError("tau must be positive")
        if self.mesh == "strip-mask" and not (self.strip_width and self.strip_width > 0):
            raise InvalidArgumentError("strip-mask mesh needs a positive strip_width")

    # -- serialization --------------------------------------------------------
    def to_dict(self):
        d = dataclasses.asdict(self)
        d["domain"] = [list(r) for r in self.domain]
        return d

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidArgumentError("unknown spec fields: %s" % sorted(unknown))
        return cls(**d)

    @classmethod
    def from_json(cls, text_or_path):
        if os.path.exists(str(text_or_path)):
            with open(text_or_path) as fh:
                text = fh.read()
        else:
            text = text_or_path
        return cls.from_dict(json.loads(text))

    @classmethod
    def preset(cls, key, /, **overrides):
        try:
            base = dict(presets.PRESETS[key])
        except KeyError:
            raise InvalidArgumentError("unknown experiment preset %r" % key) from None
        base.update(overrides)
        return cls.from_dict(base)

    def with_h(self, h):
        return dataclasses.replace(self, h=h, n=None)

    # -- resolution -----------------------------------------------------------
    @property
    def cells(self):
        return self.n if self.n is not None else presets.cells_for_h(self.h, self.domain)

    def crease_spec(self):
        return CREASE_LAYOUTS[self.creases](self.domain) if self.creases else None

    def build_mesh(self):
        n = self.cells
        if self.mesh == "structured":
            return structured_square(n, self.domain, pattern=self.pattern)
        if self.mesh == "crease-fitted":
            return crease_fitted_square(n, self.crease_spec(), self.domain)
        # one extra row of cells keeps the grid diagonals off the square's diagonals
        return structured_square(n, self.domain, pattern="crisscross", ny=n + 1)

    def build_material(self, mesh):
        m = presets.director_preset(self.director, mesh.barycenters, self.domain)
        c_r = np.full(mesh.n_triangles, float(self.c_r))
        if self.mesh == "strip-mask":
            strip = crease_strip_mask(mesh, self.crease_spec(), self.strip_width)
            c_r[strip] = self.c_r_crease if self.c_r_crease is not None else 0.0
        return MaterialField(m, self.s, self.s0, c_r)

    @property
    def crease_aware(self):
        return self.mesh == "crease-fitted"

    def build_initial(self, mesh):
        return interpolate(presets.initializer_preset(self.initializer, self.domain), mesh)

    def flow_config(self, tau):
        return FlowConfig(
            tau=float(tau),
            tol1=self.tol1,
            tol2=self.tol2,
            max_newton=self.max_newton,
            max_flow=self.max_flow,
            crease_aware=self.crease_aware,
        )


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    report: object
    deformation: object
    mesh: object
    material: object
    tau: float
    summary: dict
    files: dict = field(default_factory=dict)
    tau_history: list = field(default_factory=list)

    @property
    def converged(self):
        return self.report.status == "converged"


class ExperimentRunner:
    """Resolved experiment: mesh, material and flow driver built once.

    Reports are cached by ``tau`` so a ``tau="auto"`` search and the final
    run share work.
    """

    def __init__(self, spec):
        self.spec = spec
        self.mesh = spec.build_mesh()
        self.material = spec.build_material(self.mesh)
        self.y0 = spec.build_initial(self.mesh)
        self.flow = GradientFlow(self.mesh, self.material, spec.crease_aware)
        self._runs = {}

    def run(self, tau):
        tau = float(tau)
        if tau not in self._runs:
            self._runs[tau] = self.flow.run(self.y0, self.spec.flow_config(tau))
        return self._runs[tau]

    def converges(self, tau):
        return self.run(tau)[0].status == "converged"

    def tau_max(self, history=None):
        ts = self.spec.tau_search
        return find_tau_max(
            self.converges, tau0=ts.get("tau0", 1.0), tol=ts.get("tol", 0.01),
            cap=ts.get("cap", 64.0), history=history,
        )

    @property
    def runs(self):
        """``{tau: (report, deformation)}`` for every flow run so far."""
        return dict(self._runs)

    def forget(self, keep=()):
        self._runs = {t: r for t, r in self._runs.items() if t in keep}


def _summary(spec, runner, report, y, tau):
    last = report.energies[-1] if report.energies else None
    z = y.nodal[:, 2]
    return {
        "name": spec.name,
        "status": report.status,
        "message": report.message,
        "N": report.N,
        "tau": tau,
        "h": spec.h,
        "n": spec.cells,
        "h_max": runner.mesh.h_max,
        "n_vertices": runner.mesh.n_vertices,
        "n_triangles": runner.mesh.n_triangles,
        "initializer": spec.initializer,
        "director": spec.director,
        "stretch": None if last is None else last.stretch,
        "regularization": None if last is None else last.regularization,
        "energy": None if last is None else last.total,
        "e_h": report.final_e_h,
        "newton_iterations": int(sum(report.newton_counts)),
        "height": float(z.max() - z.min()),
    }


def run_experiment(spec, outdir=None, runner=None):
    """Run one experiment and write its artifacts into ``outdir`` (if given).

    Artifacts: legacy-VTK surface, CSV iteration log and a JSON summary.
    Flow failures are recorded in the summary rather than raised.
    """
    runner = runner or ExperimentRunner(spec)
    history = []
    if spec.tau == "auto":
        tau = runner.tau_max(history)
    else:
        tau = float(spec.tau)
    report, y = runner.run(tau)
    summary = _summary(spec, runner, report, y, tau)
    if history:
        summary["tau_probes"] = [[t, ok] for t, ok in history]
    files = {}
    if outdir is not None:
        os.makedirs(outdir, exist_ok=True)
        out = spec.outputs
        files["surface"] = os.path.join(outdir, out.get("surface", "surface.vtk"))
        files["log"] = os.path.join(outdir, out.get("log", "log.csv"))
        files["summary"] = os.path.join(outdir, out.get("summary", "summary.json"))
        export_surface(y, runner.mesh, files["surface"], title=spec.name)
        report.write_log(files["log"])
        with open(files["summary"], "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return ExperimentResult(
        spec, report, y, runner.mesh, runner.material, tau, summary, files, history
    )


# -- convergence studies -------------------------------------------------------
CONVERGENCE_COLUMNS = ("h", "e_h", "E_h", "N", "tau", "status")


@dataclass
class ConvergenceTable:
    rows: list
    slope_e: float
    slope_E: float

    def to_csv(self, path=None):
        lines = [",".join(CONVERGENCE_COLUMNS)]
        for r in self.rows:
            lines.append(
                "%r,%r,%r,%d,%r,%s" % (r["h"], r["e_h"], r["E_h"], r["N"], r["tau"], r["status"])
            )
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @staticmethod
    def read_csv(path):
        with open(path) as fh:
            return list(csv.DictReader(fh))


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise InsufficientPointsError("need at least two points for a rate, got %d" % x.size)
    A = np.column_stack([np.log(x), np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    return float(coef[0])


def _row(h, result):
    rep = result.report
    ok = rep.status == "converged"
    return {
        "h": float(h),
        "e_h": rep.final_e_h if ok else float("nan"),
        "E_h": abs(rep.energies[-1].total) if ok else float("nan"),
        "N": rep.N,
        "tau": result.tau,
        "status": rep.status,
    }


def _study_job(args):
    spec, h = args
    return _row(h, run_experiment(spec.with_h(h)))


def convergence_study(spec, hs, tau=None, jobs=1, results=None):
    """Run ``spec`` over mesh sizes ``hs`` and fit log-log rates.

    Parameters
    ----------
    spec : ExperimentSpec
    hs : sequence of float
        Mesh-size labels, at least three.
    tau : float or "auto", optional
        Overrides ``spec.tau``.
    jobs : int
        Independent runs are distributed over this many processes.
    results : dict, optional
        Precomputed ``{h: ExperimentResult}`` reused instead of rerunning.

    Diverged rows are kept in the table but excluded from the fit.
    """
    hs = [float(h) for h in hs]
    if len(hs) < 3:
        raise InsufficientPointsError("a convergence study needs at least 3 mesh sizes")
    if tau is not None:
        spec = dataclasses.replace(spec, tau=tau)
    results = results or {}
    todo = [h for h in hs if h not in results]
    rows = {h: _row(h, results[h]) for h in hs if h in results}
    if jobs > 1 and len(todo) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as ex:
            for h, row in zip(todo, ex.map(_study_job, [(spec, h) for h in todo])):
                rows[h] = row
    else:
        for h in todo:
            rows[h] = _study_job((spec, h))
    ordered = [rows[h] for h in hs]
    good = [r for r in ordered if r["status"] == "converged"]
    if len(good) < 2:
        raise InsufficientPointsError("fewer than two converged runs in the study")
    slope_e = loglog_slope([r["h"] for r in good], [r["e_h"] for r in good])
    slope_E = loglog_slope([r["h"] for r in good], [r["E_h"] for r in good])
    return ConvergenceTable(ordered, slope_e, slope_E)
