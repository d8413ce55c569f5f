"""Command-line driver.

    lcn-membrane run SPEC [--out DIR]
    lcn-membrane sweep SPEC --h 16,32,64,128 [--tau auto] [--out DIR] [--jobs K]
    lcn-membrane taumax SPEC [--tol 0.01] [--cap 64]
    lcn-membrane export SPEC --vtk FILE
    lcn-membrane show PRESET

``SPEC`` is a JSON file or the name of a built-in preset.
"""

import argparse
import json
import logging
import os
import sys
from fractions import Fraction

from ..errors import LCNError
from .experiment import ExperimentRunner, ExperimentSpec, convergence_study, run_experiment
from .presets import PRESETS
from .vtk import export_surface


def load_spec(arg):
    if os.path.exists(arg):
        return ExperimentSpec.from_json(arg)
    if arg in PRESETS:
        return ExperimentSpec.preset(arg)
    raise LCNError("no spec file or preset named %r" % arg)


def parse_h_list(text):
    """``"16,32"`` or ``"1/16,0.03125"`` -> ``[1/16, 1/32]``."""
    hs = []
    for tok in text.split(","):
        tok = tok.strip()
        v = float(Fraction(tok))
        hs.append(1.0 / v if v > 1 else v)
    return hs


def _tau_arg(text):
    return text if text == "auto" else float(text)


def build_parser():
    p = argparse.ArgumentParser(prog="lcn-membrane", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--sequential", action="store_true",
                   help="run sweep entries one after another (deterministic order)")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("spec")
    r.add_argument("--out", default=None)
    r.add_argument("--tau", type=_tau_arg, default=None)

    s = sub.add_parser("sweep", help="convergence study over mesh sizes")
    s.add_argument("spec")
    s.add_argument("--h", required=True, help="comma list, e.g. 16,32,64,128")
    s.add_argument("--tau", type=_tau_arg, default=None)
    s.add_argument("--out", default=None, help="CSV output path")
    s.add_argument("--jobs", type=int, default=1)

    t = sub.add_parser("taumax", help="largest admissible pseudo time step")
    t.add_argument("spec")
    t.add_argument("--tol", type=float, default=None)
    t.add_argument("--cap", type=float, default=None)

    e = sub.add_parser("export", help="run and write only the deformed surface")
    e.add_argument("spec")
    e.add_argument("--vtk", required=True)

    sh = sub.add_parser("show", help="print a preset as JSON")
    sh.add_argument("preset", choices=sorted(PRESETS))
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.cmd == "show":
            print(ExperimentSpec.preset(args.preset).to_json())
            return 0
        spec = load_spec(args.spec)
        if args.cmd == "run":
            if args.tau is not None:
                spec.tau = args.tau
            res = run_experiment(spec, outdir=args.out)
            print(json.dumps(res.summary, indent=2, sort_keys=True))
            return 0 if res.converged else 1
        if args.cmd == "sweep":
            jobs = 1 if args.sequential else max(1, args.jobs)
            table = convergence_study(spec, parse_h_list(args.h), tau=args.tau, jobs=jobs)
            sys.stdout.write(table.to_csv(args.out))
            print("slope e_h = %.4f, slope |E_h| = %.4f" % (table.slope_e, table.slope_E))
            return 0 if all(r["status"] == "converged" for r in table.rows) else 1
        if args.cmd == "taumax":
            if args.tol is not None:
                spec.tau_search["tol"] = args.tol
            if args.cap is not None:
                spec.tau_search["cap"] = args.cap
            history = []
            tau = ExperimentRunner(spec).tau_max(history)
            for t, ok in history:
                print("probe tau=%.6g %s" % (t, "converged" if ok else "diverged"))
            print("tau_max = %.6g" % tau)
            return 0
        if args.cmd == "export":
            res = run_experiment(spec)
            export_surface(res.deformation, res.mesh, args.vtk, title=spec.name)
            print(args.vtk)
            return 0 if res.converged else 1
    except LCNError as err:
        print("error: %s" % err, file=sys.stderr)
        return 2
    return 2  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
