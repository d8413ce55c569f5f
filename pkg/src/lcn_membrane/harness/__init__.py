"""Experiment presets, drivers, VTK output and the command-line interface."""

from .experiment import (
    ConvergenceTable,
    ExperimentResult,
    ExperimentRunner,
    ExperimentSpec,
    convergence_study,
    loglog_slope,
    run_experiment,
)
from .presets import PRESETS, cells_for_h, director_preset, initializer_preset
from .vtk import export_surface, read_vtk
