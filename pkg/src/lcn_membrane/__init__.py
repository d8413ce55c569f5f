"""Finite element membrane model for liquid crystal polymer networks.

Modules
-------
mesh      structured and crease-fitted triangulations
material  director fields, target metric and the stretching density
fem       P1 assembly of the regularized energy and the H1 metric
flow      implicit H1 gradient flow with Newton sub-iterations
harness   experiment presets, sweeps, VTK output and the CLI
"""

from .errors import (
    DegenerateElementError,
    DivergedNewtonError,
    InsufficientPointsError,
    InvalidArgumentError,
    InvalidInitializerError,
    InvalidMaterialError,
    LCNError,
    NoDivergingTauError,
    NotSPDError,
    SingularDirectorError,
    SingularMatrixError,
    UnfittedCreaseError,
)
from .fem import Deformation, DiscreteEnergy, EnergyBreakdown, interpolate, metric_deviation
from .flow import FlowConfig, FlowReport, GradientFlow, find_tau_max, run_flow
from .material import MaterialField, actuation, target_metric
from .mesh import CreaseSpec, TriMesh, crease_fitted_square, structured_square

__version__ = "0.1.0"
