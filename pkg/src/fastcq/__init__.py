"""Fast convolution quadrature for tempered fractional calculus.

Fractional linear multistep weights, two linear-time convolution engines
(contour blocks and a real-line trapezoidal rule), a corrected operator,
a tempered fractional ODE solver and a time-fractional reaction-diffusion
solver.
"""

from __future__ import annotations

__version__ = "0.1.0"

from fastcq.convolution import DirectConvolver, direct_convolution
from fastcq.errors import (
    DegenerateSeries,
    FastCQError,
    IllConditionedStartingSystem,
    InvalidGeneratingFunction,
    NonlinearSolveFailure,
    ScheduleNotNeeded,
    SequenceError,
    SeriesDivergence,
    StepFailure,
    UnsupportedForMethodII,
    UnsupportedOrder,
)
from fastcq.fode import FodeProblem, Trajectory, convergence_table, linear_reference, mittag_leffler, solve
from fastcq.operator import FlmmOperator, make_convolver
from fastcq.realline import RealLineConvolver, build_rule, realline_convolver
from fastcq.talbot import TalbotConvolver, level_schedule
from fastcq.weights import (
    GNGF2,
    GeneratingFunction,
    WeightTable,
    convolution_weights,
    starting_weight_table,
    tempered_starting_weight_table,
)

__all__ = [
    "GNGF2",
    "DegenerateSeries",
    "DirectConvolver",
    "FastCQError",
    "FlmmOperator",
    "FodeProblem",
    "GeneratingFunction",
    "IllConditionedStartingSystem",
    "InvalidGeneratingFunction",
    "NonlinearSolveFailure",
    "RealLineConvolver",
    "ScheduleNotNeeded",
    "SequenceError",
    "SeriesDivergence",
    "StepFailure",
    "TalbotConvolver",
    "Trajectory",
    "UnsupportedForMethodII",
    "UnsupportedOrder",
    "WeightTable",
    "__version__",
    "build_rule",
    "convergence_table",
    "convolution_weights",
    "direct_convolution",
    "level_schedule",
    "linear_reference",
    "make_convolver",
    "mittag_leffler",
    "realline_convolver",
    "solve",
    "starting_weight_table",
    "tempered_starting_weight_table",
]
