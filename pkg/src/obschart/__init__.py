"""Observable charts for singular parametric models.

Evaluate finite collections of expectation functionals, find the parameter
directions they cannot see at first order, and compare orders of vanishing
of chart increments and KL divergence along analytic arcs.
"""

from ._version import __version__
from .arcs import (
    INFINITE,
    Arc,
    GridSpec,
    OrderEstimate,
    TheoremCheck,
    kl_order,
    observable_order,
    order_of_vanishing,
    random_arc,
    verify_order_theorem,
)
from .builder import BuildTrace, ObservablePool, build_chart, probe_direction
from .chart import (
    Chart,
    CompletenessVerdict,
    Observable,
    chart_jacobian,
    completeness_check,
    eval_chart,
    hidden_directions,
    identifiable_rank,
)
from .errors import (
    AccuracyFloorError,
    ConfigError,
    DomainError,
    EvaluationError,
    JobError,
    NumericError,
    ObsChartError,
    UndeterminedOrder,
)
from .jobs import AnalysisJob, load_job, parse_config
from .model import Dataset, ModelSpec, log_density, sample, score
from .numerics import Budget, expectation, fisher_information, kl_divergence, numeric_nullspace
from .report import AnalysisReport, emit_report, parse_report
from .runner import run_job
from .zoo import GaussianLocationModel, GmmModel, RrrModel, TanhUnitModel, build_model

__all__ = [
    "INFINITE",
    "AccuracyFloorError",
    "AnalysisJob",
    "AnalysisReport",
    "Arc",
    "Budget",
    "BuildTrace",
    "Chart",
    "CompletenessVerdict",
    "ConfigError",
    "Dataset",
    "DomainError",
    "EvaluationError",
    "GaussianLocationModel",
    "GmmModel",
    "GridSpec",
    "JobError",
    "ModelSpec",
    "NumericError",
    "ObsChartError",
    "Observable",
    "ObservablePool",
    "OrderEstimate",
    "RrrModel",
    "TanhUnitModel",
    "TheoremCheck",
    "UndeterminedOrder",
    "__version__",
    "build_chart",
    "build_model",
    "chart_jacobian",
    "completeness_check",
    "emit_report",
    "eval_chart",
    "expectation",
    "fisher_information",
    "hidden_directions",
    "identifiable_rank",
    "kl_divergence",
    "kl_order",
    "load_job",
    "log_density",
    "numeric_nullspace",
    "observable_order",
    "order_of_vanishing",
    "parse_config",
    "parse_report",
    "probe_direction",
    "random_arc",
    "run_job",
    "sample",
    "score",
    "verify_order_theorem",
]
