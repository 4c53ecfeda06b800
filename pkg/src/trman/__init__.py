"""trman: quotient geometry of tensor ring decompositions.

Ring and uniform-ring representations, gauge actions, vertical/horizontal
projections, Riemannian gradient-descent and conjugate-gradient solvers,
and a completion experiment harness (``trman`` on the command line).
"""

from .tr import (
    TrCores,
    UtrCore,
    GaugeElement,
    tr_entry,
    tr_full,
    utr_entry,
    utr_full,
    subchain,
    core_unfold2,
    gauge_apply,
    injectivity_check,
    random_cores,
    random_utr_core,
)
from .geometry import (
    GaugeDirection,
    vertical_from_direction,
    horizontal_residual,
    assemble_projection_system,
    project_vertical,
    project_horizontal,
    metric_inner,
    retract,
)
from .ugeometry import u_vertical_from_direction, u_project
from .completion import (
    SampleSet,
    CompletionProblem,
    sampled_values,
    objective,
    euclidean_gradient,
    utr_euclidean_gradient,
    relative_error,
)
from .optim import OptimConfig, TraceRecord, rgd, rcg, riemannian_gradient, armijo_linesearch

__version__ = "0.1.0"
