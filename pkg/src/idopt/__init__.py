"""Search for box domains where a black-box function has a large, small or
target mean, by ascending the box mean of local quadratic fits."""

from .box_integral import box_mean, box_mean_grad
from .domain import (Adam, BoxDomain, DimSpec, FeatureSchema, FixedInterval, FixedValue, Free,
                     GradientAscent, Maximize, Minimize, OptimizerConfig, PenaltyWeights,
                     TargetMean, apply_constraints, free_mask)
from .objective import evaluate
from .optimizer import Trajectory, ascend_step, run
from .surrogate import QuadraticSurrogate, design_matrix, fit, sample_box

__version__ = "0.1.0"
