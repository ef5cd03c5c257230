"""Nonparametric multiple functional regression with operator-valued kernels."""

from .errors import (
    ConfigError,
    DataError,
    DimensionError,
    FunkernelError,
    IncompatibleError,
    IncompatibleGridsError,
    IntegrityError,
    InvalidGridError,
    NumericalError,
    ParseError,
    UnsupportedEvaluationError,
    UnsupportedVersionError,
)
from .grid import Curve, Grid, integrate, l2_distance_sq, l2_inner, trapezoid_weights, uniform_grid
from .samples import Centering, Covariates, Sample, TrainingSet
from .kernels import (
    KernelConfig,
    ResponseGram,
    k_discrete,
    k_functional,
    kappa,
    kappa_matrix,
    median_bandwidth,
    operator_block,
    response_gram,
)
from .estimator import (
    CVResult,
    FitConfig,
    FittedModel,
    assemble_gram,
    cross_validate,
    fit,
    fitted_values,
    objective,
    predict,
    predict_many,
)
from .synthetic import SyntheticConfig, SyntheticData, generate_synthetic
from .data_io import evaluate, load_dataset, load_model, save_model

__version__ = "0.1.0"
