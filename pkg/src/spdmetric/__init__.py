"""Log-Euclidean Riemannian metric learning for SPD matrices."""

__version__ = "0.1.0"

from ._backend import BACKEND
from ._errors import (
    ConfigError,
    FormatError,
    InsufficientDataError,
    NumericalError,
    RangeError,
    ShapeError,
    SpdMetricError,
)
from .distances import KIND_NAMES, distance
from .geodesic import LearnedMetric, geodesic_dist, geodesic_sq, learn_geodesic
from .itml import ItmlConfig, MahalanobisMetric, PairConstraint, itml_fit, logdet_div
from .linalg import cholesky, lie_product, spd_log, sym_exp, unvec, vec
from .representation import embed, represent

__all__ = [
    "BACKEND",
    "ConfigError",
    "FormatError",
    "InsufficientDataError",
    "NumericalError",
    "RangeError",
    "ShapeError",
    "SpdMetricError",
    "KIND_NAMES",
    "distance",
    "LearnedMetric",
    "geodesic_dist",
    "geodesic_sq",
    "learn_geodesic",
    "ItmlConfig",
    "MahalanobisMetric",
    "PairConstraint",
    "itml_fit",
    "logdet_div",
    "cholesky",
    "lie_product",
    "spd_log",
    "sym_exp",
    "unvec",
    "vec",
    "embed",
    "represent",
]
