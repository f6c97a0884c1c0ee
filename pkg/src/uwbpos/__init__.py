"""UWB TOA indoor positioning toolkit.

Simulates or ingests distance measurements, fits the linear measured-vs-real
model, builds fingerprint distance databases (TDT/TNT/CT strategies), and
localizes targets by trilateration and by a backpropagation network
classifier, reporting mean error distance and improvement.
"""

__version__ = "0.1.0"

from .geometry import AnchorSet, Point2D, Zone, euclidean_distance, error_distance, trilaterate
from .ranging import LinearDistortion, NoiseSpec, RangingSample, apply_mc_scaling, fit_linear_model

__all__ = [
    "AnchorSet",
    "Point2D",
    "Zone",
    "euclidean_distance",
    "error_distance",
    "trilaterate",
    "LinearDistortion",
    "NoiseSpec",
    "RangingSample",
    "apply_mc_scaling",
    "fit_linear_model",
    "__version__",
]
