"""Point cloud geometry upsampling with local frequency-selective surface models."""

from .cloud import (
    DegenerateCloudError,
    NormTransform,
    PlyError,
    PointCloud,
    denormalize,
    normalize_unit_cube,
    read_ply,
    write_ply,
)
from .metrics import MetricReport, estimate_normals, metric_report, p2plane, p2point
from .resample import UpsampleConfig, upsample_cloud, upsample_original_units
from .spectral import ModelConfig, SurfaceModel, eval_model, fit_model

__version__ = "0.1.0"
