"""LapEPI: Laplacian-pyramid EPI light-field view synthesis.

Densifies the angular axis of sparsely sampled light fields with a
fully-convolutional network that reads a Laplacian pyramid of each
epipolar plane image, and analyses the angular aliasing that motivates it.
"""

from .errors import (
    CheckpointError,
    ColorspaceError,
    LapEpiError,
    ManifestError,
    NoAliasingError,
    ShapeError,
    TrainingDiverged,
)
from .lightfield import Axis, Colorspace, Epi, LightField4D, extract_epi, insert_epi, load_lightfield, save_lightfield
from .pyramid import LapEpiPyramid, PyramidConfig, build_lapepi, collapse

__version__ = "0.1.0"

__all__ = [
    "Axis",
    "CheckpointError",
    "Colorspace",
    "ColorspaceError",
    "Epi",
    "LapEpiError",
    "LapEpiPyramid",
    "LightField4D",
    "ManifestError",
    "NoAliasingError",
    "PyramidConfig",
    "ShapeError",
    "TrainingDiverged",
    "__version__",
    "build_lapepi",
    "collapse",
    "extract_epi",
    "insert_epi",
    "load_lightfield",
    "save_lightfield",
]
