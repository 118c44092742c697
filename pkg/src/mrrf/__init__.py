"""Method of rotated reference frames for the radiative transport equation."""
from .spectral import OpticalMedium, SpectralDecomposition, diagonalize, NumericError
from .greens import SourceDetectorConfig, specific_intensity

__version__ = "0.1.0"

__all__ = [
    "OpticalMedium",
    "SpectralDecomposition",
    "diagonalize",
    "NumericError",
    "SourceDetectorConfig",
    "specific_intensity",
]
