"""Inverse scattering toolkit for the modified Camassa-Holm equation with
step-like backgrounds."""
from .spectral import Backgrounds, Orientation, Side, SpectralError, SpectralPoint

__version__ = "0.1.0"
