"""Renormalization of rational step-function skew products over quadratic rotations."""

from .surd import Surd, surd_floor_frac, surd_normalize

__version__ = "0.1.0"

__all__ = ["Surd", "surd_floor_frac", "surd_normalize", "__version__"]
