"""Nonlinear interference PSD models for the cubic NLS on a periodic grid."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
