"""Numerical laboratory for model Reeb flows: recurrence volumes, entropy,
Diophantine exponents, model spectral data, smoothing and eta invariants."""
from ._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
