"""Log-domain p-Laplace transforms, Santalo points and volume products."""

from ._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
