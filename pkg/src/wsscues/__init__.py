"""Weak-supervision cue refinement and dense-CRF segmentation toolkit."""
from ._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
