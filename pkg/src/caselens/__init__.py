"""Topic models and citation-network communities for case-law corpora."""

from ._accel import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
