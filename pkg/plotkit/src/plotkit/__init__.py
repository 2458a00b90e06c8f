"""plotkit: figure rendering for the PINN training-lab CSV/JSON outputs."""

__version__ = "0.1.0"

from .figures import FIGURE_KINDS, FigureRequest, build_figure, render
from .schemas import SchemaError

__all__ = ["FIGURE_KINDS", "FigureRequest", "build_figure", "render",
           "SchemaError"]
