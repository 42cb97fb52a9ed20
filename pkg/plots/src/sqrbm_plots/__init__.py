"""Figure rendering for exported sqrbm results directories."""

from .figures import FigureSpec, build_figure, render
from .results import (
    MissingRuns,
    PlotDataError,
    ResultSet,
    StatsMismatch,
    load_results,
    run_identity,
)

__version__ = "0.1.0"
