"""Static renderers for the qpt sweep CSVs (six figure ids)."""

__version__ = "0.1.0"

from .render import FIGURE_IDS, FigureSpec, RenderInfo, render  # noqa: F401
