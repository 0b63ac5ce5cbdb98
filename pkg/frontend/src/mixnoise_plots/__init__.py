from .io import PlotInputError
from .render import KINDS, PlotJob, RenderResult, render

__all__ = ["KINDS", "PlotInputError", "PlotJob", "RenderResult", "render"]
