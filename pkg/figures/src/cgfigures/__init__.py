"""Figure rendering for noisy-CG experiment CSV outputs."""

from .render import (FigureError, FigureSpec, MissingInputError,
                     RenderResult, load_spec, render, render_dir)

__version__ = "0.1.0"
