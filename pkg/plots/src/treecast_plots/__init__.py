"""Figures from treecast harness CSV output."""

from .figures import (FIGURE_KINDS, FigureSpec, SchemaError, build_figure,
                      load_rows, render, spec_from_file)

__all__ = ["FIGURE_KINDS", "FigureSpec", "SchemaError", "build_figure",
           "load_rows", "render", "spec_from_file"]
