"""Command-line surface: config resolution, experiment orchestration and reports"""

from .experiment import Cell, CellResult, run_cells, run_experiment, suite_cells
from .main import main

__all__ = ["Cell", "CellResult", "run_cells", "run_experiment", "suite_cells", "main"]
