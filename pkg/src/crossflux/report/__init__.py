"""
Output emitters: text templates, SVG bifurcation diagrams, CSV and JSON tables.
"""

from .base import Report
from .string_template import TemplateReport
from .svg import BifurcationDiagram, Panel, Series, branch_series
from .tables import (
    BRANCH_COLUMNS,
    read_branch_csv,
    read_state_csv,
    stored_branches,
    write_branch_csv,
    write_json,
    write_rows_csv,
    write_state_csv,
)

__all__ = [
    "Report",
    "TemplateReport",
    "BifurcationDiagram",
    "Panel",
    "Series",
    "branch_series",
    "BRANCH_COLUMNS",
    "read_branch_csv",
    "read_state_csv",
    "stored_branches",
    "write_branch_csv",
    "write_json",
    "write_rows_csv",
    "write_state_csv",
]
