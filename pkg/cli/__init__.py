"""Command-line experiment driver."""
from .commands import COMMANDS, write_csv
from .report import render_report

__all__ = ["COMMANDS", "render_report", "write_csv"]
