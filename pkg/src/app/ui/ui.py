"""
Console rendering for scg-emotion.

Tables go to stdout through a themed rich console; logging and progress use
stderr, so piping a command's output captures only what is printed here.
"""

from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import pandas as pd
from rich import box
from rich.console import Console
from rich.table import Table
from rich.text import Text
from rich.theme import Theme

from app.core.models import ValidationReport

UI_THEME = Theme({
    "primary": "white",
    "secondary": "bright_black",
    "accent": "red",
    "warning": "bold red",
    "error": "bold red",
    "ok": "green",
})

console = Console(theme=UI_THEME)

# columns rendered in the accent style when filled
_HIGHLIGHT_SUFFIXES = ("_stars",)


def print_error(message: str) -> None:
    console.print(f"Error: {message}", style="error", highlight=False)


def frame_table(frame: pd.DataFrame, title: Optional[str] = None) -> Table:
    """
    Build a rich table from a data frame of already formatted cells.

    Args:
        frame: Table to render; every cell is printed with str()
        title: Optional table title

    Returns:
        Table object
    """
    table = Table(title=title, header_style="secondary", box=box.SIMPLE_HEAVY, title_style="bold white")
    for column in frame.columns:
        numeric = column not in ("classifier", "cardiac", "peripherals", "dimension", "strategy",
                                 "subject_id", "scenario", "setup")
        table.add_column(str(column), justify="right" if numeric else "left", header_style="bold")
    for row in frame.itertuples(index=False):
        cells = []
        for column, value in zip(frame.columns, row):
            text = "" if value is None else str(value)
            style = "accent" if str(column).endswith(_HIGHLIGHT_SUFFIXES) and text else "primary"
            cells.append(Text(text, style=style))
        table.add_row(*cells)
    return table


def display_results_table(frame: pd.DataFrame, title: str = "Single-trial classification") -> None:
    """Print the mean accuracy / F1 table with significance stars."""
    console.print(frame_table(frame, title))


def display_findings(reports: Sequence[ValidationReport], parse_errors: Iterable[str] = ()) -> int:
    """
    Print validation findings, one row per finding.

    Returns:
        Number of problems printed
    """
    table = Table(title="Validation findings", header_style="secondary", box=box.SIMPLE_HEAVY)
    for column in ("Subject", "Video", "Channel", "Finding", "Detail"):
        table.add_column(column, header_style="bold")
    problems = 0
    for message in parse_errors:
        table.add_row("", "", "", Text("parse error", style="error"), message)
        problems += 1
    for report in reports:
        for finding in report.findings:
            channel = finding.channel.value if finding.channel is not None else ""
            table.add_row(report.subject_id, report.video_id, channel,
                          Text(finding.kind, style="warning"), finding.detail)
            problems += 1

    if problems:
        console.print(table)
    checked = len(reports)
    style = "error" if problems else "ok"
    console.print(f"{checked} trials checked, {problems} problems", style=style)
    return problems


def display_written(paths: List[Path], root: Path) -> None:
    """List the files a command wrote, relative to its output directory."""
    console.print(f"Wrote {len(paths)} files to {root}", style="secondary")
    for path in paths:
        try:
            shown = path.relative_to(root)
        except ValueError:
            shown = path
        console.print(f"  {shown}", style="secondary", highlight=False)
