"""Reusable console components.

Everything here prints to stderr; stdout carries only the JSON summary.
"""

from typing import Iterable, Optional

import humanize
from rich.console import Console
from rich.table import Table

from survrank import __version__
from survrank.display.colors import COLORS, SURVRANK_THEME

console = Console(stderr=True, theme=SURVRANK_THEME)

LOGO_MINIMAL = "◧ survrank"


def print_header(title: str):
    """Print a styled header."""
    console.print()
    console.print(f"  [{COLORS['primary']}]{LOGO_MINIMAL}[/] [dim]v{__version__}[/dim] {title}")
    console.print(f"  [dim]{'─' * 45}[/dim]")


def print_section(title: str, char: str = "─"):
    console.print()
    console.print(f"  [bold]{title}[/bold]")
    console.print(f"  [dim]{char * 50}[/dim]")


def print_key_value(key: str, value: str, indent: int = 2):
    spaces = " " * indent
    console.print(f"{spaces}[dim]{key:<18}[/dim]  {value}")


def print_success(message: str):
    console.print(f"  [{COLORS['success']}]✓[/] {message}")


def print_error(message: str):
    console.print(f"  [{COLORS['error']}]✗[/] {message}")


def print_warning(message: str):
    console.print(f"  [{COLORS['warning']}]⚠[/] {message}")


def create_bar(value: float, max_value: float, width: int = 30) -> str:
    """Create an ASCII bar."""
    if max_value <= 0:
        return "░" * width
    filled = int(max(0.0, min(value / max_value, 1.0)) * width)
    return "█" * filled + "░" * (width - filled)


def format_count(n: int) -> str:
    """1234567 -> '1,234,567'."""
    return humanize.intcomma(n)


def format_duration(seconds: float) -> str:
    return humanize.precisedelta(seconds, minimum_unit="milliseconds", format="%0.0f")


def format_interval(point: Optional[float], lower: Optional[float], upper: Optional[float]) -> str:
    if point is None:
        return "[dim]undefined[/dim]"
    return f"{point:.4f} [dim]({lower:.4f}, {upper:.4f})[/dim]"


def print_metric_table(reports: Iterable):
    """Render MetricReport rows."""
    table = Table(show_header=True, header_style="bold", box=None, padding=(0, 2))
    table.add_column("metric")
    table.add_column("horizon", justify="right")
    table.add_column("estimate (95% CI)")
    table.add_column("n", justify="right")
    for r in reports:
        horizon = "overall" if r.horizon is None and r.metric == "auc" else (f"{r.horizon:g}" if r.horizon else "")
        table.add_row(r.metric, horizon, format_interval(r.point, r.ci_lower, r.ci_upper), format_count(r.n))
    console.print(table)


def print_sweep(rows: Iterable[dict]):
    """C-index per sweep value as bars."""
    rows = list(rows)
    for row in rows:
        c = row.get("c_index")
        label = str(row["value"])
        if c is None:
            console.print(f"  {label:>14}  [dim]undefined[/dim]")
            continue
        # bars start at chance level
        console.print(f"  {label:>14}  [{COLORS['primary']}]{create_bar(c - 0.5, 0.5)}[/] {c:.4f}")
