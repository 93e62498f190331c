"""Display utilities for the survrank CLI."""

from survrank.display.colors import COLORS, SURVRANK_THEME
from survrank.display.components import (
    console,
    print_error,
    print_header,
    print_success,
    print_warning,
)

__all__ = [
    "COLORS",
    "SURVRANK_THEME",
    "console",
    "print_error",
    "print_header",
    "print_success",
    "print_warning",
]
