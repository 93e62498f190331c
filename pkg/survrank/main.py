"""survrank CLI - main application entry point."""

from pathlib import Path
from typing import Optional

import typer

from survrank import __version__
from survrank.config.logging_setup import setup_logging
from survrank.display.components import console

app = typer.Typer(
    name="survrank",
    help="Censoring-aware pairwise risk ranking for survival cohorts.",
    no_args_is_help=True,
    add_completion=False,
)


def version_callback(value: bool):
    if value:
        console.print(f"survrank version {__version__}")
        raise typer.Exit()


@app.callback()
def main(
    verbose: bool = typer.Option(False, "--verbose", help="Debug logging on stderr."),
    log_file: Optional[Path] = typer.Option(None, "--log-file", help="Also append logs to this file."),
    version: bool = typer.Option(
        False,
        "--version",
        "-V",
        help="Show version and exit.",
        callback=version_callback,
        is_eager=True,
    ),
):
    """survrank - rank subjects by time-to-event from pairwise comparisons."""
    setup_logging(verbose=verbose, log_file=log_file)


# Import and register commands
from survrank.commands import ablate, evaluate, km, pairs, score, split, synth, train  # noqa: E402

app.command()(synth.synth)
app.command()(split.split)
app.command()(pairs.pairs)
app.command()(train.train)
app.command()(score.score)
app.command("eval")(evaluate.evaluate_command)
app.command()(km.km)
app.command()(ablate.ablate)


if __name__ == "__main__":
    app()
