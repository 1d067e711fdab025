"""Command-line front end for the experiment drivers.

Each subcommand builds an ExperimentConfig from three layers (per-command
defaults, then an optional --config JSON file, then explicit flags) and
hands it to experiments.run.  Exit codes: 0 success, 2 bad configuration,
3 numeric failure.  Output files embed the resolved config, so a run can
be reproduced from its own header.
"""

from __future__ import annotations

import json
import sys

import click

from .experiments import OUTPUT_DIR_ENV, default_config, run

_CONFIG_ERROR_TYPES = (ValueError, TypeError, KeyError, OSError,
                       json.JSONDecodeError)


def _common_options(f):
    options = [
        click.option("--config", "config_path",
                     type=click.Path(exists=True, dir_okay=False),
                     default=None,
                     help="JSON config file; explicit flags override its fields."),
        click.option("--kappa", type=float, default=None,
                     help="SLE parameter, in (0, 4]."),
        click.option("--n-paths", type=int, default=None,
                     help="Number of Monte Carlo paths."),
        click.option("--dt", type=float, default=None,
                     help="Capacity step size (base step for signature-mc)."),
        click.option("--n-steps", type=int, default=None,
                     help="Number of capacity steps per path."),
        click.option("--seed", type=int, default=None,
                     help="Master seed; path i uses SeedSequence(seed, spawn_key=(i,))."),
        click.option("--out", "output_path", type=click.Path(dir_okay=False),
                     default=None,
                     help=f"Output file (default: per-command name under "
                          f"${OUTPUT_DIR_ENV} or the working directory)."),
        click.option("--threads", type=int, default=None,
                     help="Worker thread cap, 0 = automatic."),
    ]
    for opt in reversed(options):
        f = opt(f)
    return f


def _dispatch(command: str, config_path, **flags) -> None:
    """Merge defaults, config file, and flags, then run the experiment."""
    overrides = {key: value for key, value in flags.items()
                 if value is not None and value != ()}
    try:
        merged = {}
        if config_path is not None:
            with open(config_path, "r", encoding="utf-8") as fh:
                merged = json.load(fh)
            if not isinstance(merged, dict):
                raise ValueError("config file must hold a JSON object")
            file_command = merged.pop("command", command)
            if file_command != command:
                raise ValueError(
                    f"config file is for {file_command!r}, not {command!r}")
            for name in ("points", "ratios", "k_values", "center"):
                if name in merged and isinstance(merged[name], list):
                    merged[name] = tuple(tuple(e) if isinstance(e, list) else e
                                         for e in merged[name])
        merged.update(overrides)
        config = default_config(command, **merged)
    except _CONFIG_ERROR_TYPES as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    sys.exit(run(config))


@click.group()
@click.version_option(package_name="slepath")
def main() -> None:
    """Simulate chordal SLE traces and verify their quantitative laws."""


@main.command()
@_common_options
def trace(config_path, **flags) -> None:
    """Simulate one trace and write it as a t,re,im CSV."""
    _dispatch("trace", config_path, **flags)


@main.command("akappa-table")
@_common_options
@click.option("--quad-abs-tol", type=float, default=None,
              help="Absolute quadrature tolerance.")
@click.option("--quad-rel-tol", type=float, default=None,
              help="Relative quadrature tolerance.")
def akappa_table(config_path, **flags) -> None:
    """Tabulate the grading-3 constant: closed forms against quadrature."""
    _dispatch("akappa-table", config_path, **flags)


@main.command("signature-mc")
@_common_options
@click.option("--closure-delta", type=float, default=None,
              help="Distance from the endpoint at which traces are closed.")
@click.option("--total-time", type=float, default=None,
              help="Total capacity time of the graded step grid.")
@click.option("--render-per-step", type=int, default=None,
              help="Rendered tips per capacity step.")
@click.option("--closure-check-paths", type=int, default=None,
              help="Leading paths also closed at closure_delta / 2 to "
                   "measure the closure shift pairwise (0 disables).")
def signature_mc(config_path, **flags) -> None:
    """Estimate level-3 signature coefficients of closed disk traces."""
    _dispatch("signature-mc", config_path, **flags)


@main.command("left-passage")
@_common_options
@click.option("--point", "points", type=float, nargs=2, multiple=True,
              help="Marked point re im (repeatable); default: three unit-circle points.")
@click.option("--ratio-threshold", type=float, default=None,
              help="|Re|/Im ratio at which a point's side is decided.")
def left_passage(config_path, **flags) -> None:
    """Estimate right-passage frequencies at marked points."""
    _dispatch("left-passage", config_path, **flags)


@main.command()
@_common_options
@click.option("--center", type=float, nargs=2, default=None,
              help="Annulus center re im.")
@click.option("--outer-radius", type=float, default=None,
              help="Outer radius shared by the ladder.")
@click.option("--ratio", "ratios", type=float, multiple=True,
              help="Inner/outer radius ratio (repeatable).")
@click.option("--k", "k_values", type=int, multiple=True,
              help="Crossing count threshold (repeatable).")
def crossings(config_path, **flags) -> None:
    """Estimate k-fold annulus-crossing probabilities over a ratio ladder."""
    _dispatch("crossings", config_path, **flags)


@main.command()
@_common_options
@click.option("--ell0", type=float, default=None,
              help="Coarsest scale of the dyadic ladder.")
@click.option("--n-ells", type=int, default=None,
              help="Number of ladder rungs.")
@click.option("--fit-start", type=int, default=None,
              help="First rung index entering the log-log fit.")
def dimension(config_path, **flags) -> None:
    """Fit box-counting and tortuosity dimensions of simulated traces."""
    _dispatch("dimension", config_path, **flags)


if __name__ == "__main__":
    main()
