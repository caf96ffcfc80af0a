"""
Command line entry point, ``dyadmhd <subcommand> [--config PATH] [--out-dir PATH] [--seed N] [--threads N] [--log-level LEVEL]``.
"""

import sys

import climax as clx

from dyadmhd.commands import run_command
from dyadmhd.logging import LEVELS, configure_logging_handler


@clx.group()
def cli():
    pass


def common_arguments(fxn):
    for _decorator in reversed(
        [
            clx.argument("--config", default=None, help="YAML run configuration (defaults if omitted)."),
            clx.argument("--out-dir", default=".", help="Directory receiving the artifacts."),
            clx.argument("--seed", type=int, default=None, help="Overrides run.master_seed."),
            clx.argument("--threads", type=int, default=0, help="Worker threads (0 runs serially)."),
            clx.argument("--log-level", choices=LEVELS, default="INFO"),
            clx.argument("--progress", action="store_true", help="Show progress bars."),
        ]
    ):
        fxn = _decorator(fxn)
    return fxn


def _dispatch(subcommand, config, out_dir, seed, threads, log_level, progress):
    configure_logging_handler(level=log_level)
    outcome = run_command(subcommand, config, out_dir, seed=seed, threads=threads, verbose=progress)
    if outcome.message:
        print(outcome.message, file=sys.stderr)
    sys.exit(outcome.exit_code)


@cli.command()
@common_arguments
def simulate(**kwargs):
    """Run an ensemble of the configured scheme and write the moment series."""
    return _dispatch("simulate", **kwargs)


@cli.command()
@common_arguments
def bd_sample(**kwargs):
    """Sample birth-death paths and write histograms and visit statistics."""
    return _dispatch("bd-sample", **kwargs)


@cli.command()
@common_arguments
def forward(**kwargs):
    """Solve the forward equations and write the energy profile series."""
    return _dispatch("forward", **kwargs)


@cli.command()
@common_arguments
def girsanov_check(**kwargs):
    """Compare reweighted linear and direct nonlinear ensembles."""
    return _dispatch("girsanov-check", **kwargs)


@cli.command()
@common_arguments
def quantities(**kwargs):
    """Print the spectral quantities of the model parameters."""
    return _dispatch("quantities", **kwargs)


@cli.command()
@common_arguments
def verify(**kwargs):
    """Run the acceptance suite and report PASS/FAIL per criterion."""
    return _dispatch("verify", **kwargs)


# Subcommands are registered under their function names.
_ALIASES = {"bd-sample": "bd_sample", "girsanov-check": "girsanov_check"}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    for _index, _arg in enumerate(argv):
        if not _arg.startswith("-"):
            argv[_index] = _ALIASES.get(_arg, _arg)
            break
    cli(argv)


if __name__ == "__main__":
    main()
