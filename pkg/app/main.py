import json
import logging
import sys
from functools import wraps
from pathlib import Path
from typing import Optional

import click
from pydantic import ValidationError

from . import __version__, schemas
from .config import TOLERANCE_PROFILES, settings
from .dependencies import check_feasible, get_context
from .errors import ToolkitError
from .model.catalog import reference_models
from .runner import SWEEP_AXES, convergence_sweep, run
from .utils import config_hash

logger = logging.getLogger("app")

EXIT_CONFIG = 2
EXIT_OUTPUT = 5


def load_config(path: str, seed: Optional[int] = None) -> schemas.RunConfig:
    config = schemas.RunConfig.model_validate_json(Path(path).read_text(encoding="utf-8"))
    if seed is not None:
        payload = config.model_dump()
        payload["ensemble"]["master_seed"] = seed
        config = schemas.RunConfig.model_validate(payload)
    return config


def exit_codes(fn):
    """Map toolkit, validation and I/O errors onto the documented exit codes."""

    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ToolkitError as e:
            logger.error("%s: %s", type(e).__name__, e.detail)
            sys.exit(e.exit_code)
        except ValidationError as e:
            logger.error("invalid config:\n%s", e)
            sys.exit(EXIT_CONFIG)
        except OSError as e:
            logger.error("I/O failure: %s", e)
            sys.exit(EXIT_OUTPUT)

    return wrapper


config_option = click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="Run config (JSON).")
out_option = click.option("--out", default=None, help="Output directory; overrides the config and NCTORUS_OUTPUT_DIR.")
workers_option = click.option("--workers", type=click.IntRange(min=1), default=None, help="Worker count.")
seed_option = click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="Override the master seed.")
profile_option = click.option(
    "--tolerance-profile", "profile_name", type=click.Choice(sorted(TOLERANCE_PROFILES)), default=None
)


@click.group()
@click.version_option(__version__)
def cli():
    logging.basicConfig(
        level=settings.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@cli.command("run")
@config_option
@out_option
@workers_option
@seed_option
@profile_option
@exit_codes
def run_command(config_path, out, workers, seed, profile_name):
    """Run the configured task over every realization."""
    config = load_config(config_path, seed)
    result = run(config, out=out, workers=workers, profile_name=profile_name)
    click.echo(json.dumps({"config_hash": result.config_hash, "mean": result.mean, "stderr": result.stderr}, indent=2))


@cli.command("sweep")
@config_option
@click.option("--axis", type=click.Choice(SWEEP_AXES), required=True)
@click.option("--values", default=None, help="Comma-separated axis values; defaults per axis.")
@out_option
@workers_option
@seed_option
@profile_option
@exit_codes
def sweep_command(config_path, axis, values, out, workers, seed, profile_name):
    """Repeat the task along one axis and write sweep.csv."""
    config = load_config(config_path, seed)
    parsed = [float(v) for v in values.split(",")] if values else None
    frame = convergence_sweep(config, axis, parsed, out=out, workers=workers, profile_name=profile_name)
    click.echo(frame.to_string(index=False))


@cli.command("fixtures")
def fixtures_command():
    """Print the reference model catalog."""
    click.echo(json.dumps([m.describe() for m in reference_models().values()], indent=2))


@cli.command("validate")
@config_option
@seed_option
@exit_codes
def validate_command(config_path, seed):
    """Validate a config, check flux admissibility and memory, print its hash."""
    config = load_config(config_path, seed)
    check_feasible(config)
    get_context(config, 0).release()
    click.echo(config_hash(config))


if __name__ == "__main__":
    cli()
