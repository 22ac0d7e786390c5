"""Options, config resolution and exit-status mapping shared by every subcommand."""
import functools
import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple

import click

from vpflow.config.simulation_settings import default_output_root, resolve_settings
from vpflow.errors import ConfigurationError, VPFlowError
from vpflow.experiments.configuration import ExperimentConfig, resolve_seed
from vpflow.utils.artifacts import ArtifactStore

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_CONFIG = 2
EXIT_ABORT = 3


def run_options(fn: Callable) -> Callable:
    """--config, --output, --set, --deterministic, --threads, --omega, --N"""
    options = [
        click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
                     help='YAML settings file'),
        click.option('--output', 'output_dir', type=click.Path(file_okay=False),
                     help='Output directory (default: $VPFLOW_OUTPUT_ROOT/<command>-<time>)'),
        click.option('--set', 'overrides', multiple=True, metavar='SECTION.KEY=VALUE',
                     help='Override one setting; repeatable'),
        click.option('--deterministic/--no-deterministic', default=None,
                     help='Keep the configured seed (default) or draw a fresh one'),
        click.option('--threads', type=int, default=None, help='Worker threads'),
        click.option('--omega', type=int, default=None, help='+1 repulsive, -1 attractive'),
        click.option('--N', 'dim', type=int, default=None, help='Spatial dimension'),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


@dataclass(frozen=True)
class CliConfig:
    """One subcommand invocation as parsed from the command line"""
    subcommand: str
    config_path: Optional[str] = None
    output_dir: Optional[str] = None
    overrides: Tuple[str, ...] = ()
    deterministic: Optional[bool] = None
    threads: Optional[int] = None
    omega: Optional[int] = None
    dim: Optional[int] = None

    def flag_settings(self) -> Dict[str, Any]:
        """Explicit flags as a settings tree; they win over the file and --set"""
        run = {key: value for key, value in
               (('deterministic', self.deterministic), ('threads', self.threads),
                ('omega', self.omega), ('dim', self.dim))
               if value is not None}
        return {'run': run} if run else {}


def build_config(cli: CliConfig) -> Tuple[ExperimentConfig, ArtifactStore, str]:
    """Resolve and validate the settings tree, then open the output directory"""
    settings = resolve_settings(cli.config_path, cli.overrides, cli.flag_settings(), cli.subcommand)
    config = resolve_seed(ExperimentConfig.from_settings(settings))
    store = ArtifactStore(default_output_root())
    run_id = store.create_run(cli.subcommand, cli.output_dir)
    return config, store, run_id


def handle_errors(fn: Callable[..., int]) -> Callable:
    """Map library failures to exit statuses; the command returns its own status otherwise"""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            status = fn(*args, **kwargs)
        except ConfigurationError as e:
            click.echo(f"configuration error: {e}", err=True)
            ctx.exit(EXIT_CONFIG)
        except VPFlowError as e:
            logger.error("run aborted: %s", e)
            click.echo(f"run aborted: {e}", err=True)
            ctx.exit(EXIT_ABORT)
        ctx.exit(status)
    return wrapper


def report_status(passed: bool, complete: bool = True) -> int:
    if not complete:
        return EXIT_ABORT
    return EXIT_OK if passed else EXIT_VERDICT


def echo_verdicts(verdicts) -> None:
    for v in verdicts:
        mark = 'PASS' if v.passed else 'FAIL'
        click.echo(f"  [{mark}] {v.name}: {v.metric} = {v.value} (threshold {v.threshold})")
