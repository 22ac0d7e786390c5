import logging
from typing import Optional, Sequence

import click

from vpflow import __version__
from vpflow.commands.common import EXIT_CONFIG
from vpflow.commands.existence_command import existence
from vpflow.commands.functional_command import functional
from vpflow.commands.kernel_test_command import kernel_test
from vpflow.commands.simulate_command import simulate
from vpflow.commands.stability_command import stability, weak_stability

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT, force=True)


def create_cli() -> click.Group:
    """Create and configure the command group"""

    @click.group(name='vpflow')
    @click.option('--verbose', '-v', is_flag=True, help='Log at DEBUG level')
    @click.version_option(version=__version__, prog_name='vpflow')
    def cli(verbose):
        """Particle Vlasov-Poisson runs, flow functionals and experiment suites"""
        configure_logging(verbose)

    # Register subcommands
    cli.add_command(simulate)
    cli.add_command(stability)
    cli.add_command(weak_stability)
    cli.add_command(existence)
    cli.add_command(kernel_test)
    cli.add_command(functional)

    return cli


def parse_and_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI on argv and return its exit status instead of exiting"""
    cli = create_cli()
    try:
        status = cli.main(args=list(argv) if argv is not None else None, prog_name='vpflow',
                          standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        click.echo('aborted', err=True)
        return EXIT_CONFIG
    return int(status or 0)


if __name__ == '__main__':
    raise SystemExit(parse_and_dispatch())
