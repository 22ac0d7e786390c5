import click

from vpflow.commands.common import CliConfig, build_config, echo_verdicts, handle_errors, report_status, run_options
from vpflow.experiments.existence import mollified_existence_suite
from vpflow.experiments.reporting import write_report


@click.command('existence')
@run_options
@handle_errors
def existence(**options):
    """Mollified approximation of a rough datum in the repulsive case"""
    config, store, run_id = build_config(CliConfig('existence', **options))
    report = mollified_existence_suite(config)
    directory = write_report(report, config, store, run_id, {
        'energy_drift': 'relative', 'energy_excess': 'relative', 'initial_energy': 'energy',
        'mass': 'mass', 'cauchy_deviation': 'phase-space volume',
    })
    click.echo(f"existence: {len(report.sequence)} members x {len(report.seeds)} seeds, status {report.status}")
    echo_verdicts(report.verdicts)
    click.echo(f"  report in {directory}")
    return report_status(report.passed, report.status == 'complete')
