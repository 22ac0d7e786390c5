"""
Strong and weak stability suites
"""
import click

from vpflow.commands.common import CliConfig, build_config, echo_verdicts, handle_errors, report_status, run_options
from vpflow.experiments.reporting import write_report
from vpflow.experiments.strong_stability import strong_stability_suite
from vpflow.experiments.weak_stability import weak_stability_suite

UNITS = {
    'data_distance': 'mass',
    'data_l1': 'mass',
    'field_difference': 'field*time*phase-space volume',
    'phi_delta_final': 'phase-space volume',
    'energy_drift': 'relative',
}


def _run_suite(cli: CliConfig, suite) -> int:
    config, store, run_id = build_config(cli)
    report = suite(config)
    units = dict(UNITS)
    units.update({m: 'phase-space volume' for m in report.metrics if m.startswith('deviation')})
    directory = write_report(report, config, store, run_id, units)
    click.echo(f"{cli.subcommand}: {len(report.sequence)} members x {len(report.seeds)} seeds, "
               f"status {report.status}")
    echo_verdicts(report.verdicts)
    click.echo(f"  report in {directory}")
    return report_status(report.passed, report.status == 'complete')


@click.command('stability')
@run_options
@handle_errors
def stability(**options):
    """Mollified sequence of a rough datum: data, flows and fields converge together"""
    return _run_suite(CliConfig('stability', **options), strong_stability_suite)


@click.command('weak-stability')
@run_options
@handle_errors
def weak_stability(**options):
    """Oscillating data: norms stay apart while flows converge"""
    return _run_suite(CliConfig('weak-stability', **options), weak_stability_suite)
