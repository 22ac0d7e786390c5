import click

from vpflow.commands.common import EXIT_ABORT, CliConfig, build_config, handle_errors, report_status, run_options
from vpflow.experiments.simulation import run_simulation, write_run_artifacts


@click.command('simulate')
@run_options
@handle_errors
def simulate(**options):
    """Advance one configured datum and write its history and diagnostics"""
    config, store, run_id = build_config(CliConfig('simulate', **options))
    artifacts = run_simulation(config)
    directory = write_run_artifacts(artifacts, store, run_id, config)

    click.echo(f"simulate: {artifacts.status}, {artifacts.history.samples} samples to t={artifacts.history.horizon:g}")
    click.echo(f"  energy drift {artifacts.diagnostics.energy_drift:.3e}")
    for name, check in artifacts.checks.items():
        mark = 'PASS' if check['passed'] else ('warn' if check['advisory'] else 'FAIL')
        click.echo(f"  [{mark}] {name}: {check['value']} (threshold {check['threshold']})")
    click.echo(f"  artifacts in {directory}")
    if artifacts.status != 'complete':
        return EXIT_ABORT
    return report_status(artifacts.passed)
