import click

from vpflow.commands.common import EXIT_ABORT, CliConfig, build_config, handle_errors, report_status, run_options
from vpflow.experiments.functional_run import analyze_flow_functionals
from vpflow.experiments.simulation import run_manifest


@click.command('functional')
@run_options
@click.option('--doubling', is_flag=True, help='Repeat with twice the particles and compare the beta functional')
@handle_errors
def functional(doubling, **options):
    """Superlevel decay, beta functional, compressibility and field splits of one run"""
    config, store, run_id = build_config(CliConfig('functional', **options))
    summary = analyze_flow_functionals(config, check_doubling=doubling)
    store.write_yaml(run_id, 'functionals.yaml', summary.to_dict())
    store.write_table(run_id, 'superlevel.csv', 'lambda [phase-space length], g [phase-space volume]',
                      ['lambda', 'g'], [[float(l), float(g)] for l, g in zip(summary.curve.lambdas,
                                                                              summary.curve.measures)])
    status = summary.run.status
    store.finish_run(run_id, status, run_manifest(config, config.run.seed))

    click.echo(f"functional: {status}, covered measure {summary.curve.covered_measure:.4g}")
    if summary.beta_value is not None:
        click.echo(f"  beta functional {summary.beta_value:.6g}, fitted A {summary.fit.A_fit:.6g}, "
                   f"chain bound {'holds' if summary.fit.holds else 'violated'}")
    if summary.compressibility is not None:
        click.echo(f"  compressibility in [{summary.compressibility.min_ratio:.4f}, "
                   f"{summary.compressibility.max_ratio:.4f}]")
    if summary.r1 is not None:
        click.echo(f"  R1 split: L1 {summary.r1.l1:.4g} <= {summary.r1.bound:.4g}, Linf {summary.r1.linf:.4g}")
    if summary.hls is not None:
        click.echo(f"  weak-norm ratio {summary.hls:.4g}")
    click.echo(f"  output in {store.path(run_id)}")
    if status != 'complete':
        return EXIT_ABORT
    return report_status(summary.passed)
