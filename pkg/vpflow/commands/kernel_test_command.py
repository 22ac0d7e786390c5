import click

import vpflow
from vpflow.commands.common import handle_errors, report_status
from vpflow.config.simulation_settings import default_output_root
from vpflow.experiments.kernel_test import kernel_translation_test
from vpflow.utils.artifacts import ArtifactStore


@click.command('kernel-test')
@click.option('--N', 'dim', type=int, default=3, show_default=True, help='Spatial dimension')
@click.option('--p', 'p', type=float, default=1.25, show_default=True, help='Lebesgue exponent')
@click.option('--levels', type=int, default=6, show_default=True, help='|h| = 2^-1 .. 2^-levels')
@click.option('--output', 'output_dir', type=click.Path(file_okay=False), help='Output directory')
@handle_errors
def kernel_test(dim, p, levels, output_dir):
    """Translation error of the kernel against |h| and its log-log slope"""
    result = kernel_translation_test(p, dim, levels)
    store = ArtifactStore(default_output_root())
    run_id = store.create_run('kernel-test', output_dir)
    store.write_table(run_id, 'translation.csv', 'h [length], error [L^p norm]', ['h', 'error'],
                      [[float(h), float(e)] for h, e in zip(result.lengths, result.values)])
    store.write_yaml(run_id, 'summary.yaml', result.to_dict())
    store.finish_run(run_id, 'complete', {
        'package': 'vpflow', 'version': vpflow.__version__, 'seed': None,
        'config': {'dim': dim, 'p': p, 'levels': levels},
    })

    click.echo(f"{'|h|':>12} {'error':>14}")
    for h, e in zip(result.lengths, result.values):
        click.echo(f"{h:12.6g} {e:14.6e}")
    click.echo(f"slope {result.fit.slope:.4f} (alpha = 1 - N + N/p = {result.alpha:.4f}, "
               f"relative error {result.relative_error:.2%})")
    return report_status(result.passed)
