"""Batch command line: synthesize, build corpora, extract, match and evaluate.

Exit codes: 0 success, 2 domain error, 64 usage error, 74 I/O error.
Results go to standard output; logs go to standard error.
"""
import logging
import os
import sys

import click

from config.pipeline import load_pipeline_config, matcher_list
from services.corpus_service import CorpusPlan, CorpusService
from services.evaluation_service import FUSION_MODES, EvaluationService
from services.matching_service import IMAGE, MatchingService
from utils.errors import CalibrationError, FingerprintError
from utils.fusion import read_normalizers
from utils.imageio import load_spec_file, write_synthetic
from utils.matcher_ridge import write_fingercode
from utils.symmetry import dump_field
from utils.template_io import write_template

logger = logging.getLogger(__name__)

EXIT_DOMAIN = 2
EXIT_USAGE = 64
EXIT_IO = 74

class ExitCodeGroup(click.Group):
    """Command group mapping failures onto the fixed exit codes"""

    def make_context(self, info_name, args, parent=None, **extra):
        try:
            return super().make_context(info_name, args, parent=parent, **extra)
        except click.UsageError as e:
            e.exit_code = EXIT_USAGE
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = EXIT_USAGE
            raise
        except FingerprintError as e:
            logger.debug(f'{e.error_code}: {e.message}')
            click.echo(f'error: {e.message}', err=True)
            ctx.exit(EXIT_DOMAIN)
        except OSError as e:
            click.echo(f'error: {e}', err=True)
            ctx.exit(EXIT_IO)

def _config(ctx):
    """Pipeline configuration, loaded on first use"""
    state = ctx.find_root().obj
    if 'config' not in state:
        state['config'] = load_pipeline_config(state['config_path'], state['overrides'])
    return state['config']

@click.group(cls=ExitCodeGroup)
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
              help='Pipeline configuration file ("key = value" lines)')
@click.option('--set', 'overrides', multiple=True, metavar='KEY=VALUE', help='Override one configuration key')
@click.option('--verbose', is_flag=True, help='Debug logging')
@click.pass_context
def cli(ctx, config_path, overrides, verbose):
    """Fingerprint verification toolkit"""
    level = logging.DEBUG if verbose else getattr(logging, os.getenv('LOG_LEVEL', 'INFO').upper(), logging.INFO)
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr
    )
    ctx.obj = {'config_path': config_path, 'overrides': tuple(overrides)}

@cli.command()
@click.argument('spec_file', type=click.Path(dir_okay=False))
@click.argument('out_dir', type=click.Path(file_okay=False))
def synth(spec_file, out_dir):
    """Render every entry of a spec file to PGM plus ground truth"""
    specs = load_spec_file(spec_file)
    os.makedirs(out_dir, exist_ok=True)
    for spec in specs:
        image_path, truth_path = write_synthetic(spec, out_dir)
        click.echo(f'{image_path} {truth_path}')

@cli.command()
@click.argument('out_dir', type=click.Path(file_okay=False))
@click.option('--fingers', type=click.IntRange(min=1), default=20, show_default=True)
@click.option('--impressions', type=click.IntRange(min=2), default=5, show_default=True)
@click.option('--size', type=click.IntRange(min=128), default=256, show_default=True, help='Image width and height')
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--max-rotation', type=click.FloatRange(min=0), default=10.0, show_default=True)
@click.option('--max-translation', type=click.FloatRange(min=0), default=12.0, show_default=True)
@click.option('--max-noise', type=click.FloatRange(min=0), default=20.0, show_default=True)
def corpus(out_dir, fingers, impressions, size, seed, max_rotation, max_translation, max_noise):
    """Generate a seeded synthetic corpus with its manifest"""
    plan = CorpusPlan(fingers=fingers, impressions=impressions, width=size, height=size, seed=seed,
                      max_rotation=max_rotation, max_translation=max_translation, max_noise=max_noise)
    finger_count, impression_count = CorpusService().generate(out_dir, plan)
    click.echo(f'fingers={finger_count} impressions={impression_count}')

@cli.command()
@click.argument('image_path', type=click.Path(dir_okay=False))
@click.argument('out_path', type=click.Path(dir_okay=False))
@click.option('--method', type=click.Choice(['symmetry', 'skeleton']), default=None,
              help='Minutiae detector (default: extract.method)')
@click.option('--dump-fields', 'dump_dir', type=click.Path(file_okay=False), default=None,
              help='Also write LS and PS magnitude/argument images here')
@click.pass_context
def extract(ctx, image_path, out_path, method, dump_dir):
    """Extract a minutiae template from a PGM image"""
    service = MatchingService(_config(ctx))
    image = service.extraction.load_image(image_path)
    fields = service.extraction.compute_fields(image)
    template = service.extraction.extract_template(image, method, fields)
    write_template(template, out_path)

    if dump_dir:
        os.makedirs(dump_dir, exist_ok=True)
        for name, field in (('ls', fields.ls), ('ps', fields.psi)):
            dump_field(field, os.path.join(dump_dir, f'{name}_magnitude.pgm'),
                       os.path.join(dump_dir, f'{name}_argument.pgm'))
    click.echo(f'minutiae={len(template)}')

@cli.command()
@click.argument('image_path', type=click.Path(dir_okay=False))
@click.argument('out_path', type=click.Path(dir_okay=False))
@click.pass_context
def fingercode(ctx, image_path, out_path):
    """Write the ridge FingerCode of a PGM image"""
    service = MatchingService(_config(ctx))
    code = service.features('ridge', IMAGE, service.extraction.load_image(image_path))
    write_fingercode(code, out_path)
    click.echo(f'cells={code.grid_w}x{code.grid_h} valid={code.valid_count}')

@cli.command()
@click.argument('path_a', type=click.Path(dir_okay=False))
@click.argument('path_b', type=click.Path(dir_okay=False))
@click.option('--matcher', type=click.Choice(['hh', 'compat', 'elastic', 'ridge']), required=True)
@click.option('--normalizers', 'normalizers_path', type=click.Path(dir_okay=False), default=None,
              help='Calibrated normalizer file written by eval')
@click.pass_context
def match(ctx, path_a, path_b, matcher, normalizers_path):
    """Compare two images, templates or FingerCodes and print one score"""
    normalizer = None
    if normalizers_path:
        normalizer = read_normalizers(normalizers_path).get(matcher)
        if normalizer is None:
            raise CalibrationError(f'{normalizers_path} has no normalizer for {matcher}', 'MISSING_NORMALIZER')

    result = MatchingService(_config(ctx)).match_files(matcher, path_a, path_b, normalizer)
    line = f"matcher={matcher} raw={result['raw']:.6f}"
    if result['normalized'] is not None:
        line += f" norm={result['normalized']:.6f}"
    click.echo(line)

@cli.command(name='eval')
@click.argument('corpus_dir', type=click.Path(file_okay=False))
@click.argument('out_dir', type=click.Path(file_okay=False))
@click.option('--matchers', default=None, help='Comma-separated matcher ids (default: eval.matchers)')
@click.option('--fusion', type=click.Choice(list(FUSION_MODES)), default=None,
              help='Fusion rule(s) (default: fusion.rule)')
@click.option('--workers', type=click.IntRange(min=1), default=None, help='Worker threads (default: eval.workers)')
@click.pass_context
def evaluate(ctx, corpus_dir, out_dir, matchers, fusion, workers):
    """Run the verification protocol, calibrate, fuse and write every artifact"""
    config = _config(ctx)
    selected = matcher_list(config, matchers.split(',') if matchers else None)
    result = EvaluationService(config).run(corpus_dir, out_dir, selected, fusion, workers)

    for matcher_id in selected:
        click.echo(f'matcher={matcher_id} eer={result.eer[matcher_id]:.6f} auc={result.auc[matcher_id]:.6f}')
    if result.report is not None:
        click.echo(f'fusion_rows={len(result.report.rows)}')

if __name__ == '__main__':
    cli()
