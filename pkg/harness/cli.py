"""Command line entry: one subcommand per scenario.

    python -m harness.cli compare --out results/compare
    flask --app run lab ensemble --seed 7 --quiet
"""
import dataclasses
import logging

import click
from flask import current_app, has_app_context
from flask.cli import ScriptInfo

from entropic.errors import ConfigError

from .experiment import SCENARIOS, default_config, load_config
from .scenarios import DEFAULT_SETTINGS, run

logger = logging.getLogger(__name__)


def _resolve_app(ctx):
    if isinstance(ctx.obj, dict) and ctx.obj.get('app') is not None:
        return ctx.obj['app']
    if isinstance(ctx.obj, ScriptInfo):
        return ctx.obj.load_app()
    if has_app_context():
        return current_app._get_current_object()
    from app import create_app
    return create_app()


def build_config(scenario, config_path=None, out=None, seed=None):
    """Config from file (or the scenario defaults) with command line overrides."""
    config = load_config(config_path, scenario) if config_path else default_config(scenario)
    overrides = {}
    if out is not None:
        overrides['output_dir'] = out
    if seed is not None:
        overrides['seed'] = seed
    return dataclasses.replace(config, **overrides) if overrides else config


def _execute(ctx, scenario, config_path, out, seed, quiet):
    app = _resolve_app(ctx)
    if quiet:
        logging.getLogger().setLevel(logging.WARNING)

    try:
        config = build_config(scenario, config_path, out, seed)
    except ConfigError as e:
        click.echo(f'Configuration error: {e.message}', err=True)
        ctx.exit(e.exit_code)

    with app.app_context():
        from models.run import record_run
        settings = {key: app.config.get(key, default) for key, default in DEFAULT_SETTINGS.items()}
        result = run(config, settings)
        record_run(result, config)

    if result.error:
        click.echo(f'{scenario}: {result.error["message"]}', err=True)
    if not quiet:
        for report in result.reports:
            mark = 'pass' if report.passed else 'FAIL'
            click.echo(f'{report.metric:<40} {report.value:>14.6g}  '
                       f'tol {report.tolerance:<10g} {mark}')
        click.echo(f'{scenario}: exit {result.exit_code}, {len(result.artifacts)} files '
                   f'in {result.output_dir} ({result.runtime:.2f}s)')
    ctx.exit(result.exit_code)


@click.group('lab')
@click.pass_context
def lab(ctx):
    """Entropic dynamics lab: run a scenario and write its artifacts."""


def _scenario_command(scenario):
    @click.option('--config', 'config_path', type=click.Path(dir_okay=False),
                  help='JSON experiment configuration.')
    @click.option('--out', type=click.Path(file_okay=False), help='Output directory.')
    @click.option('--seed', type=click.IntRange(min=0), help='Override the seed.')
    @click.option('--quiet', is_flag=True, help='Only log warnings and errors.')
    @click.pass_context
    def command(ctx, config_path, out, seed, quiet):
        _execute(ctx, scenario, config_path, out, seed, quiet)

    command.__doc__ = f'Run the {scenario} scenario.'
    return lab.command(scenario)(command)


for _scenario in SCENARIOS:
    _scenario_command(_scenario)


if __name__ == '__main__':
    lab()
