from flask import Blueprint, abort, current_app, jsonify, request
from harness.experiment import SCENARIOS, DEFAULTS
from models.run import ComparisonRecord, ExperimentRun

bp = Blueprint('api', __name__)


def _page():
    try:
        page = int(request.args.get('page', 1))
    except ValueError:
        abort(400, description='page must be an integer')
    if page < 1:
        abort(400, description='page must be positive')
    return page


@bp.route('/runs')
def runs_api():
    """Recorded runs, newest first, optionally filtered by scenario."""
    scenario = request.args.get('scenario', 'all')
    if scenario != 'all' and scenario not in SCENARIOS:
        abort(400, description=f'unknown scenario {scenario!r}')

    query = ExperimentRun.get_by_scenario(scenario)

    per_page = current_app.config['RUNS_PER_PAGE']
    page = _page()
    total = query.count()
    runs = query.offset((page - 1) * per_page).limit(per_page).all()

    return jsonify({
        'runs': [run.to_dict(include_comparisons=False) for run in runs],
        'total': total,
        'page': page
    })


@bp.route('/runs/<int:run_id>')
def run_api(run_id):
    run = ExperimentRun.query.get_or_404(run_id)
    return jsonify(run.to_dict())


@bp.route('/reports')
def reports_api():
    """Comparison records across runs; ``passed=true|false`` filters them."""
    query = ComparisonRecord.query
    passed = request.args.get('passed')
    if passed is not None:
        if passed.lower() not in ('true', 'false'):
            abort(400, description='passed must be true or false')
        query = query.filter_by(passed=passed.lower() == 'true')

    scenario = request.args.get('scenario')
    if scenario:
        query = query.join(ExperimentRun).filter(ExperimentRun.scenario == scenario)

    records = query.order_by(ComparisonRecord.id).all()
    return jsonify({
        'reports': [record.to_dict() for record in records],
        'total': len(records)
    })


@bp.route('/scenarios')
def scenarios_api():
    recorded = set(ExperimentRun.get_scenarios())
    return jsonify({
        'scenarios': [{'name': name, 'defaults': DEFAULTS[name], 'recorded': name in recorded}
                      for name in SCENARIOS],
        'total': len(SCENARIOS)
    })


@bp.route('/stats')
def stats_api():
    """Run counts per scenario and status."""
    by_scenario = {}
    for scenario in ExperimentRun.get_scenarios():
        latest = ExperimentRun.latest(scenario)
        by_scenario[scenario] = {
            'runs': ExperimentRun.query.filter_by(scenario=scenario).count(),
            'passed': ExperimentRun.query.filter_by(scenario=scenario, exit_code=0).count(),
            'latest_status': latest.status
        }

    return jsonify({
        'runs': {
            'total': ExperimentRun.query.count(),
            'passed': ExperimentRun.query.filter_by(exit_code=0).count()
        },
        'comparisons': {
            'total': ComparisonRecord.query.count(),
            'failed': ComparisonRecord.query.filter_by(passed=False).count()
        },
        'scenarios': by_scenario
    })
