from app import db
from datetime import datetime
import json
import logging
import uuid

from sqlalchemy.exc import SQLAlchemyError

logger = logging.getLogger(__name__)


class ExperimentRun(db.Model):
    """One invocation of a harness scenario."""
    __tablename__ = 'experiment_runs'

    id = db.Column(db.Integer, primary_key=True)
    run_id = db.Column(db.String(36), unique=True, nullable=False, default=lambda: str(uuid.uuid4()))
    scenario = db.Column(db.String(32), nullable=False, index=True)
    seed = db.Column(db.BigInteger)
    config_json = db.Column(db.Text, nullable=False)
    exit_code = db.Column(db.Integer, nullable=False)
    status = db.Column(db.String(20), nullable=False)  # passed, failed, config-error, numerical-error
    runtime = db.Column(db.Float, default=0.0)
    output_dir = db.Column(db.String(255))
    error_message = db.Column(db.Text)
    created_at = db.Column(db.DateTime, default=datetime.utcnow)
    updated_at = db.Column(db.DateTime, default=datetime.utcnow, onupdate=datetime.utcnow)

    comparisons = db.relationship('ComparisonRecord', backref='run', lazy=True,
                                  cascade='all, delete-orphan')

    STATUSES = {0: 'passed', 1: 'failed', 2: 'config-error', 3: 'numerical-error'}

    def __repr__(self):
        return f'<ExperimentRun {self.scenario} {self.run_id}>'

    @property
    def config(self):
        return json.loads(self.config_json)

    def to_dict(self, include_comparisons=True):
        data = {
            'id': self.id,
            'run_id': self.run_id,
            'scenario': self.scenario,
            'seed': self.seed,
            'config': self.config,
            'exit_code': self.exit_code,
            'status': self.status,
            'runtime': self.runtime,
            'output_dir': self.output_dir,
            'error_message': self.error_message,
            'created_at': self.created_at.isoformat(),
            'updated_at': self.updated_at.isoformat()
        }
        if include_comparisons:
            data['comparisons'] = [record.to_dict() for record in self.comparisons]
        return data

    @staticmethod
    def get_scenarios():
        """Scenarios that have at least one recorded run."""
        scenarios = db.session.query(ExperimentRun.scenario).distinct().all()
        return sorted(row[0] for row in scenarios)

    @staticmethod
    def get_by_scenario(scenario):
        """Newest-first query over the runs of one scenario, or of all of them."""
        query = ExperimentRun.query
        if scenario != 'all':
            query = query.filter_by(scenario=scenario)
        return query.order_by(ExperimentRun.created_at.desc(), ExperimentRun.id.desc())

    @staticmethod
    def latest(scenario):
        return ExperimentRun.get_by_scenario(scenario).first()


class ComparisonRecord(db.Model):
    __tablename__ = 'comparison_records'

    id = db.Column(db.Integer, primary_key=True)
    run_id = db.Column(db.Integer, db.ForeignKey('experiment_runs.id'), nullable=False)
    metric = db.Column(db.String(100), nullable=False)
    value = db.Column(db.Float)
    tolerance = db.Column(db.Float, nullable=False)
    bound = db.Column(db.String(10), default='upper')
    passed = db.Column(db.Boolean, nullable=False)
    runtime = db.Column(db.Float, default=0.0)

    def __repr__(self):
        return f'<ComparisonRecord {self.metric} {"pass" if self.passed else "FAIL"}>'

    def to_dict(self):
        return {
            'id': self.id,
            'run_id': self.run.run_id,
            'scenario': self.run.scenario,
            'metric': self.metric,
            'value': self.value,
            'tolerance': self.tolerance,
            'bound': self.bound,
            'passed': self.passed,
            'runtime': self.runtime
        }


def record_run(result, config):
    """Store a ScenarioResult in the ledger. Returns the run, or None if the
    database write failed; the scenario outcome is unaffected either way."""
    error = result.error or {}
    run = ExperimentRun(
        scenario=result.scenario,
        seed=config.seed,
        config_json=config.to_json(),
        exit_code=result.exit_code,
        status=ExperimentRun.STATUSES.get(result.exit_code, 'numerical-error'),
        runtime=result.runtime,
        output_dir=result.output_dir,
        error_message=error.get('message'))
    for report in result.reports:
        run.comparisons.append(ComparisonRecord(
            metric=report.metric,
            value=report.value,
            tolerance=report.tolerance,
            bound=report.bound,
            passed=report.passed,
            runtime=report.runtime))
    try:
        db.session.add(run)
        db.session.commit()
        return run
    except SQLAlchemyError as e:
        logger.error('could not record run of %s: %s', result.scenario, e)
        db.session.rollback()
        return None
