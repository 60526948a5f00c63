from app import create_app, db
from harness.cli import lab
from models.run import ComparisonRecord, ExperimentRun

app = create_app()
app.cli.add_command(lab)


@app.shell_context_processor
def make_shell_context():
    return {
        'db': db,
        'ExperimentRun': ExperimentRun,
        'ComparisonRecord': ComparisonRecord
    }


if __name__ == '__main__':
    # Report API over the run ledger
    app.logger.info('Serving the run ledger at http://localhost:5000/api/runs')
    app.run(debug=app.config.get('DEBUG', False), host='0.0.0.0', port=5000)
