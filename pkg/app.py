from flask import Flask, jsonify
from flask_sqlalchemy import SQLAlchemy
from logging.config import dictConfig
from config import config
import os

# Initialize extensions
db = SQLAlchemy()

LOG_FORMAT = '[%(asctime)s] %(levelname)s in %(module)s: %(message)s'


def configure_logging(level='INFO'):
    """Route the lab's loggers and Flask's through one stderr handler."""
    dictConfig({
        'version': 1,
        'disable_existing_loggers': False,
        'formatters': {'default': {'format': LOG_FORMAT}},
        'handlers': {
            'stderr': {
                'class': 'logging.StreamHandler',
                'stream': 'ext://sys.stderr',
                'formatter': 'default'
            }
        },
        'root': {'level': level, 'handlers': ['stderr']}
    })


def create_app(config_class=None):
    if config_class is None:
        config_class = config[os.environ.get('LAB_CONFIG', 'default')]
    configure_logging(config_class.LOG_LEVEL)

    app = Flask(__name__)
    app.config.from_object(config_class)

    # Initialize extensions
    db.init_app(app)

    # Import models to ensure they're registered with SQLAlchemy
    from models import run  # noqa: F401

    # Register blueprints
    from routes.api import bp as api_bp
    app.register_blueprint(api_bp, url_prefix='/api')

    # Error handlers
    @app.errorhandler(404)
    def not_found_error(error):
        return jsonify({'error': 'Not found'}), 404

    @app.errorhandler(400)
    def bad_request_error(error):
        return jsonify({'error': getattr(error, 'description', 'Bad request')}), 400

    @app.errorhandler(500)
    def internal_error(error):
        db.session.rollback()
        return jsonify({'error': 'Internal server error'}), 500

    with app.app_context():
        db.create_all()

    return app
