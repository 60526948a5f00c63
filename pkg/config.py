import os
from dotenv import load_dotenv

basedir = os.path.abspath(os.path.dirname(__file__))
load_dotenv(os.path.join(basedir, '.env'))


class Config:
    # Flask configuration
    SECRET_KEY = os.environ.get('SECRET_KEY') or 'dev-secret-key-change-in-production'

    # Run ledger
    SQLALCHEMY_DATABASE_URI = os.environ.get('DATABASE_URL') or \
        'sqlite:///' + os.path.join(basedir, 'lab.db')
    SQLALCHEMY_TRACK_MODIFICATIONS = False

    # Output
    RESULTS_DIR = os.environ.get('RESULTS_DIR') or os.path.join(basedir, 'results')
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO').upper()

    # Numerical knobs
    NEWTON_TOLERANCE = float(os.environ.get('NEWTON_TOLERANCE') or 1e-10)
    NEWTON_MAX_ITERATIONS = int(os.environ.get('NEWTON_MAX_ITERATIONS') or 100)
    DENSITY_FLOOR = float(os.environ.get('DENSITY_FLOOR') or 1e-12)
    ENSEMBLE_WORKERS = int(os.environ.get('ENSEMBLE_WORKERS') or 1)

    # Pagination for the report API
    RUNS_PER_PAGE = 50


class DevelopmentConfig(Config):
    DEBUG = True
    SQLALCHEMY_DATABASE_URI = os.environ.get('DEV_DATABASE_URL') or \
        'sqlite:///' + os.path.join(basedir, 'lab-dev.db')
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'DEBUG').upper()


class ProductionConfig(Config):
    DEBUG = False
    SQLALCHEMY_DATABASE_URI = os.environ.get('DATABASE_URL') or \
        'sqlite:///' + os.path.join(basedir, 'lab.db')


class TestingConfig(Config):
    TESTING = True
    SQLALCHEMY_DATABASE_URI = 'sqlite:///:memory:'
    LOG_LEVEL = 'WARNING'


config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}
