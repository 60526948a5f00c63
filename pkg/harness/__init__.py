"""Experiment harness: configuration, scenario runners, comparison reports and export."""
from .experiment import ExperimentConfig, SCENARIOS, default_config, load_config
from .reports import ComparisonReport, compare_fields
from .scenarios import ScenarioResult, run

__all__ = ['ExperimentConfig', 'SCENARIOS', 'default_config', 'load_config',
           'ComparisonReport', 'compare_fields', 'ScenarioResult', 'run']
