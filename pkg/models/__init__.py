from .run import ComparisonRecord, ExperimentRun, record_run

__all__ = ['ExperimentRun', 'ComparisonRecord', 'record_run']
