"""Discovery and estimation of exposure-mixture shift effects."""
from .config import Config
from .data import Dataset, ScalingRecord, ShiftSpec, load_csv, make_dataset, make_folds
from .engine import AnalysisReport, PooledResult, adapt_delta, pool, pool_with_null, run, run_fold
from .errors import (CandidateFailures, ConfigurationError, DataError, DegenerateDataError,
                     NumericError, PositivityError, ShiftmixError)
from .sim import gen_dgp, ground_truth, qgcomp_baseline, run_convergence

__all__ = [
    "Config", "Dataset", "ScalingRecord", "ShiftSpec", "load_csv", "make_dataset", "make_folds",
    "AnalysisReport", "PooledResult", "adapt_delta", "pool", "pool_with_null", "run", "run_fold",
    "CandidateFailures", "ConfigurationError", "DataError", "DegenerateDataError", "NumericError",
    "PositivityError", "ShiftmixError", "gen_dgp", "ground_truth", "qgcomp_baseline",
    "run_convergence",
]
__version__ = "0.1.0"
