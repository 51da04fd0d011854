from uqengine.io.data import Dataset
from uqengine.io.diagnostics import autocorrelation, ess_and_thinning, integrated_autocorr_time
from uqengine.io.metrics import bayes_factor, model_metrics
from uqengine.io.residuals import ResidualReport, residuals_and_qq
from uqengine.io.store import InferenceStore, read_records, write_records
from uqengine.io.status import Status
from uqengine.io.synthesize import synthesize

__all__ = [
    "Dataset",
    "InferenceStore",
    "Status",
    "read_records",
    "write_records",
    "autocorrelation",
    "integrated_autocorr_time",
    "ess_and_thinning",
    "model_metrics",
    "bayes_factor",
    "synthesize",
    "ResidualReport",
    "residuals_and_qq",
]
