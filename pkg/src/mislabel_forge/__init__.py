"""mislabel-forge: corrupt labels on purpose, train robustly, find the errors.

A small library and CLI for studying label-error detection: it injects
synthetic label noise, trains dense classifiers under standard and robust
losses (cross-entropy, focal, generalized cross-entropy, active-negative,
blurry, piecewise-zero), and flags suspect samples with confident learning
or area-under-margin statistics.
"""

from .aum import AumTracker, assign_threshold_samples, detect_aum, record_margins
from .config import DetectorConfig, ExperimentConfig, SweepConfig, parse_config, render_config
from .confident_learning import (
    ConfidentJoint,
    ProbMatrix,
    estimate_confident_joint,
    out_of_fold_probs,
    prune,
)
from .corruption import CorruptionSpec, corrupt, realized_rates
from .data import FoldPlan, LabeledDataset, SyntheticSpec, generate_blobs, load_csv, make_folds, save_csv
from .errors import ConfigurationError, TrainingDivergedError
from .losses import (
    LossEval,
    LossSpec,
    anl,
    blurry,
    blurry_stationary_point,
    ce,
    evaluate,
    focal,
    gce,
    piecewise_zero,
    scheduled_loss,
)
from .metrics import DetectionReport, cohens_d, score_detection, separation_stats, wasserstein_1d
from .net import NetConfig, Network, init_network
from .pipeline import run_detect, run_sweep, run_trace, run_trial
from .training import EpochTrace, TrainConfig, gradient_cohort_summary, predict_probs, train

__version__ = "0.1.0"

__all__ = [
    "AumTracker",
    "ConfidentJoint",
    "ConfigurationError",
    "CorruptionSpec",
    "DetectionReport",
    "DetectorConfig",
    "EpochTrace",
    "ExperimentConfig",
    "FoldPlan",
    "LabeledDataset",
    "LossEval",
    "LossSpec",
    "NetConfig",
    "Network",
    "ProbMatrix",
    "SweepConfig",
    "SyntheticSpec",
    "TrainConfig",
    "TrainingDivergedError",
    "anl",
    "assign_threshold_samples",
    "blurry",
    "blurry_stationary_point",
    "ce",
    "cohens_d",
    "corrupt",
    "detect_aum",
    "estimate_confident_joint",
    "evaluate",
    "focal",
    "gce",
    "generate_blobs",
    "gradient_cohort_summary",
    "init_network",
    "load_csv",
    "make_folds",
    "out_of_fold_probs",
    "parse_config",
    "piecewise_zero",
    "predict_probs",
    "prune",
    "realized_rates",
    "record_margins",
    "render_config",
    "run_detect",
    "run_sweep",
    "run_trace",
    "run_trial",
    "save_csv",
    "scheduled_loss",
    "score_detection",
    "separation_stats",
    "train",
    "wasserstein_1d",
]
