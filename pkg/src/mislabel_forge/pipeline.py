"""Experiment execution: single detection runs, parameter sweeps, trace dumps.

Each run seed drives an independent trial: corruption, fold assignment,
network init, shuffling, and threshold-sample choice all derive their own
streams from it, so trials are reproducible and order-independent. Grid
points x seeds form the sweep job set; output rows are ordered by
(grid point, seed) regardless of worker completion order.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import figures
from .aum import AumTracker, assign_threshold_samples, detect_aum, record_margins, write_aum_csv
from .config import (
    DEFAULT_CUTOFF_GRID,
    DEFAULT_GAMMA_GRID,
    ExperimentConfig,
    config_to_dict,
)
from .confident_learning import (
    estimate_confident_joint,
    out_of_fold_probs,
    prune,
    write_detection_csv,
)
from .corruption import corrupt
from .data import LabeledDataset, generate_blobs, load_csv, make_folds
from .errors import ConfigurationError
from .metrics import DetectionReport, score_detection, separation_stats
from .net import NetConfig, init_network
from .seeding import derive_seed
from .training import gradient_cohort_summary, train


@dataclass
class TrialOutput:
    seed: int
    report: DetectionReport
    num_flagged: int
    extra: dict


def build_dataset(cfg: ExperimentConfig) -> LabeledDataset:
    if cfg.dataset_kind == "blobs":
        return generate_blobs(cfg.blobs)
    return load_csv(cfg.csv_path)


def _trial_corrupted(clean: LabeledDataset, cfg: ExperimentConfig, seed: int) -> LabeledDataset:
    spec = replace(cfg.corruption, seed=derive_seed(seed, "corrupt"))
    return corrupt(clean, spec)


def _trial_net_config(cfg: ExperimentConfig, input_dim: int, num_classes: int, seed: int) -> NetConfig:
    return NetConfig(
        input_dim=input_dim,
        hidden_dims=cfg.network_hidden,
        num_classes=num_classes,
        activation=cfg.network_activation,
        init_seed=derive_seed(seed, "net-init", cfg.network_seed),
    )


def run_cl_trial(clean: LabeledDataset, cfg: ExperimentConfig, seed: int, dump_dir=None) -> TrialOutput:
    corrupted = _trial_corrupted(clean, cfg, seed)
    plan = make_folds(corrupted, cfg.detector.folds, seed=derive_seed(seed, "folds"))
    net_cfg = _trial_net_config(cfg, corrupted.feature_dim, corrupted.num_classes, seed)
    train_cfg = replace(cfg.train_config(), shuffle_seed=derive_seed(seed, "shuffle"))

    probs = out_of_fold_probs(corrupted, plan, net_cfg, train_cfg)
    joint = estimate_confident_joint(probs, corrupted.observed_labels)
    pbc = prune(joint, probs, corrupted.observed_labels, "pbc")
    pbnr = prune(joint, probs, corrupted.observed_labels, "pbnr")
    both = np.intersect1d(pbc, pbnr)
    flagged = {"pbc": pbc, "pbnr": pbnr, "both": both}[cfg.detector.method]

    report = score_detection(flagged, corrupted.corrupted_mask)
    self_conf = probs.self_confidence(corrupted.observed_labels)
    report.cohens_d, report.wasserstein = separation_stats(self_conf, corrupted.corrupted_mask)
    if dump_dir is not None:
        write_detection_csv(
            Path(dump_dir) / f"detection_seed{seed}.csv",
            probs,
            corrupted.observed_labels,
            pbc,
            pbnr,
            both,
        )
    return TrialOutput(
        seed=seed,
        report=report,
        num_flagged=int(flagged.size),
        extra={
            "num_pbc": int(pbc.size),
            "num_pbnr": int(pbnr.size),
            "num_both": int(both.size),
            "confident_joint": joint.counts.tolist(),
            "thresholds": [None if math.isnan(t) else float(t) for t in joint.thresholds],
        },
    )


def run_aum_trial(clean: LabeledDataset, cfg: ExperimentConfig, seed: int, dump_dir=None) -> TrialOutput:
    corrupted = _trial_corrupted(clean, cfg, seed)
    relabelled, thr_idx = assign_threshold_samples(
        corrupted, cfg.detector.threshold_fraction, seed=derive_seed(seed, "aum-threshold")
    )
    net_cfg = _trial_net_config(cfg, relabelled.feature_dim, relabelled.num_classes, seed)
    train_cfg = replace(cfg.train_config(), shuffle_seed=derive_seed(seed, "shuffle"))
    tracker = AumTracker.create(len(relabelled), thr_idx, corrupted.num_classes)
    net = init_network(net_cfg)
    labels = relabelled.observed_labels

    def on_epoch_end(epoch, logits, probs):
        record_margins(tracker, logits, labels)

    train(net, relabelled, train_cfg, on_epoch_end=on_epoch_end)
    flagged, tau = detect_aum(tracker)

    include = np.ones(len(corrupted), dtype=bool)
    include[thr_idx] = False
    report = score_detection(flagged, corrupted.corrupted_mask, include=include)
    report.cohens_d, report.wasserstein = separation_stats(
        tracker.aum_values(), corrupted.corrupted_mask, include=include
    )
    if dump_dir is not None:
        write_aum_csv(Path(dump_dir) / f"aum_seed{seed}.csv", tracker, flagged, corrupted.corrupted_mask)
        figures.aum_distributions(
            tracker.aum_values(), corrupted.corrupted_mask, include, tau,
            Path(dump_dir) / f"aum_distributions_seed{seed}.png",
        )
    return TrialOutput(
        seed=seed,
        report=report,
        num_flagged=int(flagged.size),
        extra={"aum_threshold": float(tau), "num_threshold_samples": int(thr_idx.size)},
    )


def run_trial(clean: LabeledDataset, cfg: ExperimentConfig, seed: int, dump_dir=None) -> TrialOutput:
    if cfg.detector.kind == "cl":
        return run_cl_trial(clean, cfg, seed, dump_dir)
    return run_aum_trial(clean, cfg, seed, dump_dir)


def _aggregate(values: list[float]) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    finite = arr[np.isfinite(arr)]
    if finite.size == 0:
        return {"mean": None, "std": None, "sem": None}
    mean = float(finite.mean())
    std = float(finite.std(ddof=1)) if finite.size > 1 else 0.0
    sem = std / math.sqrt(finite.size) if finite.size > 1 else 0.0
    return {"mean": mean, "std": std, "sem": sem}


AGGREGATED_METRICS = ("f1", "balanced_accuracy", "precision", "recall", "cohens_d", "wasserstein")


def summarize_trials(trials: list[TrialOutput]) -> dict:
    per_seed = []
    for t in trials:
        row = {"seed": t.seed, "num_flagged": t.num_flagged}
        row.update(t.report.to_dict())
        row.update(t.extra)
        per_seed.append(row)
    aggregate = {
        m: _aggregate([getattr(t.report, m) for t in trials]) for m in AGGREGATED_METRICS
    }
    return {"per_seed": per_seed, "aggregate": aggregate}


def _sanitize(obj):
    """Make NaN/inf JSON-safe (null) recursively."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def _detect_job(args):
    cfg, seed, dump_dir = args
    clean = build_dataset(cfg)
    return run_trial(clean, cfg, seed, dump_dir)


def _run_jobs(job_args, jobs: int, worker):
    if jobs <= 1 or len(job_args) <= 1:
        return [worker(a) for a in job_args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, job_args))


def run_detect(cfg: ExperimentConfig, out_dir=None, write_outputs=True) -> dict:
    """Full pipeline per seed (corrupt, train, detect, score), then aggregate."""
    write_outputs = write_outputs and out_dir is not None
    if write_outputs:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
    dump_dir = out if write_outputs else None
    job_args = [(cfg, seed, dump_dir) for seed in cfg.seeds]
    trials = _run_jobs(job_args, cfg.jobs, _detect_job)
    report = {
        "command": "detect",
        "created_at": datetime.now(timezone.utc).isoformat(),
        "config": config_to_dict(cfg),
        **summarize_trials(trials),
    }
    report = _sanitize(report)
    if write_outputs:
        with open(out / "report.json", "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        figures.detection_summary(report, out / "detection_summary.png")
    return report


def sweep_points(cfg: ExperimentConfig) -> list[tuple[str, float, float, ExperimentConfig]]:
    """(param_name, param_value, eta, derived config) per grid point."""
    if cfg.sweep is None:
        raise ConfigurationError("config has no [sweep] section with a parameter axis")
    points = []
    for value in cfg.sweep.values:
        for eta in cfg.sweep.etas:
            if cfg.sweep.param == "gamma":
                loss = replace(cfg.loss, gamma=float(value))
            elif cfg.sweep.param == "cutoff":
                loss = replace(cfg.loss, cutoff=float(value))
            else:
                loss = replace(cfg.loss, delay=int(value))
            derived = cfg.with_loss(loss).with_eta(float(eta))
            points.append((cfg.sweep.param, float(value), float(eta), derived))
    return points


def run_sweep(cfg: ExperimentConfig, out_dir=None, write_outputs=True) -> dict:
    write_outputs = write_outputs and out_dir is not None
    if write_outputs:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
    points = sweep_points(cfg)
    job_args = [
        (derived, seed, None)
        for (_, _, _, derived) in points
        for seed in cfg.seeds
    ]
    trials = _run_jobs(job_args, cfg.jobs, _detect_job)

    rows = []
    cells = []
    n_seeds = len(cfg.seeds)
    for i, (param, value, eta, derived) in enumerate(points):
        chunk = trials[i * n_seeds : (i + 1) * n_seeds]
        for t in chunk:
            rows.append(
                {
                    "param_name": param,
                    "param_value": value,
                    "eta": eta,
                    "seed": t.seed,
                    "f1": t.report.f1,
                    "balanced_accuracy": t.report.balanced_accuracy,
                    "precision": t.report.precision,
                    "recall": t.report.recall,
                }
            )
        cells.append(
            {
                "param_name": param,
                "param_value": value,
                "eta": eta,
                "f1": _aggregate([t.report.f1 for t in chunk]),
                "balanced_accuracy": _aggregate([t.report.balanced_accuracy for t in chunk]),
            }
        )
    summary = {
        "command": "sweep",
        "created_at": datetime.now(timezone.utc).isoformat(),
        "config": config_to_dict(cfg),
        "cells": cells,
    }
    summary = _sanitize(summary)
    if write_outputs:
        _write_sweep_csv(out / "sweep.csv", rows)
        with open(out / "sweep_summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        figures.sweep_heatmap(rows, out / "sweep_heatmap.png")
    summary["rows"] = rows
    return summary


def _write_sweep_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["param_name", "param_value", "eta", "seed", "f1", "balanced_accuracy", "precision", "recall"]
        )
        for r in rows:
            writer.writerow(
                [
                    r["param_name"],
                    repr(r["param_value"]),
                    repr(r["eta"]),
                    r["seed"],
                    repr(r["f1"]),
                    repr(r["balanced_accuracy"]),
                    repr(r["precision"]),
                    repr(r["recall"]),
                ]
            )


def _trace_job(args):
    cfg, seed, dump_dir = args
    clean = build_dataset(cfg)
    corrupted = _trial_corrupted(clean, cfg, seed)
    net_cfg = _trial_net_config(cfg, corrupted.feature_dim, corrupted.num_classes, seed)
    train_cfg = replace(
        cfg.train_config(
            record_prob_per_epoch=True,
            record_grad_per_epoch=True,
            record_logit_margins=True,
        ),
        shuffle_seed=derive_seed(seed, "shuffle"),
    )
    net = init_network(net_cfg)
    _, trace = train(net, corrupted, train_cfg)
    summary = gradient_cohort_summary(trace, corrupted.corrupted_mask)
    aums = trace.margin.mean(axis=0)
    d, w = separation_stats(aums, corrupted.corrupted_mask)
    if dump_dir is not None:
        dump_dir = Path(dump_dir)
        trace.write_csv(dump_dir / f"trace_seed{seed}.csv", corrupted.corrupted_mask)
        _write_cohort_csv(dump_dir / f"cohort_summary_seed{seed}.csv", summary)
        figures.trace_cohorts(summary, dump_dir / f"trace_seed{seed}.png")
        figures.aum_distributions(
            aums, corrupted.corrupted_mask, np.ones(len(corrupted), dtype=bool), None,
            dump_dir / f"margin_distributions_seed{seed}.png",
        )
    final = trace.num_epochs - 1
    mask = corrupted.corrupted_mask
    return {
        "seed": seed,
        "loss_kind_per_epoch": trace.loss_kind,
        "aum_cohens_d": d,
        "aum_wasserstein": w,
        "final_epoch_median_p_corrupt": float(np.median(trace.p_label[final][mask])) if mask.any() else None,
        "final_epoch_median_p_clean": float(np.median(trace.p_label[final][~mask])) if (~mask).any() else None,
        "final_epoch_median_grad_corrupt": float(np.median(trace.grad_p[final][mask])) if mask.any() else None,
        "final_epoch_median_grad_clean": float(np.median(trace.grad_p[final][~mask])) if (~mask).any() else None,
    }


def _write_cohort_csv(path, records):
    fields = ["epoch", "statistic", "cohort", "count", "whisker_lo", "q1", "median", "q3", "whisker_hi"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for rec in records:
            writer.writerow(rec)


def run_trace(cfg: ExperimentConfig, out_dir=None, write_outputs=True) -> dict:
    write_outputs = write_outputs and out_dir is not None
    if write_outputs:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
    dump_dir = out if write_outputs else None
    job_args = [(cfg, seed, dump_dir) for seed in cfg.seeds]
    per_seed = _run_jobs(job_args, cfg.jobs, _trace_job)
    summary = {
        "command": "trace",
        "created_at": datetime.now(timezone.utc).isoformat(),
        "config": config_to_dict(cfg),
        "per_seed": per_seed,
        "aggregate": {
            "aum_cohens_d": _aggregate([r["aum_cohens_d"] for r in per_seed]),
            "aum_wasserstein": _aggregate([r["aum_wasserstein"] for r in per_seed]),
        },
    }
    summary = _sanitize(summary)
    if write_outputs:
        with open(out / "trace_summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return summary


def default_grid(param: str) -> tuple[float, ...]:
    if param == "gamma":
        return DEFAULT_GAMMA_GRID
    if param == "cutoff":
        return DEFAULT_CUTOFF_GRID
    raise ConfigurationError(f"no default grid for sweep param {param!r}")
