"""Experiment configuration: INI-style files with materialized defaults.

Every run embeds its fully resolved configuration in the report so results
can be audited and replayed. `render_config` emits the same INI document
that `parse_config` accepts; `print-config` exposes it on the CLI.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, replace

import numpy as np

from .corruption import CorruptionSpec
from .data import SyntheticSpec
from .errors import ConfigurationError
from .losses import LossSpec
from .net import NetConfig
from .training import TrainConfig

SWEEP_PARAMS = ("gamma", "cutoff", "delay")


@dataclass(frozen=True)
class DetectorConfig:
    kind: str = "cl"  # "cl" | "aum"
    method: str = "both"
    folds: int = 5
    threshold_fraction: float = 0.02

    def __post_init__(self):
        if self.kind not in ("cl", "aum"):
            raise ConfigurationError(f"detector kind must be 'cl' or 'aum', got {self.kind!r}")
        if self.folds < 2:
            raise ConfigurationError(f"folds must be >= 2, got {self.folds}")
        if not (0.0 < self.threshold_fraction < 0.5):
            raise ConfigurationError(
                f"threshold_fraction must be in (0, 0.5), got {self.threshold_fraction}"
            )


@dataclass(frozen=True)
class SweepConfig:
    param: str
    values: tuple[float, ...]
    etas: tuple[float, ...]

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise ConfigurationError(f"sweep param must be one of {SWEEP_PARAMS}, got {self.param!r}")
        if not self.values:
            raise ConfigurationError("sweep grid must be non-empty")
        if not self.etas:
            raise ConfigurationError("sweep eta list must be non-empty")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_kind: str  # "blobs" | "csv"
    blobs: SyntheticSpec | None
    csv_path: str | None
    corruption: CorruptionSpec
    network_hidden: tuple[int, ...]
    network_activation: str
    network_seed: int
    loss: LossSpec
    epochs: int
    batch_size: int
    learning_rate: float
    lr_decay: tuple[tuple[int, float], ...]
    detector: DetectorConfig
    seeds: tuple[int, ...]
    jobs: int
    sweep: SweepConfig | None = None

    def __post_init__(self):
        if not self.seeds:
            raise ConfigurationError("at least one run seed is required")
        if self.jobs < 1:
            raise ConfigurationError(f"jobs must be >= 1, got {self.jobs}")

    def net_config(self, input_dim: int, num_classes: int) -> NetConfig:
        return NetConfig(
            input_dim=input_dim,
            hidden_dims=self.network_hidden,
            num_classes=num_classes,
            activation=self.network_activation,
            init_seed=self.network_seed,
        )

    def train_config(self, **instrument) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            loss=self.loss.resolved(),
            batch_size=self.batch_size,
            lr_decay=self.lr_decay,
            **instrument,
        )

    def with_loss(self, loss: LossSpec) -> "ExperimentConfig":
        return replace(self, loss=loss)

    def with_eta(self, eta: float) -> "ExperimentConfig":
        return replace(self, corruption=self.corruption.with_eta(eta))


DEFAULTS = {
    "dataset": {
        "kind": "blobs",
        "path": "",
        "classes": "4",
        "samples_per_class": "500",
        "feature_dim": "16",
        "separation": "8.0",
        "spread": "1.4",
        "seed": "11",
    },
    "corruption": {
        "mode": "uniform",
        "eta": "0.3",
        "transition": "",
        "seed": "0",
    },
    "network": {
        "hidden_dims": "64",
        "activation": "relu",
        "init_seed": "0",
    },
    "loss": {
        "kind": "ce",
        "gamma": "",
        "cutoff": "",
        "q": "",
        "alpha": "",
        "beta": "",
        "l1_weight": "",
        "delay": "0",
    },
    "train": {
        "epochs": "10",
        "batch_size": "128",
        "learning_rate": "0.01",
        "lr_decay": "",
    },
    "detector": {
        "kind": "cl",
        "method": "both",
        "folds": "5",
        "threshold_fraction": "0.02",
    },
    "run": {
        "seeds": "101,102,103,104,105",
        "jobs": "1",
    },
    "sweep": {
        "gamma": "",
        "cutoff": "",
        "delay": "",
        "eta": "",
    },
}

# Default grids for parameter sweeps when a sweep axis is requested bare.
DEFAULT_GAMMA_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
DEFAULT_CUTOFF_GRID = (0.0, 0.005, 0.01, 0.02, 0.04, 0.06, 0.08, 0.1, 0.15)


def _get(parser, section, option):
    try:
        return parser.get(section, option).strip()
    except (configparser.NoSectionError, configparser.NoOptionError):
        return DEFAULTS[section][option]


def _get_int(parser, section, option):
    raw = _get(parser, section, option)
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"[{section}] {option}: expected an integer, got {raw!r}") from None


def _get_float(parser, section, option, optional=False):
    raw = _get(parser, section, option)
    if raw == "":
        if optional:
            return None
        raise ConfigurationError(f"[{section}] {option}: a value is required")
    try:
        return float(raw)
    except ValueError:
        raise ConfigurationError(f"[{section}] {option}: expected a number, got {raw!r}") from None


def _parse_list(raw, cast, what):
    raw = raw.strip()
    if not raw:
        return ()
    try:
        return tuple(cast(tok.strip()) for tok in raw.split(",") if tok.strip() != "")
    except ValueError:
        raise ConfigurationError(f"{what}: could not parse list {raw!r}") from None


def _parse_decay(raw):
    raw = raw.strip()
    if not raw:
        return ()
    pairs = []
    for tok in raw.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if ":" not in tok:
            raise ConfigurationError(f"lr_decay entries must look like epoch:factor, got {tok!r}")
        e, f = tok.split(":", 1)
        try:
            pairs.append((int(e), float(f)))
        except ValueError:
            raise ConfigurationError(f"lr_decay entry {tok!r} is not epoch:factor") from None
    return tuple(pairs)


def _parse_transition(raw):
    raw = raw.strip()
    if not raw:
        return None
    rows = []
    for chunk in raw.split(";"):
        rows.append([float(v) for v in chunk.split(",")])
    return np.asarray(rows, dtype=np.float64)


def parse_config(path=None, text=None, overrides=None) -> ExperimentConfig:
    """Parse an INI config file (or text); missing options take defaults.

    overrides: optional dict like {"run.seeds": "7", "run.jobs": "4"} applied
    after the file, used for CLI flags.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if text is not None:
        parser.read_string(text)
    elif path is not None:
        read = parser.read(path)
        if not read:
            raise ConfigurationError(f"config file not found: {path}")
    unknown = set(parser.sections()) - set(DEFAULTS)
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
    for section in parser.sections():
        bad = set(parser.options(section)) - set(DEFAULTS[section])
        if bad:
            raise ConfigurationError(f"unknown options in [{section}]: {sorted(bad)}")
    if overrides:
        for key, value in overrides.items():
            section, option = key.split(".", 1)
            if not parser.has_section(section):
                parser.add_section(section)
            parser.set(section, option, str(value))

    dataset_kind = _get(parser, "dataset", "kind").lower()
    blobs = None
    csv_path = None
    if dataset_kind == "blobs":
        blobs = SyntheticSpec(
            num_classes=_get_int(parser, "dataset", "classes"),
            samples_per_class=_get_int(parser, "dataset", "samples_per_class"),
            feature_dim=_get_int(parser, "dataset", "feature_dim"),
            separation=_get_float(parser, "dataset", "separation"),
            spread=_get_float(parser, "dataset", "spread"),
            seed=_get_int(parser, "dataset", "seed"),
        )
    elif dataset_kind == "csv":
        csv_path = _get(parser, "dataset", "path")
        if not csv_path:
            raise ConfigurationError("[dataset] path is required when kind = csv")
    else:
        raise ConfigurationError(f"[dataset] kind must be 'blobs' or 'csv', got {dataset_kind!r}")

    mode = _get(parser, "corruption", "mode").lower()
    corruption = CorruptionSpec(
        mode=mode,
        eta=_get_float(parser, "corruption", "eta"),
        transition=_parse_transition(_get(parser, "corruption", "transition")) if mode == "asymmetric" else None,
        seed=_get_int(parser, "corruption", "seed"),
    )

    loss = LossSpec(
        kind=_get(parser, "loss", "kind"),
        gamma=_get_float(parser, "loss", "gamma", optional=True),
        cutoff=_get_float(parser, "loss", "cutoff", optional=True),
        q=_get_float(parser, "loss", "q", optional=True),
        alpha=_get_float(parser, "loss", "alpha", optional=True),
        beta=_get_float(parser, "loss", "beta", optional=True),
        l1_weight=_get_float(parser, "loss", "l1_weight", optional=True),
        delay=_get_int(parser, "loss", "delay"),
    ).resolved()

    detector = DetectorConfig(
        kind=_get(parser, "detector", "kind").lower(),
        method=_get(parser, "detector", "method").lower(),
        folds=_get_int(parser, "detector", "folds"),
        threshold_fraction=_get_float(parser, "detector", "threshold_fraction"),
    )

    sweep = None
    sweep_axes = {
        p: _parse_list(_get(parser, "sweep", p), float, f"[sweep] {p}") for p in SWEEP_PARAMS
    }
    present = [p for p, vals in sweep_axes.items() if vals]
    etas = _parse_list(_get(parser, "sweep", "eta"), float, "[sweep] eta")
    if len(present) > 1:
        raise ConfigurationError(
            f"sweep supports one parameter axis at a time, got {present}"
        )
    if present:
        sweep = SweepConfig(
            param=present[0],
            values=sweep_axes[present[0]],
            etas=etas or (corruption.eta,),
        )
    elif etas:
        raise ConfigurationError("[sweep] eta requires a parameter axis (gamma, cutoff, or delay)")

    seeds = _parse_list(_get(parser, "run", "seeds"), int, "[run] seeds")

    return ExperimentConfig(
        dataset_kind=dataset_kind,
        blobs=blobs,
        csv_path=csv_path,
        corruption=corruption,
        network_hidden=_parse_list(_get(parser, "network", "hidden_dims"), int, "[network] hidden_dims"),
        network_activation=_get(parser, "network", "activation").lower(),
        network_seed=_get_int(parser, "network", "init_seed"),
        loss=loss,
        epochs=_get_int(parser, "train", "epochs"),
        batch_size=_get_int(parser, "train", "batch_size"),
        learning_rate=_get_float(parser, "train", "learning_rate"),
        lr_decay=_parse_decay(_get(parser, "train", "lr_decay")),
        detector=detector,
        seeds=seeds,
        jobs=_get_int(parser, "run", "jobs"),
        sweep=sweep,
    )


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """JSON-friendly fully resolved view of the configuration."""
    loss = cfg.loss.resolved()
    out = {
        "dataset": (
            {
                "kind": "blobs",
                "classes": cfg.blobs.num_classes,
                "samples_per_class": cfg.blobs.samples_per_class,
                "feature_dim": cfg.blobs.feature_dim,
                "separation": cfg.blobs.separation,
                "spread": cfg.blobs.spread,
                "seed": cfg.blobs.seed,
            }
            if cfg.dataset_kind == "blobs"
            else {"kind": "csv", "path": cfg.csv_path}
        ),
        "corruption": {
            "mode": cfg.corruption.mode,
            "eta": cfg.corruption.eta,
            "transition": cfg.corruption.transition.tolist() if cfg.corruption.transition is not None else None,
            "seed": cfg.corruption.seed,
        },
        "network": {
            "hidden_dims": list(cfg.network_hidden),
            "activation": cfg.network_activation,
            "init_seed": cfg.network_seed,
        },
        "loss": {
            "kind": loss.kind,
            "gamma": loss.gamma,
            "cutoff": loss.cutoff,
            "q": loss.q,
            "alpha": loss.alpha,
            "beta": loss.beta,
            "l1_weight": loss.l1_weight,
            "delay": loss.delay,
        },
        "train": {
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "learning_rate": cfg.learning_rate,
            "lr_decay": [list(p) for p in cfg.lr_decay],
        },
        "detector": {
            "kind": cfg.detector.kind,
            "method": cfg.detector.method,
            "folds": cfg.detector.folds,
            "threshold_fraction": cfg.detector.threshold_fraction,
        },
        "run": {"seeds": list(cfg.seeds), "jobs": cfg.jobs},
    }
    if cfg.sweep:
        out["sweep"] = {
            "param": cfg.sweep.param,
            "values": list(cfg.sweep.values),
            "etas": list(cfg.sweep.etas),
        }
    return out


def render_config(cfg: ExperimentConfig | None = None) -> str:
    """INI text for a config (or the built-in defaults when cfg is None)."""
    parser = configparser.ConfigParser()
    if cfg is None:
        parser.read_dict(DEFAULTS)
    else:
        d = config_to_dict(cfg)

        def fmt(v):
            return "" if v is None else str(v)

        parser.read_dict(
            {
                "dataset": {k: fmt(v) for k, v in d["dataset"].items()},
                "corruption": {
                    "mode": d["corruption"]["mode"],
                    "eta": fmt(d["corruption"]["eta"]),
                    "transition": ";".join(
                        ",".join(str(x) for x in row) for row in d["corruption"]["transition"]
                    )
                    if d["corruption"]["transition"]
                    else "",
                    "seed": fmt(d["corruption"]["seed"]),
                },
                "network": {
                    "hidden_dims": ",".join(str(h) for h in d["network"]["hidden_dims"]),
                    "activation": d["network"]["activation"],
                    "init_seed": fmt(d["network"]["init_seed"]),
                },
                "loss": {k: fmt(v) for k, v in d["loss"].items()},
                "train": {
                    "epochs": fmt(d["train"]["epochs"]),
                    "batch_size": fmt(d["train"]["batch_size"]),
                    "learning_rate": fmt(d["train"]["learning_rate"]),
                    "lr_decay": ",".join(f"{int(e)}:{f}" for e, f in d["train"]["lr_decay"]),
                },
                "detector": {k: fmt(v) for k, v in d["detector"].items()},
                "run": {
                    "seeds": ",".join(str(s) for s in d["run"]["seeds"]),
                    "jobs": fmt(d["run"]["jobs"]),
                },
                "sweep": {
                    "gamma": ",".join(str(v) for v in d["sweep"]["values"]) if cfg.sweep and cfg.sweep.param == "gamma" else "",
                    "cutoff": ",".join(str(v) for v in d["sweep"]["values"]) if cfg.sweep and cfg.sweep.param == "cutoff" else "",
                    "delay": ",".join(str(v) for v in d["sweep"]["values"]) if cfg.sweep and cfg.sweep.param == "delay" else "",
                    "eta": ",".join(str(v) for v in d["sweep"]["etas"]) if cfg.sweep else "",
                },
            }
        )
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
