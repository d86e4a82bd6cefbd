"""Flat key=value run configuration.

One namespace covers file paths, dataset preparation, every hyperparameter,
and runner switches, so a config file plus --key overrides fully pins a
run. Unknown keys are rejected rather than ignored.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass

from .contrast import RefineLossWeights
from .data import (MODALITIES, InteractionDataset, ModalFeatures,
                   apply_k_core, load_interactions, load_modal_features,
                   split_dataset)
from .errors import ConfigError, DataError
from .graphs import HomographConfig
from .training import Ablation, HyperParams


@dataclass
class RunConfig:
    # input/output paths
    interactions: str = ""
    features_visual: str = ""
    features_textual: str = ""
    cache_dir: str = "cache"
    out_dir: str = "out"
    # dataset preparation
    k_core: int = 5
    split_ratios: tuple = (8, 1, 1)
    split_seed: int = 0
    # model and optimization
    d: int = 64
    batch_size: int = 2048
    learning_rate: float = 1e-3
    layers: int = 4
    meta_rank: int = 4
    meta_hidden: int | None = None
    dropout: float = 0.1
    epochs_max: int = 2000
    patience: int = 20
    eval_topk: tuple = (10, 20)
    seed: int = 2026
    attention_softmax: str = "column"
    # homogeneous graphs
    top_k_co: int = 10
    top_k_sem: int = 10
    alpha_modal_user: tuple = (0.5, 0.5)
    alpha_modal_item: tuple = (0.5, 0.5)
    alpha_co_user: float = 0.5
    alpha_co_item: float = 0.5
    hom_layers: int = 1
    # refinement losses
    tau: float = 0.2
    lambda_cl: float = 0.01
    lambda_ort: float = 0.01
    lambda_p: float = 1e-4
    # runner
    ablation: str = ""
    threads: int = 0
    record_seconds: bool = True

    def hyperparams(self) -> HyperParams:
        hom = HomographConfig(
            top_k_co=self.top_k_co, top_k_sem=self.top_k_sem,
            alpha_modal_user=self.alpha_modal_user,
            alpha_modal_item=self.alpha_modal_item,
            alpha_co_user=self.alpha_co_user,
            alpha_co_item=self.alpha_co_item, layers=self.hom_layers)
        refine = RefineLossWeights(tau=self.tau, lambda_cl=self.lambda_cl,
                                   lambda_ort=self.lambda_ort,
                                   lambda_p=self.lambda_p)
        return HyperParams(
            d=self.d, batch_size=self.batch_size,
            learning_rate=self.learning_rate, layers=self.layers,
            meta_rank=self.meta_rank, meta_hidden=self.meta_hidden,
            dropout=self.dropout, epochs_max=self.epochs_max,
            patience=self.patience, eval_topk=self.eval_topk,
            seed=self.seed, attention_softmax=self.attention_softmax,
            hom=hom, refine=refine)

    def ablation_flags(self) -> Ablation:
        flags = [f.strip() for f in self.ablation.split(",") if f.strip()]
        return Ablation.from_flags(flags)

    def feature_paths(self) -> dict[str, str]:
        return {"visual": self.features_visual,
                "textual": self.features_textual}

    def require_inputs(self) -> None:
        missing = [k for k in ("interactions", "features_visual",
                               "features_textual")
                   if not getattr(self, k)]
        if missing:
            raise ConfigError("config keys not set: " + ", ".join(missing))
        for key in ("interactions", "features_visual", "features_textual"):
            path = getattr(self, key)
            if not os.path.isfile(path):
                raise DataError(f"{key} file not found: {path}")

    def dataset_digest(self) -> str:
        payload = {
            "interactions": _file_sha256(self.interactions),
            "features": {m: _file_sha256(p)
                         for m, p in self.feature_paths().items()},
            "k_core": self.k_core,
            "split_ratios": list(self.split_ratios),
            "split_seed": self.split_seed,
        }
        return _digest(payload)

    def graph_digest(self, hom: HomographConfig | None = None) -> str:
        hom = hom if hom is not None else self.hyperparams().hom
        payload = {
            "dataset": self.dataset_digest(),
            "top_k_co": hom.top_k_co,
            "top_k_sem": hom.top_k_sem,
            "alpha_modal_user": list(hom.alpha_modal_user),
            "alpha_modal_item": list(hom.alpha_modal_item),
        }
        return _digest(payload)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_tuple(text: str) -> tuple:
    return tuple(int(part) for part in text.split(","))


def _parse_float_tuple(text: str) -> tuple:
    return tuple(float(part) for part in text.split(","))


def _parse_optional_int(text: str):
    return None if text.strip().lower() in ("", "none") else int(text)


_PARSERS = {
    "split_ratios": _parse_int_tuple,
    "eval_topk": _parse_int_tuple,
    "alpha_modal_user": _parse_float_tuple,
    "alpha_modal_item": _parse_float_tuple,
    "meta_hidden": _parse_optional_int,
    "record_seconds": _parse_bool,
}


def parse_value(key: str, text: str):
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    if key in _PARSERS:
        parser = _PARSERS[key]
    else:
        kind = type(getattr(RunConfig(), key))
        parser = {int: int, float: float, str: str, bool: _parse_bool
                  }[kind]
    try:
        return parser(text)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"bad value for {key!r}: {text!r} ({e})") from e


def parse_config(path) -> RunConfig:
    cfg = RunConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as e:
        raise DataError(f"cannot read config {path}: {e}") from e
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', "
                              f"got {raw.strip()!r}")
        key, text = (part.strip() for part in line.split("=", 1))
        try:
            setattr(cfg, key, parse_value(key, text))
        except ConfigError as e:
            raise ConfigError(f"{path}:{lineno}: {e}") from e
    return cfg


def apply_overrides(cfg: RunConfig, overrides: dict[str, str]) -> RunConfig:
    for key, text in overrides.items():
        setattr(cfg, key, parse_value(key, text))
    return cfg


def config_to_dict(cfg: RunConfig) -> dict:
    out = dataclasses.asdict(cfg)
    for key, value in out.items():
        if isinstance(value, tuple):
            out[key] = list(value)
    return out


def load_dataset_and_features(cfg: RunConfig):
    """Full input pipeline: parse -> k-core -> split -> aligned features."""
    cfg.require_inputs()
    pairs = load_interactions(cfg.interactions)
    filtered = apply_k_core(pairs, cfg.k_core)
    ds = split_dataset(filtered, cfg.split_ratios, cfg.split_seed)
    features: dict[str, ModalFeatures] = {}
    for modality in MODALITIES:
        features[modality] = load_modal_features(
            cfg.feature_paths()[modality], ds, modality)
    return ds, features


def _file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _digest(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]
