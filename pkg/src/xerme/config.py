#!/usr/bin/env python3
# -*- coding: utf-8 -*-

##################################################################################################
# Copyright (c) 2023-2026, Laboratorio de Microprocesadores
# Facultad de Ciencias Exactas y Tecnología, Universidad Nacional de Tucumán
# https://www.microprocesadores.unt.edu.ar/
#
# SPDX-License-Identifier: MIT
# SPDX-FileCopyrightText: 2026, Esteban Volentini <evolentini@herrera.unt.edu.ar>
##################################################################################################

import copy
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import yaml
from mako.exceptions import MakoException
from mako.template import Template
from yamlinclude import YamlIncludeConstructor

from .errors import ConfigError, XermeError
from .mlm import MaskingPolicy
from .model import ModelConfig, TaskKind
from .optim import OptimizerConfig
from .training import FinetuneSettings, Phase, PretrainSettings

logger = logging.getLogger(__name__)

CONFIG_FILE = "config.yaml"

DEFAULTS: Dict[str, Any] = {
    "output": "run",
    "seed": 0,
    "corpus": {"path": None, "train_fraction": 0.95, "unit": "document"},
    "tokenizer": {"vocab": "${output}/vocab.txt", "size": 30000, "min_frequency": 2},
    "model": {
        "preset": "desk",
        "n_layers": None,
        "hidden": None,
        "n_heads": None,
        "ffn_size": None,
        "max_positions": 128,
        "dropout": 0.1,
        "layer_norm_eps": 1e-12,
    },
    "optimizer": {
        "learning_rate": 1e-4,
        "weight_decay": 0.01,
        "adam_eps": 1e-8,
        "adam_beta1": 0.9,
        "adam_beta2": 0.999,
        "total_steps": 0,
        "warmup_steps": 0,
        "schedule": "linear_decay",
    },
    "masking": {"select_rate": 0.15, "mask_rate": 0.8, "random_rate": 0.1, "keep_rate": 0.1},
    "phases": [{"seq_len": 128, "batch_size": 96, "steps": 1000}],
    "training": {
        "eval_interval": 100,
        "checkpoint_interval": 0,
        "max_dev_rows": 256,
        "break_documents": False,
    },
    "task": {
        "kind": "upos",
        "train": None,
        "dev": None,
        "dev_fraction": None,
        "dev_tokens": None,
        "checkpoint": "${output}/model.ckpt",
        "save": "${output}/finetuned.ckpt",
        "epochs": 10,
        "batch_size": 16,
        "patience": 3,
        "max_seq_len": None,
    },
}

PHASE_KEYS = ("seq_len", "batch_size", "steps")


def _merge(base: Dict, values: Any, path: str = "") -> Dict:
    if not isinstance(values, dict):
        raise ConfigError(f"configuration '{path.rstrip('.') or 'root'}' must be a mapping")
    merged = copy.deepcopy(base)
    for key, value in values.items():
        dotted = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown configuration key '{dotted}'")
        if isinstance(base[key], dict):
            merged[key] = _merge(base[key], value, f"{dotted}.")
        elif key == "phases":
            merged[key] = _phases(value, dotted)
        else:
            merged[key] = value
    return merged


def _phases(values: Any, path: str) -> List[Dict]:
    if not isinstance(values, list) or not values:
        raise ConfigError(f"configuration '{path}' must be a non-empty list of phases")
    phases = []
    for index, value in enumerate(values):
        if not isinstance(value, dict):
            raise ConfigError(f"configuration '{path}.{index}' must be a mapping")
        for key in value:
            if key not in PHASE_KEYS:
                raise ConfigError(f"unknown configuration key '{path}.{index}.{key}'")
        for key in PHASE_KEYS:
            if key not in value:
                raise ConfigError(f"missing required configuration key '{path}.{index}.{key}'")
        phases.append(dict(value))
    return phases


def _override(values: Dict, assignment: str) -> Dict:
    dotted, separator, text = assignment.partition("=")
    if not separator or not dotted:
        raise ConfigError(f"override '{assignment}' must look like section.key=value")
    try:
        value = yaml.safe_load(text)
    except yaml.YAMLError as error:
        raise ConfigError(f"override '{assignment}' has an invalid value ({error})") from error
    for key in reversed(dotted.split(".")):
        value = {key: value}
    return _merge(values, value)


def _render(value: Any, scope: Dict) -> Any:
    if isinstance(value, dict):
        return {key: _render(item, scope) for key, item in value.items()}
    if isinstance(value, list):
        return [_render(item, scope) for item in value]
    if isinstance(value, str) and "${" in value:
        try:
            return Template(value).render(**scope)
        except (MakoException, NameError) as error:
            raise ConfigError(f"cannot render configuration value '{value}' ({error})") from error
    return value


def load_yaml(filename: Union[str, Path]) -> Dict:
    filename = Path(filename)
    YamlIncludeConstructor.add_to_loader_class(
        loader_class=yaml.FullLoader, base_dir=filename.parent
    )
    try:
        with open(filename, encoding="utf-8") as file:
            values = yaml.load(file, Loader=yaml.FullLoader)
    except OSError as error:
        raise ConfigError(f"{filename}: {error.strerror}") from error
    except yaml.YAMLError as error:
        mark = getattr(error, "problem_mark", None)
        where = f"{filename}:{mark.line + 1}" if mark is not None else str(filename)
        raise ConfigError(f"{where}: {getattr(error, 'problem', None) or error}") from error
    return values or {}


class RunConfig:
    def __init__(self, **kwargs) -> None:
        overrides: Iterable[str] = kwargs.pop("overrides", ())
        if "yaml" in kwargs:
            values = load_yaml(kwargs.pop("yaml"))
        else:
            values = kwargs

        merged = _merge(DEFAULTS, values)
        for assignment in overrides:
            merged = _override(merged, assignment)
        if not isinstance(merged["seed"], int):
            raise ConfigError(f"configuration 'seed' must be an integer, got {merged['seed']!r}")
        output = _render(str(merged["output"]), {"seed": merged["seed"]})
        scope = {"output": output, "seed": merged["seed"]}
        merged["output"] = scope["output"]
        self._values = _render(merged, scope)

    @property
    def values(self) -> Dict:
        return self._values

    @property
    def output(self) -> Path:
        return Path(self._values["output"])

    @property
    def seed(self) -> int:
        return self._values["seed"]

    def get(self, dotted: str) -> Any:
        value = self._values
        for key in dotted.split("."):
            value = value[key]
        return value

    def require(self, dotted: str) -> Any:
        value = self.get(dotted)
        if value is None:
            raise ConfigError(f"missing required configuration key '{dotted}'")
        return value

    def _build(self, section: str, factory, **values):
        try:
            return factory(**values)
        except (XermeError, TypeError, ValueError) as error:
            raise ConfigError(f"invalid '{section}' configuration: {error}") from error

    def model_config(self, vocab_size: int) -> ModelConfig:
        values = dict(self._values["model"])
        preset = values.pop("preset")
        explicit = {key: value for key, value in values.items() if value is not None}
        return self._build(
            "model", ModelConfig.preset, name=preset, vocab_size=vocab_size, **explicit
        )

    @property
    def optimizer(self) -> OptimizerConfig:
        return self._build("optimizer", OptimizerConfig, **self._values["optimizer"])

    @property
    def masking(self) -> MaskingPolicy:
        return self._build("masking", MaskingPolicy, **self._values["masking"])

    @property
    def phases(self) -> List[Phase]:
        return [self._build("phases", Phase, **phase) for phase in self._values["phases"]]

    @property
    def training(self) -> PretrainSettings:
        return self._build("training", PretrainSettings, **self._values["training"])

    @property
    def task_kind(self) -> TaskKind:
        return self._build("task", TaskKind, value=self._values["task"]["kind"])

    @property
    def dev_split(self) -> Dict[str, Any]:
        task = self._values["task"]
        fraction, tokens = task["dev_fraction"], task["dev_tokens"]
        given = [key for key in ("dev", "dev_fraction", "dev_tokens") if task[key] is not None]
        if len(given) > 1:
            keys = " and ".join(f"'task.{key}'" for key in given)
            raise ConfigError(f"configuration keys {keys} cannot be used together")
        if fraction is not None:
            if not isinstance(fraction, (int, float)) or not 0 < fraction < 1:
                raise ConfigError(
                    f"configuration 'task.dev_fraction' must lie in (0, 1), got {fraction!r}"
                )
            return {"train_fraction": 1.0 - fraction}
        if tokens is not None:
            if not isinstance(tokens, int) or tokens <= 0:
                raise ConfigError(
                    f"configuration 'task.dev_tokens' must be a positive integer, got {tokens!r}"
                )
            return {"dev_tokens": tokens}
        return {}

    @property
    def finetuning(self) -> FinetuneSettings:
        task = self._values["task"]
        return self._build(
            "task",
            FinetuneSettings,
            epochs=task["epochs"],
            batch_size=task["batch_size"],
            patience=task["patience"],
            max_seq_len=task["max_seq_len"],
        )

    def to_yaml(self) -> str:
        return yaml.safe_dump(self._values, sort_keys=True, allow_unicode=True)

    def save(self, directory: Optional[Union[str, Path]] = None) -> Path:
        directory = Path(directory) if directory is not None else self.output
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / CONFIG_FILE
        path.write_text(self.to_yaml(), encoding="utf-8")
        logger.info("resolved configuration written to %s", path)
        return path
