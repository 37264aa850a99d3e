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

from dataclasses import asdict, dataclass, field
from typing import Dict

import numpy as np

from .errors import ModelError
from .model import Params

SCHEDULES = ("linear_decay",)
NO_DECAY_SUFFIXES = (".bias", ".offset", ".scale")


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 1e-4
    weight_decay: float = 0.01
    adam_eps: float = 1e-8
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    total_steps: int = 0
    warmup_steps: int = 0
    schedule: str = "linear_decay"

    def __post_init__(self):
        if self.learning_rate <= 0.0 or self.adam_eps <= 0.0:
            raise ModelError("learning_rate and adam_eps must be positive")
        if self.weight_decay < 0.0:
            raise ModelError(f"weight_decay must be non-negative, got {self.weight_decay}")
        for name in ("adam_beta1", "adam_beta2"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ModelError(f"{name} must lie in (0, 1), got {getattr(self, name)}")
        if self.total_steps < 0 or self.warmup_steps < 0:
            raise ModelError("total_steps and warmup_steps must be non-negative")
        if self.schedule not in SCHEDULES:
            raise ModelError(f"unknown schedule '{self.schedule}', use one of {SCHEDULES}")

    def lr_multiplier(self, step: int) -> float:
        # total_steps == 0 leaves the rate constant
        if self.warmup_steps and step < self.warmup_steps:
            return step / self.warmup_steps
        if self.total_steps <= 0:
            return 1.0
        return max(0.0, 1.0 - step / self.total_steps)

    def learning_rate_at(self, step: int) -> float:
        return self.learning_rate * self.lr_multiplier(step)

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class AdamState:
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros(cls, params: Params) -> "AdamState":
        return cls(
            m={name: np.zeros_like(value) for name, value in params.items()},
            v={name: np.zeros_like(value) for name, value in params.items()},
        )

    def extend(self, params: Params):
        for name, value in params.items():
            if name not in self.m or self.m[name].shape != value.shape:
                self.m[name] = np.zeros_like(value)
                self.v[name] = np.zeros_like(value)


def decays(name: str) -> bool:
    return not name.endswith(NO_DECAY_SUFFIXES)


def adam_step(
    params: Params, grads: Params, state: AdamState, config: OptimizerConfig, step: int
) -> Params:
    if step < 1:
        raise ModelError(f"optimizer steps are counted from 1, got {step}")
    lr = config.learning_rate_at(step)
    beta1, beta2 = config.adam_beta1, config.adam_beta2
    correction1 = 1.0 - beta1**step
    correction2 = 1.0 - beta2**step

    for name, value in params.items():
        grad = grads.get(name)
        if grad is None:
            continue
        m, v = state.m[name], state.v[name]
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        update = (m / correction1) / (np.sqrt(v / correction2) + config.adam_eps)
        if config.weight_decay and decays(name):
            update = update + config.weight_decay * value
        value -= lr * update
    state.step = step
    return params
