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

from enum import Enum


class ExitCode(Enum):
    SUCCESS = 0x00
    RUNTIME_ERROR = 0x01
    USAGE_ERROR = 0x02


class XermeError(Exception):
    exit_code = ExitCode.RUNTIME_ERROR


class CorpusError(XermeError):
    pass


class VocabError(XermeError):
    pass


class MaskingError(XermeError):
    pass


class ModelError(XermeError):
    pass


class CheckpointError(XermeError):
    pass


class TrainingError(XermeError):
    pass


class TreeError(XermeError):
    pass


class EvalError(XermeError):
    pass


class StatsError(XermeError):
    pass


class ConfigError(XermeError):
    exit_code = ExitCode.USAGE_ERROR
