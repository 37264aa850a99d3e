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

__version__ = "0.1"
