#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
trajectory.py

Histórico de uma trajetória: recebe os estados observados pelo integrador e
guarda um DiagnosticsRecord por instante de observação.
"""

from __future__ import annotations

import logging
from typing import List

from core.dynamics import State
from core.functionals import DiagnosticsBuilder, DiagnosticsRecord

logger = logging.getLogger(__name__)


class TrajectoryRecorder:
    """
    Observador passado a integrate(): recorder(estado, massa_cortada).

    Guarda um registro por instante de observação, em ordem; os registros
    parciais sobrevivem a um StiffnessError.
    """

    def __init__(self, builder: DiagnosticsBuilder):
        self.builder = builder
        self.historico: List[DiagnosticsRecord] = []

    def __call__(self, s: State, clamped_mass: float) -> None:
        rec = self.builder.build(s, clamped_mass)
        self.historico.append(rec)
        if rec.pre_positivity and len(self.historico) == 1:
            logger.debug("estado inicial com zeros: registro marcado pre-positividade")

    def __len__(self) -> int:
        return len(self.historico)
