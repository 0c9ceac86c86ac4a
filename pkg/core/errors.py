#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
errors.py

Hierarquia de exceções do cfkin.

Validadores relatam falhas (não lançam). As exceções abaixo ficam para
entradas fora do domínio de uma fórmula ou para cálculos que não podem
prosseguir.
"""

from __future__ import annotations

from typing import Any, Dict, List, Optional, Tuple


class CfkinError(Exception):
    """Raiz de todos os erros do projeto."""


class KernelRangeError(CfkinError, IndexError):
    """Índice fora do alcance de um kernel tabelado."""


class DetailedBalanceError(CfkinError, ValueError):
    """Recorrência de Q_i indeterminada (b(i,1) = 0 ou a(i,1) = 0)."""


class InconsistentKernelError(CfkinError, ValueError):
    def __init__(self, message: str, witness: Tuple[int, int], residual: float):
        super().__init__(message)
        self.witness = witness
        self.residual = residual


class EstimationError(CfkinError, RuntimeError):
    def __init__(self, message: str, partial: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.partial = partial or {}


class SupercriticalMassError(CfkinError, ValueError):
    def __init__(self, rho: float, rho_s: float):
        super().__init__(f"massa supercrítica: rho={rho!r} > rho_s={rho_s!r}")
        self.rho = rho
        self.rho_s = rho_s


class DomainError(CfkinError, ValueError):
    """Argumento fora do domínio da fórmula."""


class PreconditionError(CfkinError, ValueError):
    """Pré-condição de uma sonda não satisfeita."""


class StiffnessError(CfkinError, RuntimeError):
    """Passo de tempo abaixo do mínimo: o sistema ficou rígido demais para o RK explícito."""

    def __init__(self, message: str, state: Any = None, records: Optional[List[Any]] = None):
        super().__init__(message)
        self.state = state
        self.records = records or []


class ConfigError(CfkinError, ValueError):
    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        where = []
        if key:
            where.append(f"chave '{key}'")
        if line is not None:
            where.append(f"linha {line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line
