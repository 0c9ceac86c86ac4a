#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
presets.py

Registro de kernels e de dados iniciais prontos para uso.

Kernels:
- representativo: λ = 1/2, C = C' = 1, μ = 1/2 (família física com fator de Gibbs)
- becker_doring: coluna do monômero do representativo (validação cruzada com a teoria BD)
- bd_generalizado: representativo com cutoff 4
- constante: λ = 0 (a = 2C)
- sem_gibbs: C' = 0, logo Q_i = 1, z_s = 1 e ρ_s = +inf

Dados iniciais: monodisperse, equilibrium, equilibrium_perturbed, geometric, file.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import numpy as np

from core.dynamics import State
from core.equilibrium import DBSequence, equilibrium_profile
from core.errors import DomainError
from core.kernel import (
    KernelSpec,
    becker_doring,
    becker_doring_from,
    generalized_bd,
    load_table_csv,
    power_law_exp,
)


@dataclass(frozen=True)
class KernelPreset:
    id: str
    descricao: str
    params: Dict[str, Any] = field(default_factory=dict)


KERNEL_PRESETS: Dict[str, KernelPreset] = {
    "representativo": KernelPreset(
        id="representativo",
        descricao="Kernel fisico: a = i^1/2 + j^1/2, fator de Gibbs com mu = 1/2.",
        params={"family": "power_law_exp", "lam": 0.5, "coag_scale": 1.0, "gibbs_scale": 1.0, "surface_exponent": 0.5},
    ),
    "becker_doring": KernelPreset(
        id="becker_doring",
        descricao="Somente interacoes com monomero, coluna do kernel representativo.",
        params={"family": "becker_doring", "lam": 0.5, "coag_scale": 1.0, "gibbs_scale": 1.0, "surface_exponent": 0.5},
    ),
    "bd_generalizado": KernelPreset(
        id="bd_generalizado",
        descricao="Representativo com interacoes so entre clusters de tamanho ate 4.",
        params={"family": "generalized_bd", "cutoff": 4, "lam": 0.5, "coag_scale": 1.0, "gibbs_scale": 1.0,
                "surface_exponent": 0.5},
    ),
    "constante": KernelPreset(
        id="constante",
        descricao="Coagulacao constante (lambda = 0).",
        params={"family": "power_law_exp", "lam": 0.0, "coag_scale": 1.0, "gibbs_scale": 1.0, "surface_exponent": 0.5},
    ),
    "sem_gibbs": KernelPreset(
        id="sem_gibbs",
        descricao="C' = 0: Q_i = 1, sem massa critica finita.",
        params={"family": "power_law_exp", "lam": 0.5, "coag_scale": 1.0, "gibbs_scale": 0.0, "surface_exponent": 0.5},
    ),
}


def kernel_from_params(params: Dict[str, Any], n_max: int) -> KernelSpec:
    """
    Monta o KernelSpec. Para becker_doring sem sequências explícitas, usa a
    coluna a(i,1), b(i,1) do kernel power_law_exp com os mesmos parâmetros até n_max.
    """
    p = dict(params)
    fam = p.pop("family")
    extra = {k: p.pop(k) for k in ("growth_K", "growth_gamma") if p.get(k) is not None}
    p.pop("growth_K", None)
    p.pop("growth_gamma", None)
    lei = {k: p[k] for k in ("lam", "coag_scale", "gibbs_scale", "surface_exponent") if k in p}
    if fam == "power_law_exp":
        return power_law_exp(**lei, **extra)
    if fam == "generalized_bd":
        return generalized_bd(int(p.get("cutoff", 1)), power_law_exp(**lei), **extra)
    if fam == "becker_doring":
        if p.get("bd_a"):
            return becker_doring(p["bd_a"], p["bd_b"], lam=lei.get("lam", 0.0), **extra)
        return becker_doring_from(power_law_exp(**lei), n_max, **extra)
    if fam == "table":
        return load_table_csv(Path(p["table_path"]), lam=lei.get("lam", 0.0), **extra)
    raise DomainError(f"familia sem preset parametrico: {fam}")


def make_kernel(preset_id: str, n_max: int) -> KernelSpec:
    if preset_id not in KERNEL_PRESETS:
        raise DomainError(f"preset de kernel desconhecido: {preset_id}")
    return kernel_from_params(KERNEL_PRESETS[preset_id].params, n_max)


# ---------------------------------------------------------------------------
# Dados iniciais
# ---------------------------------------------------------------------------

def _scaled_to_mass(c: np.ndarray, rho: float) -> np.ndarray:
    i = np.arange(1, len(c) + 1, dtype=float)
    m = float(np.dot(i, c))
    if m <= 0:
        raise DomainError("perfil sem massa para normalizar")
    return c * (rho / m)


def monodisperse(N: int, rho: float) -> State:
    c = np.zeros(N)
    c[0] = rho
    return State(t=0.0, c=c)


def equilibrium_state(Q: DBSequence, z: float, N: int) -> State:
    return State(t=0.0, c=equilibrium_profile(Q, z, N))


def equilibrium_perturbed(Q: DBSequence, z: float, N: int, epsilon: float, seed: int,
                          rho: Optional[float] = None) -> State:
    """c_i = Q_i z^i (1 + ε ξ_i), ξ uniforme em [−1, 1], renormalizado para massa ρ."""
    if not (0 <= epsilon < 1):
        raise DomainError("epsilon deve estar em [0, 1)")
    rng = np.random.default_rng(seed)
    base = equilibrium_profile(Q, z, N)
    c = base * (1.0 + epsilon * rng.uniform(-1.0, 1.0, size=N))
    if rho is not None:
        c = _scaled_to_mass(c, rho)
    return State(t=0.0, c=c)


def geometric(N: int, ratio: float, rho: float) -> State:
    if not (0 < ratio):
        raise DomainError("razao geometrica deve ser positiva")
    i = np.arange(1, N + 1, dtype=float)
    return State(t=0.0, c=_scaled_to_mass(np.exp(i * np.log(ratio)), rho))


def load_initial_csv(path: Path, N: int) -> State:
    """Lê `i,c_i` (formato dos snapshots); tamanhos ausentes valem zero."""
    rows = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    idx = rows[:, 0].astype(int)
    if np.any(idx < 1) or np.any(idx > N):
        raise DomainError(f"indices do dado inicial fora de [1, {N}]: {path}")
    if np.any(rows[:, 1] < 0):
        raise DomainError(f"dado inicial com concentracao negativa: {path}")
    c = np.zeros(N)
    c[idx - 1] = rows[:, 1]
    return State(t=0.0, c=c)


INITIAL_PRESETS: Dict[str, Callable[..., State]] = {
    "monodisperse": monodisperse,
    "equilibrium": equilibrium_state,
    "equilibrium_perturbed": equilibrium_perturbed,
    "geometric": geometric,
    "file": load_initial_csv,
}
