#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
sampling.py

Geradores aleatórios com semente para as varreduras de desigualdades.

Cada tentativa k tem seu próprio gerador, SeedSequence(seed, spawn_key=(k,)),
então o resultado não depende de quantos workers dividem as tentativas.

Estados são estratificados por:
- faixa de c1/z_s (baixa, media, alta)
- tamanho do suporte (16, 64, 256)
- decaimento da cauda (geometric, poly_exp)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from core.equilibrium import DBSequence, sequence_from_log_q
from core.errors import DomainError

C1_BANDS: Tuple[Tuple[float, float], ...] = ((0.1, 0.35), (0.35, 0.65), (0.65, 0.9))
SUPPORTS: Tuple[int, ...] = (16, 64, 256)
DECAYS: Tuple[str, ...] = ("geometric", "poly_exp")


@dataclass(frozen=True)
class Stratum:
    band: int
    support: int
    decay: str

    @property
    def label(self) -> str:
        lo, hi = C1_BANDS[self.band]
        return f"c1/zs=[{lo},{hi}) N={self.support} {self.decay}"


def trial_rng(seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(k),)))


def stratum_for(k: int) -> Stratum:
    """Estratos percorridos em rodízio: a tentativa k cai no estrato k mod 18."""
    n_b, n_s = len(C1_BANDS), len(SUPPORTS)
    b = k % n_b
    s = (k // n_b) % n_s
    d = (k // (n_b * n_s)) % len(DECAYS)
    return Stratum(b, SUPPORTS[s], DECAYS[d])


def log_uniform(rng: np.random.Generator, lo: float, hi: float, size=None):
    if not (0 < lo < hi):
        raise DomainError("log_uniform exige 0 < lo < hi")
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size=size))


def random_state(rng: np.random.Generator, z_s: float, stratum: Stratum, noise: float = 0.5) -> np.ndarray:
    """
    Estado estritamente positivo com c1/z_s na faixa do estrato:
        geometric: c_i = c1 q^{i−1} e^{σξ_i}
        poly_exp:  c_i = c1 i^{−p} e^{−κ(i−1)} e^{σξ_i}
    """
    lo, hi = C1_BANDS[stratum.band]
    c1 = z_s * rng.uniform(lo, hi)
    i = np.arange(1, stratum.support + 1, dtype=float)
    if stratum.decay == "geometric":
        q = rng.uniform(0.05, 0.9)
        log_c = (i - 1.0) * math.log(q)
    elif stratum.decay == "poly_exp":
        p = rng.uniform(0.5, 3.0)
        kappa = rng.uniform(0.01, 0.5)
        log_c = -p * np.log(i) - kappa * (i - 1.0)
    else:
        raise DomainError(f"decaimento desconhecido: {stratum.decay}")
    ruido = noise * rng.standard_normal(stratum.support)
    ruido[0] = 0.0
    # piso em 1e-250 mantém todos os logs finitos
    return np.maximum(c1 * np.exp(log_c + ruido), 1e-250)


def random_support_state(rng: np.random.Generator, max_support: int = 256) -> np.ndarray:
    """Suporte finito aleatório, entradas log-uniformes em [1e-6, 1]; algumas zeradas."""
    n = int(rng.integers(1, max_support + 1))
    c = log_uniform(rng, 1e-6, 1.0, size=n)
    c[rng.random(n) < 0.1] = 0.0
    return c


def random_db_sequence(rng: np.random.Generator, n: int) -> DBSequence:
    """
    Q com z_s = 1 e Q_i z_s^i não crescente: log Q_i = −Σ_{k<=i} u_k k^{−1/2},
    u_k uniforme em [0, 1]. O decaimento subexponencial mantém z_s = 1.
    """
    k = np.arange(2, n + 1, dtype=float)
    passos = -rng.uniform(0.0, 1.0, size=n - 1) / np.sqrt(k)
    log_q = np.concatenate(([0.0], np.cumsum(passos)))
    return sequence_from_log_q(log_q, z_s=1.0)


def random_bounded_sequence(rng: np.random.Generator, n: int, C1: float, C2: float) -> DBSequence:
    """Q com C2 <= Q_i^{1/i} <= C1 (exige C2 <= 1 <= C1, pois Q_1 = 1)."""
    if not (0 < C2 <= 1.0 <= C1):
        raise DomainError("exige 0 < C2 <= 1 <= C1")
    i = np.arange(2, n + 1, dtype=float)
    raiz = rng.uniform(math.log(C2), math.log(C1), size=n - 1)
    return sequence_from_log_q(np.concatenate(([0.0], i * raiz)))


def near_critical_state(rng: np.random.Generator, Q: DBSequence, z: float, rho: float, N: int,
                        noise: float = 0.3) -> np.ndarray:
    """
    c1 em [z_s − ¼(z_s − z), z_s) e o resto com a forma Q_i c1^i (com ruído),
    reescalado para massa total ρ.
    """
    limiar = Q.z_s - 0.25 * (Q.z_s - z)
    c1 = limiar + rng.uniform(0.0, 0.99) * (Q.z_s - limiar)
    if c1 >= rho:
        raise DomainError(f"massa {rho} insuficiente para c1={c1}")
    i = np.arange(2, N + 1, dtype=float)
    resto = np.exp(Q.log_Q[2 : N + 1] + i * math.log(c1) + noise * rng.standard_normal(N - 1))
    resto *= (rho - c1) / float(np.dot(i, resto))
    return np.concatenate(([c1], resto))
