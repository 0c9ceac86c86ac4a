#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
dynamics.py

Sistema truncado de coagulação-fragmentação:

    dc_j/dt = ½ Σ_{k<j} W_{j−k,k} − Σ_{k<=N−j} W_{j,k},
    W_{i,j} = a_{i,j} c_i c_j − b_{i,j} c_{i+j},   W = 0 se i + j > N.

O lado direito roda em numba com ordem de soma fixa (k crescente, um
acumulador por j), então execuções repetidas dão resultados idênticos bit a bit.
A integração usa o par explícito de Dormand–Prince 5(4) com passo adaptativo,
rejeição de passos que produzem c_i < −atol e corte de negativos pequenos.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from core.errors import DomainError, StiffnessError
from core.kernel import KernelSpec, KernelTables, build_tables

logger = logging.getLogger(__name__)

STEP_UNDERFLOW = 1e-14


@dataclass(frozen=True, eq=False)
class State:
    """c[0] guarda c_1; N = len(c)."""
    t: float
    c: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return len(self.c)

    @property
    def mass(self) -> float:
        return moment(self, 1.0)


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-8
    atol: float = 1e-12
    h_init: float = 1e-3
    h_max: float = 1.0
    positivity_floor: float = 0.0
    t_end: float = 1.0
    observer_cadence: float = 0.1

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise DomainError("rtol e atol devem ser positivos")
        if self.h_init <= 0 or self.h_init > self.h_max:
            raise DomainError("exige 0 < h_init <= h_max")
        if self.positivity_floor < 0:
            raise DomainError("positivity_floor deve ser >= 0")
        if self.t_end < 0 or self.observer_cadence <= 0:
            raise DomainError("t_end >= 0 e observer_cadence > 0")

    def observation_times(self) -> np.ndarray:
        """0, cad, 2·cad, ..., t_end: ⌈t_end/cad⌉ + 1 instantes."""
        k = math.ceil(self.t_end / self.observer_cadence - 1e-12) if self.t_end > 0 else 0
        return np.minimum(np.arange(k + 1) * self.observer_cadence, self.t_end)


@dataclass(frozen=True, eq=False)
class IntegrationResult:
    state: State
    clamped_mass: float
    accepted: int
    rejected: int
    rhs_evals: int


# ---------------------------------------------------------------------------
# Lado direito
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _rhs_kernel(c, A, B, N, out):
    # c indexado a partir de 1 (c[0] = 0); out idem
    for j in range(1, N + 1):
        gain = 0.0
        for k in range(1, j):
            i = j - k
            gain += A[i, k] * c[i] * c[k] - B[i, k] * c[j]
        loss = 0.0
        for k in range(1, N - j + 1):
            loss += A[j, k] * c[j] * c[k] - B[j, k] * c[j + k]
        out[j] = 0.5 * gain - loss
    out[0] = 0.0


def _padded(c: np.ndarray) -> np.ndarray:
    cc = np.empty(len(c) + 1)
    cc[0] = 0.0
    cc[1:] = c
    return cc


def rhs_array(tables: KernelTables, c: np.ndarray) -> np.ndarray:
    N = tables.N
    if len(c) != N:
        raise DomainError(f"estado de tamanho {len(c)} para tabelas com N={N}")
    out = np.empty(N + 1)
    _rhs_kernel(_padded(c), tables.A, tables.B, N, out)
    return out[1:]


def rhs(tables: KernelTables, s: State) -> np.ndarray:
    """Taxas dc_i/dt (posição 0 = i = 1)."""
    return rhs_array(tables, s.c)


def moment(s: State, k: float) -> float:
    """M_k = Σ i^k c_i."""
    i = np.arange(1, s.N + 1, dtype=float)
    return float(np.dot(i ** k, s.c))


def fluxes(tables: KernelTables, c: np.ndarray) -> np.ndarray:
    """W_{i,j} sobre os pares (pair_i, pair_j) com i + j <= N."""
    cc = _padded(c)
    pi, pj = tables.pair_i, tables.pair_j
    return tables.A[pi, pj] * cc[pi] * cc[pj] - tables.B[pi, pj] * cc[pi + pj]


def moment_rate(tables: KernelTables, s: State, k: float) -> float:
    """½ Σ_{i+j<=N} W_{i,j} ((i+j)^k − i^k − j^k)."""
    pi = tables.pair_i.astype(float)
    pj = tables.pair_j.astype(float)
    peso = (pi + pj) ** k - pi ** k - pj ** k
    return 0.5 * float(np.dot(fluxes(tables, s.c), peso))


# ---------------------------------------------------------------------------
# Dormand–Prince 5(4)
# ---------------------------------------------------------------------------

class DormandPrince54:
    """
    Par de Dormand–Prince 5(4), 7 estágios, FSAL.

    O estágio 7 avalia f no ponto aceito, então reaproveita-se como
    primeiro estágio do passo seguinte.
    """

    s = 7
    n = 5
    m = 4

    eval_stages = [0.0, 1/5, 3/10, 4/5, 8/9, 1.0, 1.0]

    BT = {
        0: [1/5],
        1: [3/40, 9/40],
        2: [44/45, -56/15, 32/9],
        3: [19372/6561, -25360/2187, 64448/6561, -212/729],
        4: [9017/3168, -355/33, 46732/5247, 49/176, -5103/18656],
        5: [35/384, 0.0, 500/1113, 125/192, -2187/6784, 11/84],
    }

    # b5 − b4: estimativa do erro local
    TR = [71/57600, 0.0, -71/16695, 71/1920, -17253/339200, 22/525, -1/40]

    def __init__(self, f: Callable[[np.ndarray], np.ndarray]):
        self.f = f
        self.evals = 0

    def __call__(self, y: np.ndarray) -> np.ndarray:
        self.evals += 1
        return self.f(y)

    def step(self, y: np.ndarray, k1: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Devolve (y_novo, erro_local, f(y_novo))."""
        ks = [k1]
        for row in range(6):
            acc = y.copy()
            for col, coef in enumerate(self.BT[row]):
                if coef != 0.0:
                    acc += (h * coef) * ks[col]
            ks.append(self(acc))
        y_new = acc
        err = np.zeros_like(y)
        for coef, kk in zip(self.TR, ks):
            if coef != 0.0:
                err += (h * coef) * kk
        return y_new, err, ks[-1]


def _error_norm(err: np.ndarray, y: np.ndarray, y_new: np.ndarray, cfg: IntegratorConfig) -> float:
    sc = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean((err / sc) ** 2))) if len(y) else 0.0


def integrate(
    tables: KernelTables,
    s0: State,
    cfg: IntegratorConfig,
    observer: Optional[Callable[[State, float], None]] = None,
    snapshot_times: Sequence[float] = (),
    on_snapshot: Optional[Callable[[int, State], None]] = None,
) -> IntegrationResult:
    """
    Avança s0 até cfg.t_end.

    Args:
        tables: coeficientes pré-calculados (mesmo N do estado)
        s0: estado inicial, c >= 0
        cfg: tolerâncias e cadência
        observer: chamado como observer(estado, massa_cortada) em cada instante de observação
        snapshot_times: instantes adicionais onde o passo pousa exatamente
        on_snapshot: chamado como on_snapshot(ordinal, estado) nesses instantes

    Raises:
        StiffnessError: passo abaixo de 1e-14·t_scale; carrega o último estado.
    """
    if s0.N != tables.N:
        raise DomainError(f"estado com N={s0.N}, tabelas com N={tables.N}")
    if np.any(s0.c < 0):
        raise DomainError("estado inicial com componentes negativas")

    i_peso = np.arange(1, s0.N + 1, dtype=float)
    obs = cfg.observation_times()
    snaps = sorted(float(t) for t in snapshot_times if 0.0 <= t <= cfg.t_end)
    alvos = np.unique(np.concatenate((obs, np.asarray(snaps, dtype=float))))
    obs_set = set(obs.tolist())
    snap_idx: Dict[float, List[int]] = {}
    for k, t in enumerate(snapshot_times):
        snap_idx.setdefault(float(t), []).append(k)

    def notificar(t: float, y: np.ndarray, cortado: float) -> None:
        st = State(t=t, c=y.copy())
        if observer is not None and t in obs_set:
            observer(st, cortado)
        if on_snapshot is not None:
            for k in snap_idx.get(t, []):
                on_snapshot(k, st)

    dp = DormandPrince54(lambda y: rhs_array(tables, y))
    t_scale = max(cfg.t_end, 1.0)
    h_min = STEP_UNDERFLOW * t_scale
    t = 0.0
    y = np.array(s0.c, dtype=float)
    cortado = 0.0
    aceitos = rejeitados = 0
    h = min(cfg.h_init, cfg.h_max)
    k1 = dp(y)

    pos = 0
    while pos < len(alvos) and alvos[pos] <= t:
        notificar(float(alvos[pos]), y, cortado)
        pos += 1

    while pos < len(alvos):
        alvo = float(alvos[pos])
        h_passo = min(h, alvo - t)
        truncado = h_passo < h
        y_new, err, k7 = dp.step(y, k1, h_passo)
        errn = _error_norm(err, y, y_new, cfg)
        negativo = len(y_new) > 0 and float(y_new.min()) < -cfg.atol

        if errn > 1.0 or negativo or not np.all(np.isfinite(y_new)):
            rejeitados += 1
            fator = 0.5 if (negativo or not math.isfinite(errn)) else max(0.2, 0.9 * errn ** -0.2)
            h = h_passo * fator
            if h < h_min:
                raise StiffnessError(
                    f"passo {h:.3e} abaixo de {h_min:.3e} em t={t:.6g}: sistema rigido demais",
                    state=State(t=t, c=y.copy()),
                )
            continue

        aceitos += 1
        abaixo = y_new < cfg.positivity_floor
        if np.any(abaixo):
            # só resta ruído em [−atol, floor); a massa adicionada entra na auditoria
            cortado += float(np.dot(i_peso[abaixo], cfg.positivity_floor - y_new[abaixo]))
            y_new[abaixo] = cfg.positivity_floor if cfg.positivity_floor > 0 else 0.0
            k7 = dp(y_new)
        y = y_new
        k1 = k7
        t = alvo if truncado or alvo - (t + h_passo) <= 1e-12 * t_scale else t + h_passo

        fator = 5.0 if errn == 0.0 else min(5.0, 0.9 * errn ** -0.2)
        h = min(cfg.h_max, max(h, h_passo * fator) if truncado else h_passo * fator)

        if t >= alvo:
            notificar(alvo, y, cortado)
            pos += 1

    logger.debug("integracao: %d aceitos, %d rejeitados, %d avaliacoes", aceitos, rejeitados, dp.evals)
    if cortado > 1e-8 * max(float(np.dot(i_peso, s0.c)), 1e-300):
        logger.warning("massa cortada %.3e acima do limite de auditoria", cortado)
    return IntegrationResult(State(t=t, c=y), cortado, aceitos, rejeitados, dp.evals)


# ---------------------------------------------------------------------------
# Estudo de truncamento
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncationStudy:
    N_list: Tuple[int, ...]
    times: Tuple[float, ...]
    discrepancies: Dict[Tuple[int, int], float]

    def pair(self, n_a: int, n_b: int) -> float:
        return self.discrepancies[(n_a, n_b)]

    def to_dict(self) -> Dict[str, object]:
        return {
            "N_list": list(self.N_list),
            "times": len(self.times),
            "discrepancies": [
                {"N": a, "N_prime": b, "sup_weighted_l1": v} for (a, b), v in sorted(self.discrepancies.items())
            ],
        }


def _run_branch(spec: KernelSpec, s0: State, cfg: IntegratorConfig) -> List[np.ndarray]:
    tables = build_tables(spec, s0.N)
    serie: List[np.ndarray] = []
    integrate(tables, s0, cfg, observer=lambda st, _: serie.append(st.c))
    return serie


def truncation_study(
    spec: KernelSpec,
    s0_generator: Callable[[int], State],
    N_list: Sequence[int],
    T: float,
    cfg: IntegratorConfig,
    workers: int = 1,
) -> TruncationStudy:
    """
    sup_t Σ i |c_i^N − c_i^{N'}| para cada par de N_list, na grade de observação
    comum; o vetor menor é completado com zeros.
    """
    N_list = tuple(int(n) for n in N_list)
    if list(N_list) != sorted(N_list) or len(set(N_list)) != len(N_list):
        raise DomainError("N_list deve ser estritamente crescente")
    cfg = replace(cfg, t_end=float(T))
    iniciais = [s0_generator(n) for n in N_list]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            series = list(pool.map(lambda s: _run_branch(spec, s, cfg), iniciais))
    else:
        series = [_run_branch(spec, s, cfg) for s in iniciais]

    times = tuple(float(t) for t in cfg.observation_times())
    nmax = N_list[-1]
    peso = np.arange(1, nmax + 1, dtype=float)

    def pad(c: np.ndarray) -> np.ndarray:
        out = np.zeros(nmax)
        out[: len(c)] = c
        return out

    disc: Dict[Tuple[int, int], float] = {}
    for a in range(len(N_list)):
        for b in range(a + 1, len(N_list)):
            sup = 0.0
            for ca, cb in zip(series[a], series[b]):
                sup = max(sup, float(np.dot(peso, np.abs(pad(ca) - pad(cb)))))
            disc[(N_list[a], N_list[b])] = sup
    logger.info("estudo de truncamento: %s", {f"{k[0]}-{k[1]}": f"{v:.3e}" for k, v in disc.items()})
    return TruncationStudy(N_list, times, disc)
