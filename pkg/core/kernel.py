#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
kernel.py

Coeficientes de coagulação a(i,j) e fragmentação b(i,j).

Famílias suportadas:
- power_law_exp: a = C(i^λ + j^λ), b = a·exp(C'((i+j)^μ − i^μ − j^μ))
- becker_doring: só interações com monômero (min(i,j) = 1)
- generalized_bd: kernel interno zerado quando min(i,j) > cutoff
- table: matrizes explícitas lidas de CSV (i,j,a,b)

Também valida as hipóteses estruturais H1..H6 sobre um kernel
e relata constantes estimadas (K, γ, K_1). O validador nunca lança:
falhas vão para o relatório com um par (i,j) testemunha.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import DomainError, KernelRangeError

logger = logging.getLogger(__name__)

FAMILIAS_VALIDAS = {"power_law_exp", "becker_doring", "generalized_bd", "table"}

DB_RESIDUAL_TOL = 1e-10
GROWTH_TREND_TOL = 1.1


@dataclass(frozen=True, eq=False)
class KernelSpec:
    family: str
    lam: float = 0.0
    coag_scale: float = 1.0
    gibbs_scale: float = 1.0
    surface_exponent: float = 0.5
    bd_a: Tuple[float, ...] = ()
    bd_b: Tuple[float, ...] = ()
    cutoff: int = 1
    inner: Optional["KernelSpec"] = None
    table_a: Optional[np.ndarray] = field(default=None, repr=False)
    table_b: Optional[np.ndarray] = field(default=None, repr=False)
    growth_K: Optional[float] = None
    growth_gamma: Optional[float] = None

    def __post_init__(self):
        if self.family not in FAMILIAS_VALIDAS:
            raise DomainError(f"familia_invalida: {self.family!r}")
        if not (0.0 <= self.lam <= 1.0):
            raise DomainError(f"lambda fora de [0,1]: {self.lam}")
        if self.family == "power_law_exp":
            if self.coag_scale <= 0 or self.gibbs_scale < 0:
                raise DomainError("coag_scale deve ser > 0 e gibbs_scale >= 0")
            if not (0.0 < self.surface_exponent < 1.0):
                raise DomainError(f"surface_exponent fora de (0,1): {self.surface_exponent}")
        elif self.family == "becker_doring":
            if len(self.bd_a) == 0 or len(self.bd_a) != len(self.bd_b):
                raise DomainError("sequencias a e b de Becker-Döring precisam ter o mesmo tamanho (> 0)")
            if min(self.bd_a) < 0 or min(self.bd_b) < 0:
                raise DomainError("coeficientes de Becker-Döring negativos")
        elif self.family == "generalized_bd":
            if self.cutoff < 1 or self.inner is None:
                raise DomainError("generalized_bd exige cutoff >= 1 e kernel interno")
        elif self.family == "table":
            if self.table_a is None or self.table_b is None or self.table_a.shape != self.table_b.shape:
                raise DomainError("kernel tabelado exige matrizes a e b de mesma forma")

    @property
    def max_index(self) -> Optional[int]:
        """Maior índice avaliável, ou None quando o kernel não tem limite."""
        if self.family == "table":
            return int(self.table_a.shape[0]) - 1
        if self.family == "becker_doring":
            return len(self.bd_a)
        if self.family == "generalized_bd":
            return self.inner.max_index
        return None

    @property
    def closed_form(self) -> Optional[str]:
        # generalized_bd e a coluna tirada de outro kernel preservam a coluna do monômero
        if self.family == "power_law_exp":
            return "power_law_exp"
        if self.inner is not None:
            return self.inner.closed_form
        return None


def closed_form_base(spec: KernelSpec) -> KernelSpec:
    """Desce pelos kernels internos até a família com forma fechada."""
    while spec.inner is not None:
        spec = spec.inner
    return spec


# ---------------------------------------------------------------------------
# Construtores
# ---------------------------------------------------------------------------

def power_law_exp(lam: float = 0.5, coag_scale: float = 1.0, gibbs_scale: float = 1.0,
                  surface_exponent: float = 0.5, **extra: Any) -> KernelSpec:
    return KernelSpec(family="power_law_exp", lam=lam, coag_scale=coag_scale,
                      gibbs_scale=gibbs_scale, surface_exponent=surface_exponent, **extra)


def becker_doring(a: Sequence[float], b: Sequence[float], lam: float = 0.0, **extra: Any) -> KernelSpec:
    """a[i-1] = a_{i,1} = a_{1,i}, idem para b."""
    return KernelSpec(family="becker_doring", lam=lam,
                      bd_a=tuple(float(x) for x in a), bd_b=tuple(float(x) for x in b), **extra)


def becker_doring_from(inner: KernelSpec, n: int, **extra: Any) -> KernelSpec:
    """Restringe um kernel às interações com monômero, tabelando a(i,1), b(i,1) até n."""
    a = [eval_a(inner, i, 1) for i in range(1, n + 1)]
    b = [eval_b(inner, i, 1) for i in range(1, n + 1)]
    return becker_doring(a, b, lam=inner.lam, inner=inner, **extra)


def generalized_bd(cutoff: int, inner: KernelSpec, **extra: Any) -> KernelSpec:
    return KernelSpec(family="generalized_bd", lam=inner.lam, cutoff=int(cutoff), inner=inner, **extra)


def table_kernel(a: np.ndarray, b: np.ndarray, lam: float = 0.0, **extra: Any) -> KernelSpec:
    """
    Kernel a partir de matrizes (n+1)x(n+1) indexadas a partir de 1
    (linha/coluna 0 ignoradas).
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    a[0, :] = a[:, 0] = 0.0
    b[0, :] = b[:, 0] = 0.0
    a.setflags(write=False)
    b.setflags(write=False)
    return KernelSpec(family="table", lam=lam, table_a=a, table_b=b, **extra)


def load_table_csv(path: Path, lam: float = 0.0, **extra: Any) -> KernelSpec:
    """Lê um CSV com cabeçalho `i,j,a,b`. Pares ausentes valem zero."""
    rows = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    if rows.shape[1] != 4:
        raise DomainError(f"tabela de kernel precisa de 4 colunas (i,j,a,b): {path}")
    idx = rows[:, :2]
    if np.any(idx < 1) or np.any(idx != np.round(idx)):
        raise DomainError(f"indices da tabela devem ser inteiros >= 1: {path}")
    n = int(idx.max())
    a = np.zeros((n + 1, n + 1))
    b = np.zeros((n + 1, n + 1))
    ii = idx[:, 0].astype(int)
    jj = idx[:, 1].astype(int)
    a[ii, jj] = rows[:, 2]
    b[ii, jj] = rows[:, 3]
    logger.info("tabela de kernel carregada: %s (N_table=%d, %d linhas)", path, n, len(rows))
    return table_kernel(a, b, lam=lam, **extra)


def product_kernel_table(alpha: float, beta: float, n: int, coag_scale: float = 1.0) -> KernelSpec:
    """
    Kernel produto a = C(i^α j^β + i^β j^α) com b = a.
    Viola o crescimento de H1 quando α, β > 0; serve como caso negativo do validador.
    """
    i = np.arange(n + 1, dtype=float)
    a = coag_scale * (np.outer(i ** alpha, i ** beta) + np.outer(i ** beta, i ** alpha))
    return table_kernel(a, a.copy(), lam=max(alpha, beta))


# ---------------------------------------------------------------------------
# Avaliação pontual
# ---------------------------------------------------------------------------

def _check_index(spec: KernelSpec, i: int, j: int) -> None:
    if i < 1 or j < 1:
        raise KernelRangeError(f"indices devem ser >= 1: ({i}, {j})")
    top = spec.max_index
    if top is None:
        return
    if spec.family in ("becker_doring", "generalized_bd") and min(i, j) > _bd_cutoff(spec):
        return
    if max(i, j) > top:
        raise KernelRangeError(f"indice ({i}, {j}) fora do alcance do kernel (N_table={top})")


def _bd_cutoff(spec: KernelSpec) -> int:
    return 1 if spec.family == "becker_doring" else spec.cutoff


def eval_a(spec: KernelSpec, i: int, j: int) -> float:
    _check_index(spec, i, j)
    fam = spec.family
    if fam == "power_law_exp":
        return spec.coag_scale * (i ** spec.lam + j ** spec.lam)
    if fam == "becker_doring":
        return 0.0 if min(i, j) > 1 else spec.bd_a[max(i, j) - 1]
    if fam == "generalized_bd":
        return 0.0 if min(i, j) > spec.cutoff else eval_a(spec.inner, i, j)
    return float(spec.table_a[i, j])


def eval_b(spec: KernelSpec, i: int, j: int) -> float:
    _check_index(spec, i, j)
    fam = spec.family
    if fam == "power_law_exp":
        mu = spec.surface_exponent
        # (i+j)^μ − (i^μ + j^μ): agrupamento simétrico, b(i,j) == b(j,i) bit a bit
        gibbs = (i + j) ** mu - (i ** mu + j ** mu)
        return spec.coag_scale * (i ** spec.lam + j ** spec.lam) * math.exp(spec.gibbs_scale * gibbs)
    if fam == "becker_doring":
        return 0.0 if min(i, j) > 1 else spec.bd_b[max(i, j) - 1]
    if fam == "generalized_bd":
        return 0.0 if min(i, j) > spec.cutoff else eval_b(spec.inner, i, j)
    return float(spec.table_b[i, j])


# ---------------------------------------------------------------------------
# Avaliação vetorizada
# ---------------------------------------------------------------------------

def coefficient_grids(spec: KernelSpec, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Matrizes densas A[i,j], B[i,j] para 1 <= i,j <= n (linha/coluna 0 nulas).

    Raises:
        KernelRangeError: se n ultrapassa o alcance de um kernel finito.
    """
    fam = spec.family
    idx = np.arange(n + 1, dtype=float)
    if fam == "power_law_exp":
        p = idx ** spec.lam
        A = spec.coag_scale * (p[:, None] + p[None, :])
        s = idx ** spec.surface_exponent
        gibbs = (idx[:, None] + idx[None, :]) ** spec.surface_exponent - (s[:, None] + s[None, :])
        B = A * np.exp(spec.gibbs_scale * gibbs)
    elif fam == "becker_doring":
        if n > len(spec.bd_a):
            raise KernelRangeError(f"Becker-Döring definido até {len(spec.bd_a)}, pedido {n}")
        A = np.zeros((n + 1, n + 1))
        B = np.zeros((n + 1, n + 1))
        a = np.asarray(spec.bd_a[:n])
        b = np.asarray(spec.bd_b[:n])
        A[1, 1:] = a
        A[1:, 1] = a
        B[1, 1:] = b
        B[1:, 1] = b
    elif fam == "generalized_bd":
        A, B = coefficient_grids(spec.inner, n)
        k = np.arange(n + 1)
        fora = np.minimum.outer(k, k) > spec.cutoff
        A = np.where(fora, 0.0, A)
        B = np.where(fora, 0.0, B)
    else:
        top = spec.max_index
        if n > top:
            raise KernelRangeError(f"kernel tabelado vai até {top}, pedido {n}")
        A = np.array(spec.table_a[: n + 1, : n + 1], dtype=float)
        B = np.array(spec.table_b[: n + 1, : n + 1], dtype=float)
    A[0, :] = A[:, 0] = 0.0
    B[0, :] = B[:, 0] = 0.0
    return A, B


def monomer_log_column(spec: KernelSpec, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """log a(i,1) e log b(i,1) para i = 1..n (−inf onde o coeficiente é zero)."""
    i = np.arange(1, n + 1, dtype=float)
    if spec.closed_form == "power_law_exp":
        base = closed_form_base(spec)
        c_gibbs, mu = base.gibbs_scale, base.surface_exponent
        log_a = np.log(base.coag_scale * (i ** base.lam + 1.0))
        log_b = log_a + c_gibbs * ((i + 1.0) ** mu - (i ** mu + 1.0))
        return log_a, log_b
    A, B = coefficient_grids(spec, n)
    with np.errstate(divide="ignore"):
        return np.log(A[1:, 1]), np.log(B[1:, 1])


@dataclass(frozen=True, eq=False)
class KernelTables:
    """
    Coeficientes pré-calculados do sistema truncado em N.
    A[i,j] = B[i,j] = 0 sempre que i + j > N. Imutável depois de construída.
    """
    N: int
    lam: float
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    pair_i: np.ndarray = field(repr=False)
    pair_j: np.ndarray = field(repr=False)


def build_tables(spec: KernelSpec, N: int) -> KernelTables:
    if N < 2:
        raise DomainError(f"N deve ser >= 2 (recebido {N})")
    n = N - 1
    A, B = coefficient_grids(spec, n)
    A = np.pad(A, ((0, 1), (0, 1)))
    B = np.pad(B, ((0, 1), (0, 1)))
    k = np.arange(N + 1)
    fora = (k[:, None] + k[None, :]) > N
    A[fora] = 0.0
    B[fora] = 0.0
    pi, pj = np.nonzero(~fora & (k[:, None] >= 1) & (k[None, :] >= 1))
    for arr in (A, B, pi, pj):
        arr.setflags(write=False)
    logger.debug("tabelas do kernel %s construidas para N=%d (%d pares)", spec.family, N, len(pi))
    return KernelTables(N=N, lam=spec.lam, A=A, B=B, pair_i=pi, pair_j=pj)


# ---------------------------------------------------------------------------
# Validação de hipóteses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HypothesisEntry:
    id: str
    status: str
    witness: Optional[Tuple[int, int]] = None
    values: Dict[str, float] = field(default_factory=dict)
    detail: str = ""

    STATUS_VALIDOS = ("pass", "fail", "not-applicable")

    def __post_init__(self):
        if self.status not in self.STATUS_VALIDOS:
            raise ValueError(f"status_invalido: {self.status}")
        if self.status == "fail" and self.witness is None:
            raise ValueError(f"{self.id}: entrada com falha precisa de testemunha")


@dataclass(frozen=True)
class HypothesisReport:
    N: int
    entries: Tuple[HypothesisEntry, ...]
    estimated_constants: Dict[str, float]

    def entry(self, hid: str) -> HypothesisEntry:
        for e in self.entries:
            if e.id == hid:
                return e
        raise KeyError(hid)

    @property
    def passed(self) -> bool:
        return all(e.status != "fail" for e in self.entries)

    def failing(self) -> List[str]:
        return [e.id for e in self.entries if e.status == "fail"]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.N,
            "passed": self.passed,
            "estimated_constants": dict(self.estimated_constants),
            "entries": [
                {
                    "id": e.id,
                    "status": e.status,
                    "witness": list(e.witness) if e.witness else None,
                    "values": dict(e.values),
                    "detail": e.detail,
                }
                for e in self.entries
            ],
        }


def _pair(ix: Tuple[Any, Any]) -> Tuple[int, int]:
    return (int(ix[0]), int(ix[1]))


def _check_growth(spec: KernelSpec, A: np.ndarray, B: np.ndarray, n: int) -> Tuple[HypothesisEntry, float, float]:
    idx = np.arange(n + 1, dtype=float)

    neg = np.argwhere((A < 0) | (B < 0))
    if len(neg):
        w = _pair(neg[0])
        return HypothesisEntry("H1", "fail", w, {"a": float(A[w]), "b": float(B[w])}, "coeficiente negativo"), math.nan, math.nan

    assim = np.argwhere(np.triu((A != A.T) | (B != B.T), k=1))
    if len(assim):
        i, j = _pair(assim[0])
        vals = {"a_ij": float(A[i, j]), "a_ji": float(A[j, i]), "b_ij": float(B[i, j]), "b_ji": float(B[j, i])}
        return HypothesisEntry("H1", "fail", (i, j), vals, "kernel nao simetrico"), math.nan, math.nan

    p = idx ** spec.lam
    den = p[:, None] + p[None, :]
    den[0, :] = den[:, 0] = np.inf
    razao = np.maximum(A, B) / den
    w_ab = _pair(np.unravel_index(np.argmax(razao), razao.shape))
    k_ab = float(razao[w_ab])

    # S_i = Σ_{j<i} b_{j,i−j}
    S = np.zeros(n + 1)
    for i in range(2, n + 1):
        j = np.arange(1, i)
        S[i] = B[j, i - j].sum()
    faixa = np.arange(max(2, n // 2), n + 1)
    faixa = faixa[S[faixa] > 0]
    if spec.growth_gamma is not None:
        gamma = float(spec.growth_gamma)
    elif len(faixa) >= 2:
        gamma = float(np.polyfit(np.log(faixa), np.log(S[faixa]), 1)[0])
    else:
        gamma = 0.0
    ii = np.arange(2, n + 1)
    frag = S[ii] / ii.astype(float) ** gamma
    k_gamma = float(frag.max()) if len(ii) else 0.0

    K = max(k_ab, k_gamma)
    vals = {"K": K, "K_coef": k_ab, "K_frag": k_gamma, "gamma": gamma}

    # razão ainda crescendo entre n/2 e n: não existe K uniforme
    meio = n // 2
    if meio >= 2:
        k_meio = float(razao[: meio + 1, : meio + 1].max())
        if k_meio > 0 and k_ab > GROWTH_TREND_TOL * k_meio:
            vals["K_coef_meio"] = k_meio
            return HypothesisEntry("H1", "fail", w_ab, vals, "a, b crescem mais rapido que i^λ + j^λ"), K, gamma

    if spec.growth_K is not None and K > spec.growth_K * (1 + 1e-12):
        if k_ab >= k_gamma:
            w = w_ab
        else:
            im = int(ii[np.argmax(frag)])
            w = (1, im - 1)
        return HypothesisEntry("H1", "fail", w, vals, "constante K declarada insuficiente"), K, gamma
    return HypothesisEntry("H1", "pass", w_ab, vals), K, gamma


def detailed_balance_residual(A: np.ndarray, B: np.ndarray, log_q: np.ndarray, n: int) -> Tuple[float, Optional[Tuple[int, int]]]:
    """
    Maior resíduo relativo |a Q_i Q_j − b Q_{i+j}| / (a Q_i Q_j) sobre i + j <= n.
    Pares com a = b = 0 são ignorados; exatamente um deles nulo vale +inf.
    """
    m = min(n, len(log_q) - 1, A.shape[0])
    k = np.arange(m + 1)
    mask = (k[:, None] + k[None, :] <= m) & (k[:, None] >= 1) & (k[None, :] >= 1)
    pi, pj = np.nonzero(mask)
    if len(pi) == 0:
        return 0.0, None
    a = A[pi, pj]
    b = B[pi, pj]
    res = np.zeros(len(pi))
    ambos = (a > 0) & (b > 0)
    res[(a > 0) ^ (b > 0)] = np.inf
    expo = np.log(b[ambos]) + log_q[pi[ambos] + pj[ambos]] - np.log(a[ambos]) - log_q[pi[ambos]] - log_q[pj[ambos]]
    res[ambos] = np.abs(np.expm1(expo))
    w = int(np.argmax(res))
    return float(res[w]), (int(pi[w]), int(pj[w]))


def _check_detailed_balance(A: np.ndarray, B: np.ndarray, log_q: np.ndarray, n: int) -> HypothesisEntry:
    pior, par = detailed_balance_residual(A, B, log_q, n)
    if par is None:
        return HypothesisEntry("H2", "not-applicable", None, {}, "sem pares com i+j <= N")
    status = "pass" if pior <= DB_RESIDUAL_TOL else "fail"
    return HypothesisEntry("H2", status, par, {"residual": pior})


def validate_hypotheses(spec: KernelSpec, Q: Any, N: int, c0: Optional[np.ndarray] = None) -> HypothesisReport:
    """
    Verifica H1..H6 para i, j <= N.

    Args:
        spec: kernel
        Q: DBSequence construída para o mesmo kernel
        N: alcance da varredura (>= 2)
        c0: dado inicial opcional (c0[0] = c_1) para H6

    Returns:
        HypothesisReport com uma entrada por hipótese e constantes estimadas.
    """
    from core.equilibrium import estimate_zs  # import tardio: equilibrium depende deste módulo

    if N < 2:
        raise DomainError("validate_hypotheses exige N >= 2")
    n = N
    if spec.max_index is not None:
        n = min(n, spec.max_index)
    n = min(n, Q.N_max)

    A, B = coefficient_grids(spec, n)
    entries: List[HypothesisEntry] = []

    h1, K, gamma = _check_growth(spec, A, B, n)
    entries.append(h1)
    entries.append(_check_detailed_balance(A, B, Q.log_Q, n))

    z_s = Q.z_s
    if z_s is None:
        try:
            z_s = estimate_zs(Q).z_s
        except Exception as exc:  # relatar, não lançar
            entries.append(HypothesisEntry("H3", "fail", (n, 1), {}, f"estimativa de z_s falhou: {exc}"))
            z_s = None
    if z_s is not None:
        if 0 < z_s < math.inf:
            entries.append(HypothesisEntry("H3", "pass", None, {"z_s": float(z_s)}))
        else:
            entries.append(HypothesisEntry("H3", "fail", (n, 1), {"z_s": float(z_s)}, "z_s nao positivo/finito"))

    if z_s is not None and 0 < z_s < math.inf:
        i = np.arange(1, n + 1, dtype=float)
        g = Q.log_Q[1 : n + 1] + i * math.log(z_s)
        subida = np.diff(g) - 1e-12 * np.maximum(1.0, np.abs(g[:-1]))
        ruins = np.nonzero(subida > 0)[0]
        if len(ruins):
            k0 = int(ruins[0]) + 1
            entries.append(HypothesisEntry("H4", "fail", (k0, k0 + 1),
                                           {"g_i": float(g[k0 - 1]), "g_i+1": float(g[k0])},
                                           "Q_i z_s^i cresce"))
        else:
            entries.append(HypothesisEntry("H4", "pass"))
    else:
        entries.append(HypothesisEntry("H4", "not-applicable", None, {}, "z_s indisponivel"))

    i = np.arange(1, n + 1, dtype=float)
    k1_seq = A[1:, 1] / i ** spec.lam
    w = int(np.argmin(k1_seq))
    K1 = float(k1_seq[w])
    if K1 > 0:
        entries.append(HypothesisEntry("H5", "pass", (w + 1, 1), {"K_1": K1}))
    else:
        entries.append(HypothesisEntry("H5", "fail", (w + 1, 1), {"K_1": K1}, "a(i,1) nulo"))

    ordem = max(2.0 - spec.lam, 1.0 + spec.lam, 1.0 + (gamma if math.isfinite(gamma) else 0.0))
    if c0 is None:
        entries.append(HypothesisEntry("H6", "pass", None, {"order": ordem}, "dado truncado: todos os momentos finitos"))
    else:
        c0 = np.asarray(c0, dtype=float)
        ruins = np.nonzero(~np.isfinite(c0) | (c0 < 0))[0]
        if len(ruins):
            k0 = int(ruins[0]) + 1
            entries.append(HypothesisEntry("H6", "fail", (k0, k0), {"c_i": float(c0[k0 - 1])}, "dado inicial invalido"))
        else:
            mom = float(np.sum(np.arange(1, len(c0) + 1, dtype=float) ** ordem * c0))
            entries.append(HypothesisEntry("H6", "pass", None, {"order": ordem, "moment": mom}))

    constantes = {"K": K, "gamma": gamma, "K_1": K1}
    rel = HypothesisReport(N=n, entries=tuple(entries), estimated_constants=constantes)
    if not rel.passed:
        logger.warning("hipoteses falharam: %s", ", ".join(rel.failing()))
    return rel
