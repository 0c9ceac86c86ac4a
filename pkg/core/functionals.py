#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
functionals.py

Funcionais de Lyapunov e dissipação:

    V(c)     = Σ c_i (log(c_i/Q_i) − 1)
    F_z(c)   = V(c) + Σ Q_i z^i − (log z)·ρ(c) = Σ Q_i z^i f(c_i/(Q_i z^i))
    D_CF(c)  = ½ Σ_{i+j<=N} a_{ij} Q_i Q_j (x − y)(log x − log y)
    D_BD(c)  = Σ_i a_i Q_i (c_1 c_i/Q_i − c_{i+1}/Q_{i+1})(log ...),  a_1 = a_11/2, a_i = a_i1

com f(x) = x log x − x + 1, x = c_i c_j/(Q_i Q_j), y = c_{i+j}/Q_{i+j}.

Concentrações nulas: os logaritmos são cortados em LOG_FLOOR (escala 1e-300)
e o número de cortes é devolvido junto com o valor.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, special

from core.dynamics import State, moment
from core.equilibrium import DBSequence, equilibrium_profile, partition_sum, series
from core.errors import DomainError
from core.kernel import KernelTables

logger = logging.getLogger(__name__)

LOG_FLOOR = 1e-300
FD_REL_TOL = 1e-3
FD_MIN_DISSIPATION = 1e-8

CSV_FIELDS = ("t", "mass", "c1", "V", "F_z", "D_CF", "D_BD", "M_2mlambda", "dist_eq", "tail_mass", "clamped_mass")


def f_entropy(x: np.ndarray) -> np.ndarray:
    """f(x) = x log x − x + 1, com f(0) = 1."""
    x = np.asarray(x, dtype=float)
    return special.xlogy(x, x) - x + 1.0


def _indices(c: np.ndarray) -> np.ndarray:
    return np.arange(1, len(c) + 1, dtype=float)


def _check_support(c: np.ndarray, Q: DBSequence) -> None:
    if len(c) > Q.N_max:
        raise DomainError(f"estado com N={len(c)} acima de N_max={Q.N_max}")


def free_energy(c: np.ndarray, Q: DBSequence) -> float:
    c = np.asarray(c, dtype=float)
    _check_support(c, Q)
    termos = special.xlogy(c, c) - c * Q.log_Q[1 : len(c) + 1] - c
    return float(np.sum(termos))


# ---------------------------------------------------------------------------
# Energia relativa
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RelativeEnergy:
    """
    value: soma direta Σ_{i<=N} Q_i z^i f(u_i) + Σ_{i>N} Q_i z^i
    via_free_energy: V(c) + Σ Q_i z^i − log(z)·ρ(c)
    bracket_width: resto não somado da série de partição (0 <= resto <= largura)
    """
    value: float
    via_free_energy: float
    bracket_width: float
    certified: bool


def relative_energy_detail(c: np.ndarray, Q: DBSequence, z: float, tol: float = 1e-12) -> RelativeEnergy:
    c = np.asarray(c, dtype=float)
    _check_support(c, Q)
    if Q.z_s is None:
        raise DomainError("relative_energy exige z_s estimado")
    if not (0 < z <= Q.z_s * (1 + 1e-14)):
        raise DomainError(f"z fora de (0, z_s]: z={z}, z_s={Q.z_s}")
    N = len(c)
    i = _indices(c)
    log_eq = Q.log_Q[1 : N + 1] + i * math.log(z)
    # Q_i z^i f(u_i) = c_i (log c_i − log(Q_i z^i)) − c_i + Q_i z^i
    direto = special.xlogy(c, c) - c * log_eq - c + np.exp(log_eq)
    cauda = series(Q, z, k=0.0, tol=tol, start=N + 1)
    value = float(np.sum(direto)) + cauda.value

    total = partition_sum(Q, z, tol)
    via = free_energy(c, Q) + total.value - math.log(z) * float(np.dot(i, c))
    largura = max(cauda.tail_bound, total.tail_bound)
    return RelativeEnergy(value, via, largura, cauda.certified and total.certified)


def relative_energy(c: np.ndarray, Q: DBSequence, z: float, tol: float = 1e-12) -> float:
    return relative_energy_detail(c, Q, z, tol).value


# ---------------------------------------------------------------------------
# Dissipação
# ---------------------------------------------------------------------------

def _dissipation_terms(log_c: np.ndarray, log_q: np.ndarray, a: np.ndarray,
                       i: np.ndarray, j: np.ndarray) -> Tuple[np.ndarray, int]:
    """
    Termos a·(c_i c_j − Q_iQ_j c_{i+j}/Q_{i+j})·(log x − log y) em espaço log;
    log_c e log_q indexados a partir de 1.
    """
    qq = log_q[i] + log_q[j]
    s1 = log_c[i] + log_c[j]
    s2 = log_c[i + j] + qq - log_q[i + j]
    piso = math.log(LOG_FLOOR) + qq
    cortes = (s1 < piso) | (s2 < piso)
    s1 = np.maximum(s1, piso)
    s2 = np.maximum(s2, piso)
    termos = a * (np.exp(s1) - np.exp(s2)) * (s1 - s2)
    return termos, int(np.count_nonzero(cortes))


def _log_state(c: np.ndarray) -> np.ndarray:
    cc = np.empty(len(c) + 1)
    cc[0] = -np.inf
    with np.errstate(divide="ignore"):
        cc[1:] = np.log(np.maximum(c, 0.0))
    return cc


def dissipation_CF_detail(tables: KernelTables, Q: DBSequence, c: np.ndarray) -> Tuple[float, int]:
    c = np.asarray(c, dtype=float)
    if len(c) != tables.N:
        raise DomainError(f"estado com N={len(c)}, tabelas com N={tables.N}")
    _check_support(c, Q)
    pi, pj = tables.pair_i, tables.pair_j
    termos, cortes = _dissipation_terms(_log_state(c), Q.log_Q, tables.A[pi, pj], pi, pj)
    return 0.5 * float(np.sum(termos)), cortes


def dissipation_CF(tables: KernelTables, Q: DBSequence, c: np.ndarray) -> float:
    return dissipation_CF_detail(tables, Q, c)[0]


def dissipation_BD_detail(tables: KernelTables, Q: DBSequence, c: np.ndarray) -> Tuple[float, int]:
    c = np.asarray(c, dtype=float)
    if len(c) != tables.N:
        raise DomainError(f"estado com N={len(c)}, tabelas com N={tables.N}")
    _check_support(c, Q)
    N = tables.N
    i = np.arange(1, N)
    um = np.ones_like(i)
    a = np.array(tables.A[i, 1], dtype=float)
    a[0] *= 0.5
    termos, cortes = _dissipation_terms(_log_state(c), Q.log_Q, a, i, um)
    return float(np.sum(termos)), cortes


def dissipation_BD(tables: KernelTables, Q: DBSequence, c: np.ndarray) -> float:
    return dissipation_BD_detail(tables, Q, c)[0]


# ---------------------------------------------------------------------------
# Distâncias ao equilíbrio
# ---------------------------------------------------------------------------

def strong_distance(c: np.ndarray, Q: DBSequence, z: float, tol: float = 1e-12) -> float:
    """Σ_{i<=N} i|c_i − Q_i z^i| + limitante certificado de Σ_{i>N} i Q_i z^i."""
    c = np.asarray(c, dtype=float)
    N = len(c)
    eq = equilibrium_profile(Q, z, N)
    cauda = series(Q, z, k=1.0, tol=tol, start=N + 1) if z > 0 else None
    resto = cauda.upper if cauda is not None else 0.0
    return float(np.dot(_indices(c), np.abs(c - eq))) + resto


def weak_star_distance(c: np.ndarray, Q: DBSequence, z: float, m: int) -> float:
    """max_{i<=m} |c_i − Q_i z^i|: distância componente a componente nos tamanhos pequenos."""
    c = np.asarray(c, dtype=float)
    m = min(int(m), len(c))
    if m < 1:
        raise DomainError("weak_star_distance exige m >= 1")
    return float(np.max(np.abs(c[:m] - equilibrium_profile(Q, z, m))))


def classify_region(c1: float, z: float, z_s: float) -> str:
    """
    near_critical: c1 >= z_s − ¼(z_s − z)
    intermediate:  z/2 <= c1 < z_s − ¼(z_s − z)
    depleted:      c1 < z/2
    """
    if c1 >= z_s - 0.25 * (z_s - z):
        return "near_critical"
    if c1 >= 0.5 * z:
        return "intermediate"
    return "depleted"


# ---------------------------------------------------------------------------
# Cotas de proximidade
# ---------------------------------------------------------------------------

def proximity_bound_check(c: np.ndarray, Q: DBSequence, z: float) -> Any:
    """Σ i|c_i − Q_i z^i| <= max{2F_z, K_z √F_z}. Avaliada e relatada."""
    from core.equilibrium import K_z
    from core.inequalities import ProbeResult

    F = max(relative_energy(c, Q, z), 0.0)
    lhs = strong_distance(c, Q, z)
    rhs = max(2.0 * F, K_z(z, Q.z_s) * math.sqrt(F))
    return ProbeResult.of(lhs, rhs, {"z": z, "F_z": F, "c": np.asarray(c).tolist()})


def proximity_moment_check(c: np.ndarray, Q: DBSequence, z: float) -> Any:
    """
    Σ i|c_i − Q_i z^i| <= √(2F_z)·√(M_2(c) + M_2(Q z^·)).

    Vem de f(u) >= (u−1)²/(2 max{1,u}) e de Cauchy–Schwarz; vale para todo c >= 0.
    """
    from core.inequalities import ProbeResult

    c = np.asarray(c, dtype=float)
    F = max(relative_energy(c, Q, z), 0.0)
    lhs = strong_distance(c, Q, z)
    m2 = float(np.dot(_indices(c) ** 2, c)) + series(Q, z, k=2.0).upper
    rhs = math.sqrt(2.0 * F) * math.sqrt(m2)
    return ProbeResult.of(lhs, rhs, {"z": z, "F_z": F, "M2": m2})


def relative_energy_minimality_check(c: np.ndarray, Q: DBSequence, z: float,
                                     ys: Optional[Sequence[float]] = None) -> Any:
    """
    F_z(c) <= F_y(c) para y nos pontos dados, quando z é o valor de mesma massa.
    Padrão: y = c_1 (se 0 < c_1 < z_s) e y = z·{1/2, 3/4, 5/4} limitado a z_s.
    """
    from core.inequalities import ProbeResult

    c = np.asarray(c, dtype=float)
    if ys is None:
        ys = [z * f for f in (0.5, 0.75, 1.25)]
        if 0 < c[0] < Q.z_s:
            ys.append(float(c[0]))
    ys = [min(float(y), Q.z_s) for y in ys if y > 0]
    if not ys:
        raise DomainError("nenhum y positivo para comparar")
    lhs = relative_energy(c, Q, z)
    valores = {y: relative_energy(c, Q, y) for y in ys}
    y_min = min(valores, key=valores.get)
    return ProbeResult.of(lhs, valores[y_min], {"z": z, "y": y_min})


# ---------------------------------------------------------------------------
# Registros de diagnóstico
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    c1: float
    V: float
    F_z: float
    D_CF: float
    D_BD: float
    M_2mlambda: float
    dist_eq: float
    tail_mass: float
    clamped_mass: float
    log_clamps: int = 0
    pre_positivity: bool = False
    F_z_bracket: float = 0.0

    def row(self) -> Tuple[float, ...]:
        return tuple(getattr(self, k) for k in CSV_FIELDS)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class DiagnosticsBuilder:
    """Monta DiagnosticsRecord para um kernel, uma sequência Q e um z alvo fixos."""
    tables: KernelTables
    Q: DBSequence
    z_target: float
    _peso: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.z_target > 0):
            raise DomainError("diagnosticos exigem z alvo positivo")
        self._peso = np.arange(1, self.tables.N + 1, dtype=float)

    def build(self, s: State, clamped_mass: float = 0.0) -> DiagnosticsRecord:
        c = s.c
        N = len(c)
        re = relative_energy_detail(c, self.Q, self.z_target)
        d_cf, cortes = dissipation_CF_detail(self.tables, self.Q, c)
        d_bd, _ = dissipation_BD_detail(self.tables, self.Q, c)
        return DiagnosticsRecord(
            t=float(s.t),
            mass=float(np.dot(self._peso, c)),
            c1=float(c[0]),
            V=free_energy(c, self.Q),
            F_z=re.value,
            D_CF=d_cf,
            D_BD=d_bd,
            M_2mlambda=moment(s, 2.0 - self.tables.lam),
            dist_eq=strong_distance(c, self.Q, self.z_target),
            tail_mass=float(np.dot(self._peso[N // 2 :], c[N // 2 :])),
            clamped_mass=float(clamped_mass),
            log_clamps=cortes,
            pre_positivity=bool(np.any(c <= 0.0)),
            F_z_bracket=re.bracket_width,
        )


# ---------------------------------------------------------------------------
# Teorema H
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MassShellMinimum:
    y: float
    V_min: float


def free_energy_minimizer(Q: DBSequence, rho: float, N: int) -> MassShellMinimum:
    """
    Mínimo de V em {c >= 0 : Σ_{i<=N} i c_i = ρ}: c_i = Q_i y^i e
    V_min = ρ log y − Σ_{i<=N} Q_i y^i. Aqui y pode exceder z_s.
    """
    if rho <= 0:
        raise DomainError("free_energy_minimizer exige rho > 0")
    if N > Q.N_max:
        raise DomainError(f"N={N} acima de N_max={Q.N_max}")
    i = np.arange(1, N + 1, dtype=float)
    lq = Q.log_Q[1 : N + 1]
    log_i = np.log(i)
    alvo = math.log(rho)

    def g(s: float) -> float:
        return float(special.logsumexp(lq + i * s + log_i)) - alvo

    lo, hi = alvo - 50.0, 0.0
    while g(lo) > 0:
        lo -= 50.0
    while g(hi) < 0:
        hi += 10.0
    s = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    V_min = rho * s - float(np.exp(special.logsumexp(lq + i * s)))
    return MassShellMinimum(y=math.exp(s), V_min=V_min)


@dataclass(frozen=True)
class HTheoremReport:
    monotone: bool
    worst_increase: float
    worst_increase_t: Optional[float]
    fd_agrees: bool
    worst_fd_rel: float
    worst_fd_t: Optional[float]
    fd_checked: int
    fd_skipped: int
    fd_unresolved: int
    lower_bound_ok: bool
    V_lower: Optional[float]

    @property
    def passed(self) -> bool:
        return self.monotone and self.fd_agrees and self.lower_bound_ok

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def h_theorem_check(
    records: Sequence[DiagnosticsRecord],
    rtol: float = 1e-8,
    fd_rel_tol: float = FD_REL_TOL,
    min_dissipation: float = FD_MIN_DISSIPATION,
    V_lower: Optional[float] = None,
) -> HTheoremReport:
    """
    (a) V(t_{k+1}) − V(t_k) <= 10·rtol·|V(t_k)|;
    (b) diferença central (V_{k+1} − V_{k−1})/(t_{k+1} − t_{k−1}) contra −D_CF(t_k),
        onde |D_CF| > min_dissipation, com tolerância relativa max(fd_rel_tol, rtol);
        pontos onde o erro de truncamento estimado |D_{k+1} − 2D_k + D_{k−1}|/(6|D_k|)
        passa de metade da tolerância, ou onde |V_{k+1} − V_{k−1}| não supera
        10·rtol·max(1, |V_k|)/tol (ruído do integrador), ficam de fora;
    (c) V >= V_lower (mínimo na casca de massa), se fornecido.
    """
    recs: List[DiagnosticsRecord] = list(records)
    pior_subida, t_subida = 0.0, None
    for a, b in zip(recs, recs[1:]):
        excesso = (b.V - a.V) - 10.0 * rtol * abs(a.V)
        if excesso > pior_subida:
            pior_subida, t_subida = excesso, b.t

    tol_fd = max(fd_rel_tol, rtol)
    pior_fd, t_fd = 0.0, None
    checados = pulados = sem_resolucao = 0
    for k in range(1, len(recs) - 1):
        r = recs[k]
        dt = recs[k + 1].t - recs[k - 1].t
        if abs(r.D_CF) <= min_dissipation or dt <= 0:
            pulados += 1
            continue
        curvatura = abs(recs[k + 1].D_CF - 2.0 * r.D_CF + recs[k - 1].D_CF) / (6.0 * abs(r.D_CF))
        ruido = 10.0 * rtol * max(1.0, abs(r.V)) / tol_fd
        if curvatura > 0.5 * tol_fd or abs(recs[k + 1].V - recs[k - 1].V) <= ruido:
            sem_resolucao += 1
            continue
        dV = (recs[k + 1].V - recs[k - 1].V) / dt
        rel = abs(dV + r.D_CF) / abs(r.D_CF)
        checados += 1
        if rel > pior_fd:
            pior_fd, t_fd = rel, r.t

    piso_ok = True
    if V_lower is not None:
        folga = 1e-10 * max(1.0, abs(V_lower))
        piso_ok = all(r.V >= V_lower - folga for r in recs)

    rel = HTheoremReport(
        monotone=pior_subida <= 0.0,
        worst_increase=pior_subida,
        worst_increase_t=t_subida,
        fd_agrees=pior_fd <= tol_fd,
        worst_fd_rel=pior_fd,
        worst_fd_t=t_fd,
        fd_checked=checados,
        fd_skipped=pulados,
        fd_unresolved=sem_resolucao,
        lower_bound_ok=piso_ok,
        V_lower=V_lower,
    )
    if not rel.passed:
        logger.warning("teorema H violado: subida=%.3e em t=%s, fd=%.3e em t=%s",
                       pior_subida, t_subida, pior_fd, t_fd)
    return rel
