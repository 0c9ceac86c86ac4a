#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
equilibrium.py

Sequência de balanço detalhado Q_i, monômero crítico z_s, massa crítica ρ_s
e perfis de equilíbrio c_i = Q_i z^i.

Tudo em espaço log: com C' = 1, Q_i ~ e^i estoura double perto de i = 700.
Séries Σ i^k Q_i z^i são somadas com cauda certificada:
- cauda geométrica via monotonia de Q_i z_s^i (H4), razão r = z/z_s;
- para a família power_law_exp, cauda integral exata
  Σ_{i>M} i^k e^{−C' i^μ} <= ∫_M^∞ x^k e^{−C' x^μ} dx.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional

import numpy as np
from scipy import special

from core.errors import (
    DetailedBalanceError,
    DomainError,
    EstimationError,
    InconsistentKernelError,
    PreconditionError,
    SupercriticalMassError,
)
from core.kernel import KernelSpec, closed_form_base, coefficient_grids, detailed_balance_residual, monomer_log_column

logger = logging.getLogger(__name__)

DB_BUILD_TOL = 1e-8
DB_CHECK_RANGE = 256
ZS_SPREAD_TOL = 1e-2
NEWTON_MAX_ITER = 200
BISECTION_BRACKET = 1e-3
SOLVE_MASS_REL = 1e-8


@dataclass(frozen=True, eq=False)
class DBSequence:
    """
    log_Q[i] = log Q_i para i = 1..N_max; log_Q[0] = −inf (Q_0 não existe).
    """
    log_Q: np.ndarray = field(repr=False)
    closed_form: Optional[str] = None
    gibbs_scale: float = 0.0
    surface_exponent: float = 0.5
    z_s: Optional[float] = None
    z_s_uncertainty: float = 0.0
    rho_s: Optional[float] = None
    rho_s_tail_bound: float = 0.0
    rho_s_diverges: bool = False

    @property
    def N_max(self) -> int:
        return len(self.log_Q) - 1

    def Q(self, i: int) -> float:
        return math.exp(self.log_Q[i])

    @property
    def rho_s_bracket(self) -> tuple[float, float]:
        if self.rho_s is None:
            raise PreconditionError("rho_s ainda nao calculado")
        if self.rho_s_diverges:
            return (math.inf, math.inf)
        return (self.rho_s, self.rho_s + self.rho_s_tail_bound)


@dataclass(frozen=True)
class ZsEstimate:
    z_s: float
    uncertainty: float
    method: str


@dataclass(frozen=True)
class SeriesSum:
    """Σ_{i>=start} i^k Q_i z^i = value + resto, com 0 <= resto <= tail_bound."""
    value: float
    tail_bound: float
    terms: int
    certified: bool

    @property
    def upper(self) -> float:
        return self.value + self.tail_bound


@dataclass(frozen=True)
class RhoS:
    rho_s: float
    tail_bound: float
    diverges: bool
    certified: bool


@dataclass(frozen=True, eq=False)
class EquilibriumProfile:
    z: float
    profile: np.ndarray = field(repr=False)
    mass: float = 0.0
    tail_mass_bound: float = 0.0

    @property
    def N(self) -> int:
        return len(self.profile)


# ---------------------------------------------------------------------------
# Construção de Q
# ---------------------------------------------------------------------------

def sequence_from_log_q(log_q: np.ndarray, **meta: Any) -> DBSequence:
    """DBSequence a partir de log Q_1..log Q_n (log_q[0] deve ser 0)."""
    log_q = np.asarray(log_q, dtype=float)
    if log_q[0] != 0.0:
        raise DomainError("Q_1 deve valer 1 (log_Q[1] = 0)")
    arr = np.concatenate(([-np.inf], log_q))
    arr.setflags(write=False)
    return DBSequence(log_Q=arr, **meta)


def build_Q(spec: KernelSpec, N_max: int, check_range: int = DB_CHECK_RANGE) -> DBSequence:
    """
    Recorrência log Q_{i+1} = log Q_i + log a(i,1) − log b(i,1), com Q_1 = 1,
    seguida da verificação do balanço detalhado 2D em i + j <= min(N_max, check_range).

    Raises:
        DetailedBalanceError: b(i,1) = 0 (ou a(i,1) = 0) em algum i < N_max.
        InconsistentKernelError: resíduo 2D acima de 1e-8.
    """
    if N_max < 1:
        raise DomainError(f"N_max deve ser >= 1 (recebido {N_max})")
    log_q = np.empty(N_max + 1)
    log_q[0] = -np.inf
    log_q[1] = 0.0
    if N_max >= 2:
        log_a, log_b = monomer_log_column(spec, N_max - 1)
        ruins = np.nonzero(~np.isfinite(log_b) | ~np.isfinite(log_a))[0]
        if len(ruins):
            i = int(ruins[0]) + 1
            raise DetailedBalanceError(
                f"balanco detalhado indeterminado em i={i}: a(i,1)={math.exp(log_a[i - 1]):.3g}, "
                f"b(i,1)={math.exp(log_b[i - 1]):.3g}"
            )
        log_q[2:] = np.cumsum(log_a - log_b)

    m = min(N_max, check_range)
    if m >= 2:
        A, B = coefficient_grids(spec, m - 1)
        residuo, par = detailed_balance_residual(A, B, log_q, m)
        if residuo > DB_BUILD_TOL:
            raise InconsistentKernelError(
                f"kernel inconsistente com balanco detalhado: residuo {residuo:.3e} em {par}", par, residuo
            )
    log_q.setflags(write=False)

    meta: Dict[str, Any] = {}
    if spec.closed_form == "power_law_exp":
        base = closed_form_base(spec)
        meta = {"closed_form": "power_law_exp", "gibbs_scale": base.gibbs_scale,
                "surface_exponent": base.surface_exponent}
    logger.info("Q construida ate N_max=%d (familia %s)", N_max, spec.family)
    return DBSequence(log_Q=log_q, **meta)


# ---------------------------------------------------------------------------
# z_s
# ---------------------------------------------------------------------------

def estimate_zs(Q: DBSequence, tol: float = ZS_SPREAD_TOL) -> ZsEstimate:
    """
    z_s = lim Q_j^{−1/j}.

    Forma fechada quando a família admite (power_law_exp: z_s = e^{−C'}).
    Caso contrário, extrapolação de Richardson de s_j = −log Q_j / j em h = 1/j
    sobre j em {N/4, N/2, N}; incerteza = distância entre os dois últimos extrapolantes.
    """
    if Q.N_max < 64:
        raise PreconditionError(f"estimate_zs exige N_max >= 64 (recebido {Q.N_max})")
    if Q.closed_form == "power_law_exp":
        return ZsEstimate(math.exp(-Q.gibbs_scale), 0.0, "closed_form")

    n = Q.N_max
    js = np.array([n // 4, n // 2, n])
    h = 1.0 / js
    s = -Q.log_Q[js] / js
    linear = (h[1] * s[2] - h[2] * s[1]) / (h[1] - h[2])
    quad = float(np.polyval(np.polyfit(h, s, 2), 0.0))
    spread = abs(quad - linear)
    partial = {"j": js.tolist(), "s_j": s.tolist(), "extrapolants": [float(linear), quad]}
    if not (math.isfinite(quad) and math.isfinite(linear)):
        raise EstimationError("extrapolacao de z_s nao finita", partial)
    if spread > tol * max(1.0, abs(quad)):
        raise EstimationError(f"extrapolacao de z_s oscila alem da tolerancia (spread={spread:.3e})", partial)
    z_s = math.exp(quad)
    logger.debug("z_s extrapolado: %.12g (+- %.3g)", z_s, z_s * spread)
    return ZsEstimate(z_s, z_s * spread, "richardson")


# ---------------------------------------------------------------------------
# Séries certificadas
# ---------------------------------------------------------------------------

def _closed_tail(Q: DBSequence, k: float, M: np.ndarray) -> np.ndarray:
    """∫_M^∞ x^k e^{−C' x^μ} dx onde o integrando já decresce; +inf antes disso."""
    c, mu = Q.gibbs_scale, Q.surface_exponent
    out = np.full(M.shape, np.inf)
    if Q.closed_form != "power_law_exp" or c <= 0:
        return out
    ok = (M > 0) & (M.astype(float) ** mu > k / (c * mu))
    a = (k + 1.0) / mu
    x = c * M[ok].astype(float) ** mu
    out[ok] = special.gammaincc(a, x) * special.gamma(a) / (mu * c ** a)
    return out


def series(Q: DBSequence, z: float, k: float = 1.0, tol: float = 1e-12, start: int = 1) -> SeriesSum:
    """
    Σ_{i>=start} i^k Q_i z^i com resto certificado.

    Soma todos os termos disponíveis (i <= N_max) e escolhe o corte M com o
    menor limitante de cauda. Sem limitante finito, devolve certified=False.
    """
    if z < 0:
        raise DomainError(f"z negativo: {z}")
    if z == 0:
        return SeriesSum(0.0, 0.0, 0, True)
    if Q.z_s is None:
        raise PreconditionError("z_s ainda nao estimado")
    r = z / Q.z_s
    if r > 1.0 + 1e-14:
        raise DomainError(f"z={z} acima de z_s={Q.z_s}")
    r = min(r, 1.0)
    n = Q.N_max
    if start < 1 or start > n + 1:
        raise DomainError(f"inicio da serie fora de [1, N_max+1]: {start}")

    i = np.arange(start, n + 1, dtype=float)
    log_z = math.log(z)
    terms = np.exp(Q.log_Q[start:] + i * log_z + k * np.log(i)) if len(i) else np.zeros(0)
    csum = np.concatenate(([0.0], np.cumsum(terms)))

    # cortes M = start-1 .. n (M >= 1), soma parcial = csum[M - start + 1]
    M = np.arange(max(start - 1, 1), n + 1)
    pos = M - start + 1
    g = np.exp(Q.log_Q[M] + M * math.log(Q.z_s))
    razao = r * ((M + 2.0) / (M + 1.0)) ** k
    geo = np.full(M.shape, np.inf)
    ok = razao < 1.0
    with np.errstate(under="ignore"):
        geo[ok] = g[ok] * np.exp((M[ok] + 1) * math.log(r) + k * np.log(M[ok] + 1.0)) / (1.0 - razao[ok])
    bound = np.minimum(geo, _closed_tail(Q, k, M))
    best = int(np.argmin(bound))
    tail = float(bound[best])
    value = float(csum[pos[best]])
    if not math.isfinite(tail):
        return SeriesSum(float(csum[-1]), math.inf, len(terms), False)
    return SeriesSum(value, tail, int(pos[best]), tail < tol)


def partition_sum(Q: DBSequence, z: float, tol: float = 1e-12) -> SeriesSum:
    """Σ Q_i z^i. Para z = z_s com ρ_s divergente, devolve o intervalo sem certificado."""
    s = series(Q, z, k=0.0, tol=tol)
    if not s.certified:
        logger.warning("soma de particao nao certificada em z=%.6g: [%g, %g]", z, s.value, s.upper)
    return s


def mass_series(Q: DBSequence, z: float, tol: float = 1e-12) -> SeriesSum:
    return series(Q, z, k=1.0, tol=tol)


def compute_rho_s(Q: DBSequence, tol: float = 1e-10) -> RhoS:
    """
    ρ_s = Σ j Q_j z_s^j. Divergência é sinalizada quando os termos j Q_j z_s^j
    não decaem entre N/2 e N (ex.: Q_i = 1, z_s = 1).
    """
    if Q.z_s is None:
        raise PreconditionError("compute_rho_s exige z_s estimado")
    s = series(Q, Q.z_s, k=1.0, tol=tol)
    if s.certified:
        return RhoS(s.value, s.tail_bound, False, True)
    n = Q.N_max
    j = np.array([max(1, n // 2), n])
    t = j * np.exp(Q.log_Q[j] + j * math.log(Q.z_s))
    if t[1] >= t[0] * (1.0 - 1e-12):
        logger.info("rho_s divergente (termos nao decaem ate N_max=%d)", n)
        return RhoS(math.inf, math.inf, True, False)
    logger.warning("tolerancia %.1e inalcancavel para rho_s com N_max=%d: intervalo [%g, %g]",
                   tol, n, s.value, s.upper)
    return RhoS(s.value, s.tail_bound, False, False)


def with_critical_values(Q: DBSequence, tol: float = 1e-10) -> DBSequence:
    """Preenche z_s (se ausente) e ρ_s."""
    if Q.z_s is None:
        est = estimate_zs(Q)
        Q = replace(Q, z_s=est.z_s, z_s_uncertainty=est.uncertainty)
    rs = compute_rho_s(Q, tol)
    return replace(Q, rho_s=rs.rho_s, rho_s_tail_bound=rs.tail_bound, rho_s_diverges=rs.diverges)


# ---------------------------------------------------------------------------
# Perfis de equilíbrio
# ---------------------------------------------------------------------------

def equilibrium_profile(Q: DBSequence, z: float, N: int) -> np.ndarray:
    """c_i = Q_i z^i para i = 1..N (posição 0 guarda c_1)."""
    if N > Q.N_max:
        raise DomainError(f"N={N} acima de N_max={Q.N_max}")
    if z == 0:
        return np.zeros(N)
    i = np.arange(1, N + 1, dtype=float)
    return np.exp(Q.log_Q[1 : N + 1] + i * math.log(z))


def _profile(Q: DBSequence, z: float, N: int, tol: float) -> EquilibriumProfile:
    c = equilibrium_profile(Q, z, N)
    mass = float(np.dot(np.arange(1, N + 1, dtype=float), c))
    total = mass_series(Q, z, tol)
    tail = max(0.0, total.value - mass) + total.tail_bound
    return EquilibriumProfile(z=z, profile=c, mass=mass, tail_mass_bound=tail)


def _mass_below(Q: DBSequence, z: float, rho: float, tol: float) -> bool:
    """
    Decide se a massa em z fica abaixo de ρ usando o colchete [value, upper].

    Quando o colchete contém ρ e a cauda passa da tolerância de massa, a
    decisão não tem certificado e vira EstimationError.
    """
    s = mass_series(Q, z, tol / 4)
    if s.value >= rho:
        return False
    if s.upper < rho:
        return True
    if s.tail_bound > _mass_tolerance(rho, tol):
        raise EstimationError(
            f"massa em z={z:.15g} sem certificado: [{s.value:g}, {s.upper:g}] contem rho={rho:g}",
            partial={"rho": rho, "z": z, "mass_lower": s.value, "mass_upper": s.upper, "N_max": Q.N_max},
        )
    return True


def _mass_tolerance(rho: float, tol: float) -> float:
    return max(tol, SOLVE_MASS_REL * max(1.0, rho))


def solve_z(Q: DBSequence, rho: float, tol: float = 1e-12, N: Optional[int] = None) -> EquilibriumProfile:
    """
    Único z em [0, z_s] com Σ i Q_i z^i = ρ.

    Bissecção até um colchete de 1e-3·z_s, depois Newton salvaguardado
    (no máximo 200 iterações no total). Cada passo usa o colchete
    certificado da massa; a raiz devolvida tem cauda de massa abaixo de
    max(tol, 1e-8·max(1, ρ)).

    Raises:
        SupercriticalMassError: ρ > ρ_s.
        EstimationError: N_max curto demais para certificar a massa perto
            da raiz (partial traz z, mass_lower, mass_upper e N_max).
    """
    if rho < 0:
        raise DomainError(f"massa negativa: {rho}")
    if Q.z_s is None or Q.rho_s is None:
        Q = with_critical_values(Q)
    N = Q.N_max if N is None else N
    if rho == 0:
        return EquilibriumProfile(z=0.0, profile=np.zeros(N), mass=0.0, tail_mass_bound=0.0)

    if not Q.rho_s_diverges:
        lo_s, hi_s = Q.rho_s_bracket
        if rho > hi_s + tol:
            raise SupercriticalMassError(rho, Q.rho_s)
        if rho >= lo_s - tol:
            logger.info("rho=%g no colchete critico: perfil z_s", rho)
            return _profile(Q, Q.z_s, N, tol)

    lo, hi = 0.0, Q.z_s
    it = 0
    while hi - lo > BISECTION_BRACKET * Q.z_s and it < NEWTON_MAX_ITER:
        mid = 0.5 * (lo + hi)
        if _mass_below(Q, mid, rho, tol):
            lo = mid
        else:
            hi = mid
        it += 1

    z = 0.5 * (lo + hi)
    while it < NEWTON_MAX_ITER:
        it += 1
        f = mass_series(Q, z, tol / 4).value - rho
        if abs(f) < tol / 2:
            break
        if _mass_below(Q, z, rho, tol):
            lo = z
        else:
            hi = z
        deriv = series(Q, z, k=2.0, tol=tol).value / z
        z_novo = z - f / deriv if deriv > 0 else math.nan
        if not (lo < z_novo < hi):
            z_novo = 0.5 * (lo + hi)
        if abs(z_novo - z) <= 4 * np.finfo(float).eps * z:
            z = z_novo
            break
        z = z_novo
    else:
        logger.warning("solve_z atingiu %d iteracoes (rho=%g, z=%.15g)", NEWTON_MAX_ITER, rho, z)

    final = mass_series(Q, z, tol / 4)
    if final.tail_bound > _mass_tolerance(rho, tol):
        raise EstimationError(
            f"raiz z={z:.15g} sem certificado: cauda de massa {final.tail_bound:g} com N_max={Q.N_max}",
            partial={"rho": rho, "z": z, "mass_lower": final.value, "mass_upper": final.upper, "N_max": Q.N_max},
        )
    logger.debug("solve_z: rho=%g -> z=%.15g em %d iteracoes", rho, z, it)
    return _profile(Q, z, N, tol)


def K_z(z: float, z_s: float) -> float:
    """1/(1 − √(z/z_s)) − 1, para 0 <= z < z_s."""
    if z < 0 or z >= z_s:
        raise DomainError(f"K_z exige 0 <= z < z_s (z={z}, z_s={z_s})")
    return 1.0 / (1.0 - math.sqrt(z / z_s)) - 1.0
