#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
inequalities.py

Avaliadores de desigualdades. Cada um devolve um ProbeResult com lhs, rhs e
margem rhs − lhs.

Constante explícita (margem deve ser >= −1e-12·escala):
    tail_sum_bound, square_log_bound, power_inequality, f_difference_bound,
    xlogx_bound, moment_log_bound_Q, moment_log_bound_c, cadeia explícita de
    mass_difference_probe, moment_growth_probe

Constante não explícita (só monitoramento da razão lhs/rhs):
    mass_difference_probe (razão núcleo), relative_energy_probe,
    relative_energy_split_probe, supercritical_dissipation_probe (D_BD > 0)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, Optional, Sequence

import numpy as np
from scipy import optimize, special

from core.dynamics import State, moment
from core.equilibrium import DBSequence, series, solve_z
from core.errors import DomainError, PreconditionError
from core.functionals import DiagnosticsRecord, dissipation_BD, f_entropy, relative_energy
from core.kernel import KernelTables

MARGIN_TOL = 1e-12


@dataclass(frozen=True)
class ProbeResult:
    lhs: float
    rhs: float
    margin: float
    ratio: float
    witness: Dict[str, Any] = field(default_factory=dict)
    scale: float = 1.0
    extras: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def of(cls, lhs: float, rhs: float, witness: Optional[Dict[str, Any]] = None,
           scale: float = 0.0, extras: Optional[Dict[str, float]] = None) -> "ProbeResult":
        lhs, rhs = float(lhs), float(rhs)
        ratio = lhs / rhs if rhs > 0 else math.nan
        escala = max(abs(lhs), abs(rhs), 1.0, float(scale))
        return cls(lhs, rhs, rhs - lhs, ratio, dict(witness or {}), escala, dict(extras or {}))

    def holds(self, tol: float = MARGIN_TOL) -> bool:
        return self.margin >= -tol * self.scale

    @property
    def normalized_margin(self) -> float:
        return self.margin / self.scale

    def to_dict(self) -> Dict[str, Any]:
        def limpo(x: Any) -> Any:
            if isinstance(x, float) and not math.isfinite(x):
                return None
            return x

        return {
            "lhs": limpo(self.lhs),
            "rhs": limpo(self.rhs),
            "margin": limpo(self.margin),
            "ratio": limpo(self.ratio),
            "scale": self.scale,
            "witness": {k: limpo(v) for k, v in self.witness.items()},
            "extras": {k: limpo(v) for k, v in self.extras.items()},
        }


def _positive(*xs: float) -> None:
    for x in xs:
        if not (x > 0) or not math.isfinite(x):
            raise DomainError(f"argumento deve ser positivo e finito: {x}")


# ---------------------------------------------------------------------------
# Desigualdades escalares
# ---------------------------------------------------------------------------

def tail_sum_bound(Q: DBSequence, c1: float, j: int) -> ProbeResult:
    """Σ_{i>j} i Q_i c1^i <= 3 (z_s/(z_s − c1))² j Q_{j+1} c1^{j+1}."""
    if Q.z_s is None:
        raise PreconditionError("tail_sum_bound exige z_s estimado")
    z_s = Q.z_s
    if not (0 < c1 < z_s):
        raise DomainError(f"exige 0 < c1 < z_s (c1={c1}, z_s={z_s})")
    if j < 1 or j + 1 > Q.N_max:
        raise DomainError(f"j fora de [1, N_max−1]: {j}")
    lhs = series(Q, c1, k=1.0, start=j + 1).upper
    C = 3.0 * (z_s / (z_s - c1)) ** 2
    rhs = C * j * math.exp(Q.log_Q[j + 1] + (j + 1) * math.log(c1))
    return ProbeResult.of(lhs, rhs, {"c1": c1, "j": j, "z_s": z_s}, extras={"C": C})


def square_log_bound(x: float, y: float) -> ProbeResult:
    """(x−y)²/max{x,y} <= (x−y)(log x − log y)."""
    _positive(x, y)
    d = x - y
    lhs = d * d / max(x, y)
    rhs = d * math.log1p(d / y)
    return ProbeResult.of(lhs, rhs, {"x": x, "y": y})


def power_inequality_constant(lam: float, k: float) -> float:
    return (1.0 + 2.0 ** lam) * 2.0 ** (k - 1.0) * k


def power_inequality(lam: float, k: float, x: float, y: float) -> ProbeResult:
    """(x^λ + y^λ)((x+y)^k − x^k − y^k) <= C_{k,λ}(xy)^{(λ+k)/2}."""
    if not (0.0 <= lam <= 1.0) or not (1.0 <= k <= 2.0 - lam + 1e-15):
        raise DomainError(f"exige 0 <= lambda <= 1 e 1 <= k <= 2 − lambda (lambda={lam}, k={k})")
    if x < 0 or y < 0:
        raise DomainError("x, y devem ser >= 0")
    C = power_inequality_constant(lam, k)
    grande, pequeno = max(x, y), min(x, y)
    if grande == 0.0 or pequeno == 0.0:
        return ProbeResult.of(0.0, 0.0, {"lambda": lam, "k": k, "x": x, "y": y}, extras={"C": C})
    t = pequeno / grande
    # (x+y)^k − x^k − y^k = x^k ((1+t)^k − 1 − t^k), com x o maior
    colchete = grande ** k * (math.expm1(k * math.log1p(t)) - t ** k)
    lhs = (x ** lam + y ** lam) * max(colchete, 0.0)
    rhs = C * (x * y) ** ((lam + k) / 2.0)
    return ProbeResult.of(lhs, rhs, {"lambda": lam, "k": k, "x": x, "y": y}, extras={"C": C})


def f_difference_bound(x: float, y: float) -> ProbeResult:
    """f(x) − f(y) <= (x−y)(log x − log y) + (x−y) log max{x,y}."""
    _positive(x, y)
    fx, fy = float(f_entropy(x)), float(f_entropy(y))
    d = x - y
    lhs = fx - fy
    rhs = d * math.log1p(d / y) + d * math.log(max(x, y))
    return ProbeResult.of(lhs, rhs, {"x": x, "y": y}, scale=max(abs(fx), abs(fy)))


def xlogx_bound(x: float) -> ProbeResult:
    """x (log x)² <= 4 f(x) max{1, log x}."""
    _positive(x)
    lx = math.log(x)
    # f(x) = x log x − (x − 1), estável perto de 1
    fx = x * math.log1p(x - 1.0) - (x - 1.0) if abs(x - 1.0) < 0.5 else x * lx - x + 1.0
    lhs = x * lx * lx
    rhs = 4.0 * fx * max(1.0, lx)
    return ProbeResult.of(lhs, rhs, {"x": x})


# ---------------------------------------------------------------------------
# Momentos com logaritmo
# ---------------------------------------------------------------------------

def moment_log_bound_Q(c: np.ndarray, Q: DBSequence, k: float, C1: float, C2: float) -> ProbeResult:
    """Σ i^k c_i |log Q_i| <= max{|log C1|, |log C2|} Σ i^{k+1} c_i, se C1 >= Q_i^{1/i} >= C2 no suporte."""
    _positive(C1, C2)
    c = np.asarray(c, dtype=float)
    if len(c) > Q.N_max:
        raise DomainError(f"estado com N={len(c)} acima de N_max={Q.N_max}")
    i = np.arange(1, len(c) + 1, dtype=float)
    lq = Q.log_Q[1 : len(c) + 1]
    suporte = c > 0
    raiz = lq[suporte] / i[suporte]
    folga = 1e-12 * np.maximum(1.0, np.abs(raiz))
    fora = (raiz > math.log(C1) + folga) | (raiz < math.log(C2) - folga)
    if np.any(fora):
        ruim = int(np.nonzero(suporte)[0][np.argmax(fora)]) + 1
        raise PreconditionError(f"Q_i^(1/i) fora de [C2, C1] em i={ruim}")
    C = max(abs(math.log(C1)), abs(math.log(C2)))
    lhs = float(np.dot(i ** k * c, np.abs(lq)))
    rhs = C * float(np.dot(i ** (k + 1.0), c))
    return ProbeResult.of(lhs, rhs, {"k": k, "C1": C1, "C2": C2}, extras={"C": C})


@lru_cache(maxsize=None)
def _tanh_fixed_point() -> float:
    """Raiz de s·tanh(s) = 1."""
    return optimize.brentq(lambda s: s * math.tanh(s) - 1.0, 0.5, 2.0, xtol=1e-15)


def c_epsilon(eps: float) -> float:
    """sup_x |x log x| / (x^{1−ε} + x^{1+ε}) = (s*/cosh s*)/(2ε)."""
    if not (0 < eps < 1):
        raise DomainError(f"epsilon fora de (0, 1): {eps}")
    s = _tanh_fixed_point()
    return (s / math.cosh(s)) / (2.0 * eps) * (1.0 + 1e-12)


def moment_log_epsilon(k: float, m: float) -> float:
    return 0.5 * min(1.0, (m - k) / (2.0 * m))


def moment_log_bound_c(c: np.ndarray, k: float, m: float) -> ProbeResult:
    """
    Σ i^k c_i |log c_i| <= C_ε (M_m^{1−ε} ζ(p)^ε + M_1^ε M_m),
    p = (m(1−ε) − k)/ε > 1, ε = ½ min{1, (m−k)/(2m)}.

    Vem de |x log x| <= C_ε (x^{1−ε} + x^{1+ε}), Hölder no primeiro termo e
    c_i <= M_1 no segundo.
    """
    if not (m > k and m >= 1):
        raise DomainError(f"exige m > k e m >= 1 (k={k}, m={m})")
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise DomainError("c deve ser >= 0")
    eps = moment_log_epsilon(k, m)
    p = (m * (1.0 - eps) - k) / eps
    i = np.arange(1, len(c) + 1, dtype=float)
    lhs = float(np.dot(i ** k, np.abs(special.xlogy(c, c))))
    M_m = float(np.dot(i ** m, c))
    M_1 = float(np.dot(i, c))
    Ce = c_epsilon(eps)
    rhs = Ce * (M_m ** (1.0 - eps) * float(special.zeta(p)) ** eps + M_1 ** eps * M_m)
    return ProbeResult.of(lhs, rhs, {"k": k, "m": m}, extras={"epsilon": eps, "C_eps": Ce, "p": p})


# ---------------------------------------------------------------------------
# Sondas sobre estados
# ---------------------------------------------------------------------------

def _require_positive_state(c: np.ndarray, z_s: Optional[float]) -> None:
    if z_s is None:
        raise PreconditionError("sonda exige z_s estimado")
    if np.any(~(c > 0)):
        raise PreconditionError("sonda exige c estritamente positivo no suporte")
    if not (0 < c[0] < z_s):
        raise DomainError(f"exige 0 < c1 < z_s (c1={c[0]}, z_s={z_s})")


def mass_difference_probe(tables: KernelTables, Q: DBSequence, c: np.ndarray, K1: float) -> ProbeResult:
    """
    ρ(c) − ρ_1(c_1) contra √D_BD √M_{2−λ}.

    lhs/rhs do resultado são a cadeia explícita:
        ρ(c) − ρ_1(c_1) <= C1/√(z_s K1') √D_BD √M_{2−λ},
        C1 = 3 z_s²/(z_s − c1)², K1' = min{K1, a_11/2}.
    A razão núcleo LHS/(√D_BD √M_{2−λ}) fica em extras["ratio_core"].
    """
    c = np.asarray(c, dtype=float)
    _require_positive_state(c, Q.z_s)
    z_s, c1, N = Q.z_s, float(c[0]), len(c)
    i = np.arange(1, N + 1, dtype=float)
    eq = series(Q, c1, k=1.0)
    parcial = float(np.dot(i, np.exp(Q.log_Q[1 : N + 1] + i * math.log(c1))))
    lhs = float(np.dot(i, c)) - max(eq.value, parcial)

    D = dissipation_BD(tables, Q, c)
    M = moment(State(0.0, c), 2.0 - tables.lam)
    core = math.sqrt(D) * math.sqrt(M)
    C1 = 3.0 * z_s ** 2 / (z_s - c1) ** 2
    K1c = min(K1, 0.5 * float(tables.A[1, 1]))
    if not (K1c > 0):
        raise PreconditionError("K_1 deve ser positivo")
    rhs = C1 / math.sqrt(z_s * K1c) * core
    extras = {
        "rhs_core": core,
        "ratio_core": lhs / core if core > 0 else math.nan,
        "C1": C1,
        "K1_chain": K1c,
        "D_BD": D,
        "tail_bound": eq.tail_bound,
    }
    return ProbeResult.of(lhs, rhs, {"c1": c1, "N": N, "c1_over_zs": c1 / z_s}, extras=extras)


def relative_energy_probe(tables: KernelTables, Q: DBSequence, c: np.ndarray) -> ProbeResult:
    """F_{c1}(c) contra max{√D_BD √M_{2−λ}, D_BD}; razão monitorada, sem constante afirmada."""
    c = np.asarray(c, dtype=float)
    _require_positive_state(c, Q.z_s)
    c1 = float(c[0])
    F = relative_energy(c, Q, c1)
    D = dissipation_BD(tables, Q, c)
    M = moment(State(0.0, c), 2.0 - tables.lam)
    rhs = max(math.sqrt(D) * math.sqrt(M), D)
    degenerado = rhs <= 1e-300
    return ProbeResult.of(F, rhs, {"c1": c1, "c1_over_zs": c1 / Q.z_s, "N": len(c)},
                          extras={"D_BD": D, "M_2mlambda": M, "degenerate": float(degenerado)})


def relative_energy_split_probe(tables: KernelTables, Q: DBSequence, c: np.ndarray, R: float) -> ProbeResult:
    """F_{c1}(c) contra R·D_BD + M_{2−λ}/R (forma antes da otimização em R)."""
    _positive(R)
    c = np.asarray(c, dtype=float)
    _require_positive_state(c, Q.z_s)
    F = relative_energy(c, Q, float(c[0]))
    D = dissipation_BD(tables, Q, c)
    M = moment(State(0.0, c), 2.0 - tables.lam)
    return ProbeResult.of(F, R * D + M / R, {"c1": float(c[0]), "R": R}, extras={"D_BD": D, "M_2mlambda": M})


def supercritical_dissipation_probe(tables: KernelTables, Q: DBSequence, c: np.ndarray, rho: float) -> ProbeResult:
    """
    Na região c1 >= z_s − ¼(z_s − z), com z o valor de massa ρ < ρ_s, D_BD(c) > 0.
    lhs = 0, rhs = D_BD; a sonda passa só com margem estritamente positiva.
    """
    c = np.asarray(c, dtype=float)
    if Q.z_s is None or Q.rho_s is None:
        raise PreconditionError("sonda exige z_s e rho_s calculados")
    massa = float(np.dot(np.arange(1, len(c) + 1, dtype=float), c))
    if abs(massa - rho) > 1e-8 * max(1.0, rho):
        raise PreconditionError(f"massa do estado {massa} difere de rho={rho}")
    if not Q.rho_s_diverges and rho >= Q.rho_s:
        raise PreconditionError(f"exige rho < rho_s (rho={rho}, rho_s={Q.rho_s})")
    z = solve_z(Q, rho).z
    limiar = Q.z_s - 0.25 * (Q.z_s - z)
    if c[0] < limiar:
        raise PreconditionError(f"c1={c[0]} abaixo de z_s − (z_s − z)/4 = {limiar}")
    D = dissipation_BD(tables, Q, c)
    return ProbeResult.of(0.0, D, {"c1": float(c[0]), "z": z, "rho": rho}, extras={"threshold": limiar})


# ---------------------------------------------------------------------------
# Crescimento de momento ao longo de uma trajetória
# ---------------------------------------------------------------------------

def moment_growth_probe(records: Sequence[DiagnosticsRecord], K: float, lam: float, rho: float,
                        slack: float = 1e-6) -> ProbeResult:
    """
    M_{2−λ}(t) <= M_{2−λ}(0) + K·C_{2−λ,λ}·ρ²·t + slack em cada registro;
    devolve o registro de menor margem.
    """
    if not records:
        raise DomainError("trajetoria vazia")
    C = power_inequality_constant(lam, 2.0 - lam)
    m0 = records[0].M_2mlambda
    pior: Optional[ProbeResult] = None
    for r in records:
        cota = m0 + K * C * rho * rho * r.t + slack
        res = ProbeResult.of(r.M_2mlambda, cota, {"t": r.t}, extras={"C": C, "K": K})
        if pior is None or res.margin < pior.margin:
            pior = res
    return pior
