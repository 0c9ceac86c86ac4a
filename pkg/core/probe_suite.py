#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
probe_suite.py

Varreduras com semente sobre os avaliadores de inequalities.py.

Tipos de sonda:
- explicit: constante explícita, falha se alguma margem < −1e-12·escala
- strict:   exige margem estritamente positiva (D_BD > 0)
- ratio:    constante não explícita; registra a distribuição de lhs/rhs e exige
            máximos estáveis (fator 2) entre as duas metades da varredura

Regiões listadas em ProbeDef.report_regions são avaliadas e relatadas, mas
suas violações não contam para o veredito (reported_violations).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.equilibrium import DBSequence, build_Q, solve_z, with_critical_values
from core.errors import CfkinError, DomainError
from core.functionals import (
    classify_region,
    proximity_bound_check,
    proximity_moment_check,
    relative_energy_minimality_check,
)
from core.inequalities import (
    ProbeResult,
    f_difference_bound,
    mass_difference_probe,
    moment_log_bound_Q,
    moment_log_bound_c,
    power_inequality,
    relative_energy_probe,
    relative_energy_split_probe,
    square_log_bound,
    supercritical_dissipation_probe,
    tail_sum_bound,
    xlogx_bound,
)
from core.kernel import KernelSpec, KernelTables, build_tables, validate_hypotheses
from core.sampling import (
    SUPPORTS,
    log_uniform,
    near_critical_state,
    random_bounded_sequence,
    random_db_sequence,
    random_state,
    random_support_state,
    stratum_for,
    trial_rng,
)

logger = logging.getLogger(__name__)

WORST_WITNESSES = 3
RATIO_STABLE_FACTOR = 2.0
RATIO_STABLE_MIN = 500
Q_RANGE = 1024
MOMENT_LOG_ORDERS: Tuple[Tuple[float, float], ...] = ((1.0, 2.0), (0.0, 1.0), (1.0, 3.0), (0.5, 2.0))


@dataclass(frozen=True, eq=False)
class ProbeContext:
    spec: KernelSpec
    Q: DBSequence
    K: float
    K1: float
    tables: Dict[int, KernelTables] = field(repr=False)

    def tables_for(self, N: int) -> KernelTables:
        return self.tables[N]


def build_probe_context(spec: KernelSpec, n_max: int = Q_RANGE) -> ProbeContext:
    Q = with_critical_values(build_Q(spec, n_max))
    rel = validate_hypotheses(spec, Q, max(SUPPORTS))
    if not rel.passed:
        logger.warning("kernel da sonda falhou em %s", rel.failing())
    tabelas = {n: build_tables(spec, n) for n in SUPPORTS}
    return ProbeContext(spec, Q, rel.estimated_constants["K"], rel.estimated_constants["K_1"], tabelas)


# ---------------------------------------------------------------------------
# Uma tentativa por sonda: (resultado, região) ou None quando não se aplica
# ---------------------------------------------------------------------------

Trial = Optional[Tuple[ProbeResult, str]]


def _target_z(ctx: ProbeContext, c: np.ndarray) -> Optional[float]:
    massa = float(np.dot(np.arange(1, len(c) + 1, dtype=float), c))
    if not ctx.Q.rho_s_diverges and massa >= ctx.Q.rho_s:
        return None
    return solve_z(ctx.Q, massa).z


def _region(ctx: ProbeContext, c: np.ndarray) -> str:
    z = _target_z(ctx, c)
    if z is None:
        return "supercritical_mass"
    return classify_region(float(c[0]), z, ctx.Q.z_s)


def _tail_sum(ctx, rng, k) -> Trial:
    Q = random_db_sequence(rng, 1200)
    j = int(rng.integers(1, 1000))
    return tail_sum_bound(Q, float(rng.uniform(0.05, 0.95)), j), "-"


def _square_log(ctx, rng, k) -> Trial:
    x, y = log_uniform(rng, 1e-8, 1e8, size=2)
    return square_log_bound(float(x), float(y)), "-"


def _power(ctx, rng, k) -> Trial:
    lam = float(rng.uniform(0.0, 1.0))
    kk = float(rng.uniform(1.0, 2.0 - lam))
    x, y = log_uniform(rng, 1e-6, 1e6, size=2)
    if rng.random() < 0.05:
        x = 0.0
    return power_inequality(lam, kk, float(x), float(y)), "-"


def _f_difference(ctx, rng, k) -> Trial:
    x, y = log_uniform(rng, 1e-8, 1e8, size=2)
    return f_difference_bound(float(x), float(y)), "-"


def _xlogx(ctx, rng, k) -> Trial:
    return xlogx_bound(float(log_uniform(rng, 1e-8, 1e8))), "-"


def _moment_log_Q(ctx, rng, k) -> Trial:
    C1 = float(rng.uniform(1.0, 4.0))
    C2 = float(rng.uniform(0.25, 1.0))
    Q = random_bounded_sequence(rng, 257, C1, C2)
    c = random_support_state(rng, 256)
    return moment_log_bound_Q(c, Q, float(rng.integers(0, 2)), C1, C2), "-"


def _moment_log_c(ctx, rng, k) -> Trial:
    kk, m = MOMENT_LOG_ORDERS[int(rng.integers(0, len(MOMENT_LOG_ORDERS)))]
    return moment_log_bound_c(random_support_state(rng, 256), kk, m), "-"


def _state(ctx: ProbeContext, rng, k) -> Tuple[np.ndarray, KernelTables]:
    st = stratum_for(k)
    return random_state(rng, ctx.Q.z_s, st), ctx.tables_for(st.support)


def _mass_difference(ctx, rng, k) -> Trial:
    c, tab = _state(ctx, rng, k)
    return mass_difference_probe(tab, ctx.Q, c, ctx.K1), _region(ctx, c)


def _proximity(check: Callable[..., ProbeResult]) -> Callable[..., Trial]:
    def trial(ctx, rng, k) -> Trial:
        c, _ = _state(ctx, rng, k)
        if k % 2 == 0:
            z = _target_z(ctx, c)
            if z is None or z <= 0:
                return None
            regiao = classify_region(float(c[0]), z, ctx.Q.z_s)
        else:
            # estrato de massa não casada
            z = float(rng.uniform(0.05, 0.95)) * ctx.Q.z_s
            regiao = "unmatched_mass"
        return check(c, ctx.Q, z), regiao
    return trial


def _minimality(ctx, rng, k) -> Trial:
    c, _ = _state(ctx, rng, k)
    z = _target_z(ctx, c)
    if z is None or z <= 0:
        return None
    return relative_energy_minimality_check(c, ctx.Q, z), classify_region(float(c[0]), z, ctx.Q.z_s)


def _relative_energy(ctx, rng, k) -> Trial:
    c, tab = _state(ctx, rng, k)
    return relative_energy_probe(tab, ctx.Q, c), _region(ctx, c)


def _split(ctx, rng, k) -> Trial:
    c, tab = _state(ctx, rng, k)
    R = float(log_uniform(rng, 1e-2, 1e2))
    return relative_energy_split_probe(tab, ctx.Q, c, R), _region(ctx, c)


def _supercritical(ctx, rng, k) -> Trial:
    if ctx.Q.rho_s_diverges:
        return None
    N = stratum_for(k).support
    rho = float(rng.uniform(0.2, 0.9)) * ctx.Q.rho_s
    z = solve_z(ctx.Q, rho).z
    try:
        c = near_critical_state(rng, ctx.Q, z, rho, N)
    except DomainError:
        return None
    return supercritical_dissipation_probe(ctx.tables_for(N), ctx.Q, c, rho), "near_critical"


@dataclass(frozen=True)
class ProbeDef:
    name: str
    kind: str
    trial: Callable[..., Trial]
    report_regions: Tuple[str, ...] = ()


PROBES: Dict[str, ProbeDef] = {p.name: p for p in (
    ProbeDef("tail_sum_bound", "explicit", _tail_sum),
    ProbeDef("square_log_bound", "explicit", _square_log),
    ProbeDef("power_inequality", "explicit", _power),
    ProbeDef("f_difference_bound", "explicit", _f_difference),
    ProbeDef("xlogx_bound", "explicit", _xlogx),
    ProbeDef("moment_log_bound_Q", "explicit", _moment_log_Q),
    ProbeDef("moment_log_bound_c", "explicit", _moment_log_c),
    ProbeDef("mass_difference_chain", "explicit", _mass_difference),
    ProbeDef("proximity_moment", "explicit", _proximity(proximity_moment_check)),
    ProbeDef("relative_energy_minimality", "explicit", _minimality),
    ProbeDef("proximity_bound", "explicit", _proximity(proximity_bound_check),
             report_regions=("unmatched_mass",)),
    ProbeDef("relative_energy", "ratio", _relative_energy),
    ProbeDef("relative_energy_split", "ratio", _split),
    ProbeDef("supercritical_dissipation", "strict", _supercritical),
)}

SUITES: Dict[str, Tuple[str, ...]] = {
    "explicit": ("tail_sum_bound", "square_log_bound", "power_inequality", "f_difference_bound",
                 "xlogx_bound", "moment_log_bound_Q", "moment_log_bound_c", "mass_difference_chain"),
    "functionals": ("proximity_moment", "relative_energy_minimality", "proximity_bound"),
    "ratio": ("relative_energy", "relative_energy_split", "supercritical_dissipation"),
}
SUITES["all"] = SUITES["explicit"] + SUITES["functionals"] + SUITES["ratio"]


# ---------------------------------------------------------------------------
# Agregação
# ---------------------------------------------------------------------------

@dataclass
class ProbeStats:
    name: str
    kind: str
    trials: int = 0
    evaluated: int = 0
    skipped: int = 0
    errors: int = 0
    violations: int = 0
    reported_violations: int = 0
    min_normalized_margin: float = math.inf
    max_ratio: float = 0.0
    batch_max_ratio: List[float] = field(default_factory=lambda: [0.0, 0.0])
    batch_evaluated: List[int] = field(default_factory=lambda: [0, 0])
    ratio_by_region: Dict[str, float] = field(default_factory=dict)
    worst: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        if self.errors:
            return False
        if self.kind in ("explicit", "strict"):
            return self.violations == 0
        if self.kind == "ratio":
            return math.isfinite(self.max_ratio) and self.ratio_stable is not False
        return True

    @property
    def ratio_stable(self) -> Optional[bool]:
        """max/min dos máximos por metade <= 2; None com menos de 500 razões em alguma metade."""
        if min(self.batch_evaluated) < RATIO_STABLE_MIN:
            return None
        lo, hi = sorted(self.batch_max_ratio)
        if hi == 0.0:
            return True
        return lo > 0.0 and hi / lo <= RATIO_STABLE_FACTOR

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "trials": self.trials,
            "evaluated": self.evaluated,
            "skipped": self.skipped,
            "errors": self.errors,
            "violations": self.violations,
            "reported_violations": self.reported_violations,
            "min_normalized_margin": self.min_normalized_margin if math.isfinite(self.min_normalized_margin) else None,
            "max_ratio": self.max_ratio,
            "batch_max_ratio": list(self.batch_max_ratio),
            "batch_evaluated": list(self.batch_evaluated),
            "ratio_stable": self.ratio_stable,
            "ratio_by_region": dict(sorted(self.ratio_by_region.items())),
            "worst_witnesses": self.worst,
            "passed": self.passed,
        }


def _violates(kind: str, r: ProbeResult) -> bool:
    if kind == "explicit":
        return not r.holds()
    if kind == "strict":
        return not (r.margin > 0)
    return False


def _select_worst(scored: List[Tuple[float, int, Dict[str, Any]]], top_k: int) -> List[Dict[str, Any]]:
    """Menores margens normalizadas primeiro; desempate pelo índice da tentativa."""
    scored.sort(key=lambda x: (x[0], x[1]))
    out: List[Dict[str, Any]] = []
    for _, _, w in scored[:top_k]:
        out.append(w)
    return out


def _run_chunk(ctx: ProbeContext, probe: ProbeDef, seed: int, ks: Sequence[int]) -> List[Tuple[int, Any]]:
    out: List[Tuple[int, Any]] = []
    for k in ks:
        rng = trial_rng(seed, k)
        try:
            out.append((k, probe.trial(ctx, rng, k)))
        except CfkinError as exc:
            out.append((k, exc))
    return out


def run_probe(ctx: ProbeContext, name: str, trials: int, seed: int, workers: int = 1) -> ProbeStats:
    if name not in PROBES:
        raise DomainError(f"sonda desconhecida: {name}")
    probe = PROBES[name]
    # sementes distintas por sonda, fixas pelo nome
    sub_seed = int(np.random.SeedSequence([int(seed), sum(map(ord, name))]).generate_state(1)[0])
    ks = list(range(trials))
    if workers > 1:
        pedacos = [ks[w::workers] for w in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partes = list(pool.map(lambda p: _run_chunk(ctx, probe, sub_seed, p), pedacos))
        resultados = sorted((item for parte in partes for item in parte), key=lambda x: x[0])
    else:
        resultados = _run_chunk(ctx, probe, sub_seed, ks)

    st = ProbeStats(name=name, kind=probe.kind, trials=trials)
    scored: List[Tuple[float, int, Dict[str, Any]]] = []
    for k, res in resultados:
        if isinstance(res, CfkinError):
            st.errors += 1
            logger.warning("sonda %s, tentativa %d: %s", name, k, res)
            continue
        if res is None:
            st.skipped += 1
            continue
        r, regiao = res
        st.evaluated += 1
        nm = r.normalized_margin
        st.min_normalized_margin = min(st.min_normalized_margin, nm)
        if _violates(probe.kind, r):
            if regiao in probe.report_regions:
                st.reported_violations += 1
            else:
                st.violations += 1
        if math.isfinite(r.ratio):
            st.max_ratio = max(st.max_ratio, r.ratio)
            lote = 0 if k < trials // 2 else 1
            st.batch_max_ratio[lote] = max(st.batch_max_ratio[lote], r.ratio)
            st.batch_evaluated[lote] += 1
            st.ratio_by_region[regiao] = max(st.ratio_by_region.get(regiao, 0.0), r.ratio)
        scored.append((nm, k, {"trial": k, "region": regiao, **r.to_dict()}))
    st.worst = _select_worst(scored, WORST_WITNESSES)
    logger.info("sonda %s: %d avaliadas, %d violacoes (%d relatadas), margem minima %.3e, razao maxima %.4g",
                name, st.evaluated, st.violations, st.reported_violations, st.min_normalized_margin, st.max_ratio)
    return st


@dataclass
class SuiteReport:
    suite: str
    trials: int
    seed: int
    probes: Dict[str, ProbeStats]

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.probes.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "suite": self.suite,
            "trials": self.trials,
            "seed": self.seed,
            "passed": self.passed,
            "probes": {k: v.to_dict() for k, v in self.probes.items()},
        }


def run_suite(ctx: ProbeContext, suite: str = "all", trials: int = 10_000, seed: int = 42,
              workers: int = 1) -> SuiteReport:
    if suite not in SUITES:
        raise DomainError(f"suite desconhecida: {suite} (validas: {', '.join(SUITES)})")
    probes = {n: run_probe(ctx, n, trials, seed, workers) for n in SUITES[suite]}
    return SuiteReport(suite, trials, seed, probes)
