#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
test_inequalities.py

Testa os avaliadores de desigualdades e as varreduras com semente.
Valida que:
- cada cota escalar bate com os valores fechados
- as sondas rejeitam pré-condições inválidas com PreconditionError
- as varreduras são determinísticas e independentes do número de workers
"""

import math
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from core.equilibrium import build_Q, equilibrium_profile, with_critical_values
from core.errors import DomainError, PreconditionError
from core.inequalities import (
    c_epsilon,
    f_difference_bound,
    mass_difference_probe,
    relative_energy_probe,
    moment_log_bound_Q,
    moment_log_bound_c,
    power_inequality,
    power_inequality_constant,
    square_log_bound,
    supercritical_dissipation_probe,
    tail_sum_bound,
    xlogx_bound,
)
from core.kernel import build_tables
from core.presets import make_kernel
from core.probe_suite import SUITES, ProbeStats, build_probe_context, run_probe, run_suite

SPEC = make_kernel("representativo", 1024)
Q = with_critical_values(build_Q(SPEC, 1024))
Q1 = with_critical_values(build_Q(make_kernel("sem_gibbs", 1024), 1024))

positivos = st.floats(min_value=1e-8, max_value=1e8)


@lru_cache(maxsize=1)
def _contexto():
    return build_probe_context(SPEC)


def test_cotas_escalares():
    """Valores fechados das cotas escalares"""
    print("=" * 60)
    print("TESTE 1: Cotas escalares")
    print("=" * 60)

    r = tail_sum_bound(Q1, 0.5, 1)
    assert math.isclose(r.lhs, 1.5, abs_tol=1e-10)
    assert math.isclose(r.rhs, 3.0, rel_tol=1e-12)
    assert r.holds()

    e = math.e
    r = square_log_bound(e, 1.0)
    assert math.isclose(r.lhs, (e - 1.0) ** 2 / e, rel_tol=1e-14)
    assert math.isclose(r.rhs, e - 1.0, rel_tol=1e-14)

    assert power_inequality_constant(0.0, 2.0) == 8.0
    x, y = 3.0, 5.0
    r = power_inequality(0.0, 2.0, x, y)
    assert math.isclose(r.margin, 4.0 * x * y, rel_tol=1e-12)

    r = f_difference_bound(1.0, e)
    assert math.isclose(r.lhs, -1.0, rel_tol=1e-14)
    assert abs(r.rhs) < 1e-15

    r = xlogx_bound(e)
    assert math.isclose(r.lhs, e, rel_tol=1e-15)
    assert math.isclose(r.rhs, 4.0, rel_tol=1e-15)

    print("[OK] Cotas escalares funcionando")
    print()


@settings(max_examples=200, derandomize=True, deadline=None)
@given(x=positivos, y=positivos)
def test_cotas_escalares_propriedade(x, y):
    """As três cotas de duas variáveis valem em oito décadas"""
    assert square_log_bound(x, y).holds()
    assert f_difference_bound(x, y).holds()
    assert xlogx_bound(x).holds()


@settings(max_examples=200, derandomize=True, deadline=None)
@given(
    lam=st.floats(min_value=0.0, max_value=1.0),
    frac=st.floats(min_value=0.0, max_value=1.0),
    x=st.floats(min_value=1e-6, max_value=1e6),
    y=st.floats(min_value=1e-6, max_value=1e6),
)
def test_desigualdade_de_potencias_propriedade(lam, frac, x, y):
    """(x^λ + y^λ)((x+y)^k − x^k − y^k) <= C (xy)^{(λ+k)/2} para 1 <= k <= 2 − λ"""
    k = 1.0 + frac * (1.0 - lam)
    assert power_inequality(lam, k, x, y).holds()


def test_erros_de_dominio():
    """Argumentos fora do domínio das fórmulas"""
    print("=" * 60)
    print("TESTE 2: Erros de domínio")
    print("=" * 60)

    with pytest.raises(DomainError):
        square_log_bound(0.0, 1.0)
    with pytest.raises(DomainError):
        power_inequality(0.5, 1.8, 1.0, 1.0)
    with pytest.raises(DomainError):
        tail_sum_bound(Q1, 1.0, 3)
    with pytest.raises(DomainError):
        moment_log_bound_c(np.ones(5), 2.0, 2.0)
    with pytest.raises(DomainError):
        c_epsilon(1.0)

    print("[OK] Erros de domínio funcionando")
    print()


def test_momentos_com_logaritmo():
    """Cotas de Σ i^k c_i |log Q_i| e Σ i^k c_i |log c_i|"""
    print("=" * 60)
    print("TESTE 3: Momentos com logaritmo")
    print("=" * 60)

    rng = np.random.default_rng(41)
    i = np.arange(1, 31, dtype=float)
    for _ in range(20):
        c = rng.uniform(0.1, 1.0, size=30) * np.exp(-0.4 * i)
        # Q_i^{1/i} = exp(1 − 1/√i) fica em [1, e)
        assert moment_log_bound_Q(c, Q, 1.0, math.e, 1.0).holds()
        for k, m in ((1.0, 2.0), (0.0, 1.0), (0.5, 2.0)):
            assert moment_log_bound_c(c, k, m).holds()

    with pytest.raises(PreconditionError):
        moment_log_bound_Q(np.full(30, 0.1), Q, 1.0, 2.0, 1.0)

    print(f"  C_eps(1/4) = {c_epsilon(0.25):.6f}")
    print("[OK] Momentos com logaritmo funcionando")
    print()


def test_sondas_de_estado():
    """Cadeia da diferença de massa e pré-condições"""
    print("=" * 60)
    print("TESTE 4: Sondas sobre estados")
    print("=" * 60)

    N = 64
    tab = build_tables(SPEC, N)
    eq = equilibrium_profile(Q, 0.5 * Q.z_s, N)
    r = mass_difference_probe(tab, Q, eq, 1.0)
    assert r.lhs <= 0.0
    assert r.holds()

    with pytest.raises(DomainError):
        mass_difference_probe(tab, Q, np.full(N, 0.5), 1.0)
    buraco = eq.copy()
    buraco[5] = 0.0
    with pytest.raises(PreconditionError):
        mass_difference_probe(tab, Q, buraco, 1.0)

    rho = 2.0 * Q.rho_s
    with pytest.raises(PreconditionError):
        supercritical_dissipation_probe(tab, Q, np.array([rho]), rho)

    print("[OK] Sondas sobre estados funcionando")
    print()


def test_varredura_deterministica():
    """Mesma semente, mesmo relatório, com 1 ou 3 workers"""
    print("=" * 60)
    print("TESTE 5: Varredura determinística")
    print("=" * 60)

    ctx = _contexto()
    um = run_probe(ctx, "square_log_bound", 60, seed=7, workers=1).to_dict()
    tres = run_probe(ctx, "square_log_bound", 60, seed=7, workers=3).to_dict()
    assert um == tres
    outra = run_probe(ctx, "square_log_bound", 60, seed=8).to_dict()
    assert outra["worst_witnesses"] != um["worst_witnesses"]
    assert len(um["worst_witnesses"]) == 3

    with pytest.raises(DomainError):
        run_probe(ctx, "inexistente", 10, seed=1)
    with pytest.raises(DomainError):
        run_suite(ctx, suite="inexistente", trials=10)

    print("[OK] Varredura determinística funcionando")
    print()


def test_suite_curta():
    """Todas as sondas com poucas tentativas: explícitas sem violação"""
    print("=" * 60)
    print("TESTE 6: Suite curta")
    print("=" * 60)

    rel = run_suite(_contexto(), suite="all", trials=180, seed=42, workers=2)
    for nome, p in rel.probes.items():
        print(f"  {nome}: {p.evaluated} avaliadas, {p.violations} violacoes, razao max {p.max_ratio:.4g}")
        assert p.errors == 0
    for nome in SUITES["explicit"] + SUITES["functionals"]:
        assert rel.probes[nome].passed, nome
        assert rel.probes[nome].evaluated > 0, nome
    assert rel.probes["supercritical_dissipation"].passed
    assert set(rel.probes["mass_difference_chain"].ratio_by_region) <= {
        "near_critical", "intermediate", "depleted", "supercritical_mass"}

    print("[OK] Suite curta funcionando")
    print()


def test_cota_de_proximidade_com_massa_casada():
    """Massa casada decide o veredito; o estrato de massa livre só é relatado"""
    print("=" * 60)
    print("TESTE 7: Cota de proximidade com massa casada")
    print("=" * 60)

    p = run_probe(_contexto(), "proximity_bound", 200, seed=42)
    print(f"  {p.evaluated} avaliadas, {p.violations} violacoes, {p.reported_violations} relatadas")
    assert p.kind == "explicit"
    assert p.errors == 0
    assert p.violations == 0
    assert p.passed
    assert "unmatched_mass" in p.ratio_by_region
    for w in p.worst:
        if w["margin"] is not None and w["margin"] < 0:
            assert w["region"] == "unmatched_mass"
    d = p.to_dict()
    assert d["reported_violations"] == p.reported_violations

    # a mesma violação fora do estrato relatado reprova a sonda
    st_ = ProbeStats(name="proximity_bound", kind="explicit", violations=1, reported_violations=3)
    assert not st_.passed

    print("[OK] Cota de proximidade com massa casada funcionando")
    print()


def test_estabilidade_da_razao():
    """Razão monitorada: máximos das duas metades dentro de um fator 2"""
    print("=" * 60)
    print("TESTE 8: Estabilidade da razão")
    print("=" * 60)

    def _stats(maximos, contagens):
        return ProbeStats(name="relative_energy", kind="ratio", max_ratio=max(maximos),
                          batch_max_ratio=list(maximos), batch_evaluated=list(contagens))

    instavel = _stats([1.0, 5.0], [600, 600])
    assert instavel.ratio_stable is False
    assert not instavel.passed
    assert instavel.to_dict()["ratio_stable"] is False

    estavel = _stats([1.0, 1.5], [600, 600])
    assert estavel.ratio_stable is True
    assert estavel.passed

    metade_vazia = _stats([0.0, 2.0], [600, 600])
    assert not metade_vazia.passed

    poucas = _stats([1.0, 5.0], [40, 40])
    assert poucas.ratio_stable is None
    assert poucas.passed

    assert not _stats([math.inf, 1.0], [600, 600]).passed

    print("[OK] Estabilidade da razão funcionando")
    print()


def test_energia_relativa_escala_quadratica():
    """c = c^z(1 + εv) com v_1 = 0: F e D_BD escalam como ε², F/D_BD estabiliza"""
    print("=" * 60)
    print("TESTE 9: Escala quadrática da energia relativa")
    print("=" * 60)

    N = 60
    tab = build_tables(SPEC, N)
    z = 0.5 * Q.z_s
    eq = equilibrium_profile(Q, z, N)
    v = np.sin(np.arange(1, N + 1, dtype=float))
    v[0] = 0.0

    epsilons = (1e-1, 1e-2, 1e-3, 1e-4)
    F_eps, D_eps, F_sobre_D, razoes = [], [], [], []
    for eps in epsilons:
        r = relative_energy_probe(tab, Q, eq * (1.0 + eps * v))
        assert math.isclose(r.witness["c1"], z, rel_tol=1e-14)
        D = r.extras["D_BD"]
        F_eps.append(r.lhs / eps ** 2)
        D_eps.append(D / eps ** 2)
        F_sobre_D.append(r.lhs / D)
        razoes.append(r.ratio)
        print(f"  eps={eps:.0e}: F/eps^2={F_eps[-1]:.8g}, D/eps^2={D_eps[-1]:.8g}, F/D={F_sobre_D[-1]:.8g}")

    assert math.isclose(F_eps[-1], F_eps[-2], rel_tol=1e-2)
    assert math.isclose(D_eps[-1], D_eps[-2], rel_tol=1e-2)
    assert math.isclose(F_sobre_D[-1], F_sobre_D[-2], rel_tol=1e-2)
    # F/(√D √M) ~ ε
    assert all(a > b for a, b in zip(razoes, razoes[1:]))
    assert math.isclose(razoes[-1] / epsilons[-1], razoes[-2] / epsilons[-2], rel_tol=1e-2)

    print("[OK] Escala quadrática da energia relativa funcionando")
    print()


def test_cadeia_da_diferenca_de_massa_n4():
    """Q ≡ 1, z = 1/2, N = 4 com c_2 dobrado: todos os termos da cadeia à mão"""
    print("=" * 60)
    print("TESTE 10: Cadeia da diferença de massa com N = 4")
    print("=" * 60)

    tab = build_tables(make_kernel("sem_gibbs", 1024), 4)
    c = np.array([0.5, 0.25, 0.125, 0.0625])
    c[1] *= 2.0
    r = mass_difference_probe(tab, Q1, c, 1.0)

    # ρ(c) = 2.125 e Σ i (1/2)^i = 2
    assert math.isclose(r.lhs, 0.125, abs_tol=1e-12)
    # pares (1,1) com peso a_11/2 = 1, (2,1) com a_21 = 1 + √2, (3,1) em equilíbrio
    D = math.log(2.0) * (0.25 + 0.125 * (1.0 + math.sqrt(2.0)))
    assert math.isclose(r.extras["D_BD"], D, rel_tol=1e-12)
    M = 0.5 + 2.0 ** 1.5 * 0.5 + 3.0 ** 1.5 * 0.125 + 8.0 * 0.0625
    assert math.isclose(r.extras["rhs_core"], math.sqrt(D * M), rel_tol=1e-12)
    assert r.extras["C1"] == 12.0
    assert r.extras["K1_chain"] == 1.0
    assert math.isclose(r.rhs, 12.0 * math.sqrt(D * M), rel_tol=1e-12)
    print(f"  lhs={r.lhs:.6f}, rhs={r.rhs:.6f}, margem={r.margin:.6f}")
    assert r.margin >= 0
    assert r.holds()

    print("[OK] Cadeia da diferença de massa com N = 4 funcionando")
    print()


@pytest.mark.slow
def test_suite_explicita_completa():
    """10⁴ tentativas por sonda explícita, margem >= −1e-12·escala"""
    rel = run_suite(_contexto(), suite="explicit", trials=10_000, seed=42, workers=4)
    falhas = [n for n, p in rel.probes.items() if not p.passed]
    assert not falhas, falhas


if __name__ == "__main__":
    print()
    print("*" * 60)
    print("TESTES DE DESIGUALDADES")
    print("*" * 60)
    print()

    test_cotas_escalares()
    test_cotas_escalares_propriedade()
    test_desigualdade_de_potencias_propriedade()
    test_erros_de_dominio()
    test_momentos_com_logaritmo()
    test_sondas_de_estado()
    test_varredura_deterministica()
    test_suite_curta()
    test_cota_de_proximidade_com_massa_casada()
    test_estabilidade_da_razao()
    test_energia_relativa_escala_quadratica()
    test_cadeia_da_diferenca_de_massa_n4()

    print("=" * 60)
    print("TODOS OS TESTES PASSARAM")
    print("=" * 60)
