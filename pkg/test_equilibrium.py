#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
test_equilibrium.py

Testa Q_i, z_s, ρ_s, séries certificadas e o solver de z(ρ).
"""

import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from core.equilibrium import (
    K_z,
    build_Q,
    compute_rho_s,
    estimate_zs,
    mass_series,
    partition_sum,
    series,
    solve_z,
    with_critical_values,
)
from core.errors import DomainError, EstimationError, SupercriticalMassError
from core.kernel import becker_doring, load_table_csv
from core.presets import make_kernel

TABELA = Path(__file__).parent / "data" / "tabela_q_geometrica.csv"


def _q_constante():
    return with_critical_values(build_Q(make_kernel("sem_gibbs", 1024), 1024))


def _q_representativo():
    return with_critical_values(build_Q(make_kernel("representativo", 1024), 1024))


def _q_geometrica():
    return with_critical_values(build_Q(load_table_csv(TABELA), 81))


_Q1_CACHE = _q_constante()
_Q_REPR_CACHE = _q_representativo()


def test_sequencia_q():
    """Recorrência de Q contra a forma fechada"""
    print("=" * 60)
    print("TESTE 1: Sequência Q")
    print("=" * 60)

    bd = becker_doring([1.5] * 200, [1.5] * 200)
    Qbd = build_Q(bd, 200)
    assert np.all(Qbd.log_Q[1:] == 0.0)

    Q = build_Q(make_kernel("representativo", 1024), 1001)
    assert math.isclose(Q.Q(2), math.exp(2.0 - math.sqrt(2.0)), rel_tol=1e-14)
    assert abs(Q.Q(2) - 1.7964) < 1e-4
    i = np.arange(2, 1001, dtype=float)
    esperado = i - np.sqrt(i)
    assert np.allclose(Q.log_Q[2:], esperado, rtol=1e-12, atol=0.0)

    # coluna BD tirada do kernel representativo herda a forma fechada
    Qcol = build_Q(make_kernel("becker_doring", 1024), 1001)
    assert Qcol.closed_form == "power_law_exp"
    assert np.allclose(Qcol.log_Q[2:], Q.log_Q[2:], rtol=1e-12, atol=0.0)

    print("[OK] Sequência Q funcionando")
    print()


def test_monomero_critico():
    """z_s por forma fechada e por extrapolação"""
    print("=" * 60)
    print("TESTE 2: Monômero crítico")
    print("=" * 60)

    assert abs(_q_representativo().z_s - math.exp(-1.0)) < 1e-6

    bd = becker_doring([1.0] * 300, [1.0] * 300)
    est = estimate_zs(build_Q(bd, 256))
    assert est.method == "richardson"
    assert abs(est.z_s - 1.0) < 1e-12

    Qg = _q_geometrica()
    print(f"  z_s tabela geometrica = {Qg.z_s:.12f}")
    assert abs(Qg.z_s - 2.0) < 1e-10

    print("[OK] Monômero crítico funcionando")
    print()


def test_massa_critica():
    """ρ_s finito, divergente e consistente entre tolerâncias"""
    print("=" * 60)
    print("TESTE 3: Massa crítica")
    print("=" * 60)

    Q1 = _q_constante()
    assert Q1.rho_s_diverges
    assert Q1.rho_s_bracket == (math.inf, math.inf)

    Q = _q_representativo()
    lo, hi = Q.rho_s_bracket
    parcial = sum(j * math.exp(-math.sqrt(j)) for j in range(1, 11))
    print(f"  parcial(10) = {parcial:.4f}, rho_s em [{lo:.10f}, {hi:.10f}]")
    assert abs(parcial - 4.82) < 5e-3
    assert parcial < lo < hi < 12.6
    assert not Q.rho_s_diverges

    grosso = compute_rho_s(Q, 1e-3)
    fino = compute_rho_s(Q, 1e-9)
    assert abs(grosso.rho_s - fino.rho_s) < 1e-3

    print("[OK] Massa crítica funcionando")
    print()


def test_solver_z():
    """z(ρ) nos oráculos de forma fechada"""
    print("=" * 60)
    print("TESTE 4: Solver de z")
    print("=" * 60)

    Q1 = _q_constante()
    vazio = solve_z(Q1, 0.0, N=10)
    assert vazio.z == 0.0
    assert np.all(vazio.profile == 0.0)

    assert abs(solve_z(Q1, 2.0).z - 0.5) < 1e-10

    zg = solve_z(_q_geometrica(), 1.0).z
    print(f"  z(1) tabela geometrica = {zg:.12f}")
    assert abs(zg - (4.0 - 2.0 * math.sqrt(3.0))) < 1e-8

    Q = _q_representativo()
    perfil = solve_z(Q, 0.5 * Q.rho_s, N=200)
    assert 0 < perfil.z < Q.z_s
    assert abs(perfil.mass + perfil.tail_mass_bound - 0.5 * Q.rho_s) < 1e-6
    with pytest.raises(SupercriticalMassError):
        solve_z(Q, 2.0 * Q.rho_s)
    with pytest.raises(DomainError):
        solve_z(Q, -1.0)

    print("[OK] Solver de z funcionando")
    print()


def test_serie_de_particao():
    """Σ Q_i z^i com cauda certificada"""
    print("=" * 60)
    print("TESTE 5: Série de partição")
    print("=" * 60)

    Q1 = _q_constante()
    assert partition_sum(Q1, 0.0).value == 0.0
    s = partition_sum(Q1, 0.5)
    assert s.certified
    assert abs(s.value - 1.0) < 1e-12

    Q = _q_representativo()
    i = np.arange(1, 1_000_001, dtype=float)
    bruto = float(np.sum(np.exp(-np.sqrt(i))))
    sz = partition_sum(Q, Q.z_s)
    print(f"  soma bruta = {bruto:.15f}, serie = {sz.value:.15f} (+{sz.tail_bound:.2e})")
    assert sz.value - 1e-10 <= bruto <= sz.upper + 1e-10

    with pytest.raises(DomainError):
        series(Q, 1.5 * Q.z_s)

    print("[OK] Série de partição funcionando")
    print()


@settings(max_examples=50, derandomize=True, deadline=None)
@given(z=st.floats(min_value=0.01, max_value=0.9))
def test_massa_geometrica_propriedade(z):
    """Q ≡ 1: Σ i z^i = z/(1−z)²"""
    s = mass_series(_Q1_CACHE, z)
    assert math.isclose(s.value, z / (1.0 - z) ** 2, rel_tol=1e-10)


def test_constante_de_proximidade():
    """K_z = 1/(1 − √(z/z_s)) − 1"""
    print("=" * 60)
    print("TESTE 6: Constante K_z")
    print("=" * 60)

    assert math.isclose(K_z(0.25, 1.0), 1.0, rel_tol=1e-12)
    assert math.isclose(K_z(0.81, 1.0), 9.0, rel_tol=1e-12)
    assert K_z(0.0, 1.0) == 0.0
    assert K_z(1e-12, 1.0) < 1e-5
    with pytest.raises(DomainError):
        K_z(1.0, 1.0)

    print("[OK] Constante K_z funcionando")
    print()


def test_solver_z_sem_certificado():
    """Q ≡ 1 com ρ além do alcance de N_max: erro com dados parciais, nunca raiz sem certificado"""
    print("=" * 60)
    print("TESTE 7: Solver de z sem certificado")
    print("=" * 60)

    Q1 = _q_constante()
    for rho in (1e5, 1e6):
        with pytest.raises(EstimationError) as exc:
            solve_z(Q1, rho)
        parcial = exc.value.partial
        print(f"  rho={rho:g}: z={parcial['z']:.6f}, massa em [{parcial['mass_lower']:g}, {parcial['mass_upper']:g}]")
        assert parcial["rho"] == rho
        assert parcial["N_max"] == 1024
        assert parcial["mass_lower"] <= parcial["mass_upper"]
        assert parcial["mass_upper"] - parcial["mass_lower"] > 1e-8 * rho

    # z/(1−z)² = 100 fica ao alcance de N_max = 1024
    perfil = solve_z(Q1, 100.0)
    assert math.isclose(perfil.z / (1.0 - perfil.z) ** 2, 100.0, rel_tol=1e-9)
    assert perfil.tail_mass_bound < 1e-6

    print("[OK] Solver de z sem certificado funcionando")
    print()


@settings(max_examples=40, derandomize=True, deadline=None)
@given(f1=st.floats(min_value=0.01, max_value=0.95), f2=st.floats(min_value=0.01, max_value=0.95))
def test_solver_z_monotono(f1, f2):
    """ρ₁ < ρ₂ implica z(ρ₁) < z(ρ₂)"""
    assume(abs(f1 - f2) > 1e-6)
    Q = _Q_REPR_CACHE
    a, b = sorted((f1, f2))
    z1 = solve_z(Q, a * Q.rho_s).z
    z2 = solve_z(Q, b * Q.rho_s).z
    assert 0 < z1 < z2 < Q.z_s


if __name__ == "__main__":
    print()
    print("*" * 60)
    print("TESTES DE EQUILIBRIO")
    print("*" * 60)
    print()

    test_sequencia_q()
    test_monomero_critico()
    test_massa_critica()
    test_solver_z()
    test_serie_de_particao()
    test_massa_geometrica_propriedade()
    test_constante_de_proximidade()
    test_solver_z_sem_certificado()
    test_solver_z_monotono()

    print("=" * 60)
    print("TODOS OS TESTES PASSARAM")
    print("=" * 60)
