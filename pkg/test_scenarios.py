#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
test_scenarios.py

Testa os cenários de ponta a ponta: simulate, equilibrium, rate_study,
convergence_study e truncation_study, e a saída da linha de comando.
Valida que:
- a execução de referência conserva massa e satisfaz o teorema H
- arquivos de saída se repetem byte a byte com a mesma configuração
- os vereditos de regime usam o colchete certificado de ρ_s

Os testes longos (N = 400, T = 10³) levam a marca slow:
    pytest -m "not slow"
"""

import copy
import json
import math
from pathlib import Path

import numpy as np
import pytest

import cfkin
from core.config import RunConfig, apply_overrides, parse_config
from core.dynamics import State
from core.equilibrium import build_Q, solve_z, with_critical_values
from core.errors import PreconditionError
from core.functionals import DiagnosticsRecord
from core.presets import equilibrium_state, make_kernel
from core.report_store import REPORT_FILE, SERIES_FILE, snapshot_file
from core.scenarios import (
    _supercritical_checks,
    assess_rate,
    classify_regime,
    initial_state,
    run_convergence_study,
    run_equilibrium,
    run_rate_study,
    run_simulation,
    run_truncation_study,
)

DATA = Path(__file__).parent / "data"
Q = with_critical_values(build_Q(make_kernel("representativo", 1024), 1024))

BASE = {
    "N": 200,
    "scenario": "simulate",
    "kernel": {"preset": "representativo"},
    "initial": {"preset": "monodisperse", "rho": 1.0},
    "integrator": {"t_end": 100.0, "observer_cadence": 0.1},
}


def _cfg(saida, **campos):
    data = copy.deepcopy(BASE)
    for k, v in campos.items():
        if isinstance(v, dict):
            data.setdefault(k, {}).update(v)
        else:
            data[k] = v
    data["output_dir"] = str(saida)
    return RunConfig.model_validate(data)


def _registro(t, F):
    return DiagnosticsRecord(t=t, mass=1.0, c1=0.1, V=F, F_z=F, D_CF=0.0, D_BD=0.0, M_2mlambda=1.0,
                             dist_eq=F, tail_mass=0.0, clamped_mass=0.0)


def test_regimes():
    """Subcrítico, supercrítico e dentro do colchete"""
    print("=" * 60)
    print("TESTE 1: Regimes")
    print("=" * 60)

    lo, hi = Q.rho_s_bracket
    assert classify_regime(0.5 * Q.rho_s, Q) == "subcritical"
    assert classify_regime(2.0 * Q.rho_s, Q) == "supercritical"
    assert classify_regime(0.5 * (lo + hi), Q) == "critical-indeterminate"

    Q1 = with_critical_values(build_Q(make_kernel("sem_gibbs", 1024), 1024))
    assert classify_regime(1e6, Q1) == "subcritical"

    print(f"  rho_s em [{lo:.10f}, {hi:.10f}]")
    print("[OK] Regimes funcionando")
    print()


def test_avaliacao_de_taxa_sintetica():
    """Patamar de F_z·(1 + log(1+t)) em séries construídas"""
    print("=" * 60)
    print("TESTE 2: Avaliação de taxa")
    print("=" * 60)

    ts = np.arange(0.0, 1001.0, 10.0)
    patamar = [_registro(float(t), 3.0 / (1.0 + math.log1p(t))) for t in ts]
    checks, det = assess_rate(patamar, 1000.0, 1e-8)
    assert all(checks.values())
    assert math.isclose(det["F_z_times_logfactor_max"], 3.0, rel_tol=1e-12)

    lento = [_registro(float(t), 1.0 / (1.0 + math.log1p(t)) ** 0.5) for t in ts]
    checks, _ = assess_rate(lento, 1000.0, 1e-8)
    assert checks["F_nonincreasing"]
    assert not checks["logfactor_plateau"]

    subindo = [_registro(float(t), 1e-3 * (1.0 + t)) for t in ts]
    checks, _ = assess_rate(subindo, 1000.0, 1e-8)
    assert not checks["F_nonincreasing"]
    assert not checks["F_below_initial"]

    print("[OK] Avaliação de taxa funcionando")
    print()


def test_verificacoes_supercriticas():
    """Perfil Q_i z_s^i com a cauda exata passa; c1 deslocado falha"""
    print("=" * 60)
    print("TESTE 3: Verificações supercríticas")
    print("=" * 60)

    N = 200
    final = equilibrium_state(Q, Q.z_s, N)
    rho = 2.0 * Q.rho_s
    checks, det = _supercritical_checks(final, Q, rho, rho - Q.rho_s)
    assert all(checks.values())
    assert det["thresholds"]["engineering_choice"]
    assert det["weak_star_distance"] == 0.0

    c = final.c.copy()
    c[0] *= 0.9
    checks, _ = _supercritical_checks(State(final.t, c), Q, rho, 0.5 * (rho - Q.rho_s))
    assert not checks["c1_near_zs"]
    assert not checks["small_sizes_profile"]
    assert not checks["tail_mass_accounts_excess"]

    print("[OK] Verificações supercríticas funcionando")
    print()


def test_equilibrio(tmp_path):
    """Cenário equilibrium: z(ρ), z_s e relatório"""
    print("=" * 60)
    print("TESTE 4: Cenário de equilíbrio")
    print("=" * 60)

    cfg = _cfg(tmp_path / "eq", scenario="equilibrium")
    payload = run_equilibrium(cfg)
    assert payload["regime"] == "subcritical"
    assert abs(payload["z_s"] - math.exp(-1.0)) < 1e-6
    assert math.isclose(payload["z"], solve_z(Q, 1.0).z, rel_tol=1e-10)
    assert payload["passed"]
    assert (tmp_path / "eq" / REPORT_FILE).exists()

    zero = run_convergence_study(_cfg(tmp_path / "zero", scenario="convergence_study", rho=0.0,
                                      initial={"rho": 0.0}))
    assert zero.passed
    assert zero.verdict == {"degenerate_zero_mass": True}

    print(f"  z(1) = {payload['z']:.12f}")
    print("[OK] Cenário de equilíbrio funcionando")
    print()


def test_simulacao_de_referencia(tmp_path):
    """N = 200, ρ = 1, T = 100: massa, teorema H, momento e determinismo"""
    print("=" * 60)
    print("TESTE 5: Simulação de referência")
    print("=" * 60)

    cfg = _cfg(tmp_path / "a", integrator={"snapshot_times": [0.0, 50.0]})
    out = run_simulation(cfg)
    for nome, ok in out.checks.items():
        print(f"  {nome}: {ok}")
    assert out.passed
    assert out.details["relative_mass_drift"] <= 1e-6
    assert out.details["h_theorem"]["fd_checked"] > 0
    assert out.details["rows"] == 1001

    linhas = (tmp_path / "a" / SERIES_FILE).read_text(encoding="utf-8").splitlines()
    assert len(linhas) == 1002
    assert linhas[0] == "t,mass,c1,V,F_z,D_CF,D_BD,M_2mlambda,dist_eq,tail_mass,clamped_mass"
    assert snapshot_file(tmp_path / "a", 1).exists()

    run_simulation(apply_overrides(cfg, out=str(tmp_path / "b")))
    assert (tmp_path / "a" / SERIES_FILE).read_bytes() == (tmp_path / "b" / SERIES_FILE).read_bytes()
    assert (tmp_path / "a" / REPORT_FILE).read_bytes() == (tmp_path / "b" / REPORT_FILE).read_bytes()

    # o snapshot reabre como dado inicial
    novo = _cfg(tmp_path / "c", initial={"preset": "file", "path": str(snapshot_file(tmp_path / "a", 1))})
    s0, z = initial_state(novo, Q, 200, None)
    assert z is None
    assert math.isclose(s0.mass, 1.0, rel_tol=1e-6)

    print("[OK] Simulação de referência funcionando")
    print()


def test_estudo_de_taxa_exige_subcritico(tmp_path):
    """rate_study com ρ = 2ρ_s é rejeitado antes de integrar"""
    cfg = _cfg(tmp_path, N=100, scenario="rate_study", initial={"rho": None}, study={"rho_factor": 2.0})
    with pytest.raises(PreconditionError):
        run_rate_study(cfg)
    assert not (tmp_path / SERIES_FILE).exists()


def test_cli_equilibrio_json(tmp_path, capsys):
    """equilibrium imprime só o JSON no stdout"""
    print("=" * 60)
    print("TESTE 6: CLI equilibrium")
    print("=" * 60)

    capsys.readouterr()
    codigo = cfkin.main(["equilibrium", "--config", str(DATA / "run_subcritico.toml"), "--out", str(tmp_path)])
    saida = json.loads(capsys.readouterr().out)
    assert codigo == 0
    assert saida["regime"] == "subcritical"
    assert math.isclose(saida["rho"], 0.5 * Q.rho_s, rel_tol=1e-9)
    assert 0 < saida["z"] < saida["z_s"]

    print("[OK] CLI equilibrium funcionando")
    print()


def test_cli_equilibrio_perfil(tmp_path, capsys):
    """--profile grava i,Q_i z^i com 17 algarismos, uma linha por tamanho"""
    print("=" * 60)
    print("TESTE 7: CLI equilibrium com perfil")
    print("=" * 60)

    perfil = tmp_path / "perfil" / "eq.csv"
    capsys.readouterr()
    codigo = cfkin.main(["equilibrium", "--config", str(DATA / "run_subcritico.toml"), "--out", str(tmp_path),
                         "--N", "50", "--profile", str(perfil)])
    saida = json.loads(capsys.readouterr().out)
    assert codigo == 0
    assert saida["profile_file"] == str(perfil)
    assert saida["profile_z"] == saida["z"]

    linhas = perfil.read_text(encoding="utf-8").splitlines()
    assert linhas[0] == "i,Q_i z^i"
    assert len(linhas) == 51
    z = saida["z"]
    i1, c1 = linhas[1].split(",")
    assert i1 == "1"
    assert math.isclose(float(c1), z, rel_tol=1e-14)
    i7, c7 = linhas[7].split(",")
    assert math.isclose(float(c7), math.exp(Q.log_Q[7] + 7 * math.log(z)), rel_tol=1e-12)
    assert c7 == format(float(c7), ".17g")

    print("[OK] CLI equilibrium com perfil funcionando")
    print()


# ---------------------------------------------------------------------------
# Execuções longas
# ---------------------------------------------------------------------------

def _subcritico(tmp_path, cenario):
    return apply_overrides(parse_config(DATA / "run_subcritico.toml"), out=str(tmp_path), scenario=cenario)


@pytest.mark.slow
def test_convergencia_subcritica(tmp_path):
    """ρ = ρ_s/2, N = 400, T = 10³: dist_eq(T) <= 10⁻³ρ e decrescente na última década"""
    v = run_convergence_study(_subcritico(tmp_path, "convergence_study"))
    assert v.regime == "subcritical"
    assert v.verdict["dist_eq_small"]
    assert v.verdict["dist_eq_decreasing"]
    assert v.passed


@pytest.mark.slow
def test_estudo_de_taxa(tmp_path):
    """Mesma execução: F_z não cresce e F_z·(1 + log(1+t)) faz patamar"""
    r = run_rate_study(_subcritico(tmp_path, "rate_study"))
    assert r.checks["F_nonincreasing"]
    assert r.checks["F_below_initial"]
    assert r.checks["logfactor_plateau"]


@pytest.mark.slow
def test_convergencia_supercritica(tmp_path):
    """ρ = 2ρ_s: c1 perto de z_s, perfil dos tamanhos pequenos e excesso na cauda"""
    cfg = apply_overrides(parse_config(DATA / "run_supercritico.toml"), out=str(tmp_path))
    v = run_convergence_study(cfg)
    assert v.regime == "supercritical"
    assert not v.report_only
    assert set(v.verdict) == {"c1_near_zs", "small_sizes_profile", "tail_mass_accounts_excess"}
    assert v.details["thresholds"]["engineering_choice"]
    assert v.verdict["c1_near_zs"]
    assert v.verdict["small_sizes_profile"]
    assert v.verdict["tail_mass_accounts_excess"]
    # ρ = 2ρ_s: o excesso é o próprio ρ_s
    excesso = v.details["excess_mass"]
    assert math.isclose(excesso, Q.rho_s, rel_tol=1e-6)
    assert abs(v.details["tail_mass"] - excesso) <= v.details["thresholds"]["tail_rel"] * excesso
    assert abs(v.details["c1_final"] - Q.z_s) <= v.details["thresholds"]["c1_rel"] * Q.z_s
    relatorio = json.loads((tmp_path / REPORT_FILE).read_text(encoding="utf-8"))
    assert relatorio["regime"] == "supercritical"
    print(f"  veredito supercritico: {v.verdict}")


@pytest.mark.slow
def test_estudo_de_truncamento(tmp_path):
    """discrepância(200, 400) < discrepância(100, 200) em T = 100"""
    cfg = _subcritico(tmp_path, "truncation_study")
    dados = cfg.model_dump(by_alias=True)
    dados["integrator"]["t_end"] = 100.0
    dados["integrator"]["snapshot_times"] = []
    payload = run_truncation_study(RunConfig.model_validate(dados))
    print(f"  discrepancias: {payload['consecutive_discrepancies']}")
    assert payload["checks"]["discrepancy_decreasing"]


if __name__ == "__main__":
    import tempfile

    print()
    print("*" * 60)
    print("TESTES DE CENARIOS")
    print("*" * 60)
    print()

    test_regimes()
    test_avaliacao_de_taxa_sintetica()
    test_verificacoes_supercriticas()
    with tempfile.TemporaryDirectory() as d:
        test_equilibrio(Path(d))
    with tempfile.TemporaryDirectory() as d:
        test_simulacao_de_referencia(Path(d))

    print("=" * 60)
    print("TODOS OS TESTES PASSARAM")
    print("=" * 60)
