#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
test_config.py

Testa leitura, validação e escrita do arquivo de execução TOML,
e os códigos de saída da linha de comando para configurações ruins.
"""

from pathlib import Path

import pytest

import cfkin
from core.config import apply_overrides, dump_config, loads_config, parse_config
from core.errors import ConfigError

DATA = Path(__file__).parent / "data"

MINIMO = """\
N = 200
scenario = "simulate"

[kernel]
preset = "representativo"

[initial]
preset = "monodisperse"
rho = 1.0
"""


def test_arquivos_de_exemplo():
    """Todos os arquivos de data/ validam"""
    print("=" * 60)
    print("TESTE 1: Arquivos de exemplo")
    print("=" * 60)

    nomes = sorted(DATA.glob("run_*.toml"))
    assert len(nomes) >= 5
    for p in nomes:
        cfg = parse_config(p)
        print(f"  {p.name}: {cfg.scenario}, N={cfg.N}")

    sub = parse_config(DATA / "run_subcritico.toml")
    assert sub.study.rho_factor == 0.5
    assert sub.integrator.snapshot_times == [0.0, 10.0, 100.0, 1000.0]
    assert sub.kernel.params()["lam"] == 0.5

    print("[OK] Arquivos de exemplo funcionando")
    print()


def test_ida_e_volta():
    """parse -> dump -> parse devolve o mesmo modelo"""
    print("=" * 60)
    print("TESTE 2: Ida e volta")
    print("=" * 60)

    for texto in (MINIMO, (DATA / "run_subcritico.toml").read_text(encoding="utf-8"),
                  (DATA / "run_becker_doring.toml").read_text(encoding="utf-8")):
        cfg = loads_config(texto)
        assert loads_config(dump_config(cfg)) == cfg

    cfg = loads_config(MINIMO.replace('preset = "representativo"', 'preset = "representativo"\nlambda = 0.25'))
    assert cfg.kernel.lam == 0.25
    assert "lambda = 0.25" in dump_config(cfg)

    print("[OK] Ida e volta funcionando")
    print()


def test_erros_nomeiam_a_chave():
    """Chave desconhecida, valor inválido e TOML quebrado"""
    print("=" * 60)
    print("TESTE 3: Erros de configuração")
    print("=" * 60)

    with pytest.raises(ConfigError) as exc:
        loads_config(MINIMO + "cor = 3\n")
    assert exc.value.key == "initial.cor"
    assert exc.value.line == 10
    print(f"  {exc.value}")

    with pytest.raises(ConfigError) as exc:
        loads_config(MINIMO.replace('preset = "monodisperse"', 'preset = "gaussiano"'))
    assert exc.value.key == "initial.preset"

    with pytest.raises(ConfigError) as exc:
        loads_config(MINIMO.replace("rho = 1.0", ""))
    assert "rho" in str(exc.value)

    with pytest.raises(ConfigError) as exc:
        loads_config(MINIMO + "\n[study]\nN_list = [200, 100]\n")
    assert exc.value.key == "study.N_list"

    with pytest.raises(ConfigError) as exc:
        loads_config("N = 200\nscenario = \n")
    assert exc.value.line == 2

    with pytest.raises(ConfigError):
        parse_config(DATA / "nao_existe.toml")

    print("[OK] Erros de configuração funcionando")
    print()


def test_sobreposicoes():
    """Flags da linha de comando vencem o arquivo"""
    print("=" * 60)
    print("TESTE 4: Sobreposições")
    print("=" * 60)

    cfg = parse_config(DATA / "run_probe.toml")
    novo = apply_overrides(cfg, seed=7, trials=50, out="outra", N=64)
    assert novo.probe.seed == 7
    assert novo.initial.seed == 7
    assert novo.probe.trials == 50
    assert novo.output_dir == "outra"
    assert novo.N == 64
    assert cfg.probe.seed == 42

    eq = apply_overrides(cfg, scenario="equilibrium", rho=1.5)
    assert eq.scenario == "equilibrium" and eq.rho == 1.5

    with pytest.raises(ConfigError) as exc:
        apply_overrides(cfg, N=1)
    assert exc.value.key == "N"

    print("[OK] Sobreposições funcionando")
    print()


def test_cli_codigo_de_saida_configuracao(tmp_path, capsys):
    """Configuração inválida: código 2, sem rodar nada"""
    print("=" * 60)
    print("TESTE 5: Código de saída da CLI")
    print("=" * 60)

    ruim = tmp_path / "ruim.toml"
    ruim.write_text(MINIMO + "cor = 3\n", encoding="utf-8")
    assert cfkin.main(["simulate", "--config", str(ruim)]) == 2
    assert "initial.cor" in capsys.readouterr().err

    assert cfkin.main(["simulate", "--config", str(tmp_path / "nada.toml")]) == 2

    # --N abaixo do mínimo também é erro de configuração
    bom = tmp_path / "bom.toml"
    bom.write_text(MINIMO, encoding="utf-8")
    assert cfkin.main(["simulate", "--config", str(bom), "--N", "1"]) == 2

    print("[OK] Código de saída da CLI funcionando")
    print()


if __name__ == "__main__":
    print()
    print("*" * 60)
    print("TESTES DE CONFIGURACAO")
    print("*" * 60)
    print()

    test_arquivos_de_exemplo()
    test_ida_e_volta()
    test_erros_nomeiam_a_chave()
    test_sobreposicoes()
    print("(TESTE 5 exige pytest: use 'pytest test_config.py')")
    print()

    print("=" * 60)
    print("TODOS OS TESTES PASSARAM")
    print("=" * 60)
