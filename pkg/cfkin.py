#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Executa um cenário de coagulação-fragmentação descrito num arquivo TOML.

Uso:
  python cfkin.py simulate --config data/run_subcritico.toml
  python cfkin.py equilibrium --config data/run_becker_doring.toml --profile perfil.csv > eq.json
  python cfkin.py probe --config data/run_probe.toml --trials 2000 --seed 7

Códigos de saída: 0 = todas as verificações passaram, 1 = alguma falhou
(ou erro de execução), 2 = erro de configuração.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, List, Optional

from core.config import apply_overrides, parse_config
from core.errors import CfkinError, ConfigError, StiffnessError
from core.report_store import REPORT_FILE, json_safe
from core.scenarios import SCENARIOS, run_equilibrium, scenario_passed

LOG_FORMAT = "%(asctime)s.%(msecs)03d|%(name)s|%(levelname)s| %(message)s"
LOG_DATEFMT = "%Y-%m-%d %H:%M:%S"

SUBCOMANDOS = {
    "simulate": "simulate",
    "equilibrium": "equilibrium",
    "probe": "probe",
    "truncation-study": "truncation_study",
    "rate-study": "rate_study",
    "convergence-study": "convergence_study",
}


def configurar_log(nivel: str, arquivo: Optional[str]) -> None:
    raiz = logging.getLogger()
    raiz.setLevel(getattr(logging, nivel.upper(), logging.WARNING))
    fmt = logging.Formatter(fmt=LOG_FORMAT, datefmt=LOG_DATEFMT)
    handler: logging.Handler = logging.FileHandler(arquivo, encoding="utf-8") if arquivo else logging.StreamHandler(sys.stderr)
    handler.setFormatter(fmt)
    raiz.handlers[:] = [handler]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cfkin", description="Cinetica discreta de coagulacao-fragmentacao.")
    sub = ap.add_subparsers(dest="comando", required=True)
    for nome in SUBCOMANDOS:
        p = sub.add_parser(nome)
        p.add_argument("--config", required=True, help="Arquivo TOML da execucao.")
        p.add_argument("--seed", type=int, default=None, help="Sobrepoe initial.seed e probe.seed.")
        p.add_argument("--out", default=None, help="Diretorio de saida.")
        p.add_argument("--N", type=int, default=None, help="Tamanho do truncamento.")
        p.add_argument("--rho", type=float, default=None, help="Massa total.")
        p.add_argument("--trials", type=int, default=None, help="Tentativas por sonda.")
        p.add_argument("--log-level", default="WARNING")
        p.add_argument("--log-file", default=None)
        if nome == "equilibrium":
            p.add_argument("--profile", default=None, help="CSV com i,Q_i z^i do perfil de equilibrio.")
    return ap


def _falhas(resultado: Any) -> List[str]:
    if isinstance(resultado, dict):
        checks = resultado.get("checks") or {}
        if "probes" in resultado:
            return [n for n, p in resultado["probes"].items() if not p.get("passed", True)]
        return [k for k, v in checks.items() if not v]
    checks = getattr(resultado, "checks", None) or getattr(resultado, "verdict", {})
    return [k for k, v in checks.items() if not v]


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configurar_log(args.log_level, args.log_file)
    cenario = SUBCOMANDOS[args.comando]

    try:
        cfg = parse_config(Path(args.config))
        cfg = apply_overrides(cfg, seed=args.seed, out=args.out, N=args.N, rho=args.rho, trials=args.trials,
                              scenario=cenario)
    except ConfigError as exc:
        print(f"[ERRO] configuracao: {exc}", file=sys.stderr)
        return 2

    try:
        if cenario == "equilibrium" and args.profile:
            resultado = run_equilibrium(cfg, profile_path=Path(args.profile))
        else:
            resultado = SCENARIOS[cenario](cfg)
    except ConfigError as exc:
        print(f"[ERRO] configuracao: {exc}", file=sys.stderr)
        return 2
    except StiffnessError as exc:
        print(f"[ERRO] {exc} ({len(exc.records)} registros parciais gravados)", file=sys.stderr)
        return 1
    except CfkinError as exc:
        print(f"[ERRO] {exc}", file=sys.stderr)
        return 1

    ok = scenario_passed(resultado)
    if cenario == "equilibrium":
        print(json.dumps(json_safe(resultado), ensure_ascii=False, indent=2, sort_keys=True))
        return 0 if ok else 1

    falhas = _falhas(resultado)
    print(f"=== {args.comando} concluido ===")
    print(f"saida: {Path(cfg.output_dir) / REPORT_FILE}")
    print(f"veredito: {'OK' if ok else 'FALHOU'}")
    if falhas:
        print(f"falhas: {', '.join(falhas)}")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
