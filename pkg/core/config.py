#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
config.py

Arquivo de execução em TOML -> RunConfig validado (pydantic, chaves extras proibidas).

Exemplo mínimo:

    N = 200
    scenario = "simulate"

    [kernel]
    preset = "representativo"

    [initial]
    preset = "monodisperse"
    rho = 1.0
"""

from __future__ import annotations

import json
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from core.dynamics import IntegratorConfig
from core.errors import ConfigError, DomainError
from core.kernel import FAMILIAS_VALIDAS
from core.presets import INITIAL_PRESETS, KERNEL_PRESETS

CENARIOS = ("simulate", "equilibrium", "probe", "truncation_study", "rate_study", "convergence_study")
DINAMICOS = ("simulate", "truncation_study", "rate_study")


class _Secao(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class KernelSection(_Secao):
    preset: Optional[str] = None
    family: Optional[str] = None
    lam: Optional[float] = Field(default=None, alias="lambda")
    coag_scale: Optional[float] = None
    gibbs_scale: Optional[float] = None
    surface_exponent: Optional[float] = None
    cutoff: Optional[int] = None
    bd_a: Optional[List[float]] = None
    bd_b: Optional[List[float]] = None
    table_path: Optional[str] = None
    growth_K: Optional[float] = None
    growth_gamma: Optional[float] = None

    @field_validator("preset")
    @classmethod
    def _preset_conhecido(cls, v: Optional[str]) -> Optional[str]:
        if v is not None and v not in KERNEL_PRESETS:
            raise ValueError(f"preset de kernel desconhecido: {v} (validos: {', '.join(KERNEL_PRESETS)})")
        return v

    @field_validator("family")
    @classmethod
    def _familia_conhecida(cls, v: Optional[str]) -> Optional[str]:
        if v is not None and v not in FAMILIAS_VALIDAS:
            raise ValueError(f"familia de kernel desconhecida: {v}")
        return v

    @model_validator(mode="after")
    def _completo(self) -> "KernelSection":
        if self.preset is None and self.family is None:
            raise ValueError("[kernel] exige 'preset' ou 'family'")
        if self.family == "table" and not self.table_path:
            raise ValueError("family = 'table' exige 'table_path'")
        if (self.bd_a is None) != (self.bd_b is None):
            raise ValueError("'bd_a' e 'bd_b' devem vir juntos")
        return self

    def params(self) -> Dict[str, Any]:
        """Parâmetros do preset (se houver) sobrepostos pelas chaves explícitas."""
        base: Dict[str, Any] = dict(KERNEL_PRESETS[self.preset].params) if self.preset else {}
        for k, v in self.model_dump(exclude={"preset"}, exclude_none=True).items():
            base[k] = v
        return base


class InitialSection(_Secao):
    preset: str = "monodisperse"
    rho: Optional[float] = None
    epsilon: float = 0.01
    seed: int = 0
    ratio: float = 0.5
    path: Optional[str] = None
    z_fraction: Optional[float] = None

    @field_validator("preset")
    @classmethod
    def _preset_conhecido(cls, v: str) -> str:
        if v not in INITIAL_PRESETS:
            raise ValueError(f"preset inicial desconhecido: {v} (validos: {', '.join(INITIAL_PRESETS)})")
        return v

    @model_validator(mode="after")
    def _arquivo(self) -> "InitialSection":
        if self.preset == "file" and not self.path:
            raise ValueError("preset = 'file' exige 'path'")
        if self.z_fraction is not None and not (0 < self.z_fraction <= 1):
            raise ValueError("z_fraction deve estar em (0, 1]")
        return self


class IntegratorSection(_Secao):
    rtol: float = 1e-8
    atol: float = 1e-12
    h_init: float = 1e-3
    h_max: float = 1.0
    positivity_floor: float = 0.0
    t_end: float = 1.0
    observer_cadence: float = 0.1
    snapshot_times: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def _consistente(self) -> "IntegratorSection":
        try:
            self.to_integrator()
        except DomainError as exc:
            raise ValueError(str(exc)) from exc
        return self

    def to_integrator(self) -> IntegratorConfig:
        return IntegratorConfig(**self.model_dump(exclude={"snapshot_times"}))


class ProbeSection(_Secao):
    suite: Literal["explicit", "functionals", "ratio", "all"] = "all"
    trials: int = Field(default=10_000, ge=1)
    seed: int = 42
    workers: int = Field(default=1, ge=1)


class StudySection(_Secao):
    N_list: List[int] = Field(default_factory=lambda: [100, 200, 400])
    rho_factor: Optional[float] = None
    workers: int = Field(default=1, ge=1)

    @field_validator("N_list")
    @classmethod
    def _crescente(cls, v: List[int]) -> List[int]:
        if len(v) < 2 or v != sorted(set(v)) or v[0] < 2:
            raise ValueError("N_list deve ser estritamente crescente, com pelo menos 2 valores >= 2")
        return v


class RunConfig(_Secao):
    N: int = Field(ge=2)
    scenario: Literal["simulate", "equilibrium", "probe", "truncation_study", "rate_study", "convergence_study"]
    output_dir: str = "saida"
    rho: Optional[float] = None
    override_hypotheses: bool = False
    kernel: KernelSection
    initial: InitialSection = Field(default_factory=InitialSection)
    integrator: IntegratorSection = Field(default_factory=IntegratorSection)
    probe: ProbeSection = Field(default_factory=ProbeSection)
    study: StudySection = Field(default_factory=StudySection)

    @model_validator(mode="after")
    def _massa(self) -> "RunConfig":
        rho = self.effective_rho
        if rho is not None and rho < 0:
            raise ValueError("rho deve ser >= 0")
        if self.scenario in DINAMICOS and self.initial.preset not in ("equilibrium", "file"):
            if rho is None and self.study.rho_factor is None:
                raise ValueError(f"cenario {self.scenario} exige 'rho' ou 'study.rho_factor'")
            if rho is not None and rho <= 0:
                raise ValueError(f"cenario {self.scenario} exige rho > 0")
        return self

    @property
    def effective_rho(self) -> Optional[float]:
        return self.rho if self.rho is not None else self.initial.rho


# ---------------------------------------------------------------------------
# Leitura e escrita
# ---------------------------------------------------------------------------

_LINHA_TOML = re.compile(r"line (\d+)")


def _line_of(text: str, key: str) -> Optional[int]:
    """Linha (1-based) onde a última parte da chave aparece como atribuição ou seção."""
    ultima = key.split(".")[-1]
    padrao = re.compile(rf"^\s*(\[{re.escape(ultima)}\]|{re.escape(ultima)}\s*=)")
    for n, linha in enumerate(text.splitlines(), start=1):
        if padrao.match(linha):
            return n
    return None


def loads_config(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = _LINHA_TOML.search(str(exc))
        raise ConfigError(f"TOML invalido: {exc}", line=int(m.group(1)) if m else None) from exc
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        chave = ".".join(str(p) for p in err["loc"]) or None
        linha = _line_of(text, chave) if chave else None
        raise ConfigError(err["msg"], key=chave, line=linha) from exc


def parse_config(path: Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"nao foi possivel ler {path}: {exc}") from exc
    return loads_config(text)


def _toml_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v, ensure_ascii=False)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"tipo sem representacao TOML: {type(v).__name__}")


def dump_config(cfg: RunConfig) -> str:
    """TOML do esquema fixo; parse_config(dump_config(c)) == c."""
    data = cfg.model_dump(by_alias=True, exclude_none=True)
    linhas: List[str] = []
    secoes = {k: v for k, v in data.items() if isinstance(v, dict)}
    for k, v in data.items():
        if k not in secoes:
            linhas.append(f"{k} = {_toml_value(v)}")
    for nome, campos in secoes.items():
        linhas.append("")
        linhas.append(f"[{nome}]")
        for k, v in campos.items():
            linhas.append(f"{k} = {_toml_value(v)}")
    return "\n".join(linhas) + "\n"


def apply_overrides(cfg: RunConfig, seed: Optional[int] = None, out: Optional[str] = None,
                    N: Optional[int] = None, rho: Optional[float] = None,
                    trials: Optional[int] = None, scenario: Optional[str] = None) -> RunConfig:
    """Flags da linha de comando têm precedência sobre o arquivo."""
    data = cfg.model_dump(by_alias=True, exclude_none=True)
    if seed is not None:
        data["initial"]["seed"] = seed
        data["probe"]["seed"] = seed
    if out is not None:
        data["output_dir"] = out
    if N is not None:
        data["N"] = N
    if rho is not None:
        data["rho"] = rho
    if trials is not None:
        data["probe"]["trials"] = trials
    if scenario is not None:
        data["scenario"] = scenario
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        raise ConfigError(err["msg"], key=".".join(str(p) for p in err["loc"])) from exc
