from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable

import numpy as np

from core.dynamics import State
from core.functionals import CSV_FIELDS, DiagnosticsRecord

SERIES_FILE = "diagnostics.csv"
REPORT_FILE = "report.json"


def fmt(x: float) -> str:
    """Texto decimal com 17 algarismos significativos."""
    return format(float(x), ".17g")


def series_file(output_dir: Path) -> Path:
    return Path(output_dir) / SERIES_FILE


def snapshot_file(output_dir: Path, ordinal: int) -> Path:
    return Path(output_dir) / f"snapshot_t{ordinal:03d}.csv"


def write_series(records: Iterable[DiagnosticsRecord], output_dir: Path) -> Path:
    """diagnostics.csv: cabeçalho + uma linha por instante de observação."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    linhas = [",".join(CSV_FIELDS)]
    for r in records:
        linhas.append(",".join(fmt(v) for v in r.row()))
    path = series_file(output_dir)
    path.write_text("\n".join(linhas) + "\n", encoding="utf-8")
    return path


def write_snapshot(state: State, ordinal: int, output_dir: Path) -> Path:
    """snapshot_tNNN.csv com `i,c_i`; NNN é a posição do instante em snapshot_times."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    linhas = ["i,c_i"] + [f"{i},{fmt(c)}" for i, c in enumerate(state.c, start=1)]
    path = snapshot_file(output_dir, ordinal)
    path.write_text("\n".join(linhas) + "\n", encoding="utf-8")
    return path


def write_profile(profile: np.ndarray, path: Path) -> Path:
    """Perfil de equilíbrio `i,Q_i z^i` em CSV (saída de equilibrium --profile)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    linhas = ["i,Q_i z^i"] + [f"{i},{fmt(c)}" for i, c in enumerate(profile, start=1)]
    path.write_text("\n".join(linhas) + "\n", encoding="utf-8")
    return path


def json_safe(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [json_safe(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return json_safe(x.tolist())
    if isinstance(x, Path):
        return str(x)
    return x


def write_report(payload: Dict[str, Any], output_dir: Path) -> Path:
    """report.json ordenado e sem carimbo de hora, para saídas idênticas entre execuções."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    path = output_dir / REPORT_FILE
    path.write_text(json.dumps(json_safe(payload), ensure_ascii=False, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path
