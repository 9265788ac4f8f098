"""Deterministic report writers: JSON and CSV with 17 significant digits, run manifests."""
from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = ["format_float", "dumps", "write_json", "write_csv", "RunManifest"]


def format_float(x: float) -> str:
    """Shortest-form-independent rendering: ``'%.17g'``; non-finite as ``nan``/``inf``/``-inf``."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def _plain(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if not f.name.startswith("_")}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _render(obj: Any, indent: int) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        s = format_float(obj)
        return s if math.isfinite(obj) else f'"{s}"'
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{_render(str(k), 0)}: {_render(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_render(v, 0) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + _render(v, indent + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj: Any) -> str:
    """JSON text with every float printed to 17 significant digits."""
    return _render(_plain(obj), 0) + "\n"


def write_json(path: str | Path, obj: Any) -> Path:
    p = Path(path)
    p.write_text(dumps(obj), encoding="utf-8")
    return p


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    p = Path(path)
    with p.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else _plain(v)
                        for v in row])
    return p


@dataclasses.dataclass
class RunManifest:
    """Run record rewritten after every state change."""

    path: Path
    config: dict
    version: str
    command: str
    override_hypotheses: bool = False
    started: str = ""
    finished: str | None = None
    stages: dict = dataclasses.field(default_factory=dict)
    files: list = dataclasses.field(default_factory=list)
    hypotheses: dict | None = None
    exit_code: int | None = None

    def __post_init__(self) -> None:
        self.path = Path(self.path)
        if not self.started:
            self.started = _now()
        self.write()

    def stage(self, name: str, status: str, detail: str | None = None) -> None:
        self.stages[name] = {"status": status} if detail is None else {"status": status, "detail": detail}
        self.write()

    def add_file(self, p: Path) -> None:
        rel = str(Path(p).relative_to(self.path.parent))
        if rel not in self.files:
            self.files.append(rel)
        self.write()

    def finalize(self, code: int) -> None:
        self.exit_code = code
        self.finished = _now()
        self.write()

    def write(self) -> None:
        data = {k: v for k, v in dataclasses.asdict(self).items() if k != "path"}
        self.path.write_text(dumps(data), encoding="utf-8")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
