"""Plain-text report files: tab-separated tables and JSON summaries.

Floats are written with ``repr`` so every value round-trips exactly.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from toucontract.errors import DataError

TABLE_HEADER = "# toucontract-table v1"


def config_hash(config: Mapping) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table(path, columns: Sequence[str], rows: Iterable[Mapping]) -> None:
    lines = [TABLE_HEADER, "\t".join(columns)]
    for row in rows:
        lines.append("\t".join(_fmt(row[c]) for c in columns))
    Path(path).write_text("\n".join(lines) + "\n")


def _parse(cell: str):
    if cell in ("true", "false"):
        return cell == "true"
    for cast in (int, float):
        try:
            return cast(cell)
        except ValueError:
            pass
    return cell


def read_table(path) -> list[dict]:
    lines = Path(path).read_text().splitlines()
    if len(lines) < 2 or lines[0] != TABLE_HEADER:
        raise DataError(f"{path}: not a toucontract table")
    columns = lines[1].split("\t")
    rows = []
    for n, line in enumerate(lines[2:], start=3):
        cells = line.split("\t")
        if len(cells) != len(columns):
            raise DataError(f"{path}:{n}: expected {len(columns)} cells, got {len(cells)}")
        rows.append({c: _parse(v) for c, v in zip(columns, cells)})
    return rows


def write_summary(path, summary: Mapping) -> None:
    Path(path).write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")


def read_summary(path) -> dict:
    return json.loads(Path(path).read_text())
