"""Report serialization: deterministic CSV/JSON artifacts and a checksum manifest.

Floats are written with repr (shortest round-trip form) so identical runs
produce byte-identical files. All writes go through a temp-file rename.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Mapping, Sequence


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def rows_to_json(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    payload = [dict(zip(header, row)) for row in rows]
    return json.dumps(payload, indent=2) + "\n"


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def write_report(out_dir: Path, name: str, header, rows, fmt: str) -> tuple[str, str]:
    """Write one report; returns (filename, sha256)."""
    if fmt == "json":
        text = rows_to_json(header, rows)
        filename = f"{name}.json"
    else:
        text = rows_to_csv(header, rows)
        filename = f"{name}.csv"
    atomic_write_text(out_dir / filename, text)
    return filename, sha256_hex(text)


def write_manifest(out_dir: Path, entries: Mapping[str, str]) -> Path:
    """entries: filename -> sha256. Written sorted for reproducibility."""
    doc = {
        "artifacts": [
            {"file": name, "sha256": entries[name]} for name in sorted(entries)
        ]
    }
    text = json.dumps(doc, indent=2) + "\n"
    path = out_dir / "manifest.json"
    atomic_write_text(path, text)
    return path
