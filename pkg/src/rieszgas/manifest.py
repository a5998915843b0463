"""Experiment manifests: flat key-value config files, canonical hashing,
and deterministic CSV/JSON writers.

A manifest fully determines a run byte-for-byte given the same build; every
output file carries the manifest hash in a leading comment line.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path


def parse_config(text: str) -> dict:
    """Flat `key = value` lines; '#' starts a comment; values stay strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path) -> dict:
    return parse_config(Path(path).read_text())


def manifest_hash(manifest: dict) -> str:
    canon = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def get_typed(cfg: dict, key: str, typ, default=None, required: bool = False):
    if key not in cfg:
        if required:
            raise ValueError(f"missing required config key {key!r}")
        return default
    raw = cfg[key]
    if typ is bool:
        return raw.lower() in ("1", "true", "yes", "on")
    if typ is list:
        return [float(v) for v in raw.split(",") if v.strip()]
    return typ(raw)


def format_float(x: float) -> str:
    """Shortest round-trip decimal; '.' separator, locale-independent."""
    return repr(float(x))


def write_csv(path, header: list, rows, mhash: str) -> None:
    lines = [f"# manifest_hash={mhash}", ",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, float):
                cells.append(format_float(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(path, payload: dict, mhash: str) -> None:
    payload = {"manifest_hash": mhash, **payload}
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
