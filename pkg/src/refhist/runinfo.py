"""Provenance headers, run fingerprints and the key=value config format."""

from __future__ import annotations

import ast
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Iterable, Iterator

from . import __version__
from .errors import RefhistError

CREATED_KEY = "created"


_STAMP_LINES = tuple(f"{p}{CREATED_KEY}: ".encode() for p in ("# ", "// "))


def file_digest(path: str | Path) -> str:
    """Content digest; creation stamps of upstream headers are left out so reruns chain identically."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for line in fh:
            if not line.startswith(_STAMP_LINES):
                h.update(line)
    return h.hexdigest()[:16]


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def fingerprint(stage: str, config: dict, inputs: Iterable[str | Path]) -> str:
    parts = [__version__, stage, config_hash(config)] + [file_digest(p) for p in inputs]
    return hashlib.sha256("|".join(parts).encode()).hexdigest()[:16]


def header_fields(stage: str, config: dict, seeds: dict, fp: str) -> dict:
    return {
        "refhist": __version__,
        "stage": stage,
        "config": config_hash(config),
        "seeds": json.dumps(seeds, sort_keys=True),
        "fingerprint": fp,
        CREATED_KEY: datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    }


def write_header(out: IO[str], fields: dict, prefix: str = "# ") -> None:
    for k, v in fields.items():
        out.write(f"{prefix}{k}: {v}\n")


def read_header(path: str | Path, prefix: str = "# ") -> dict:
    """Header fields of a text output; JSON outputs keep them under ``"header"``."""
    out: dict = {}
    try:
        with open(path, encoding="utf-8") as fh:
            first = fh.read(1)
            fh.seek(0)
            if first == "{":
                doc = json.load(fh)
                return dict(doc.get("header", {})) if isinstance(doc, dict) else {}
            for line in fh:
                if not line.startswith(prefix.rstrip()):
                    break
                body = line[len(prefix):].rstrip("\n")
                if ": " in body:
                    k, v = body.split(": ", 1)
                    out[k] = v
    except (OSError, ValueError):
        return {}
    return out


def up_to_date(outputs: Iterable[str | Path], fp: str) -> bool:
    """All outputs exist and the first one carries fingerprint ``fp``."""
    outputs = [Path(p) for p in outputs]
    if not outputs or not all(p.exists() for p in outputs):
        return False
    prefix = "// " if outputs[0].suffix == ".dot" else "# "
    return read_header(outputs[0], prefix).get("fingerprint") == fp


def data_lines(stream: Iterable[str]) -> Iterator[str]:
    """Lines of a text output with header comments removed."""
    for line in stream:
        if not line.startswith("#"):
            yield line


def parse_config(text: str, section: str | None = None) -> dict:
    """Flat ``key = value`` settings with optional ``[section]`` blocks.

    Keys before any section apply to every subcommand; keys inside
    ``[name]`` apply only when ``section == name``.  Values are Python-style
    literals (numbers, quoted strings, lists, ``true``/``false``); anything
    else is taken as a bare string.
    """
    out: dict = {}
    current = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        line = line.split(" #", 1)[0].strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            continue
        if "=" not in line:
            raise RefhistError(f"config line {n}: expected key = value")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if current is not None and current != section:
            continue
        out[key] = _literal(value)
    return out


def _literal(value: str):
    lowered = value.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return ast.literal_eval(value)
    except (ValueError, SyntaxError):
        return value
