"""Deterministic CSV and manifest emission shared by all CLI commands."""

from __future__ import annotations

import io
from pathlib import Path


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:.17g}"
    s = str(v)
    return s.replace(",", ";").replace("\n", " ")


def csv_bytes(header: list[str], rows) -> bytes:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(format_value(v) for v in row) + "\n")
    return buf.getvalue().encode("utf-8")


def write_csv(path, header: list[str], rows) -> None:
    """Header + rows, floats at 17 significant digits, newline-terminated UTF-8."""
    Path(path).write_bytes(csv_bytes(header, rows))


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln != ""]
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


def read_columns(path) -> dict[str, list[str]]:
    header, rows = read_csv(path)
    cols: dict[str, list[str]] = {h: [] for h in header}
    for row in rows:
        for h, v in zip(header, row):
            cols[h].append(v)
    return cols


def manifest_path(out_path) -> Path:
    return Path(str(out_path) + ".manifest")


def write_manifest(out_path, entries: dict) -> Path:
    """key=value sidecar, written before any data rows."""
    p = manifest_path(out_path)
    lines = [f"{k}={format_value(v)}" for k, v in entries.items()]
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p


def append_manifest(out_path, entries: dict) -> None:
    p = manifest_path(out_path)
    with p.open("a", encoding="utf-8") as fh:
        for k, v in entries.items():
            fh.write(f"{k}={format_value(v)}\n")
