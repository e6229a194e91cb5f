"""CSV output with a stable column order and lossless floats.

Files are RFC 4180 CSV with LF line endings. Floats are written with 17
significant digits so they parse back to the same double. An optional block
of ``# key: value`` comment lines may precede the header row.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import typing
from pathlib import Path

SCHEMA_VERSION = 1


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return "%.17g" % v
    return str(v)


def _as_dict(rec) -> dict:
    if dataclasses.is_dataclass(rec):
        return {f.name: getattr(rec, f.name) for f in dataclasses.fields(rec)}
    return dict(rec)


def emit_csv(records, path, columns=None, metadata: dict | None = None) -> None:
    """Write ``records`` (dataclass instances or dicts) to ``path``.

    ``columns`` fixes the column order; by default it is the field order of a
    dataclass type, or the key order of the first dict. Missing values are
    written as empty cells.
    """
    records = list(records)
    rows = [_as_dict(r) for r in records]
    if columns is None:
        if records and dataclasses.is_dataclass(records[0]):
            columns = [f.name for f in dataclasses.fields(records[0])]
        elif rows:
            columns = list(rows[0])
        else:
            raise ValueError("columns are required for an empty record set")
    buf = io.StringIO()
    for key, value in (metadata or {}).items():
        text = format_value(value).replace("\n", " ")
        buf.write(f"# {key}: {text}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])
    try:
        Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def read_csv(path):
    """Return ``(metadata, rows)`` with every cell as a string."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read CSV from {path}: {exc}") from exc
    lines = text.split("\n")
    metadata = {}
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        key, _, value = lines[i][1:].strip().partition(":")
        metadata[key.strip()] = value.strip()
        i += 1
    reader = csv.DictReader(io.StringIO("\n".join(lines[i:])))
    return metadata, list(reader)


def _convert(text: str, tp):
    origin = typing.get_origin(tp)
    if origin is typing.Union or str(origin) == "types.UnionType":
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if text == "":
            return None
        return _convert(text, args[0])
    if tp is bool:
        return text == "true"
    if tp is int:
        return int(text)
    if tp is float:
        return float(text)
    return text


def parse_records(path, cls) -> list:
    """Read a CSV written by :func:`emit_csv` back into ``cls`` instances."""
    hints = typing.get_type_hints(cls)
    _, rows = read_csv(path)
    return [cls(**{k: _convert(v, hints[k]) for k, v in row.items()}) for row in rows]
