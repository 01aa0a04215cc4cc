"""Schema-versioned CSV rows and the saturation-error TSV."""

from __future__ import annotations

import csv
import os

__all__ = ["COLUMNS", "SCHEMA_VERSION", "SchemaError", "emit_csv", "read_csv", "write_saturation_tsv"]

SCHEMA_VERSION = 1
COLUMNS = (
    "schema", "preset", "algorithm", "target", "d", "h", "tau", "gamma", "M", "N",
    "seed", "phi", "weak_error", "mc_stderr", "cost_partials", "status", "wall_ms",
)


class SchemaError(ValueError):
    pass


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)  # shortest round-trip form
    return str(value)


def emit_csv(rows, path, append=False):
    """Write ``rows`` (mappings keyed by :data:`COLUMNS`) to ``path``.

    With ``append=True`` rows are added to an existing file after checking
    its header; a missing or empty file gets a fresh header.
    """
    path = os.fspath(path)
    exists = append and os.path.exists(path) and os.path.getsize(path) > 0
    if exists:
        with open(path, newline="") as fh:
            header = next(csv.reader(fh), None)
        if tuple(header or ()) != COLUMNS:
            raise SchemaError(f"{path}: header does not match schema {SCHEMA_VERSION}")
    try:
        fh = open(path, "a" if exists else "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    with fh:
        w = csv.writer(fh, lineterminator="\n")
        if not exists:
            w.writerow(COLUMNS)
        for row in rows:
            extra = set(row) - set(COLUMNS) - {"saturation_error"}
            if extra:
                raise ValueError(f"unknown columns {sorted(extra)}")
            out = {**row, "schema": SCHEMA_VERSION}
            w.writerow([_fmt(out.get(c)) for c in COLUMNS])


def read_csv(path):
    """Rows as dicts of strings; rejects files from another schema version."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise SchemaError(f"{path}: unexpected columns {reader.fieldnames}")
        rows = list(reader)
    for k, row in enumerate(rows):
        if row["schema"] != str(SCHEMA_VERSION):
            raise SchemaError(f"{path}: row {k + 1} has schema {row['schema']!r}, expected {SCHEMA_VERSION}")
    return rows


def write_saturation_tsv(pairs, path):
    """``algorithm  h  saturation_error`` lines for plotting scripts."""
    with open(path, "w") as fh:
        fh.write("algorithm\th\tsaturation_error\n")
        for alg, h, err in pairs:
            fh.write(f"{alg}\t{h!r}\t{err!r}\n")
