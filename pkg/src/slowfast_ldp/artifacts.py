"""Run artifacts: the CSV interchange format, binary payloads, manifests.

Every CSV starts with exactly eight comment lines: format tag, kind,
config hash, seed, code version, a free meta line, the column list, and
an end marker.  Numbers carry 17 significant digits so downstream
consumers can compare bit-exactly.  Nothing here writes timestamps;
rerunning a config must reproduce every byte.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import numpy as np

__all__ = [
    "CSV_FORMAT",
    "BIN_MAGIC",
    "fmt_float",
    "write_csv",
    "read_csv",
    "meta_dict",
    "write_binary",
    "read_binary",
    "write_json",
    "file_sha256",
    "write_manifest",
    "ArtifactError",
]

CSV_FORMAT = "slowfast-ldp csv 1"
MANIFEST_FORMAT = "slowfast-ldp manifest 1"
BIN_MAGIC = b"SFLDBIN1"

Cell = Union[int, float, str]


class ArtifactError(RuntimeError):
    """Malformed or inconsistent artifact file."""


def fmt_float(x: float) -> str:
    return "%.17g" % float(x)


def _fmt_cell(x: Cell) -> str:
    if isinstance(x, str):
        if "," in x or "\n" in x:
            raise ValueError(f"cell {x!r} would break the row format")
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return fmt_float(x)


def _meta_line(meta: Mapping[str, Cell]) -> str:
    parts = []
    for key, val in meta.items():
        text = _fmt_cell(val)
        if " " in str(key) or " " in text:
            raise ValueError(f"meta entry {key}={text!r} must not contain spaces")
        parts.append(f"{key}={text}")
    return " ".join(parts)


def write_csv(
    path: Union[str, Path],
    kind: str,
    config_hash: str,
    seed: int,
    version: str,
    meta: Mapping[str, Cell],
    columns: Sequence[str],
    rows: Iterable[Sequence[Cell]],
) -> Path:
    path = Path(path)
    lines = [
        f"# {CSV_FORMAT}",
        f"# kind: {kind}",
        f"# config: {config_hash}",
        f"# seed: {seed}",
        f"# version: {version}",
        f"# meta: {_meta_line(meta)}",
        f"# columns: {','.join(columns)}",
        "# end-header",
    ]
    n_cols = len(columns)
    for row in rows:
        if len(row) != n_cols:
            raise ValueError(f"row has {len(row)} cells, expected {n_cols}")
        lines.append(",".join(_fmt_cell(c) for c in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_csv(path: Union[str, Path]) -> Tuple[Dict[str, str], List[str], np.ndarray]:
    """Parse a CSV artifact into (header fields, column names, data).

    Data comes back as a float array (strings are not round-tripped;
    the table artifacts are numeric).  Raises ``ArtifactError`` on any
    deviation from the eight-line header contract.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if len(lines) < 8:
        raise ArtifactError(f"{path}: truncated header")
    if lines[0] != f"# {CSV_FORMAT}":
        raise ArtifactError(f"{path}: bad format line {lines[0]!r}")
    header: Dict[str, str] = {}
    for idx, name in ((1, "kind"), (2, "config"), (3, "seed"), (4, "version"), (5, "meta")):
        prefix = f"# {name}:"
        if not lines[idx].startswith(prefix):
            raise ArtifactError(f"{path}: header line {idx + 1} is not {name!r}")
        header[name] = lines[idx][len(prefix) :].strip()
    if not lines[6].startswith("# columns:"):
        raise ArtifactError(f"{path}: missing columns line")
    columns = [c.strip() for c in lines[6][len("# columns:") :].split(",") if c.strip()]
    if lines[7] != "# end-header":
        raise ArtifactError(f"{path}: missing end-header marker")
    data_rows = []
    for ln in lines[8:]:
        if not ln:
            continue
        cells = ln.split(",")
        if len(cells) != len(columns):
            raise ArtifactError(f"{path}: row with {len(cells)} cells, expected {len(columns)}")
        try:
            data_rows.append([float(c) for c in cells])
        except ValueError:
            raise ArtifactError(f"{path}: non-numeric cell in row {ln!r}")
    data = np.asarray(data_rows, dtype=float) if data_rows else np.empty((0, len(columns)))
    return header, columns, data


def meta_dict(meta_line: str) -> Dict[str, str]:
    """Split a header meta line back into key/value pairs."""
    out: Dict[str, str] = {}
    for tok in meta_line.split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise ArtifactError(f"bad meta token {tok!r}")
        out[key] = val
    return out


def write_binary(path: Union[str, Path], array: np.ndarray) -> Path:
    """Little-endian payload: magic, u32 rows, u32 cols, f64 row-major."""
    a = np.ascontiguousarray(array, dtype="<f8")
    if a.ndim != 2:
        raise ValueError(f"binary payload must be 2-d, got shape {a.shape}")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(BIN_MAGIC)
        fh.write(struct.pack("<II", a.shape[0], a.shape[1]))
        fh.write(a.tobytes())
    return path


def read_binary(path: Union[str, Path]) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[: len(BIN_MAGIC)] != BIN_MAGIC:
        raise ArtifactError(f"{path}: bad magic")
    n_rows, n_cols = struct.unpack_from("<II", raw, len(BIN_MAGIC))
    body = raw[len(BIN_MAGIC) + 8 :]
    if len(body) != 8 * n_rows * n_cols:
        raise ArtifactError(f"{path}: size mismatch for {n_rows}x{n_cols}")
    return np.frombuffer(body, dtype="<f8").reshape(n_rows, n_cols).copy()


def write_json(path: Union[str, Path], payload: Mapping) -> Path:
    path = Path(path)
    path.write_text(
        json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n",
        encoding="utf-8",
    )
    return path


def file_sha256(path: Union[str, Path]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(
    out_dir: Union[str, Path],
    kind: str,
    config_hash: str,
    seed: int,
    version: str,
    status: str,
    notes: Mapping[str, Cell] = (),
) -> Path:
    """Checksum every file in the run directory into manifest.json."""
    out_dir = Path(out_dir)
    files = {
        p.name: file_sha256(p)
        for p in sorted(out_dir.iterdir())
        if p.is_file() and p.name != "manifest.json"
    }
    payload = {
        "format": MANIFEST_FORMAT,
        "kind": kind,
        "config_hash": config_hash,
        "seed": seed,
        "version": version,
        "status": status,
        "notes": dict(notes),
        "files": files,
    }
    return write_json(out_dir / "manifest.json", payload)
