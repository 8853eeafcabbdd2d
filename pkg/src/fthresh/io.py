"""File formats.

CovField binary (``.fcov``)
    One UTF-8 JSON header line ``{"format": "fthresh-covfield", "version": 1,
    "p": p, "R": R, "grid": [...]}`` followed by the upper-triangle blocks
    (j <= k, row-major over j then k) as little-endian float64 R x R arrays.
    The lower triangle is rebuilt by Q_kj(u, v) = Q_jk(v, u).

Dense sample binary (``.fdense``)
    JSON header line ``{"format": "fthresh-dense", "version": 1, "n", "p",
    "R", "grid"}`` followed by the n x p x R values as little-endian float64.

Long CSV files
    dense:   ``subject,variable,u,value`` with every (subject, variable) pair
             observed on the same grid.
    partial: ``subject,variable,u,value``; one row per observation. Subjects
             whose variables share locations form the simplified layout.
    covfield export: ``j,k,r1,r2,value`` for every entry.
    support edge list: ``j,k,norm`` for j <= k entries in the support.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import FormatError, ShapeError
from .full import DenseSample
from .grid import CovField, Grid, hs_norms, symmetrize
from .smoothing import PartialSample

PathLike = Union[str, Path]
_LE = np.dtype("<f8")


def _header(path: Path, fmt: str):
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise FormatError(f"cannot open {path}: {exc}") from exc
    with fh:
        line = fh.readline()
        try:
            head = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: malformed header") from exc
        if not isinstance(head, dict) or head.get("format") != fmt:
            raise FormatError(f"{path}: not a {fmt} file")
        body = fh.read()
    return head, body


def _dump_header(head: dict) -> bytes:
    return (json.dumps(head, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def write_covfield(field: CovField, path: PathLike) -> None:
    p, R = field.p, field.R
    head = {"format": "fthresh-covfield", "version": 1, "p": p, "R": R, "grid": [float(x) for x in field.grid.points]}
    iu = np.triu_indices(p)
    blocks = np.ascontiguousarray(field.values[iu], dtype=_LE)
    with open(path, "wb") as fh:
        fh.write(_dump_header(head))
        fh.write(blocks.tobytes())


def read_covfield(path: PathLike) -> CovField:
    head, body = _header(Path(path), "fthresh-covfield")
    try:
        p, R = int(head["p"]), int(head["R"])
        grid = Grid(np.asarray(head["grid"], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: bad header fields") from exc
    if grid.R != R:
        raise ShapeError(f"{path}: header R={R} but grid has {grid.R} points")
    nblk = p * (p + 1) // 2
    if len(body) != nblk * R * R * 8:
        raise ShapeError(f"{path}: expected {nblk * R * R * 8} data bytes, found {len(body)}")
    blocks = np.frombuffer(body, dtype=_LE).reshape(nblk, R, R).astype(float)
    values = np.zeros((p, p, R, R))
    values[np.triu_indices(p)] = blocks
    return CovField(symmetrize(values), grid)


def export_covfield_csv(field: CovField, path: PathLike) -> None:
    """Long-form debug export ``j,k,r1,r2,value``."""
    p, R = field.p, field.R
    j, k, a, b = np.indices((p, p, R, R)).reshape(4, -1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "k", "r1", "r2", "value"])
        for row in zip(j, k, a, b, field.values.ravel()):
            w.writerow([*map(int, row[:4]), repr(float(row[4]))])


def write_dense_binary(data: DenseSample, path: PathLike) -> None:
    n, p, R = data.values.shape
    head = {"format": "fthresh-dense", "version": 1, "n": n, "p": p, "R": R, "grid": [float(x) for x in data.grid.points]}
    with open(path, "wb") as fh:
        fh.write(_dump_header(head))
        fh.write(np.ascontiguousarray(data.values, dtype=_LE).tobytes())


def read_dense_binary(path: PathLike) -> DenseSample:
    head, body = _header(Path(path), "fthresh-dense")
    try:
        n, p, R = int(head["n"]), int(head["p"]), int(head["R"])
        grid = Grid(np.asarray(head["grid"], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: bad header fields") from exc
    if len(body) != n * p * R * 8:
        raise ShapeError(f"{path}: expected {n * p * R * 8} data bytes, found {len(body)}")
    return DenseSample(np.frombuffer(body, dtype=_LE).reshape(n, p, R).astype(float), grid)


def _read_long_csv(path: PathLike):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise FormatError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["subject", "variable", "u", "value"]:
            raise FormatError(f"{path}: expected header subject,variable,u,value")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append((int(row[0]), int(row[1]), float(row[2]), float(row[3])))
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}:{lineno}: cannot parse row {row!r}") from exc
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return rows


def _write_long_csv(path: PathLike, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject", "variable", "u", "value"])
        for i, j, u, z in rows:
            w.writerow([i, j, repr(float(u)), repr(float(z))])


def write_dense_csv(data: DenseSample, path: PathLike) -> None:
    g = data.grid.points
    _write_long_csv(
        path,
        ((i, j, g[r], data.values[i, j, r]) for i in range(data.n) for j in range(data.p) for r in range(data.grid.R)),
    )


def read_dense_csv(path: PathLike) -> DenseSample:
    rows = _read_long_csv(path)
    subj = sorted({r[0] for r in rows})
    var = sorted({r[1] for r in rows})
    pts = np.array(sorted({r[2] for r in rows}))
    if subj != list(range(len(subj))) or var != list(range(len(var))):
        raise FormatError(f"{path}: subject and variable ids must be 0..n-1 and 0..p-1")
    pos = {u: r for r, u in enumerate(pts)}
    values = np.full((len(subj), len(var), pts.size), np.nan)
    for i, j, u, z in rows:
        values[i, j, pos[u]] = z
    if np.isnan(values).any():
        raise ShapeError(f"{path}: dense input must observe every variable of every subject at every grid point")
    return DenseSample(values, Grid(pts))


def write_partial_csv(data: PartialSample, path: PathLike) -> None:
    _write_long_csv(
        path,
        (
            (i, j, u, z)
            for i in range(data.n)
            for j in range(data.p)
            for u, z in zip(data.locations[i][j], data.values[i][j])
        ),
    )


def read_partial_csv(path: PathLike) -> PartialSample:
    rows = _read_long_csv(path)
    n = max(r[0] for r in rows) + 1
    p = max(r[1] for r in rows) + 1
    if min(r[0] for r in rows) < 0 or min(r[1] for r in rows) < 0:
        raise FormatError(f"{path}: ids must be nonnegative")
    locs = [[[] for _ in range(p)] for _ in range(n)]
    vals = [[[] for _ in range(p)] for _ in range(n)]
    for i, j, u, z in rows:
        locs[i][j].append(u)
        vals[i][j].append(z)
    return PartialSample(locs, vals)


def sniff_csv(path: PathLike) -> str:
    """``dense`` when every (subject, variable) is observed on one common location set, else ``partial``."""
    rows = _read_long_csv(path)
    sets = {}
    for i, j, u, _ in rows:
        sets.setdefault((i, j), []).append(u)
    first = None
    for v in sets.values():
        s = tuple(sorted(v))
        if len(set(s)) != len(s):
            return "partial"
        if first is None:
            first = s
        elif s != first:
            return "partial"
    n = len({k[0] for k in sets})
    p = len({k[1] for k in sets})
    return "dense" if len(sets) == n * p and len(first) >= 2 else "partial"


def load_sample(path: PathLike, kind: Optional[str] = None):
    """Read a dense or partial sample from ``.fdense`` or long CSV, guessing ``kind`` when None."""
    path = Path(path)
    if path.suffix == ".fdense":
        return read_dense_binary(path)
    kind = kind or sniff_csv(path)
    if kind == "dense":
        return read_dense_csv(path)
    if kind == "partial":
        return read_partial_csv(path)
    raise FormatError(f"unknown sample kind {kind!r}")


def write_support_csv(field: CovField, path: PathLike) -> None:
    """Edge list ``j,k,norm`` of supported entries with j <= k."""
    if field.support is None:
        raise ShapeError("field carries no support mask")
    norms = hs_norms(field.values, field.grid.quad_weights)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "k", "norm"])
        for j, k in zip(*np.nonzero(np.triu(field.support))):
            w.writerow([int(j), int(k), repr(float(norms[j, k]))])


def read_support_csv(path: PathLike, p: int) -> np.ndarray:
    mask = np.zeros((p, p), dtype=bool)
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                j, k = int(row["j"]), int(row["k"])
                mask[j, k] = mask[k, j] = True
    except (OSError, KeyError, ValueError) as exc:
        raise FormatError(f"cannot read support list {path}: {exc}") from exc
    return mask


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(obj, path: PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def file_digest(path: PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path: PathLike, command: str, config: dict, outputs) -> dict:
    """Record the resolved configuration and a SHA-256 digest of every output."""
    from . import __version__

    man = {
        "command": command,
        "version": __version__,
        "config": _jsonable(config),
        "outputs": {Path(o).name: file_digest(o) for o in outputs},
    }
    write_json(man, path)
    return man


def read_manifest(path: PathLike) -> dict:
    try:
        with open(path) as fh:
            man = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read manifest {path}: {exc}") from exc
    if "command" not in man or "config" not in man:
        raise FormatError(f"{path}: not a manifest")
    return man
