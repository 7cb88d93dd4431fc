"""File formats.

Embeddings
    CSV: one row per line, comma separated, no header, ``repr`` floats.
    NPY version 1.0, little-endian ``<f4``/``<f8``, C order, rank 2. Layout:
    ``\\x93NUMPY`` magic, version bytes ``01 00``, little-endian uint16
    header length, an ASCII dict literal with keys ``descr``,
    ``fortran_order`` and ``shape`` padded with spaces and a final newline
    so that the payload starts at a multiple of 64 bytes, then the raw data.
Manifest
    JSON array of ``{"id", "row", "section", "domain", "split", "condition"}``
    objects; ``row`` values form a permutation of ``0..n-1``.
Scores, sweep tables, histograms
    CSV with a header line; floats written with ``repr`` (shortest text
    that round-trips exactly).
Reports, constants caches, run manifests
    JSON.
Neighbor-table cache
    Binary: ``<8s B 7x Q 32s`` header (magic ``LDNTBL\\x01\\x00``, metric
    code, row count, SHA-256 of references and metric) followed by the
    ``n x (n-1)`` int64 neighbor order and float64 distances, little-endian.

Every writer is deterministic: equal inputs give byte-identical files.
"""

import ast
import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .core import DataError, Dataset, Density, IntegrityError, SampleMeta, ScoreVector, as_embeddings, digest
from .metrics import EvaluationReport
from .neighbors import NeighborTable
from .scoring import NormalizationConstants

NPY_MAGIC = b"\x93NUMPY"
NPY_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}
MANIFEST_FIELDS = ("id", "row", "section", "domain", "split", "condition")


class NpyFormatError(DataError):
    """Malformed or unsupported NPY file."""


class BadMagicError(NpyFormatError):
    pass


class UnsupportedLayoutError(NpyFormatError):
    """Valid NPY outside the supported subset (version, dtype, order, rank)."""


class TruncatedPayloadError(NpyFormatError):
    pass


class FormatError(DataError):
    """Malformed text record; the message carries the line number."""


# --------------------------------------------------------------------------
# NPY
# --------------------------------------------------------------------------


def _npy_header(dtype: str, shape) -> bytes:
    text = "{'descr': '%s', 'fortran_order': False, 'shape': (%d, %d), }" % (dtype, shape[0], shape[1])
    total = len(NPY_MAGIC) + 2 + 2 + len(text) + 1
    pad = (-total) % 64
    header = (text + " " * pad + "\n").encode("latin1")
    return NPY_MAGIC + b"\x01\x00" + struct.pack("<H", len(header)) + header


def write_npy(m, path, dtype: str = "<f8") -> None:
    if dtype not in NPY_DTYPES:
        raise ValueError(f"unsupported dtype {dtype!r}; expected one of {sorted(NPY_DTYPES)}")
    m = as_embeddings(m)
    data = np.ascontiguousarray(m, dtype=NPY_DTYPES[dtype])
    with open(path, "wb") as f:
        f.write(_npy_header(dtype, m.shape))
        f.write(data.tobytes())


def parse_npy(buf: bytes, name: str = "<bytes>") -> np.ndarray:
    if len(buf) < 10 or buf[:6] != NPY_MAGIC:
        raise BadMagicError(f"{name}: not an NPY file (bad magic)")
    major, minor = buf[6], buf[7]
    if (major, minor) != (1, 0):
        raise UnsupportedLayoutError(f"{name}: NPY version {major}.{minor} unsupported; need 1.0")
    (hlen,) = struct.unpack("<H", buf[8:10])
    if len(buf) < 10 + hlen:
        raise TruncatedPayloadError(f"{name}: header truncated")
    raw = buf[10 : 10 + hlen]
    if not raw.endswith(b"\n") or (10 + hlen) % 64:
        raise NpyFormatError(f"{name}: header not newline-terminated at a 64-byte boundary")
    try:
        header = ast.literal_eval(raw.decode("latin1"))
    except (ValueError, SyntaxError) as e:
        raise NpyFormatError(f"{name}: unreadable header: {e}") from None
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise NpyFormatError(f"{name}: header must have exactly descr, fortran_order and shape")
    descr, fortran, shape = header["descr"], header["fortran_order"], header["shape"]
    if descr not in NPY_DTYPES:
        raise UnsupportedLayoutError(f"{name}: dtype {descr!r} unsupported; need '<f4' or '<f8'")
    if fortran is not False:
        raise UnsupportedLayoutError(f"{name}: fortran_order=True unsupported; need C order")
    if not isinstance(shape, tuple) or len(shape) != 2 or not all(isinstance(s, int) for s in shape):
        raise UnsupportedLayoutError(f"{name}: shape {shape!r} unsupported; need a 2-D array")
    if shape[0] < 1 or shape[1] < 1:
        raise UnsupportedLayoutError(f"{name}: empty shape {shape!r}")
    dt = NPY_DTYPES[descr]
    expected = shape[0] * shape[1] * dt.itemsize
    payload = buf[10 + hlen :]
    if len(payload) < expected:
        raise TruncatedPayloadError(f"{name}: payload has {len(payload)} bytes, expected {expected}")
    if len(payload) > expected:
        raise NpyFormatError(f"{name}: {len(payload) - expected} trailing bytes after payload")
    arr = np.frombuffer(payload, dtype=dt).reshape(shape).astype(np.float64)
    return as_embeddings(arr, name)


def read_npy(path) -> np.ndarray:
    """Embedding matrix from an NPY file, widened to float64."""
    return parse_npy(Path(path).read_bytes(), str(path))


def write_embeddings_csv(m, path) -> None:
    m = as_embeddings(m)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = _csv_writer(f)
        for row in m.tolist():
            w.writerow([repr(v) for v in row])


def read_embeddings_csv(path) -> np.ndarray:
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        for line, row in enumerate(csv.reader(f), start=1):
            if rows and len(row) != len(rows[0]):
                raise FormatError(f"{path}: line {line}: expected {len(rows[0])} values, got {len(row)}")
            try:
                values = [float(v) for v in row]
            except ValueError as e:
                raise FormatError(f"{path}: line {line}: {e}") from None
            if not values or not all(np.isfinite(values)):
                raise FormatError(f"{path}: line {line}: empty row or non-finite value")
            rows.append(values)
    if not rows:
        raise FormatError(f"{path}: no rows")
    return as_embeddings(rows, str(path))


def read_embeddings(path) -> np.ndarray:
    """NPY or CSV embeddings, chosen by file suffix."""
    if Path(path).suffix.lower() == ".csv":
        return read_embeddings_csv(path)
    return read_npy(path)


# --------------------------------------------------------------------------
# Manifest / dataset
# --------------------------------------------------------------------------


def write_manifest(metas, path) -> None:
    records = [
        {"id": m.id, "row": i, "section": m.section, "domain": m.domain, "split": m.split, "condition": m.condition}
        for i, m in enumerate(metas)
    ]
    Path(path).write_text(json.dumps(records, indent=1) + "\n", encoding="utf-8")


def read_manifest(path) -> tuple:
    """Metadata records ordered by their ``row`` field."""
    try:
        records = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: line {e.lineno}: invalid JSON ({e.msg})") from None
    if not isinstance(records, list):
        raise FormatError(f"{path}: manifest must be a JSON array")
    metas = {}
    ids = set()
    for k, rec in enumerate(records):
        if not isinstance(rec, dict) or set(rec) != set(MANIFEST_FIELDS):
            raise FormatError(f"{path}: record {k}: expected exactly the fields {list(MANIFEST_FIELDS)}")
        if rec["id"] in ids:
            raise DataError(f"{path}: duplicate id {rec['id']!r}")
        ids.add(rec["id"])
        row = rec["row"]
        if not isinstance(row, int) or isinstance(row, bool) or row in metas:
            raise DataError(f"{path}: record {k}: invalid or repeated row {row!r}")
        metas[row] = SampleMeta(
            str(rec["id"]), str(rec["section"]), rec["domain"], rec["split"], rec["condition"]
        )
    if sorted(metas) != list(range(len(metas))):
        raise DataError(f"{path}: row indices are not a permutation of 0..{len(metas) - 1}")
    return tuple(metas[i] for i in range(len(metas)))


def load_dataset(embeddings_path, manifest_path) -> Dataset:
    emb = read_embeddings(embeddings_path)
    metas = read_manifest(manifest_path)
    if len(metas) != emb.shape[0]:
        raise DataError(f"manifest has {len(metas)} records but embeddings have {emb.shape[0]} rows")
    return Dataset(emb, metas)


def save_dataset(ds: Dataset, embeddings_path, manifest_path, dtype: str = "<f8") -> None:
    write_npy(ds.embeddings, embeddings_path, dtype)
    write_manifest(ds.metas, manifest_path)


# --------------------------------------------------------------------------
# Scores
# --------------------------------------------------------------------------


def _csv_writer(f):
    return csv.writer(f, lineterminator="\n")


def write_scores(scores: ScoreVector, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = _csv_writer(f)
        w.writerow(["id", "score"])
        for i, s in zip(scores.ids, scores.scores.tolist()):
            w.writerow([i, repr(s)])


def read_scores(path) -> ScoreVector:
    ids, values = [], []
    seen = set()
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["id", "score"]:
            raise FormatError(f"{path}: line 1: expected header 'id,score'")
        for row in reader:
            line = reader.line_num
            if len(row) != 2:
                raise FormatError(f"{path}: line {line}: expected 2 fields, got {len(row)}")
            try:
                v = float(row[1])
            except ValueError:
                raise FormatError(f"{path}: line {line}: bad score {row[1]!r}") from None
            if not np.isfinite(v):
                raise FormatError(f"{path}: line {line}: non-finite score")
            if row[0] in seen:
                raise FormatError(f"{path}: line {line}: duplicate id {row[0]!r}")
            seen.add(row[0])
            ids.append(row[0])
            values.append(v)
    return ScoreVector(tuple(ids), np.array(values, dtype=np.float64))


# --------------------------------------------------------------------------
# Reports, sweeps, histograms
# --------------------------------------------------------------------------


def _dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def write_report(report: EvaluationReport, path) -> None:
    _dump_json(report.to_dict(), path)


def read_report(path) -> EvaluationReport:
    return EvaluationReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def write_sweep_table(rows, path, param_name: str = "param") -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = _csv_writer(f)
        w.writerow([param_name, "aggregate", "auc_source", "auc_target"])
        for r in rows:
            w.writerow([repr(r.param), repr(r.aggregate), repr(r.auc_source), repr(r.auc_target)])


def histogram(scores, bins: int = 50, groups=None):
    """Shared bin edges and per-group counts.

    ``groups`` optionally labels every score (e.g. ``"target_normal"``);
    an ``all`` column is always present. Counts of each group sum to its size.
    """
    s = np.asarray(scores, dtype=np.float64)
    if bins < 1:
        raise ValueError("bins must be >= 1")
    lo, hi = float(s.min()), float(s.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    counts = {"all": np.histogram(s, edges)[0]}
    if groups is not None:
        groups = np.asarray(groups)
        for g in sorted(set(groups.tolist())):
            counts[g] = np.histogram(s[groups == g], edges)[0]
    return edges, counts


def write_histogram(edges, counts: dict, path) -> None:
    names = list(counts)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = _csv_writer(f)
        w.writerow(["bin_left", "bin_right", *names])
        for b in range(len(edges) - 1):
            w.writerow([repr(float(edges[b])), repr(float(edges[b + 1])), *(int(counts[n][b]) for n in names)])


# --------------------------------------------------------------------------
# Caches and run manifests
# --------------------------------------------------------------------------


def write_constants(constants: dict, ids: dict, path) -> None:
    """Per-section constants cache; ``ids`` maps section -> reference ids."""
    sections = {}
    for sec in sorted(constants):
        c = constants[sec]
        sections[sec] = {
            "metric": c.metric,
            "density": None if c.density is None else c.density.label(),
            "refs_fingerprint": c.refs_fingerprint,
            "fingerprint": c.fingerprint,
            "ids": list(ids[sec]),
            "values": c.values.tolist(),
            "raw": c.raw.tolist(),
        }
    _dump_json({"format": "ldnorm-constants/1", "sections": sections}, path)


def read_constants(path):
    """``(constants, ids)`` dicts keyed by section; verifies each fingerprint."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != "ldnorm-constants/1":
        raise FormatError(f"{path}: not a constants cache")
    constants, ids = {}, {}
    for sec, e in doc["sections"].items():
        density = None if e["density"] is None else Density.parse(e["density"])
        values = np.array(e["values"], dtype=np.float64)
        raw = np.array(e["raw"], dtype=np.float64)
        c = NormalizationConstants(values, raw, density, e["metric"], e["refs_fingerprint"])
        if c.fingerprint != e["fingerprint"]:
            raise IntegrityError(f"{path}: section {sec!r}: constants do not match their fingerprint")
        constants[sec] = c
        ids[sec] = tuple(e["ids"])
    return constants, ids


_TABLE_MAGIC = b"LDNTBL\x01\x00"
_TABLE_HEADER = struct.Struct("<8sB7xQ32s")
_METRIC_CODES = {"cosine": 0, "squared_euclidean": 1}


def write_neighbor_table(table: NeighborTable, path) -> None:
    with open(path, "wb") as f:
        f.write(_TABLE_HEADER.pack(_TABLE_MAGIC, _METRIC_CODES[table.metric], table.n, bytes.fromhex(table.fingerprint)))
        f.write(np.ascontiguousarray(table.order, dtype="<i8").tobytes())
        f.write(np.ascontiguousarray(table.dist, dtype="<f8").tobytes())


def read_neighbor_table(path, refs=None) -> NeighborTable:
    """Load a table; with ``refs`` also check it was built from them."""
    buf = Path(path).read_bytes()
    if len(buf) < _TABLE_HEADER.size:
        raise FormatError(f"{path}: truncated neighbor table header")
    magic, code, n, fp = _TABLE_HEADER.unpack_from(buf)
    if magic != _TABLE_MAGIC:
        raise FormatError(f"{path}: not a neighbor table")
    metric = {v: k for k, v in _METRIC_CODES.items()}.get(code)
    if metric is None:
        raise FormatError(f"{path}: unknown metric code {code}")
    cells = n * (n - 1)
    body = buf[_TABLE_HEADER.size :]
    if len(body) != 16 * cells:
        raise FormatError(f"{path}: body has {len(body)} bytes, expected {16 * cells}")
    order = np.frombuffer(body[: 8 * cells], dtype="<i8").reshape(n, n - 1).astype(np.int64)
    dist = np.frombuffer(body[8 * cells :], dtype="<f8").reshape(n, n - 1).astype(np.float64)
    table = NeighborTable(order, dist, metric, fp.hex())
    if refs is not None and digest(as_embeddings(refs), metric) != table.fingerprint:
        raise IntegrityError(f"{path}: neighbor table was built from different references")
    return table


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_run_manifest(path, subcommand: str, config: dict, inputs: dict, seed=None, version: str = "") -> None:
    """Provenance record: resolved config, input digests, tool version, seed."""
    doc = {
        "subcommand": subcommand,
        "config": config,
        "inputs": {k: {"path": str(v), "sha256": file_digest(v)} for k, v in sorted(inputs.items())},
        "seed": seed,
        "version": version,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
