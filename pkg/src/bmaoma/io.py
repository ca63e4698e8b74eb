"""Binary and JSON file formats.

FMAT (float32 matrices) and LBL1 (int32 class labels) are fixed
little-endian layouts::

    FMAT: b"FMAT" | u32 version=1 | u64 rows | u64 cols | rows*cols f32
    LBL1: b"LBL1" | u32 version=1 | u64 count | u64 num_classes | count i32

JSON documents are validated against the schemas shipped in
``bmaoma/schemas``; violations raise :class:`FormatError` carrying a JSON
pointer to the offending field.
"""

from __future__ import annotations

import json
import struct
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .exceptions import DataError, FormatError
from .laplace import EvidenceRecord
from .map_trainer import LinearHead

FMAT_MAGIC = b"FMAT"
LBL_MAGIC = b"LBL1"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


def _read_header(path, magic):
    path = Path(path)
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(data)} bytes)")
    got_magic, version, a, b = _HEADER.unpack_from(data)
    if got_magic != magic:
        raise FormatError(f"{path}: bad magic {got_magic!r}, expected {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    return data, a, b


def write_fmat(matrix, path):
    m = np.asarray(matrix)
    if m.ndim == 1:
        m = m[None, :]
    if m.ndim != 2:
        raise FormatError(f"FMAT holds 2-D matrices, got shape {m.shape}")
    payload = np.ascontiguousarray(m, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FMAT_MAGIC, VERSION, *m.shape))
        fh.write(payload.tobytes())


def read_fmat(path, dtype=np.float64):
    """Read an FMAT file; values are widened to ``dtype`` (float64 default)."""
    data, rows, cols = _read_header(path, FMAT_MAGIC)
    expected = rows * cols * 4
    if len(data) - _HEADER.size != expected:
        raise FormatError(
            f"{path}: payload is {len(data) - _HEADER.size} bytes, "
            f"expected {expected} for {rows}x{cols}")
    m = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(rows, cols)
    if not np.all(np.isfinite(m)):
        raise DataError(f"{path}: matrix contains NaN or Inf")
    return m.astype(dtype)


def write_lbl(labels, n_classes, path):
    y = np.asarray(labels)
    if y.ndim != 1:
        raise FormatError("labels must be 1-D")
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise DataError(f"labels outside [0, {n_classes})")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(LBL_MAGIC, VERSION, y.size, int(n_classes)))
        fh.write(np.ascontiguousarray(y, dtype="<i4").tobytes())


def read_lbl(path):
    """Return ``(labels, n_classes)``."""
    data, count, n_classes = _read_header(path, LBL_MAGIC)
    if len(data) - _HEADER.size != count * 4:
        raise FormatError(
            f"{path}: payload is {len(data) - _HEADER.size} bytes, "
            f"expected {count * 4} for {count} labels")
    y = np.frombuffer(data, dtype="<i4", offset=_HEADER.size).astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise DataError(f"{path}: labels outside [0, {n_classes})")
    return y, int(n_classes)


# -- JSON -------------------------------------------------------------------

@lru_cache(maxsize=None)
def _schema(name):
    text = resources.files("bmaoma.schemas").joinpath(f"{name}.schema.json")
    return json.loads(text.read_text())


def _pointer(parts):
    return "/" + "/".join(str(p).replace("~", "~0").replace("/", "~1")
                          for p in parts)


def validate(doc, schema_name, source="<document>"):
    validator = jsonschema.Draft202012Validator(_schema(schema_name))
    error = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if error is not None:
        raise FormatError(
            f"{source}: {error.message} at {_pointer(error.absolute_path)}")
    return doc


def _load_json(path, schema_name):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    return validate(doc, schema_name, source=str(path))


def dumps(doc):
    # repr-based float formatting round-trips every float64 exactly
    return json.dumps(doc, allow_nan=False)


def _dump_json(doc, path):
    with open(path, "w") as fh:
        fh.write(dumps(doc))
        fh.write("\n")


def write_weights(weights, path, ids=None, kind=None):
    doc = {"weights": [float(w) for w in weights]}
    if ids is not None:
        doc["ids"] = list(ids)
    if kind is not None:
        doc["kind"] = kind
    _dump_json(doc, path)


def read_weights(path, with_ids=False):
    doc = _load_json(path, "weights")
    w = np.asarray(doc["weights"], dtype=np.float64)
    if "ids" in doc and len(doc["ids"]) != w.size:
        raise FormatError(f"{path}: ids length does not match at /ids")
    if with_ids:
        return w, doc.get("ids")
    return w


def write_evidence(record, path):
    _dump_json(record.to_dict(), path)


def read_evidence(path):
    doc = _load_json(path, "evidence")
    return EvidenceRecord(log_lik_map=doc["log_lik_map"],
                          prior_quad=doc["prior_quad"],
                          log_det_term=doc["log_det_term"],
                          n_train=doc["n_train"], alpha=doc["alpha"],
                          model_id=doc.get("model_id"))


def head_sidecar_path(path):
    return Path(path).with_suffix(".json")


def _finite_or_none(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _none_to_nan(x):
    return float("nan") if x is None else float(x)


def write_head(head, path):
    """Write ``path`` (FMAT, C x D) and its JSON sidecar next to it.

    The sidecar also keeps the float64 weights, since float32 rounding alone
    can move a MAP head off its gradient tolerance.
    """
    write_fmat(head.weights, path)
    _dump_json({"alpha": head.alpha, "n_train": int(head.n_train),
                "converged": bool(head.converged),
                "grad_inf_norm": _finite_or_none(head.grad_inf_norm),
                "objective": _finite_or_none(head.objective),
                "weights_f64": head.weights.tolist()},
               head_sidecar_path(path))


def read_head(path):
    weights = read_fmat(path)
    meta = _load_json(head_sidecar_path(path), "head")
    if "weights_f64" in meta:
        exact = np.asarray(meta["weights_f64"], dtype=np.float64)
        if (exact.shape != weights.shape
                or not np.array_equal(exact.astype("<f4"), weights.astype("<f4"))):
            raise FormatError(f"{head_sidecar_path(path)}: weights_f64 does not "
                              f"match {path} at /weights_f64")
        weights = exact
    return LinearHead(weights=weights, alpha=meta["alpha"],
                      n_train=meta["n_train"], converged=meta["converged"],
                      grad_inf_norm=_none_to_nan(meta.get("grad_inf_norm")),
                      objective=_none_to_nan(meta.get("objective")))


def read_manifest(path):
    """Load a manifest, resolving file paths relative to its directory.

    Every referenced file must exist; a missing one raises FormatError
    naming both the path and its JSON pointer.
    """
    path = Path(path)
    doc = _load_json(path, "manifest")
    base = path.parent

    def resolve(rel, pointer):
        p = (base / rel).resolve()
        if not p.exists():
            raise FormatError(f"{path}: referenced file {p} does not exist "
                              f"at {pointer}")
        return p

    seen = set()
    for i, model in enumerate(doc["models"]):
        if model["id"] in seen:
            raise FormatError(f"{path}: duplicate model id {model['id']!r} "
                              f"at /models/{i}/id")
        seen.add(model["id"])
        for key in ("feature_file", "head_file"):
            if key in model:
                model[key] = resolve(model[key], f"/models/{i}/{key}")
        model["probs_files"] = {
            split: resolve(p, _pointer(["models", i, "probs_files", split]))
            for split, p in model["probs_files"].items()}
    for name, split in doc["splits"].items():
        if "labels" in split:
            split["labels"] = resolve(split["labels"],
                                      _pointer(["splits", name, "labels"]))
        for mid, p in split.get("features", {}).items():
            split["features"][mid] = resolve(
                p, _pointer(["splits", name, "features", mid]))
    return doc
