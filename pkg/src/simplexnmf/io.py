"""Corpus ingestion, matrix interchange, and model persistence.

Matrices travel as 1-indexed MatrixMarket coordinate files, models as JSON
with every float printed to 17 significant digits so that save/load round
trips are value-exact and files are byte-deterministic.  The tokenizer is
deliberately naive: lowercase, split on runs of non-alphanumerics.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .types import ConstraintMode, FitTrace, TermDocMatrix

_MM_HEADER = "%%matrixmarket matrix coordinate real general"
_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


# ---------------------------------------------------------------------------
# MatrixMarket


def load_matrix_market(path) -> TermDocMatrix:
    """Parse a 1-indexed coordinate-format matrix file.

    Zero-valued entries are dropped; negative values, duplicate
    coordinates, out-of-range indices, and malformed headers raise
    ``DataError`` with the offending line number.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or " ".join(lines[0].split()).lower() != _MM_HEADER:
        raise DataError(f"malformed header in {path}: expected MatrixMarket coordinate real general")
    body = [
        (i + 1, line)
        for i, line in enumerate(lines[1:], start=1)
        if line.strip() and not line.lstrip().startswith("%")
    ]
    if not body:
        raise DataError(f"missing size line in {path}")
    size_no, size_line = body[0]
    parts = size_line.split()
    if len(parts) != 3:
        raise DataError(f"malformed size line at line {size_no}")
    try:
        n_terms, n_docs, nnz = (int(p) for p in parts)
    except ValueError as exc:
        raise DataError(f"malformed size line at line {size_no}") from exc
    entries = []
    for line_no, line in body[1:]:
        parts = line.split()
        if len(parts) != 3:
            raise DataError(f"malformed entry at line {line_no}")
        try:
            v, d, value = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise DataError(f"malformed entry at line {line_no}") from exc
        if value < 0:
            raise DataError(f"negative count at line {line_no}")
        if not (1 <= v <= n_terms) or not (1 <= d <= n_docs):
            raise DataError(f"index overflow at line {line_no}: ({v}, {d}) outside {n_terms} x {n_docs}")
        entries.append((v - 1, d - 1, value))
    if len(entries) != nnz:
        raise DataError(f"{path} declares {nnz} entries but contains {len(entries)}")
    seen = set()
    for v, d, _ in entries:
        if (v, d) in seen:
            raise DataError(f"duplicate entry ({v + 1}, {d + 1})")
        seen.add((v, d))
    return TermDocMatrix.from_entries(n_terms, n_docs, entries)


def save_matrix_market(path, X: TermDocMatrix) -> None:
    """Write the canonical text form; round trips through load are bit-identical."""
    out = ["%%MatrixMarket matrix coordinate real general"]
    out.append(f"{X.n_terms} {X.n_docs} {X.nnz}")
    for v, d, value in zip(X.rows, X.cols, X.vals):
        out.append(f"{v + 1} {d + 1} {_fmt(value)}")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Corpus ingestion


@dataclass(frozen=True)
class Vocabulary:
    """Ordered term list with its inverse map and the threshold used to build it."""

    terms: tuple[str, ...]
    min_count: int = 1
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        terms = tuple(self.terms)
        index = {}
        for i, term in enumerate(terms):
            if term in index:
                raise DataError(f"duplicate term {term!r}")
            index[term] = i
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.terms)


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def ingest_corpus(directory, min_count: int = 1) -> tuple[TermDocMatrix, Vocabulary]:
    """Read one UTF-8 document per file; build the count matrix and vocabulary.

    Terms occurring fewer than ``min_count`` times corpus-wide are
    dropped.  Documents left without any countable term are rejected with
    a listing, so every document column of the result has a positive
    total.
    """
    root = Path(directory)
    if not root.is_dir():
        raise DataError(f"not a directory: {directory}")
    files = sorted(p for p in root.iterdir() if p.is_file())
    if not files:
        raise DataError(f"empty corpus: no files in {directory}")
    docs = []
    for p in files:
        try:
            docs.append(tokenize(p.read_text(encoding="utf-8")))
        except (OSError, UnicodeDecodeError) as exc:
            raise DataError(f"unreadable file {p}: {exc}") from exc
    totals: dict[str, int] = {}
    for tokens in docs:
        for t in tokens:
            totals[t] = totals.get(t, 0) + 1
    kept = sorted(t for t, c in totals.items() if c >= min_count)
    vocab = Vocabulary(tuple(kept), min_count=min_count)
    counts = []
    empty = []
    for p, tokens in zip(files, docs):
        vec: dict[int, float] = {}
        for t in tokens:
            i = vocab.index.get(t)
            if i is not None:
                vec[i] = vec.get(i, 0.0) + 1.0
        if not vec:
            empty.append(p.name)
        counts.append(vec)
    if empty:
        raise DataError(f"documents with no countable terms: {', '.join(empty)}")
    entries = [(v, d, c) for d, vec in enumerate(counts) for v, c in vec.items()]
    return TermDocMatrix.from_entries(len(vocab), len(files), entries), vocab


def save_vocabulary(path, vocab: Vocabulary) -> None:
    Path(path).write_text("".join(t + "\n" for t in vocab.terms), encoding="utf-8")


def load_vocabulary(path, min_count: int = 1) -> Vocabulary:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return Vocabulary(tuple(lines), min_count=min_count)


# ---------------------------------------------------------------------------
# Model files

FORMAT_VERSION = 1


@dataclass
class ModelFile:
    """Everything needed to reload a fitted model, plus optional trace data."""

    method: str
    n_terms: int
    n_docs: int
    n_topics: int
    constraint_mode: str
    W: np.ndarray
    H: np.ndarray | None = None
    beta: np.ndarray | None = None
    b_rate: np.ndarray | None = None
    alpha: np.ndarray | None = None
    rate_a: np.ndarray | None = None
    lambda_sparsity: float = 0.0
    final_objective: float = 0.0
    trace: FitTrace | None = None
    format_version: int = FORMAT_VERSION

    def validate(self) -> None:
        if self.format_version != FORMAT_VERSION:
            raise DataError(f"unsupported format_version: {self.format_version}")
        if self.method not in ("mu", "mu-joint", "plsa", "sparse", "lda", "gap"):
            raise DataError(f"unknown method {self.method!r}")
        ConstraintMode.from_tag(self.constraint_mode)
        _check_matrix("W", self.W, self.n_terms, self.n_topics)
        if self.method in ("mu", "mu-joint", "plsa", "sparse"):
            if self.H is None:
                raise DataError(f"schema violation at H: required for method {self.method!r}")
            _check_matrix("H", self.H, self.n_topics, self.n_docs)
        else:
            if self.beta is None:
                raise DataError(f"schema violation at beta: required for method {self.method!r}")
            _check_matrix("beta", self.beta, self.n_topics, self.n_docs)
            if self.alpha is None or len(self.alpha) != self.n_topics:
                raise DataError("schema violation at alpha: expected one value per topic")
            if self.method == "gap":
                if self.b_rate is None:
                    raise DataError("schema violation at b_rate: required for method 'gap'")
                _check_matrix("b_rate", self.b_rate, self.n_topics, self.n_docs)
                if self.rate_a is None or len(self.rate_a) != self.n_topics:
                    raise DataError("schema violation at rate_a: expected one value per topic")
        if self.lambda_sparsity < 0:
            raise DataError("schema violation at lambda_sparsity: must be non-negative")


def _check_matrix(name: str, M, n_rows: int, n_cols: int) -> None:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DataError(f"schema violation at {name}: expected a matrix")
    if M.shape[0] != n_rows:
        raise DataError(f"dimension mismatch: {name} has {M.shape[0]} rows, expected {n_rows}")
    if M.shape[1] != n_cols:
        label = "K" if name == "W" else ("D" if name in ("H", "beta", "b_rate") else "columns")
        raise DataError(f"dimension mismatch: {name} has {M.shape[1]} columns, {label}={n_cols}")


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        raise DataError(f"non-finite value cannot be serialized: {x!r}")
    return format(float(x), ".17g")


def _emit(value, parts: list[str], indent: int) -> None:
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            parts.append("{}")
            return
        parts.append("{\n")
        for i, (key, item) in enumerate(value.items()):
            parts.append(f"{pad}  {json.dumps(key)}: ")
            _emit(item, parts, indent + 1)
            parts.append(",\n" if i + 1 < len(value) else "\n")
        parts.append(pad + "}")
    elif isinstance(value, (list, tuple)):
        if not value:
            parts.append("[]")
            return
        flat = all(not isinstance(v, (dict, list, tuple)) for v in value)
        if flat:
            parts.append("[" + ", ".join(_scalar(v) for v in value) + "]")
        else:
            parts.append("[\n")
            for i, item in enumerate(value):
                parts.append(pad + "  ")
                _emit(item, parts, indent + 1)
                parts.append(",\n" if i + 1 < len(value) else "\n")
            parts.append(pad + "]")
    else:
        parts.append(_scalar(value))


def _scalar(value) -> str:
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return _fmt(value)


def save_model(path, model: ModelFile) -> None:
    """Write the model as canonical JSON (fixed key order, 17-digit floats)."""
    model.validate()
    doc: dict = {
        "format_version": model.format_version,
        "method": model.method,
        "n_terms": model.n_terms,
        "n_docs": model.n_docs,
        "n_topics": model.n_topics,
        "constraint_mode": model.constraint_mode,
        "lambda_sparsity": float(model.lambda_sparsity),
        "final_objective": float(model.final_objective),
        "W": np.asarray(model.W, dtype=float).tolist(),
    }
    for name in ("H", "beta", "b_rate"):
        value = getattr(model, name)
        if value is not None:
            doc[name] = np.asarray(value, dtype=float).tolist()
    for name in ("alpha", "rate_a"):
        value = getattr(model, name)
        if value is not None:
            doc[name] = np.asarray(value, dtype=float).reshape(-1).tolist()
    if model.trace is not None:
        doc["trace"] = {
            "objectives": list(model.trace.objectives),
            "recon_evals": list(model.trace.recon_evals),
            "millis": [s * 1000.0 for s in model.trace.seconds],
        }
    parts: list[str] = []
    _emit(doc, parts, 0)
    Path(path).write_text("".join(parts) + "\n", encoding="utf-8")


def load_model(path) -> ModelFile:
    """Read and validate a model file; schema errors name the offending field."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise DataError("schema violation at top level: expected an object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported format_version: {version}")
    for key, kind in (
        ("method", str),
        ("n_terms", int),
        ("n_docs", int),
        ("n_topics", int),
        ("constraint_mode", str),
        ("W", list),
    ):
        if not isinstance(doc.get(key), kind):
            raise DataError(f"schema violation at {key}: expected {kind.__name__}")
    trace = None
    if "trace" in doc:
        raw = doc["trace"]
        if not isinstance(raw, dict):
            raise DataError("schema violation at trace: expected an object")
        trace = FitTrace(
            objectives=[float(v) for v in raw.get("objectives", [])],
            recon_evals=[int(v) for v in raw.get("recon_evals", [])],
            seconds=[float(v) / 1000.0 for v in raw.get("millis", [])],
        )
    model = ModelFile(
        method=doc["method"],
        n_terms=doc["n_terms"],
        n_docs=doc["n_docs"],
        n_topics=doc["n_topics"],
        constraint_mode=doc["constraint_mode"],
        W=_matrix_from(doc, "W"),
        H=_matrix_from(doc, "H") if "H" in doc else None,
        beta=_matrix_from(doc, "beta") if "beta" in doc else None,
        b_rate=_matrix_from(doc, "b_rate") if "b_rate" in doc else None,
        alpha=_vector_from(doc, "alpha") if "alpha" in doc else None,
        rate_a=_vector_from(doc, "rate_a") if "rate_a" in doc else None,
        lambda_sparsity=float(doc.get("lambda_sparsity", 0.0)),
        final_objective=float(doc.get("final_objective", 0.0)),
        trace=trace,
        format_version=version,
    )
    model.validate()
    return model


def _matrix_from(doc: dict, name: str) -> np.ndarray:
    raw = doc[name]
    if not isinstance(raw, list) or not raw:
        raise DataError(f"schema violation at {name}: expected a non-empty list of rows")
    width = None
    for i, row in enumerate(raw):
        if not isinstance(row, list):
            raise DataError(f"schema violation at {name}[{i}]: expected a list")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DataError(f"schema violation at {name}[{i}]: ragged row of length {len(row)}")
        for j, v in enumerate(row):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise DataError(f"schema violation at {name}[{i}][{j}]: expected a number")
    return np.asarray(raw, dtype=float)


def _vector_from(doc: dict, name: str) -> np.ndarray:
    raw = doc[name]
    if not isinstance(raw, list):
        raise DataError(f"schema violation at {name}: expected a list")
    for j, v in enumerate(raw):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise DataError(f"schema violation at {name}[{j}]: expected a number")
    return np.asarray(raw, dtype=float)


def save_trace_csv(path, trace: FitTrace) -> None:
    """Per-iteration CSV: ``iter, objective, recon_evals, millis``."""
    lines = ["iter,objective,recon_evals,millis"]
    for i, (obj, evals, secs) in enumerate(
        zip(trace.objectives, trace.recon_evals, trace.seconds), start=1
    ):
        lines.append(f"{i},{_fmt(obj)},{evals},{secs * 1000.0:.3f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
