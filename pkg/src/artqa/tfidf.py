"""First-stage retrieval: n-gram TF-IDF over comments, cosine ranking.

Weighting: ``weight(g, d) = tf(g, d) * idf(g)`` with
``idf(g) = ln((1 + N) / (1 + df(g))) + 1``, then L2 normalization per
document, so ranking scores are exact cosines. Column ids are assigned by
sorted gram order, which keeps builds deterministic regardless of input
order or parallelism.

The on-disk container is versioned and checksummed; see
``docs/index_format.md`` for the byte layout.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Comment
from .textpipe import PipelineConfig, preprocess

MAGIC = b"TIDX"
FORMAT_VERSION = 1


class IndexFormatError(ValueError):
    """Unrecognized, truncated, or corrupted index file."""


@dataclass(frozen=True)
class SparseVector:
    """Sorted (column id, weight) pairs; no explicit zeros."""

    indices: np.ndarray  # int64, strictly increasing
    values: np.ndarray  # float64, finite, nonzero

    def __post_init__(self) -> None:
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values must have equal length")
        if len(self.indices) > 1 and not np.all(np.diff(self.indices) > 0):
            raise ValueError("column ids must be strictly increasing")
        if len(self.values) and (not np.all(np.isfinite(self.values)) or np.any(self.values == 0.0)):
            raise ValueError("weights must be finite and nonzero")

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


EMPTY_SPARSE = SparseVector(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.float64))


@dataclass(frozen=True)
class RankedList:
    """Ordered (comment id, score) pairs, score non-increasing, ids distinct."""

    query_id: str
    entries: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        scores = [s for _, s in self.entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError("scores must be non-increasing")
        ids = [i for i, _ in self.entries]
        if len(ids) != len(set(ids)):
            raise ValueError("comment ids must be distinct")

    def ids(self) -> list[str]:
        return [i for i, _ in self.entries]

    def score_of(self, comment_id: str) -> float:
        for i, s in self.entries:
            if i == comment_id:
                return s
        raise KeyError(comment_id)

    def head(self) -> str:
        if not self.entries:
            raise ValueError("empty ranked list has no head")
        return self.entries[0][0]


@dataclass
class TfIdfIndex:
    vocabulary: dict[str, int]  # gram -> column id (sorted-gram order)
    df: np.ndarray  # uint32 per column
    doc_ids: list[str]
    indptr: np.ndarray  # int64, len N+1
    indices: np.ndarray  # int64 column ids per row, sorted within rows
    data: np.ndarray  # float64 L2-normalized weights
    config: PipelineConfig
    _postings: dict[int, tuple[np.ndarray, np.ndarray]] = field(init=False, repr=False)
    _row_of: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        # column -> (doc rows, weights) for query-time accumulation
        order = np.argsort(self.indices, kind="stable")
        rows = np.repeat(np.arange(self.n_docs, dtype=np.int64), np.diff(self.indptr))
        sorted_cols = self.indices[order]
        sorted_rows = rows[order]
        sorted_vals = self.data[order]
        postings: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        if len(sorted_cols):
            bounds = np.flatnonzero(np.diff(sorted_cols)) + 1
            starts = np.concatenate(([0], bounds))
            ends = np.concatenate((bounds, [len(sorted_cols)]))
            for s, e in zip(starts, ends):
                postings[int(sorted_cols[s])] = (sorted_rows[s:e], sorted_vals[s:e])
        self._postings = postings
        self._row_of = {d: i for i, d in enumerate(self.doc_ids)}

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    def idf(self, col: int) -> float:
        return math.log((1 + self.n_docs) / (1 + float(self.df[col]))) + 1.0

    def doc_vector(self, comment_id: str) -> SparseVector:
        row = self._row_of[comment_id]
        lo, hi = int(self.indptr[row]), int(self.indptr[row + 1])
        if lo == hi:
            return EMPTY_SPARSE
        return SparseVector(self.indices[lo:hi].copy(), self.data[lo:hi].copy())


def build_index(
    comments: list[Comment], config: PipelineConfig | None = None, threads: int = 1
) -> TfIdfIndex:
    """Build the index. ``threads`` bounds parallel document preprocessing;
    the result is identical for any thread count because column ids are
    assigned from the sorted gram vocabulary."""
    if not comments:
        raise ValueError("cannot build an index over zero comments")
    config = config or PipelineConfig()
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_doc: list[Counter[str]] = list(
                pool.map(lambda c: Counter(preprocess(c.text, config)), comments)
            )
    else:
        per_doc = [Counter(preprocess(c.text, config)) for c in comments]

    grams = sorted(set().union(*per_doc)) if per_doc else []
    col_of = {g: i for i, g in enumerate(grams)}
    n = len(comments)
    df = np.zeros(len(grams), dtype=np.uint32)
    for counts in per_doc:
        for g in counts:
            df[col_of[g]] += 1

    idf = np.log((1 + n) / (1 + df.astype(np.float64))) + 1.0

    indptr = np.zeros(n + 1, dtype=np.int64)
    cols_out: list[np.ndarray] = []
    vals_out: list[np.ndarray] = []
    for i, counts in enumerate(per_doc):
        cols = np.array(sorted(col_of[g] for g in counts), dtype=np.int64)
        tf = np.array([counts[grams[c]] for c in cols], dtype=np.float64)
        weights = tf * idf[cols]
        norm = np.linalg.norm(weights)
        if norm > 0:
            weights = weights / norm
        cols_out.append(cols)
        vals_out.append(weights)
        indptr[i + 1] = indptr[i] + len(cols)

    return TfIdfIndex(
        vocabulary=col_of,
        df=df,
        doc_ids=[c.id for c in comments],
        indptr=indptr,
        indices=np.concatenate(cols_out) if cols_out else np.zeros(0, dtype=np.int64),
        data=np.concatenate(vals_out) if vals_out else np.zeros(0, dtype=np.float64),
        config=config,
    )


def vectorize_query(question: str, index: TfIdfIndex) -> SparseVector:
    """Same pipeline and weighting as documents, using the index df/N.
    Out-of-vocabulary grams are dropped; an all-OOV query yields the zero vector."""
    counts = Counter(preprocess(question, index.config))
    pairs = sorted((index.vocabulary[g], tf) for g, tf in counts.items() if g in index.vocabulary)
    if not pairs:
        return EMPTY_SPARSE
    cols = np.array([c for c, _ in pairs], dtype=np.int64)
    tf = np.array([t for _, t in pairs], dtype=np.float64)
    idf = np.log((1 + index.n_docs) / (1 + index.df[cols].astype(np.float64))) + 1.0
    weights = tf * idf
    norm = np.linalg.norm(weights)
    if norm > 0:
        weights = weights / norm
    return SparseVector(cols, weights)


def score_all(question: str, index: TfIdfIndex) -> np.ndarray:
    """Cosine of the query against every document, by row."""
    q = vectorize_query(question, index)
    scores = np.zeros(index.n_docs, dtype=np.float64)
    for col, w in zip(q.indices, q.values):
        posting = index._postings.get(int(col))
        if posting is not None:
            rows, vals = posting
            scores[rows] += w * vals
    return scores


def retrieve_topk(question: str, index: TfIdfIndex, k: int = 10, query_id: str = "") -> RankedList:
    """Top min(k, N) comments by cosine, ties broken by ascending comment id."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores = score_all(question, index)
    order = sorted(range(index.n_docs), key=lambda i: (-scores[i], index.doc_ids[i]))
    top = order[: min(k, index.n_docs)]
    return RankedList(query_id=query_id, entries=tuple((index.doc_ids[i], float(scores[i])) for i in top))


def document_score(question: str, index: TfIdfIndex, comment_id: str) -> float:
    """Cosine of the query against one named document."""
    q = vectorize_query(question, index)
    d = index.doc_vector(comment_id)
    if q.nnz == 0 or d.nnz == 0:
        return 0.0
    qi = {int(c): float(v) for c, v in zip(q.indices, q.values)}
    return float(sum(qi.get(int(c), 0.0) * float(v) for c, v in zip(d.indices, d.values)))


def _pack_sections(index: TfIdfIndex, meta: dict | None) -> tuple[dict, list[bytes]]:
    grams = [g for g, _ in sorted(index.vocabulary.items(), key=lambda kv: kv[1])]
    sections = [
        json.dumps(grams, ensure_ascii=False).encode("utf-8"),
        index.df.astype("<u4").tobytes(),
        json.dumps(index.doc_ids, ensure_ascii=False).encode("utf-8"),
        index.indptr.astype("<i8").tobytes(),
        index.indices.astype("<i8").tobytes(),
        index.data.astype("<f8").tobytes(),
    ]
    header = {
        "config": index.config.to_dict(),
        "n_docs": index.n_docs,
        "n_grams": len(grams),
        "section_lengths": [len(s) for s in sections],
        "meta": meta or {},
    }
    return header, sections


def save_index(index: TfIdfIndex, path: str | Path, meta: dict | None = None) -> None:
    header, sections = _pack_sections(index, meta)
    header_bytes = json.dumps(header, ensure_ascii=False).encode("utf-8")
    body = MAGIC + struct.pack("<HI", FORMAT_VERSION, len(header_bytes)) + header_bytes
    body += b"".join(sections)
    digest = hashlib.sha256(body).digest()
    Path(path).write_bytes(body + digest)


def load_index(path: str | Path) -> TfIdfIndex:
    blob = Path(path).read_bytes()
    if len(blob) < 4 + 6 + 32:
        raise IndexFormatError(f"truncated index file: {path}")
    if blob[:4] != MAGIC:
        raise IndexFormatError(f"not a TF-IDF index file (bad magic): {path}")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise IndexFormatError(f"checksum mismatch (corrupted index): {path}")
    version, header_len = struct.unpack("<HI", body[4:10])
    if version != FORMAT_VERSION:
        raise IndexFormatError(f"unsupported index format version {version}: {path}")
    off = 10
    if off + header_len > len(body):
        raise IndexFormatError(f"truncated index file: {path}")
    header = json.loads(body[off : off + header_len].decode("utf-8"))
    off += header_len

    lengths = header["section_lengths"]
    if off + sum(lengths) != len(body):
        raise IndexFormatError(f"section lengths disagree with file size: {path}")
    parts = []
    for ln in lengths:
        parts.append(body[off : off + ln])
        off += ln
    grams = json.loads(parts[0].decode("utf-8"))
    df = np.frombuffer(parts[1], dtype="<u4").astype(np.uint32)
    doc_ids = json.loads(parts[2].decode("utf-8"))
    indptr = np.frombuffer(parts[3], dtype="<i8").astype(np.int64)
    indices = np.frombuffer(parts[4], dtype="<i8").astype(np.int64)
    data = np.frombuffer(parts[5], dtype="<f8").astype(np.float64)
    if len(grams) != header["n_grams"] or len(doc_ids) != header["n_docs"]:
        raise IndexFormatError(f"header counts disagree with payload: {path}")

    return TfIdfIndex(
        vocabulary={g: i for i, g in enumerate(grams)},
        df=df,
        doc_ids=doc_ids,
        indptr=indptr,
        indices=indices,
        data=data,
        config=PipelineConfig.from_dict(header["config"]),
    )
