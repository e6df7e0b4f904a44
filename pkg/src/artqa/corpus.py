"""Dataset loading, validation, statistics, and the visual answer vocabulary.

A corpus is one JSON document with arrays ``paintings``, ``comments`` and
``qa``. Validation rejects on the first integrity violation and names the
offending record id. Corpora are immutable after load and safe to share
across threads.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

MODALITIES = ("visual", "knowledge")
SPLITS = ("train", "val", "test")


class CorpusError(ValueError):
    """Malformed dataset file or integrity violation."""

    def __init__(self, message: str, record_id: str | None = None):
        super().__init__(message)
        self.record_id = record_id


@dataclass(frozen=True)
class Painting:
    id: str
    image_ref: str = ""
    author: str | None = None
    title: str | None = None
    year: str | None = None


@dataclass(frozen=True)
class Comment:
    id: str
    painting_id: str
    text: str


@dataclass(frozen=True)
class QaRecord:
    id: str
    painting_id: str
    question: str
    answer: str
    modality: str
    split: str


@dataclass(frozen=True)
class Corpus:
    paintings: dict[str, Painting]
    comments: tuple[Comment, ...]
    qa: tuple[QaRecord, ...]
    comments_by_id: dict[str, Comment] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "comments_by_id", {c.id: c for c in self.comments})

    def comments_of_painting(self, painting_id: str) -> list[Comment]:
        return [c for c in self.comments if c.painting_id == painting_id]

    def gold_comment_id(self, record: QaRecord) -> str | None:
        """The comment attached to a question's painting; first by comment id
        when a painting carries several."""
        ids = sorted(c.id for c in self.comments if c.painting_id == record.painting_id)
        return ids[0] if ids else None

    def split_records(self, split: str | None = None) -> list[QaRecord]:
        if split is None:
            return list(self.qa)
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        return [r for r in self.qa if r.split == split]


def _require(obj: dict, key: str, record_id: str, kind: str) -> object:
    if key not in obj:
        raise CorpusError(f"{kind} {record_id!r}: missing field {key!r}", record_id)
    return obj[key]


def validate(paintings: list[Painting], comments: list[Comment], qa: list[QaRecord]) -> Corpus:
    """Check all type invariants; raise CorpusError naming the first offender."""
    seen: set[str] = set()
    pmap: dict[str, Painting] = {}
    for p in paintings:
        if not p.id:
            raise CorpusError("painting with empty id", p.id)
        if p.id in seen:
            raise CorpusError(f"duplicate painting id {p.id!r}", p.id)
        seen.add(p.id)
        pmap[p.id] = p

    seen = set()
    for c in comments:
        if not c.id:
            raise CorpusError("comment with empty id", c.id)
        if c.id in seen:
            raise CorpusError(f"duplicate comment id {c.id!r}", c.id)
        seen.add(c.id)
        if not c.text:
            raise CorpusError(f"comment {c.id!r}: empty text", c.id)
        if c.painting_id not in pmap:
            raise CorpusError(
                f"comment {c.id!r}: unknown painting_id {c.painting_id!r}", c.id
            )

    seen = set()
    for r in qa:
        if not r.id:
            raise CorpusError("qa record with empty id", r.id)
        if r.id in seen:
            raise CorpusError(f"duplicate qa id {r.id!r}", r.id)
        seen.add(r.id)
        if not r.question:
            raise CorpusError(f"qa {r.id!r}: empty question", r.id)
        if not r.answer:
            raise CorpusError(f"qa {r.id!r}: empty answer", r.id)
        if r.modality not in MODALITIES:
            raise CorpusError(f"qa {r.id!r}: bad modality {r.modality!r}", r.id)
        if r.split not in SPLITS:
            raise CorpusError(f"qa {r.id!r}: bad split {r.split!r}", r.id)
        if r.painting_id not in pmap:
            raise CorpusError(f"qa {r.id!r}: unknown painting_id {r.painting_id!r}", r.id)

    return Corpus(paintings=pmap, comments=tuple(comments), qa=tuple(qa))


def load_corpus(path: str | Path, format: str = "json") -> Corpus:
    """Load and validate a corpus file. ``format`` is currently ``json`` only;
    comment CSV import is a separate merge step (:func:`load_comments_csv`)."""
    if format != "json":
        raise ValueError(f"unsupported corpus format {format!r}")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    try:
        doc = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise CorpusError(f"not valid JSON: {path} ({e})") from e
    if not isinstance(doc, dict):
        raise CorpusError(f"corpus document must be a JSON object: {path}")

    paintings = []
    for obj in doc.get("paintings", []):
        pid = str(_require(obj, "id", str(obj.get("id", "?")), "painting"))
        paintings.append(
            Painting(
                id=pid,
                image_ref=str(obj.get("image_ref", "")),
                author=obj.get("author"),
                title=obj.get("title"),
                year=obj.get("year"),
            )
        )
    comments = []
    for obj in doc.get("comments", []):
        cid = str(_require(obj, "id", str(obj.get("id", "?")), "comment"))
        comments.append(
            Comment(
                id=cid,
                painting_id=str(_require(obj, "painting_id", cid, "comment")),
                text=str(_require(obj, "text", cid, "comment")),
            )
        )
    qa = []
    for obj in doc.get("qa", []):
        qid = str(_require(obj, "id", str(obj.get("id", "?")), "qa"))
        qa.append(
            QaRecord(
                id=qid,
                painting_id=str(_require(obj, "painting_id", qid, "qa")),
                question=str(_require(obj, "question", qid, "qa")),
                answer=str(_require(obj, "answer", qid, "qa")),
                modality=str(_require(obj, "modality", qid, "qa")),
                split=str(_require(obj, "split", qid, "qa")),
            )
        )
    return validate(paintings, comments, qa)


def load_comments_csv(path: str | Path) -> list[Comment]:
    """Comment import path: CSV with header ``id,painting_id,text``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"comments CSV not found: {path}")
    out = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "painting_id", "text"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise CorpusError(f"comments CSV must have columns {sorted(required)}: {path}")
        for row in reader:
            out.append(Comment(id=row["id"], painting_id=row["painting_id"], text=row["text"]))
    return out


@dataclass(frozen=True)
class LengthStats:
    overall: float | None
    visual: float | None
    knowledge: float | None


@dataclass(frozen=True)
class StatsReport:
    split: str | None
    qa_pairs: int
    visual: int
    knowledge: int
    question_length: LengthStats
    answer_length: LengthStats

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "qa_pairs": self.qa_pairs,
            "visual": self.visual,
            "knowledge": self.knowledge,
            "question_length": vars(self.question_length).copy(),
            "answer_length": vars(self.answer_length).copy(),
        }


def _mean_len(texts: list[str]) -> float | None:
    # whitespace token count on raw text, mean to 2 decimals
    if not texts:
        return None
    return round(sum(len(t.split()) for t in texts) / len(texts), 2)


def compute_stats(corpus: Corpus, split: str | None = None) -> StatsReport:
    records = corpus.split_records(split)
    vis = [r for r in records if r.modality == "visual"]
    kno = [r for r in records if r.modality == "knowledge"]
    return StatsReport(
        split=split,
        qa_pairs=len(records),
        visual=len(vis),
        knowledge=len(kno),
        question_length=LengthStats(
            overall=_mean_len([r.question for r in records]),
            visual=_mean_len([r.question for r in vis]),
            knowledge=_mean_len([r.question for r in kno]),
        ),
        answer_length=LengthStats(
            overall=_mean_len([r.answer for r in records]),
            visual=_mean_len([r.answer for r in vis]),
            knowledge=_mean_len([r.answer for r in kno]),
        ),
    )


@dataclass(frozen=True)
class AnswerVocabulary:
    """Top-K most frequent single-word training answers, lowercased.
    Ordered by frequency descending, ties broken lexicographically."""

    tokens: tuple[str, ...]
    frequencies: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(set(self.tokens)):
            raise ValueError("vocabulary tokens must be unique")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    @property
    def _index(self) -> dict[str, int]:
        idx = getattr(self, "_index_cache", None)
        if idx is None:
            idx = {t: i for i, t in enumerate(self.tokens)}
            object.__setattr__(self, "_index_cache", idx)
        return idx

    def index_of(self, token: str) -> int:
        return self._index[token]

    def to_dict(self) -> dict:
        return {
            "format": "answer-vocabulary",
            "version": 1,
            "tokens": list(self.tokens),
            "frequencies": list(self.frequencies),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnswerVocabulary":
        if d.get("format") != "answer-vocabulary" or d.get("version") != 1:
            raise ValueError("not an answer-vocabulary file (or unsupported version)")
        return cls(tokens=tuple(d["tokens"]), frequencies=tuple(d["frequencies"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", "utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "AnswerVocabulary":
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))


def build_answer_vocabulary(corpus: Corpus, size: int = 5000) -> AnswerVocabulary:
    """Most frequent single-token train-split answers (lowercased). Multi-word
    answers are excluded; the visual branch predicts single words."""
    train = corpus.split_records("train")
    if not train:
        raise CorpusError("cannot build answer vocabulary: no training QA records")
    counts: Counter[str] = Counter()
    for r in train:
        words = r.answer.split()
        if len(words) == 1:
            counts[words[0].lower()] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:size]
    return AnswerVocabulary(
        tokens=tuple(t for t, _ in ranked),
        frequencies=tuple(n for _, n in ranked),
    )


def vocabulary_coverage(vocab: AnswerVocabulary, records: list[QaRecord]) -> float:
    """Fraction of records whose gold answer (lowercased) is in the vocabulary."""
    if not records:
        raise ValueError("vocabulary_coverage requires a non-empty record list")
    hits = sum(1 for r in records if r.answer.lower() in vocab)
    return hits / len(records)
