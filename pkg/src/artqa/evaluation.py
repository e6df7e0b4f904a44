"""Metrics and the experiment harness.

Exact match is strict string equality after a configurable, minimal
normalization (case, whitespace, edge punctuation); no token-level rewriting
is applied by default, so "before his death" never matches "in the year
before his death". Recall@k measures whether the gold comment appears in
the top k retrieved. The harness evaluates both learned routing and
ground-truth-label routing in one run and renders text + CSV reports.

Reports are byte-deterministic for a fixed config and inputs; wall-clock
timestamps are therefore kept out of report files unless explicitly
requested.
"""

from __future__ import annotations

import json
import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import MODALITIES, compute_stats
from .engine import Engine, EngineConfig, config_hash
from .selector import RoutingRecord
from .tfidf import RankedList, retrieve_topk


@dataclass(frozen=True)
class NormalizationConfig:
    lowercase: bool = True
    trim: bool = True
    collapse_whitespace: bool = True
    strip_edge_punctuation: bool = True

    def as_dict(self) -> dict:
        return {
            "lowercase": self.lowercase,
            "trim": self.trim,
            "collapse_whitespace": self.collapse_whitespace,
            "strip_edge_punctuation": self.strip_edge_punctuation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationConfig":
        return cls(**d)


def normalize_answer(text: str, config: NormalizationConfig | None = None) -> str:
    config = config or NormalizationConfig()
    if config.lowercase:
        text = text.lower()
    if config.trim:
        text = text.strip()
    if config.collapse_whitespace:
        text = " ".join(text.split())
    if config.strip_edge_punctuation:
        text = text.strip(string.punctuation)
        if config.trim:
            text = text.strip()
    return text


def exact_match(prediction: str, gold: str, config: NormalizationConfig | None = None) -> bool:
    return normalize_answer(prediction, config) == normalize_answer(gold, config)


def recall_at_k(runs: list[tuple[RankedList, str]], k: int) -> float:
    """Fraction of runs whose gold comment id is among the first k entries."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not runs:
        raise ValueError("recall_at_k requires at least one run")
    hits = sum(1 for ranked, gold in runs if gold in ranked.ids()[:k])
    return hits / len(runs)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts keyed (gold modality, predicted modality)."""

    counts: dict[tuple[str, str], int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def accuracy(self) -> float | None:
        if self.total == 0:
            return None
        correct = sum(n for (g, p), n in self.counts.items() if g == p)
        return correct / self.total

    def to_dict(self) -> dict:
        return {f"{g}->{p}": self.counts.get((g, p), 0) for g in MODALITIES for p in MODALITIES}


def confusion_matrix(records: list[RoutingRecord], gold_labels: list[str]) -> ConfusionMatrix:
    if len(records) != len(gold_labels):
        raise ValueError(
            f"routing records ({len(records)}) and gold labels ({len(gold_labels)}) differ in length"
        )
    counts: dict[tuple[str, str], int] = {}
    for rec, gold in zip(records, gold_labels):
        key = (gold, rec.predicted)
        counts[key] = counts.get(key, 0) + 1
    return ConfusionMatrix(counts=counts)


@dataclass(frozen=True)
class ExperimentConfig:
    engine: EngineConfig
    split: str = "test"
    k_list: tuple[int, ...] = (1, 5, 10)
    normalization: NormalizationConfig = field(default_factory=NormalizationConfig)
    selector_mode: str = "model"  # "model" | "oracle" (routes by gold labels)
    seed: int = 0
    gnuplot: bool = False
    include_timestamps: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        engine = EngineConfig.from_dict(d.pop("engine"))
        norm = NormalizationConfig.from_dict(d.pop("normalization", {}))
        k_list = tuple(d.pop("k_list", (1, 5, 10)))
        return cls(engine=engine, normalization=norm, k_list=k_list, **d)

    def to_dict(self) -> dict:
        return {
            "engine": self.engine.to_dict(),
            "split": self.split,
            "k_list": list(self.k_list),
            "normalization": self.normalization.as_dict(),
            "selector_mode": self.selector_mode,
            "seed": self.seed,
            "gnuplot": self.gnuplot,
            "include_timestamps": self.include_timestamps,
        }

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))


@dataclass
class EvalReport:
    config_hash: str
    seed: int
    split: str
    n_records: int
    em: dict  # {"learned": {...}, "gold_routing": {...}} with overall/per-modality EM
    retrieval: dict  # {config name: {"R@k": value}}
    confusion: ConfusionMatrix
    selector_accuracy: float | None
    normalization: dict
    timestamps: dict | None = None
    traces: list[dict] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "split": self.split,
            "n_records": self.n_records,
            "em": self.em,
            "retrieval": self.retrieval,
            "confusion_matrix": self.confusion.to_dict(),
            "selector_accuracy": self.selector_accuracy,
            "normalization": self.normalization,
        }
        if self.timestamps is not None:
            d["timestamps"] = self.timestamps
        return d


def _em_fraction(pairs: list[tuple[str, str]], norm: NormalizationConfig) -> float | None:
    if not pairs:
        return None
    return sum(1 for p, g in pairs if exact_match(p, g, norm)) / len(pairs)


def _evaluate_record(engine: Engine, config: ExperimentConfig, r, max_k: int):
    painting = engine.corpus.paintings[r.painting_id]
    if config.selector_mode == "oracle":
        routed = RoutingRecord(
            qa_id=r.id, predicted=r.modality, probability=1.0 if r.modality == "visual" else 0.0
        )
    else:
        routed = engine.route(r.question, painting, r.id)

    ans_learned, trace = engine.answer(r.question, r.painting_id, r.id, force_branch=routed.predicted)
    trace["probability"] = routed.probability
    if r.modality == routed.predicted:
        ans_gold = ans_learned
    else:
        ans_gold, _ = engine.answer(r.question, r.painting_id, r.id, force_branch=r.modality)

    stage1 = reranked = gold_cid = None
    if r.modality == "knowledge":
        gold_cid = engine.corpus.gold_comment_id(r)
        if gold_cid is not None:
            stage1 = retrieve_topk(r.question, engine.index, k=max_k, query_id=r.id)
            if engine.reranker is not None:
                reranked = engine._rerank(r.question, stage1)
    return routed, trace, ans_learned, ans_gold, stage1, reranked, gold_cid


def run_experiment(config: ExperimentConfig, base_dir: str | Path = ".", threads: int = 1) -> EvalReport:
    """Evaluate one experiment. ``threads`` bounds the per-record fan-out;
    results are folded in corpus order, so the report is identical for any
    thread count."""
    engine = Engine.from_config(config.engine, base_dir)
    ch = config_hash(config.to_dict())
    records = engine.corpus.split_records(config.split)
    norm = config.normalization

    routing_records: list[RoutingRecord] = []
    gold_labels: list[str] = []
    em_pairs: dict[str, list[tuple[str, str]]] = {"learned": [], "gold_routing": []}
    em_by_modality: dict[str, dict[str, list[tuple[str, str]]]] = {
        mode: {m: [] for m in MODALITIES} for mode in ("learned", "gold_routing")
    }
    retrieval_runs: list[tuple[RankedList, str]] = []
    rerank_runs: list[tuple[RankedList, str]] = []
    traces: list[dict] = []

    max_k = max(config.k_list)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: _evaluate_record(engine, config, r, max_k), records))
    else:
        results = [_evaluate_record(engine, config, r, max_k) for r in records]

    for r, (routed, trace, ans_learned, ans_gold, stage1, reranked, gold_cid) in zip(records, results):
        routing_records.append(routed)
        gold_labels.append(r.modality)
        traces.append(trace)
        em_pairs["learned"].append((ans_learned.text, r.answer))
        em_by_modality["learned"][r.modality].append((ans_learned.text, r.answer))
        em_pairs["gold_routing"].append((ans_gold.text, r.answer))
        em_by_modality["gold_routing"][r.modality].append((ans_gold.text, r.answer))
        if stage1 is not None:
            retrieval_runs.append((stage1, gold_cid))
            if reranked is not None:
                rerank_runs.append((reranked, gold_cid))

    em = {}
    for mode in ("learned", "gold_routing"):
        em[mode] = {
            "overall": _em_fraction(em_pairs[mode], norm),
            "visual": _em_fraction(em_by_modality[mode]["visual"], norm),
            "knowledge": _em_fraction(em_by_modality[mode]["knowledge"], norm),
        }

    retrieval: dict[str, dict[str, float | None]] = {}
    for name, runs in (("tfidf", retrieval_runs), ("tfidf+rerank", rerank_runs)):
        if not runs and name == "tfidf+rerank":
            continue
        retrieval[name] = {
            f"R@{k}": (recall_at_k(runs, k) if runs else None) for k in config.k_list
        }

    confusion = confusion_matrix(routing_records, gold_labels)
    return EvalReport(
        config_hash=ch,
        seed=config.seed,
        split=config.split,
        n_records=len(records),
        em=em,
        retrieval=retrieval,
        confusion=confusion,
        selector_accuracy=confusion.accuracy,
        normalization=norm.as_dict(),
        traces=traces,
    )


def _fmt(x: float | None) -> str:
    return "n/a" if x is None else f"{x:.4f}"


def render_text(report: EvalReport) -> str:
    lines = [
        f"split: {report.split}  records: {report.n_records}",
        f"config: {report.config_hash}",
        "",
        "answering (exact match)",
        f"{'routing':<14}{'overall':>10}{'visual':>10}{'knowledge':>11}",
    ]
    for mode, label in (("learned", "learned"), ("gold_routing", "gold-labels")):
        em = report.em[mode]
        lines.append(
            f"{label:<14}{_fmt(em['overall']):>10}{_fmt(em['visual']):>10}{_fmt(em['knowledge']):>11}"
        )
    lines += ["", "retrieval (recall@k, knowledge questions)"]
    ks = sorted({k for cfg in report.retrieval.values() for k in cfg}, key=lambda s: int(s[2:]))
    header = f"{'config':<14}" + "".join(f"{k:>8}" for k in ks)
    lines.append(header)
    for name, values in report.retrieval.items():
        lines.append(f"{name:<14}" + "".join(f"{_fmt(values.get(k)):>8}" for k in ks))
    lines += ["", "modality selector (gold x predicted)"]
    cm = report.confusion.to_dict()
    lines.append(f"{'':<16}{'visual':>10}{'knowledge':>11}")
    for g in MODALITIES:
        lines.append(
            f"{'gold ' + g:<16}{cm[f'{g}->visual']:>10}{cm[f'{g}->knowledge']:>11}"
        )
    lines.append(f"accuracy: {_fmt(report.selector_accuracy)}")
    return "\n".join(lines) + "\n"


def render_csv(report: EvalReport) -> str:
    rows = [("section", "name", "value"), ("meta", "config_hash", report.config_hash)]
    rows.append(("meta", "split", report.split))
    rows.append(("meta", "n_records", str(report.n_records)))
    for mode in ("learned", "gold_routing"):
        for key, val in report.em[mode].items():
            rows.append(("em_" + mode, key, _fmt(val)))
    for name, values in report.retrieval.items():
        for k, val in values.items():
            rows.append(("retrieval_" + name, k, _fmt(val)))
    for key, val in report.confusion.to_dict().items():
        rows.append(("confusion", key, str(val)))
    rows.append(("confusion", "accuracy", _fmt(report.selector_accuracy)))
    return "\n".join(",".join(row) for row in rows) + "\n"


def render_gnuplot(report: EvalReport) -> str:
    """recall.dat: one row per k, one column per retrieval configuration."""
    names = list(report.retrieval)
    ks = sorted({int(k[2:]) for cfg in report.retrieval.values() for k in cfg})
    lines = ["# k " + " ".join(names)]
    for k in ks:
        vals = " ".join(_fmt(report.retrieval[n].get(f"R@{k}")) for n in names)
        lines.append(f"{k} {vals}")
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, out_dir: str | Path, gnuplot: bool = False) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    json_path = out / "report.json"
    json_path.write_text(
        json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n", "utf-8"
    )
    written.append(json_path)
    txt_path = out / "report.txt"
    txt_path.write_text(render_text(report), "utf-8")
    written.append(txt_path)
    csv_path = out / "report.csv"
    csv_path.write_text(render_csv(report), "utf-8")
    written.append(csv_path)
    traces_path = out / "traces.jsonl"
    with traces_path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"_meta": {"config_hash": report.config_hash}}) + "\n")
        for t in report.traces:
            fh.write(json.dumps(t, sort_keys=True, ensure_ascii=False) + "\n")
    written.append(traces_path)
    if gnuplot:
        dat_path = out / "recall.dat"
        dat_path.write_text(render_gnuplot(report), "utf-8")
        written.append(dat_path)
    return written


def stats_table(corpus) -> str:
    """Corpus statistics table over all splits (counts and mean word lengths)."""
    rows = []
    header = f"{'':<26}{'train':>10}{'val':>10}{'test':>10}"
    reports = {s: compute_stats(corpus, s) for s in ("train", "val", "test")}

    def fmt(v) -> str:
        return "n/a" if v is None else (f"{v:,}" if isinstance(v, int) else f"{v:.2f}")

    rows.append(header)
    rows.append(f"{'QA pairs':<26}" + "".join(f"{fmt(reports[s].qa_pairs):>10}" for s in reports))
    rows.append(f"{'  visual':<26}" + "".join(f"{fmt(reports[s].visual):>10}" for s in reports))
    rows.append(f"{'  knowledge':<26}" + "".join(f"{fmt(reports[s].knowledge):>10}" for s in reports))
    rows.append(
        f"{'question length (words)':<26}"
        + "".join(f"{fmt(reports[s].question_length.overall):>10}" for s in reports)
    )
    rows.append(
        f"{'  visual':<26}" + "".join(f"{fmt(reports[s].question_length.visual):>10}" for s in reports)
    )
    rows.append(
        f"{'  knowledge':<26}"
        + "".join(f"{fmt(reports[s].question_length.knowledge):>10}" for s in reports)
    )
    rows.append(
        f"{'answer length (words)':<26}"
        + "".join(f"{fmt(reports[s].answer_length.overall):>10}" for s in reports)
    )
    rows.append(
        f"{'  visual':<26}" + "".join(f"{fmt(reports[s].answer_length.visual):>10}" for s in reports)
    )
    rows.append(
        f"{'  knowledge':<26}"
        + "".join(f"{fmt(reports[s].answer_length.knowledge):>10}" for s in reports)
    )
    return "\n".join(rows) + "\n"
