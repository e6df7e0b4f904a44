import json
import random
from pathlib import Path

import pytest

from artqa.evaluation import (
    ConfusionMatrix,
    ExperimentConfig,
    NormalizationConfig,
    confusion_matrix,
    exact_match,
    normalize_answer,
    recall_at_k,
    render_csv,
    render_text,
    run_experiment,
    write_report,
)
from artqa.selector import RoutingRecord
from artqa.tfidf import RankedList

DATA = Path(__file__).parent / "data"

# 20 hand cases; the fourth row is the published strictness example
EM_CASES = [
    ("bull", "bull", True),
    ("  Bull ", "bull", True),
    ("bull.", "bull", True),
    ("before his death", "in the year before his death", False),
    ("a bull", "bull", False),
    ("BULL", "bull", True),
    ("bull ", " bull", True),
    ("the   red  bull", "the red bull", True),
    ("bull!", "bull?", True),
    ("red bull", "bull red", False),
    ("", "", True),
    ("bull", "", False),
    ("1814", "1814", True),
    ("in 1814", "1814", False),
    ("saint-remy", "saint remy", False),
    ("'bull'", "bull", True),
    ("bull,", "bull.", True),
    ("Goya y Lucientes", "goya y lucientes", True),
    ("goya", "goyas", False),
    ("two : dogs", "two : dogs", True),
]


class TestExactMatch:
    @pytest.mark.parametrize("pred,gold,expected", EM_CASES)
    def test_hand_cases(self, pred, gold, expected):
        assert exact_match(pred, gold) is expected

    def test_reflexive(self):
        for pred, gold, _ in EM_CASES:
            assert exact_match(pred, pred)
            assert exact_match(gold, gold)

    def test_symmetric(self):
        for pred, gold, expected in EM_CASES:
            assert exact_match(gold, pred) is expected

    def test_match_iff_normalized_equal(self):
        config = NormalizationConfig()
        for pred, gold, _ in EM_CASES:
            assert exact_match(pred, gold, config) == (
                normalize_answer(pred, config) == normalize_answer(gold, config)
            )

    def test_strict_mode_disables_normalization(self):
        strict = NormalizationConfig(
            lowercase=False, trim=False, collapse_whitespace=False, strip_edge_punctuation=False
        )
        assert not exact_match(" Bull", "bull", strict)
        assert exact_match("Bull", "Bull", strict)

    def test_individual_toggles(self):
        no_case = NormalizationConfig(lowercase=False)
        assert not exact_match("Bull", "bull", no_case)
        no_punct = NormalizationConfig(strip_edge_punctuation=False)
        assert not exact_match("bull.", "bull", no_punct)


def ranked(ids):
    return RankedList(query_id="", entries=tuple((i, float(len(ids) - k)) for k, i in enumerate(ids)))


class TestRecall:
    def test_gold_always_first(self):
        runs = [(ranked(["g", "a", "b"]), "g") for _ in range(5)]
        for k in (1, 5, 10):
            assert recall_at_k(runs, k) == 1.0

    def test_gold_always_absent(self):
        runs = [(ranked(["a", "b", "c"]), "zzz") for _ in range(5)]
        for k in (1, 5, 10):
            assert recall_at_k(runs, k) == 0.0

    def test_rank_sensitivity(self):
        runs = [(ranked(["a", "g", "b"]), "g")]
        assert recall_at_k(runs, 1) == 0.0
        assert recall_at_k(runs, 2) == 1.0

    def test_monotone_in_k_over_random_runs(self):
        rng = random.Random(23)
        for _ in range(100):
            ids = [f"c{i}" for i in range(rng.randint(1, 15))]
            rng.shuffle(ids)
            runs = [(ranked(ids), rng.choice(ids + ["missing"])) for _ in range(rng.randint(1, 6))]
            values = [recall_at_k(runs, k) for k in (1, 5, 10)]
            assert values[0] <= values[1] <= values[2]

    def test_empty_runs_rejected(self):
        with pytest.raises(ValueError):
            recall_at_k([], 5)

    def test_bad_k_rejected(self):
        with pytest.raises(ValueError):
            recall_at_k([(ranked(["a"]), "a")], 0)


def routing(predictions):
    return [RoutingRecord(qa_id=f"q{i}", predicted=p, probability=0.5) for i, p in enumerate(predictions)]


class TestConfusion:
    def test_perfect_routing_has_zero_off_diagonal(self):
        gold = ["visual", "knowledge", "visual", "knowledge"]
        cm = confusion_matrix(routing(gold), gold)
        assert cm.to_dict() == {
            "visual->visual": 2,
            "visual->knowledge": 0,
            "knowledge->visual": 0,
            "knowledge->knowledge": 2,
        }
        assert cm.accuracy == 1.0

    def test_all_knowledge_stub(self):
        gold = ["visual", "visual", "knowledge"]
        cm = confusion_matrix(routing(["knowledge"] * 3), gold)
        assert cm.to_dict()["visual->knowledge"] == 2
        assert cm.to_dict()["visual->visual"] == 0

    def test_counts_conserved(self):
        rng = random.Random(3)
        for _ in range(20):
            n = rng.randint(1, 40)
            gold = [rng.choice(["visual", "knowledge"]) for _ in range(n)]
            preds = [rng.choice(["visual", "knowledge"]) for _ in range(n)]
            assert confusion_matrix(routing(preds), gold).total == n

    def test_mismatched_lengths(self):
        with pytest.raises(ValueError):
            confusion_matrix(routing(["visual"]), ["visual", "knowledge"])

    def test_empty_accuracy_absent(self):
        assert ConfusionMatrix(counts={}).accuracy is None


class TestExperiment:
    def test_toy_report_matches_golden(self, toy_workspace, tmp_path):
        config = ExperimentConfig.load(toy_workspace / "experiment.json")
        report = run_experiment(config, base_dir=toy_workspace)
        write_report(report, tmp_path)
        for name in ("report.json", "report.txt", "report.csv", "traces.jsonl"):
            generated = (tmp_path / name).read_text("utf-8")
            golden = (DATA / "golden" / name).read_text("utf-8")
            assert generated == golden, name

    def test_confusion_total_equals_record_count(self, toy_workspace):
        config = ExperimentConfig.load(toy_workspace / "experiment.json")
        report = run_experiment(config, base_dir=toy_workspace)
        assert report.confusion.total == report.n_records == 12

    def test_oracle_selector_equalizes_em(self, toy_workspace):
        config = ExperimentConfig.load(toy_workspace / "experiment.json")
        config = ExperimentConfig.from_dict({**config.to_dict(), "selector_mode": "oracle"})
        report = run_experiment(config, base_dir=toy_workspace)
        assert report.em["learned"] == report.em["gold_routing"]
        assert report.selector_accuracy == 1.0

    def test_rerank_preserves_recall_at_10_in_report(self, toy_workspace):
        config = ExperimentConfig.load(toy_workspace / "experiment.json")
        report = run_experiment(config, base_dir=toy_workspace)
        assert report.retrieval["tfidf"]["R@10"] == report.retrieval["tfidf+rerank"]["R@10"]

    def test_report_files_embed_config_hash(self, toy_workspace, tmp_path):
        config = ExperimentConfig.load(toy_workspace / "experiment.json")
        report = run_experiment(config, base_dir=toy_workspace)
        paths = write_report(report, tmp_path, gnuplot=True)
        assert report.config_hash in (tmp_path / "report.json").read_text("utf-8")
        assert report.config_hash in (tmp_path / "report.txt").read_text("utf-8")
        assert report.config_hash in (tmp_path / "report.csv").read_text("utf-8")
        assert report.config_hash in (tmp_path / "traces.jsonl").read_text("utf-8")
        assert (tmp_path / "recall.dat").exists()
        assert len(paths) == 5

    def test_renderers_cover_all_sections(self, toy_workspace):
        config = ExperimentConfig.load(toy_workspace / "experiment.json")
        report = run_experiment(config, base_dir=toy_workspace)
        text = render_text(report)
        assert "gold-labels" in text and "tfidf+rerank" in text
        csv = render_csv(report)
        assert "em_learned,overall" in csv
