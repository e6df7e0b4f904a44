import numpy as np
import pytest

from scorer_sidecar.stub import StubModel


class TestEmbeddings:
    def test_dims(self):
        m = StubModel(seed=0)
        assert len(m.embed_question("who ?")) == 1024
        assert len(m.embed_image("x.jpg")) == 2048

    def test_unit_norm_and_finite(self):
        m = StubModel(seed=0)
        vec = np.array(m.embed_question("what color is the coat ?"))
        assert np.isfinite(vec).all()
        assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-9)

    def test_deterministic_for_fixed_seed(self):
        a = StubModel(seed=3).embed_question("the same text")
        b = StubModel(seed=3).embed_question("the same text")
        assert a == b

    def test_seed_and_text_sensitivity(self):
        m = StubModel(seed=0)
        assert m.embed_question("text one") != m.embed_question("text two")
        assert StubModel(seed=1).embed_question("t") != StubModel(seed=2).embed_question("t")

    def test_question_and_image_spaces_differ(self):
        m = StubModel(seed=0)
        q = m.embed_question("same string")
        i = m.embed_image("same string")
        assert q[:10] != i[:10]


class TestScorePair:
    def test_identical_strictly_above_unrelated(self):
        m = StubModel(seed=0)
        q = "who painted the milkmaid"
        assert m.score_pair(q, q) > m.score_pair(q, "votive panel of a winter chapel")

    def test_range(self):
        m = StubModel(seed=0)
        cases = [
            ("a b c", "a b c"),
            ("a b c", "c d e"),
            ("a", ""),
            ("", ""),
            ("x y", "completely different words"),
        ]
        for q, c in cases:
            assert 0.0 <= m.score_pair(q, c) <= 1.0


class TestExtractSpan:
    def test_span_within_bounds(self):
        m = StubModel(seed=0)
        for context in ("one", "one two three", "a b c d e f g"):
            span = m.extract_span("a question ?", context)
            n = len(context.split())
            assert 0 <= span["start"] <= span["end"] < n
            assert span["text"] == context.split()[span["start"]]

    def test_prefers_non_question_token(self):
        m = StubModel(seed=0)
        span = m.extract_span("who painted this ?", "who painted this Goya")
        assert span["text"] == "Goya"

    def test_all_question_tokens_falls_back_to_first(self):
        m = StubModel(seed=0)
        span = m.extract_span("who painted this ?", "who painted")
        assert (span["start"], span["end"], span["text"]) == (0, 0, "who")


class TestHealth:
    def test_reports_dims_and_mode(self):
        info = StubModel(seed=5).health()
        assert info["question_dim"] == 1024
        assert info["image_dim"] == 2048
        assert info["mode"] == "stub"
        assert info["seed"] == 5
