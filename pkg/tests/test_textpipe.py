import pytest
from hypothesis import given, strategies as st

from artqa.textpipe import (
    PipelineConfig,
    content_tokens,
    default_stopwords,
    ngrams,
    preprocess,
    remove_stopwords,
    tokenize,
)


class TestTokenize:
    def test_splits_on_non_alphanumeric(self):
        assert tokenize("Who depicts Napoleon in 1814?") == ["who", "depicts", "napoleon", "in", "1814"]

    def test_empty_input(self):
        assert tokenize("") == []

    def test_punctuation_runs(self):
        assert tokenize("d'Arthois—1814") == ["d", "arthois", "1814"]

    def test_underscore_is_a_separator(self):
        assert tokenize("salon_des_refuses") == ["salon", "des", "refuses"]

    def test_case_preserving_mode(self):
        assert tokenize("Goya PAINTED", lowercase=False) == ["Goya", "PAINTED"]


class TestStopwords:
    def test_standard_list(self):
        config = PipelineConfig()
        tokens = ["who", "depicts", "napoleon", "in", "1814"]
        assert remove_stopwords(tokens, config) == ["depicts", "napoleon", "1814"]

    def test_empty_stopword_set_is_identity(self):
        config = PipelineConfig(stopwords=frozenset())
        tokens = ["the", "a", "bull"]
        assert remove_stopwords(tokens, config) == tokens

    def test_all_stopword_input(self):
        config = PipelineConfig()
        assert remove_stopwords(["the", "of", "and"], config) == []

    def test_membership_is_tested_lowercased(self):
        config = PipelineConfig(lowercase=False)
        assert remove_stopwords(["The", "Bull"], config) == ["Bull"]


class TestNgrams:
    def test_bigrams(self):
        assert ngrams(["a", "b", "c"], 2) == ["a", "b", "c", "a b", "b c"]

    def test_short_input(self):
        assert ngrams(["a"], 3) == ["a"]

    def test_count_formula(self):
        assert len(ngrams(["x", "y", "z"], 3)) == 3 + 2 + 1

    def test_rejects_bad_n(self):
        with pytest.raises(ValueError):
            ngrams(["a"], 0)

    @given(st.lists(st.sampled_from("abcde"), max_size=12), st.integers(min_value=1, max_value=5))
    def test_count_formula_property(self, tokens, n_max):
        expected = sum(max(0, len(tokens) - n + 1) for n in range(1, n_max + 1))
        assert len(ngrams(tokens, n_max)) == expected


class TestPipeline:
    def test_pure_and_deterministic(self):
        config = PipelineConfig()
        text = "The Fighting Temeraire tugged to her last berth, 1839."
        assert preprocess(text, config) == preprocess(text, config)

    def test_content_tokens_stemmed(self):
        config = PipelineConfig()
        assert content_tokens("Who depicts Napoleon in 1814?", config) == ["depict", "napoleon", "1814"]

    def test_no_empty_tokens(self):
        config = PipelineConfig()
        assert all(g for g in preprocess("a—b––c!!", config))

    def test_config_roundtrip(self):
        config = PipelineConfig(lowercase=False, stopwords=frozenset({"x"}), stem=False, n_max=2)
        assert PipelineConfig.from_dict(config.to_dict()) == config

    def test_rejects_bad_n_max(self):
        with pytest.raises(ValueError):
            PipelineConfig(n_max=0)

    def test_default_stopwords_nonempty_and_lowercase(self):
        words = default_stopwords()
        assert len(words) > 50
        assert all(w == w.lower() for w in words)
