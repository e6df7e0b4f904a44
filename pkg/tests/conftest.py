import json
import shutil
from pathlib import Path

import pytest

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::")[-1].replace("test_acceptance_", "")
        _ACCEPTANCE_RESULTS[name] = report.outcome.upper()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"{outcome:<6} {name}")

from artqa.answerer import train_visual_model
from artqa.corpus import build_answer_vocabulary, load_corpus
from artqa.linear import TrainConfig
from artqa.rerank import train_pair_classifier
from artqa.selector import HashedFeatureProvider, train_selector
from artqa.textpipe import PipelineConfig
from artqa.tfidf import build_index, save_index

REPO_ROOT = Path(__file__).resolve().parents[1]
TOY_CORPUS = REPO_ROOT / "data" / "toy" / "corpus.json"
DATA_DIR = Path(__file__).resolve().parent / "data"

# canonical toy training recipe; changing any value invalidates the goldens
TOY_SEED = 7
TOY_PROVIDER_SEED = 13
TOY_VOCAB_SIZE = 100


@pytest.fixture(scope="session")
def toy_corpus():
    return load_corpus(TOY_CORPUS)


@pytest.fixture(scope="session")
def toy_workspace(tmp_path_factory, toy_corpus):
    """Toy corpus plus all trained artifacts, laid out with stable relative
    names so config hashes (and therefore reports) are reproducible."""
    root = tmp_path_factory.mktemp("toy")
    shutil.copy(TOY_CORPUS, root / "corpus.json")

    index = build_index(list(toy_corpus.comments), PipelineConfig())
    save_index(index, root / "toy.idx")

    provider = HashedFeatureProvider(seed=TOY_PROVIDER_SEED)
    selector, _ = train_selector(toy_corpus, provider, TrainConfig(seed=TOY_SEED))
    selector.save(root / "selector.json")

    reranker, _ = train_pair_classifier(toy_corpus, index, TrainConfig(seed=TOY_SEED))
    reranker.save(root / "reranker.json")

    vocab = build_answer_vocabulary(toy_corpus, size=TOY_VOCAB_SIZE)
    vocab.save(root / "vocab.json")
    visual, _ = train_visual_model(toy_corpus, vocab, provider, TrainConfig(seed=TOY_SEED))
    visual.save(root / "visual.npz")

    engine_cfg = {
        "corpus": "corpus.json",
        "index": "toy.idx",
        "selector_model": "selector.json",
        "reranker_model": "reranker.json",
        "visual_model": "visual.npz",
        "vocabulary": "vocab.json",
        "provider": {"kind": "hashed", "seed": TOY_PROVIDER_SEED},
        "seed": TOY_SEED,
    }
    (root / "engine.json").write_text(json.dumps(engine_cfg, indent=1), "utf-8")
    experiment_cfg = {
        "engine": engine_cfg,
        "split": "test",
        "k_list": [1, 5, 10],
        "seed": TOY_SEED,
    }
    (root / "experiment.json").write_text(json.dumps(experiment_cfg, indent=1), "utf-8")
    return root


@pytest.fixture(scope="session")
def toy_engine(toy_workspace):
    from artqa.engine import Engine, EngineConfig

    cfg = EngineConfig.from_dict(json.loads((toy_workspace / "engine.json").read_text("utf-8")))
    return Engine.from_config(cfg, base_dir=toy_workspace)
