"""Command-line entry point.

One binary, subcommand style. Batch workflows (ingest, index builds,
training, evaluation, question generation) run in-process; ``retrieve`` and
``answer`` can instead target a running service with ``--server``, and
``serve`` starts that service. Exit codes: 0 success, 1 usage error, 2 data
error. All randomness is seeded from the command line and recorded in the
artifacts, which embed the hash of the configuration that produced them.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .corpus import CorpusError, load_corpus
from .engine import Engine, EngineConfig, config_hash
from .tfidf import IndexFormatError

_DATA_ERRORS = (CorpusError, IndexFormatError, FileNotFoundError, KeyError, ValueError)


@click.group()
def cli() -> None:
    """Question answering over art corpora."""


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(), help="Corpus JSON file.")
@click.option("--comments-csv", type=click.Path(), default=None, help="Merge comments from CSV (id,painting_id,text).")
@click.option("--output", required=True, type=click.Path(), help="Validated corpus JSON to write.")
def ingest(input_path: str, comments_csv: str | None, output: str) -> None:
    """Validate a dataset file and write the normalized corpus."""
    from .corpus import load_comments_csv, validate

    corpus = load_corpus(input_path)
    if comments_csv:
        merged = list(corpus.comments) + load_comments_csv(comments_csv)
        corpus = validate(list(corpus.paintings.values()), merged, list(corpus.qa))
    params = {"command": "ingest", "input": input_path, "comments_csv": comments_csv}
    doc = {
        "_meta": {"config_hash": config_hash(params)},
        "paintings": [vars(p).copy() for p in corpus.paintings.values()],
        "comments": [vars(c).copy() for c in corpus.comments],
        "qa": [vars(r).copy() for r in corpus.qa],
    }
    Path(output).write_text(json.dumps(doc, indent=1, ensure_ascii=False) + "\n", "utf-8")
    click.echo(f"wrote {output}: {len(corpus.paintings)} paintings, "
               f"{len(corpus.comments)} comments, {len(corpus.qa)} qa records")


@cli.command("build-index")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--output", required=True, type=click.Path())
@click.option("--ngram-max", default=3, show_default=True, type=int)
@click.option("--stem/--no-stem", default=True, show_default=True)
@click.option("--stopwords/--no-stopwords", default=True, show_default=True)
@click.option("--lowercase/--no-lowercase", default=True, show_default=True)
@click.option("--threads", default=1, show_default=True, type=int, help="Parallel document preprocessing bound.")
def build_index_cmd(corpus_path: str, output: str, ngram_max: int, stem: bool, stopwords: bool, lowercase: bool, threads: int) -> None:
    """Build the TF-IDF index over all comments."""
    from .textpipe import PipelineConfig, default_stopwords
    from .tfidf import build_index, save_index

    corpus = load_corpus(corpus_path)
    config = PipelineConfig(
        lowercase=lowercase,
        stopwords=default_stopwords() if stopwords else frozenset(),
        stem=stem,
        n_max=ngram_max,
    )
    index = build_index(list(corpus.comments), config, threads=threads)
    params = {
        "command": "build-index",
        "corpus": corpus_path,
        "ngram_max": ngram_max,
        "stem": stem,
        "stopwords": stopwords,
        "lowercase": lowercase,
    }
    save_index(index, output, meta={"config_hash": config_hash(params)})
    click.echo(f"wrote {output}: {index.n_docs} documents, {len(index.vocabulary)} grams")


@cli.command()
@click.option("--question", required=True)
@click.option("--k", default=10, show_default=True, type=int)
@click.option("--index", "index_path", type=click.Path(), default=None)
@click.option("--reranker", type=click.Path(), default=None, help="Pair classifier for stage-2 scores.")
@click.option("--corpus", "corpus_path", type=click.Path(), default=None, help="Needed with --reranker.")
@click.option("--server", default=None, help="Target a running service instead of local artifacts.")
def retrieve(question: str, k: int, index_path: str | None, reranker: str | None, corpus_path: str | None, server: str | None) -> None:
    """Rank comments for a question; one JSON line per result."""
    if server:
        rows = _remote(server, "/retrieve", {"question": question, "k": k, "rerank": True})["results"]
        for r in rows:
            r.pop("text", None)
    else:
        if not index_path:
            raise click.UsageError("--index is required without --server")
        from .rerank import PairClassifier, rerank as rerank_fn
        from .tfidf import load_index, retrieve_topk

        index = load_index(index_path)
        stage1 = retrieve_topk(question, index, k=k)
        stage2 = None
        if reranker:
            if not corpus_path:
                raise click.UsageError("--corpus is required with --reranker")
            corpus = load_corpus(corpus_path)
            model = PairClassifier.load(reranker)
            stage2 = rerank_fn(question, stage1, model, corpus, index.config)
        s1 = dict(stage1.entries)
        order = stage2.entries if stage2 is not None else stage1.entries
        s2 = dict(stage2.entries) if stage2 is not None else {}
        rows = [
            {"comment_id": cid, "stage1_score": s1[cid], "stage2_score": s2.get(cid)}
            for cid, _ in order
        ]
    for row in rows:
        click.echo(json.dumps(row, sort_keys=True))


@cli.command("train-selector")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--output", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--epochs", default=20, show_default=True, type=int)
@click.option("--lr", default=0.1, show_default=True, type=float)
@click.option("--provider-seed", default=0, show_default=True, type=int)
def train_selector_cmd(corpus_path: str, output: str, seed: int, epochs: int, lr: float, provider_seed: int) -> None:
    """Train the modality selector on the train split."""
    from .linear import TrainConfig
    from .selector import HashedFeatureProvider, train_selector

    corpus = load_corpus(corpus_path)
    provider = HashedFeatureProvider(seed=provider_seed)
    model, trace = train_selector(corpus, provider, TrainConfig(learning_rate=lr, epochs=epochs, seed=seed))
    params = {"command": "train-selector", "corpus": corpus_path, "seed": seed,
              "epochs": epochs, "lr": lr, "provider_seed": provider_seed}
    doc = {**model.to_dict(), "config_hash": config_hash(params), "loss_trace": trace}
    Path(output).write_text(json.dumps(doc) + "\n", "utf-8")
    final = trace[-1] if trace else float("nan")
    click.echo(f"wrote {output} (final loss {final:.4f})")


@cli.command("train-reranker")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--index", "index_path", required=True, type=click.Path())
@click.option("--output", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--epochs", default=20, show_default=True, type=int)
@click.option("--lr", default=0.1, show_default=True, type=float)
@click.option("--negatives", default=9, show_default=True, type=int)
def train_reranker_cmd(corpus_path: str, index_path: str, output: str, seed: int, epochs: int, lr: float, negatives: int) -> None:
    """Train the pair classifier used for second-stage reranking."""
    from .linear import TrainConfig
    from .rerank import train_pair_classifier
    from .tfidf import load_index

    corpus = load_corpus(corpus_path)
    index = load_index(index_path)
    model, trace = train_pair_classifier(
        corpus, index, TrainConfig(learning_rate=lr, epochs=epochs, seed=seed),
        negatives_per_positive=negatives,
    )
    params = {"command": "train-reranker", "corpus": corpus_path, "index": index_path,
              "seed": seed, "epochs": epochs, "lr": lr, "negatives": negatives}
    doc = {**model.to_dict(), "config_hash": config_hash(params), "loss_trace": trace}
    Path(output).write_text(json.dumps(doc) + "\n", "utf-8")
    final = trace[-1] if trace else float("nan")
    click.echo(f"wrote {output} (final loss {final:.4f})")


@cli.command("train-visual")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--output", required=True, type=click.Path())
@click.option("--vocab-output", type=click.Path(), default=None, help="Also save the answer vocabulary.")
@click.option("--vocab-size", default=5000, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--epochs", default=20, show_default=True, type=int)
@click.option("--lr", default=0.1, show_default=True, type=float)
@click.option("--provider-seed", default=0, show_default=True, type=int)
def train_visual_cmd(corpus_path: str, output: str, vocab_output: str | None, vocab_size: int, seed: int, epochs: int, lr: float, provider_seed: int) -> None:
    """Train the closed-vocabulary visual answer model."""
    from .answerer import train_visual_model
    from .corpus import build_answer_vocabulary
    from .linear import TrainConfig
    from .selector import HashedFeatureProvider

    corpus = load_corpus(corpus_path)
    vocab = build_answer_vocabulary(corpus, size=vocab_size)
    provider = HashedFeatureProvider(seed=provider_seed)
    model, trace = train_visual_model(corpus, vocab, provider, TrainConfig(learning_rate=lr, epochs=epochs, seed=seed))
    params = {"command": "train-visual", "corpus": corpus_path, "vocab_size": vocab_size,
              "seed": seed, "epochs": epochs, "lr": lr, "provider_seed": provider_seed}
    ch = config_hash(params)
    model.save(output, extra_meta={"config_hash": ch})
    if vocab_output:
        doc = {**vocab.to_dict(), "config_hash": ch}
        Path(vocab_output).write_text(json.dumps(doc, indent=1) + "\n", "utf-8")
    final = trace[-1] if trace else float("nan")
    click.echo(f"wrote {output} ({len(vocab)} classes, final loss {final:.4f})")


@cli.command()
@click.option("--config", "config_path", type=click.Path(), default=None, help="Engine config JSON.")
@click.option("--question", required=True)
@click.option("--painting", "painting_id", default=None)
@click.option("--branch", "force_branch", type=click.Choice(["visual", "knowledge"]), default=None)
@click.option("--server", default=None, help="Target a running service instead of local artifacts.")
def answer(config_path: str | None, question: str, painting_id: str | None, force_branch: str | None, server: str | None) -> None:
    """Answer one question through the full pipeline; prints the trace JSON."""
    if server:
        payload = {"question": question, "painting_id": painting_id, "force_branch": force_branch}
        out = _remote(server, "/answer", payload)
        click.echo(json.dumps(out, sort_keys=True, ensure_ascii=False))
        return
    if not config_path:
        raise click.UsageError("--config is required without --server")
    engine = _load_engine(config_path)
    ans, trace = engine.answer(question, painting_id, force_branch=force_branch)
    trace["config_hash"] = engine.config_hash
    click.echo(json.dumps(trace, sort_keys=True, ensure_ascii=False))


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="Experiment config JSON.")
@click.option("--output-dir", required=True, type=click.Path())
@click.option("--gnuplot", is_flag=True, default=False, help="Also emit gnuplot-compatible recall.dat.")
@click.option("--threads", default=1, show_default=True, type=int, help="Evaluation fan-out bound; reports are identical for any value.")
def evaluate(config_path: str, output_dir: str, gnuplot: bool, threads: int) -> None:
    """Run an experiment and write report files (json, txt, csv, traces)."""
    from .evaluation import ExperimentConfig, run_experiment, write_report

    config = ExperimentConfig.load(config_path)
    report = run_experiment(config, base_dir=Path(config_path).parent, threads=threads)
    written = write_report(report, output_dir, gnuplot=gnuplot or config.gnuplot)
    for p in written:
        click.echo(f"wrote {p}")


@cli.command()
@click.option("--parses", "parses_path", required=True, type=click.Path(), help="One bracketed parse per line (optionally id<TAB>parse).")
@click.option("--output", required=True, type=click.Path(), help="QA candidates as JSON lines.")
@click.option("--max-per-sentence", default=3, show_default=True, type=int)
@click.option("--corpus", "corpus_path", type=click.Path(), default=None,
              help="With --qa-output: corpus whose comment ids match the parse line ids.")
@click.option("--qa-output", type=click.Path(), default=None,
              help="Also write a corpus JSON with the generated knowledge QA appended.")
@click.option("--qa-split", default="train", show_default=True, type=click.Choice(["train", "val", "test"]))
def qgen(parses_path: str, output: str, max_per_sentence: int, corpus_path: str | None,
         qa_output: str | None, qa_split: str) -> None:
    """Generate QA pairs from bracketed constituency parses."""
    from .qgen import RulesConfig, candidates_to_qa_records, generate_from_lines

    path = Path(parses_path)
    if not path.exists():
        raise FileNotFoundError(f"parses file not found: {path}")
    config = RulesConfig(max_candidates=max_per_sentence)
    pairs = generate_from_lines(path.read_text("utf-8").splitlines(), config)
    params = {"command": "qgen", "parses": parses_path, "max_per_sentence": max_per_sentence}
    ch = config_hash(params)
    with Path(output).open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"_meta": {"config_hash": ch}}) + "\n")
        for sid, cand in pairs:
            fh.write(json.dumps({"sentence_id": sid, **cand.to_dict()}, ensure_ascii=False) + "\n")
    click.echo(f"wrote {output}: {len(pairs)} candidates")

    if qa_output:
        if not corpus_path:
            raise click.UsageError("--qa-output requires --corpus")
        corpus = load_corpus(corpus_path)
        generated = candidates_to_qa_records(pairs, corpus, split=qa_split)
        doc = {
            "_meta": {"config_hash": ch},
            "paintings": [vars(p).copy() for p in corpus.paintings.values()],
            "comments": [vars(c).copy() for c in corpus.comments],
            "qa": [vars(r).copy() for r in corpus.qa] + generated,
        }
        Path(qa_output).write_text(json.dumps(doc, indent=1, ensure_ascii=False) + "\n", "utf-8")
        load_corpus(qa_output)  # self-check: output must revalidate
        click.echo(f"wrote {qa_output}: {len(generated)} knowledge QA records appended")


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--json", "as_json", is_flag=True, default=False)
def stats(corpus_path: str, as_json: bool) -> None:
    """Dataset statistics per split (counts, mean word lengths)."""
    from .corpus import compute_stats
    from .evaluation import stats_table

    corpus = load_corpus(corpus_path)
    if as_json:
        out = {s: compute_stats(corpus, s).to_dict() for s in ("train", "val", "test")}
        out["overall"] = compute_stats(corpus).to_dict()
        click.echo(json.dumps(out, indent=1, sort_keys=True))
    else:
        click.echo(stats_table(corpus), nl=False)


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="Engine config JSON.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(config_path: str, host: str, port: int) -> None:
    """Start the QA service."""
    import uvicorn

    from .service.app import create_app

    app = create_app(_load_engine(config_path))
    uvicorn.run(app, host=host, port=port)


def _load_engine(config_path: str) -> Engine:
    p = Path(config_path)
    if not p.exists():
        raise FileNotFoundError(f"engine config not found: {p}")
    config = EngineConfig.from_dict(json.loads(p.read_text("utf-8")))
    return Engine.from_config(config, base_dir=p.parent)


def _remote(server: str, path: str, payload: dict) -> dict:
    import httpx

    resp = httpx.post(server.rstrip("/") + path, json=payload, timeout=60.0)
    if resp.status_code != 200:
        raise ValueError(f"service error {resp.status_code}: {resp.text}")
    return resp.json()


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as e:
        e.show()
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except _DATA_ERRORS as e:
        click.echo(f"error: {e}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
