"""Entry point: pick a backend and a transport, then serve until EOF."""

from __future__ import annotations

import argparse
import sys


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="scorer-sidecar",
        description="Serve question/image embeddings, pair scores and extractive spans over NDJSON.",
    )
    parser.add_argument("--mode", choices=["stub", "transformers"], default="stub")
    parser.add_argument("--seed", type=int, default=0, help="Stub-mode determinism seed.")
    parser.add_argument("--transport", choices=["stdio", "tcp"], default="stdio")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--question-model", default=None, help="Local path, transformers mode.")
    parser.add_argument("--image-model", default=None, help="Local weights path, transformers mode.")
    parser.add_argument("--pair-model", default=None, help="Local path, transformers mode.")
    parser.add_argument("--span-model", default=None, help="Local path, transformers mode.")
    args = parser.parse_args(argv)

    if args.mode == "stub":
        from .stub import StubModel

        model = StubModel(seed=args.seed)
    else:
        if not args.question_model:
            parser.error("--mode transformers requires --question-model")
        from .transformers_backend import TransformersModel

        try:
            model = TransformersModel(
                question_model=args.question_model,
                image_model=args.image_model,
                pair_model=args.pair_model,
                span_model=args.span_model,
            )
        except RuntimeError as e:
            print(f"error: {e}", file=sys.stderr)
            return 2

    from .server import serve_stdio, serve_tcp

    if args.transport == "stdio":
        serve_stdio(model)
    else:
        serve_tcp(model, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    sys.exit(main())
