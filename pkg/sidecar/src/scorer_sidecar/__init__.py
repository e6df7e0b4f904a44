"""Scorer sidecar: NDJSON embedding/relevance/span service.

Serves transformer-grade scoring operations over stdio or TCP for the QA
engine. Stub mode needs no model assets and is bit-deterministic; see
``protocol.py`` for the wire format.
"""

__version__ = "0.1.0"

PROTO_VERSION = 1
QUESTION_DIM = 1024
IMAGE_DIM = 2048
