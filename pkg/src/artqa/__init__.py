"""Question answering over art corpora.

Modality routing, two-stage comment retrieval (n-gram TF-IDF plus a learned
reranker), closed-vocabulary visual answering, extractive knowledge
answering, rule-based question generation from constituency parses, and an
evaluation harness.
"""

__version__ = "0.1.0"
