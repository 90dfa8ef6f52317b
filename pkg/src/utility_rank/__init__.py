"""Utility-aware contextual passage ranking for multihop QA.

Batch pipeline and library: ingest multihop QA datasets, synthesize
trace-conditioned utility annotations through a pluggable chat-completion
gateway, export training data, rerank candidate passages under
interchangeable scorers, and evaluate coverage/ranking/answer metrics.
"""

__version__ = "0.1.0"
