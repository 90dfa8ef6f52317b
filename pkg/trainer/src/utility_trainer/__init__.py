"""Utility-score regressor: train a compact bidirectional encoder on
pointwise (question, passage, score) data and serve predictions back to the
ranking pipeline as score files or over HTTP.
"""

__version__ = "0.1.0"
