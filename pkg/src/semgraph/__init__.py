"""Semantic-graph encoders over pluggable contextual embeddings.

Core pieces: a labeled-graph data model with inverse-relation augmentation,
a minimal reverse-mode numeric kernel, relational graph convolution encoders
(with GCN/GAT variants and cross-graph attention for sentence pairs), biaffine
parsing heads in ceiling and probe configurations, tree and graph decoders,
the evaluation metric suite, and a deterministic training harness.
"""

__version__ = "0.1.0"
