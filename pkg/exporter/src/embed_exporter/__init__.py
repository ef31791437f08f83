"""Bridge from a locally available pretrained contextual encoder to the
canonical JSONL embedding format: per-wordpiece vectors, character offsets,
and a sequence-level summary vector per input sentence."""

from .exporter import ExportJob, ExportReport, export

__all__ = ["ExportJob", "ExportReport", "export"]
