"""Export per-wordpiece contextual vectors with character offsets.

Reads one sentence per line, runs a locally available encoder in inference
mode, and writes one canonical-JSONL line per exported sentence:

    {"text", "tokens": [{form,start,end}], "edges": [], "tops": [],
     "pieces": [{start,end}], "vectors": <b64 le-f32 row-major>,
     "pooled": <same>, "dim": int}

The ``tokens`` field carries a whitespace reference tokenization so that
downstream character-offset alignment can be checked against the exported
piece offsets.  The pooled summary is the encoder's sequence-start token
vector.  Sentences that are empty or exceed the encoder's length limit are
skipped and recorded in a manifest JSON next to the output.

Inference runs single-threaded on CPU with dropout disabled, so re-running a
job produces byte-identical files.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer


class ExportError(ValueError):
    pass


@dataclass(frozen=True)
class ExportJob:
    input_path: str
    encoder: str  # local model directory or installed model name
    output_path: str
    layer: int = -1  # index into the hidden-state stack; -1 = final layer
    manifest_path: str | None = None

    def resolved_manifest(self) -> Path:
        if self.manifest_path:
            return Path(self.manifest_path)
        return Path(str(self.output_path) + ".manifest.json")


@dataclass
class ExportReport:
    written: int = 0
    skipped: list = field(default_factory=list)  # {"line", "reason", ...}
    dim: int = 0


def _encode_f32(arr: np.ndarray) -> str:
    return base64.b64encode(
        np.ascontiguousarray(arr, dtype="<f4").tobytes()
    ).decode("ascii")


def _whitespace_tokens(text: str) -> list[dict]:
    tokens, pos = [], 0
    for part in text.split():
        start = text.index(part, pos)
        tokens.append({"form": part, "start": start, "end": start + len(part)})
        pos = start + len(part)
    return tokens


def export(job: ExportJob) -> ExportReport:
    """Run the encoder over every input line and write the JSONL output."""
    input_path = Path(job.input_path)
    if not input_path.exists():
        raise ExportError(f"input file not found: {input_path}")
    torch.set_num_threads(1)
    tokenizer = AutoTokenizer.from_pretrained(job.encoder)
    model = AutoModel.from_pretrained(job.encoder)
    model.eval()
    max_len = int(getattr(model.config, "max_position_embeddings", 512))
    n_layers = int(getattr(model.config, "num_hidden_layers", 0)) + 1
    if not -n_layers <= job.layer < n_layers:
        raise ExportError(f"layer {job.layer} outside the {n_layers}-layer stack")

    report = ExportReport()
    lines = input_path.read_text(encoding="utf-8").splitlines()
    with open(job.output_path, "w", encoding="utf-8") as out:
        for lineno, raw in enumerate(lines, start=1):
            text = raw.strip()
            if not text:
                report.skipped.append({"line": lineno, "reason": "empty"})
                continue
            encoding = tokenizer(
                text,
                return_offsets_mapping=True,
                return_special_tokens_mask=True,
                return_tensors="pt",
            )
            n_pieces = encoding["input_ids"].shape[1]
            if n_pieces > max_len:
                report.skipped.append(
                    {"line": lineno, "reason": "too_long", "pieces": int(n_pieces)}
                )
                continue
            with torch.no_grad():
                output = model(
                    input_ids=encoding["input_ids"],
                    attention_mask=encoding["attention_mask"],
                    output_hidden_states=True,
                )
            vectors = output.hidden_states[job.layer][0].numpy().astype("<f4")
            offsets = [
                (int(a), int(b)) for a, b in encoding["offset_mapping"][0].tolist()
            ]
            special = encoding["special_tokens_mask"][0].tolist() if "special_tokens_mask" in encoding else None
            pieces = []
            for i, (a, b) in enumerate(offsets):
                if special is not None and special[i]:
                    a = b = 0  # boundary pieces carry empty spans
                pieces.append({"start": a, "end": b})
            record = {
                "text": text,
                "tokens": _whitespace_tokens(text),
                "edges": [],
                "tops": [],
                "pieces": pieces,
                "vectors": _encode_f32(vectors.reshape(-1)),
                "pooled": _encode_f32(vectors[0]),
                "dim": int(vectors.shape[1]),
            }
            if report.dim and record["dim"] != report.dim:
                raise ExportError("encoder produced inconsistent dims across lines")
            report.dim = record["dim"]
            out.write(json.dumps(record, sort_keys=True) + "\n")
            report.written += 1
    manifest = {
        "input": str(job.input_path),
        "encoder": str(job.encoder),
        "layer": job.layer,
        "dim": report.dim,
        "written": report.written,
        "skipped": report.skipped,
    }
    job.resolved_manifest().write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return report
