"""Corpus readers and writers, token/wordpiece alignment, and task datasets.

Three on-disk formats are supported:

* SDP TSV — blank-line separated blocks, one row per token with columns
  ``ID FORM LEMMA POS TOP PRED FRAME`` followed by one argument column per
  ``+``-marked predicate.  ``+`` in TOP marks top nodes.
* CoNLL dependency trees — tabular rows whose HEAD/DEPREL columns encode a
  tree; read into a graph with a virtual root at node 0.
* Canonical JSONL — one sentence per line carrying text, token offsets,
  labeled edges, tops, wordpiece offsets, and base64-encoded float32 vectors.
  This is the interchange format because the SDP block format cannot carry
  embeddings or character offsets.  Lines may carry an optional ``tree``
  annotation (per-token head positions, 0 = root) used by the tree probes.

Alignment maps each parser token to the contiguous range of wordpieces whose
character spans overlap it; a token losing all overlap is an error rather
than a silent skip.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graphs import RelationVocab, SemanticGraph, validate_graph

TREE_ROOT_LABEL = "root"


class CorpusError(ValueError):
    """Malformed corpus file or inconsistent annotation."""


# ---------------------------------------------------------------------------
# sentence-level types


@dataclass(frozen=True)
class Sentence:
    """Surface tokens with character offsets into ``text``."""

    tokens: tuple[tuple[str, int, int], ...]
    text: str

    def __post_init__(self):
        prev_end = 0
        for form, start, end in self.tokens:
            if not 0 <= start < end <= len(self.text):
                raise CorpusError(f"token span [{start},{end}) outside text bounds")
            if start < prev_end:
                raise CorpusError("token offsets overlap or are out of order")
            if self.text[start:end] != form:
                raise CorpusError(f"token {form!r} does not match text at [{start},{end})")
            prev_end = end

    @classmethod
    def from_forms(cls, forms) -> "Sentence":
        """Build a sentence by joining forms with single spaces."""
        tokens, pos, parts = [], 0, []
        for form in forms:
            if parts:
                pos += 1
            tokens.append((form, pos, pos + len(form)))
            pos += len(form)
            parts.append(form)
        return cls(tokens=tuple(tokens), text=" ".join(parts))

    @property
    def forms(self) -> list[str]:
        return [form for form, _, _ in self.tokens]

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class WordpieceSequence:
    """Wordpieces with character offsets; specials have empty spans."""

    pieces: tuple[tuple[str, int, int], ...]

    def __post_init__(self):
        prev = -1
        for _, start, end in self.pieces:
            if start == end:
                continue  # special boundary piece
            if end < start or start < prev:
                raise CorpusError("wordpiece offsets not monotonic")
            prev = end

    def __len__(self) -> int:
        return len(self.pieces)


@dataclass(frozen=True)
class TokenAlignment:
    """For each token, the half-open wordpiece index range it aligns to."""

    spans: tuple[tuple[int, int], ...]

    def __post_init__(self):
        prev_start, prev_stop = -1, -1
        for start, stop in self.spans:
            if stop <= start:
                raise CorpusError("alignment range must cover at least one piece")
            if start < prev_start or stop < prev_stop:
                raise CorpusError("alignment ranges out of order")
            prev_start, prev_stop = start, stop


@dataclass(frozen=True)
class EmbeddingSequence:
    """Per-wordpiece contextual vectors plus the sequence-level summary."""

    vectors: np.ndarray
    pooled_vector: np.ndarray
    dim: int

    def __post_init__(self):
        if self.dim <= 0:
            raise CorpusError("embedding dim must be positive")
        if self.vectors.ndim != 2 or self.vectors.shape[1] != self.dim:
            raise CorpusError(f"vectors shape {self.vectors.shape} != (*, {self.dim})")
        if self.pooled_vector.shape != (self.dim,):
            raise CorpusError("pooled vector dim mismatch")
        if not (np.all(np.isfinite(self.vectors)) and np.all(np.isfinite(self.pooled_vector))):
            raise CorpusError("non-finite embedding values")

    @property
    def num_pieces(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True)
class TreeAnnotation:
    """Per-token head positions (0 = virtual root, else 1-based) and labels."""

    heads: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.heads) != len(self.labels):
            raise CorpusError("tree heads/labels length mismatch")


@dataclass
class SentenceRecord:
    """One canonical-JSONL line: sentence, graph (string labels), embeddings."""

    sentence: Sentence
    edges: tuple[tuple[int, int, str], ...] = ()
    tops: frozenset[int] = frozenset()
    pieces: tuple[tuple[int, int], ...] = ()
    vectors: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    pooled: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dim: int = 0
    tree: TreeAnnotation | None = None

    def wordpieces(self) -> WordpieceSequence:
        text = self.sentence.text
        return WordpieceSequence(
            pieces=tuple((text[s:e], s, e) for s, e in self.pieces)
        )

    def embedding(self) -> EmbeddingSequence:
        emb = EmbeddingSequence(
            vectors=self.vectors, pooled_vector=self.pooled, dim=self.dim
        )
        if emb.num_pieces != len(self.pieces):
            raise CorpusError(
                f"{emb.num_pieces} vector rows for {len(self.pieces)} declared pieces"
            )
        return emb

    def graph(self, vocab: RelationVocab) -> SemanticGraph:
        g = SemanticGraph.build(
            len(self.sentence),
            [(s, t, vocab.index(lbl)) for s, t, lbl in self.edges],
            self.tops,
        )
        return validate_graph(g, vocab)

    def tree_graph(self, vocab: RelationVocab) -> SemanticGraph:
        """The tree annotation as a graph with the virtual root at node 0."""
        if self.tree is None:
            raise CorpusError("record has no tree annotation")
        n = len(self.sentence)
        edges = [
            (head, dep + 1, vocab.index(label))
            for dep, (head, label) in enumerate(zip(self.tree.heads, self.tree.labels))
        ]
        return validate_graph(SemanticGraph.build(n + 1, edges), vocab)


def collect_relation_vocab(edge_label_lists) -> RelationVocab:
    """Sorted vocab over every label present, deterministic across orderings."""
    labels = sorted({lbl for labels in edge_label_lists for lbl in labels})
    return RelationVocab.from_labels(labels)


def records_vocab(records) -> RelationVocab:
    return collect_relation_vocab([[lbl for _, _, lbl in r.edges] for r in records])


def records_tree_vocab(records) -> RelationVocab:
    return collect_relation_vocab(
        [list(r.tree.labels) for r in records if r.tree is not None]
    )


# ---------------------------------------------------------------------------
# SDP block format


def read_sdp(path, vocab: RelationVocab | None = None):
    """Read an SDP file into (Sentence, SemanticGraph) pairs plus the vocab.

    When no vocab is supplied, one is built from the labels in the file
    (sorted); with a supplied vocab, unknown labels are errors.
    """
    blocks, current = [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            continue
        if not line.strip():
            if current:
                blocks.append(current)
                current = []
            continue
        current.append(line.split("\t"))
    if current:
        blocks.append(current)

    parsed = []
    seen_labels: set[str] = set()
    for rows in blocks:
        pred_rows = [i for i, row in enumerate(rows) if len(row) > 5 and row[5] == "+"]
        expected = 7 + len(pred_rows)
        forms, tops, edges = [], [], []
        for i, row in enumerate(rows):
            if len(row) != expected:
                raise CorpusError(
                    f"row {i + 1} has {len(row)} columns, expected {expected} "
                    f"({len(pred_rows)} predicates)"
                )
            forms.append(row[1])
            if row[4] == "+":
                tops.append(i)
            for k, pred in enumerate(pred_rows):
                label = row[7 + k]
                if label != "_":
                    seen_labels.add(label)
                    edges.append((pred, i, label))
        parsed.append((forms, tops, edges))

    if vocab is None:
        vocab = RelationVocab.from_labels(sorted(seen_labels))
    out = []
    for forms, tops, edges in parsed:
        sent = Sentence.from_forms(forms)
        g = SemanticGraph.build(
            len(forms), [(s, t, vocab.index(lbl)) for s, t, lbl in edges], tops
        )
        out.append((sent, validate_graph(g, vocab)))
    return out, vocab


def write_sdp(pairs, vocab: RelationVocab, path) -> None:
    """Write (Sentence, SemanticGraph) pairs as SDP blocks.

    The block format holds one label per (predicate, token) cell, so graphs
    with two labels on the same ordered pair cannot be serialized here; use
    the JSONL format for those.
    """
    lines = []
    for sent, g in pairs:
        by_source: dict[int, dict[int, str]] = {}
        for s, t, r in g.edges:
            cell = by_source.setdefault(s, {})
            if t in cell:
                raise CorpusError(
                    f"SDP cannot carry two labels on the same pair ({s},{t})"
                )
            cell[t] = vocab.label(r)
        preds = sorted(by_source)
        for i, form in enumerate(sent.forms):
            row = [
                str(i + 1),
                form,
                "_",
                "_",
                "+" if i in g.top_nodes else "-",
                "+" if i in by_source else "-",
                "_",
            ]
            row += [by_source[p].get(i, "_") for p in preds]
            lines.append("\t".join(row))
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


# ---------------------------------------------------------------------------
# CoNLL dependency trees


def read_dependency_trees(path, vocab: RelationVocab | None = None):
    """Read CoNLL-style trees as graphs with a virtual root at node 0.

    Token ``i`` (1-based in the file) becomes node ``i``; each row's HEAD
    column points at another node or at 0 for the root.  Multiple heads,
    out-of-range heads, and cycles are errors.
    """
    blocks, current = [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            continue
        if not line.strip():
            if current:
                blocks.append(current)
                current = []
            continue
        current.append(line.split("\t"))
    if current:
        blocks.append(current)

    parsed = []
    seen_labels: set[str] = set()
    for rows in blocks:
        n = len(rows)
        forms, heads, labels = [], {}, {}
        for row in rows:
            if len(row) < 8:
                raise CorpusError(f"tree row has {len(row)} columns, expected >= 8")
            idx = int(row[0])
            if idx in heads:
                raise CorpusError(f"token {idx} has multiple heads")
            head, label = int(row[6]), row[7]
            if not 0 <= head <= n:
                raise CorpusError(f"head {head} out of range for {n} tokens")
            if head == idx:
                raise CorpusError(f"token {idx} heads itself (cycle)")
            forms.append(row[1])
            heads[idx], labels[idx] = head, label
            seen_labels.add(label)
        if sorted(heads) != list(range(1, n + 1)):
            raise CorpusError("token ids must be 1..n, each exactly once")
        # cycle check: walk parent chains; every node must reach the root
        for start in range(1, n + 1):
            seen_chain, node = set(), start
            while node != 0:
                if node in seen_chain:
                    raise CorpusError(f"cycle detected through token {node}")
                seen_chain.add(node)
                node = heads[node]
        parsed.append((forms, heads, labels))

    if vocab is None:
        vocab = RelationVocab.from_labels(sorted(seen_labels))
    out = []
    for forms, heads, labels in parsed:
        n = len(forms)
        edges = [(heads[i], i, vocab.index(labels[i])) for i in range(1, n + 1)]
        g = SemanticGraph.build(n + 1, edges)
        out.append((Sentence.from_forms(forms), validate_graph(g, vocab)))
    return out, vocab


def write_dependency_trees(items, path) -> None:
    """Write (Sentence, heads, labels) items in 10-column CoNLL layout."""
    lines = []
    for sent, heads, labels in items:
        for i, form in enumerate(sent.forms):
            row = [str(i + 1), form, "_", "_", "_", "_", str(heads[i]), labels[i], "_", "_"]
            lines.append("\t".join(row))
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


# ---------------------------------------------------------------------------
# token/wordpiece alignment


def align_tokens(s: Sentence, w: WordpieceSequence) -> TokenAlignment:
    """Map each token to the contiguous wordpiece range overlapping its span."""
    spans = []
    for form, t_start, t_end in s.tokens:
        hits = [
            j
            for j, (_, p_start, p_end) in enumerate(w.pieces)
            if p_start != p_end and max(t_start, p_start) < min(t_end, p_end)
        ]
        if not hits:
            raise CorpusError(f"token {form!r} at [{t_start},{t_end}) aligns to no wordpiece")
        if hits != list(range(hits[0], hits[-1] + 1)):
            raise CorpusError(f"token {form!r} aligns to a non-contiguous piece range")
        spans.append((hits[0], hits[-1] + 1))
    return TokenAlignment(spans=tuple(spans))


# ---------------------------------------------------------------------------
# canonical JSONL


def _encode_f32(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f4").tobytes()).decode("ascii")


def _decode_f32(payload: str, what: str) -> np.ndarray:
    raw = base64.b64decode(payload.encode("ascii"))
    if len(raw) % 4:
        raise CorpusError(f"{what}: byte length {len(raw)} is not a multiple of 4")
    return np.frombuffer(raw, dtype="<f4").astype(np.float64)


def record_to_json(record: SentenceRecord) -> dict:
    obj = {
        "text": record.sentence.text,
        "tokens": [
            {"form": f, "start": s, "end": e} for f, s, e in record.sentence.tokens
        ],
        "edges": [[s, t, lbl] for s, t, lbl in record.edges],
        "tops": sorted(record.tops),
        "pieces": [{"start": s, "end": e} for s, e in record.pieces],
        "vectors": _encode_f32(record.vectors.reshape(-1)),
        "pooled": _encode_f32(record.pooled),
        "dim": record.dim,
    }
    if record.tree is not None:
        obj["tree"] = {
            "heads": list(record.tree.heads),
            "labels": list(record.tree.labels),
        }
    return obj


def record_from_json(obj: dict) -> SentenceRecord:
    sentence = Sentence(
        tokens=tuple((t["form"], t["start"], t["end"]) for t in obj["tokens"]),
        text=obj["text"],
    )
    dim = int(obj.get("dim", 0))
    pieces = tuple((p["start"], p["end"]) for p in obj.get("pieces", ()))
    flat = _decode_f32(obj.get("vectors", ""), "vectors")
    if dim > 0:
        if flat.size % dim:
            raise CorpusError(f"vector payload size {flat.size} not divisible by dim {dim}")
        vectors = flat.reshape(-1, dim)
    else:
        if flat.size:
            raise CorpusError("vector payload present but dim is 0")
        vectors = np.zeros((0, 0))
    pooled = _decode_f32(obj.get("pooled", ""), "pooled")
    if dim > 0 and pooled.shape != (dim,):
        raise CorpusError(f"pooled vector has size {pooled.size}, expected {dim}")
    tree = None
    if "tree" in obj:
        tree = TreeAnnotation(
            heads=tuple(int(h) for h in obj["tree"]["heads"]),
            labels=tuple(obj["tree"]["labels"]),
        )
        if len(tree.heads) != len(sentence):
            raise CorpusError("tree annotation length mismatch")
    return SentenceRecord(
        sentence=sentence,
        edges=tuple((int(s), int(t), str(lbl)) for s, t, lbl in obj.get("edges", ())),
        tops=frozenset(int(n) for n in obj.get("tops", ())),
        pieces=pieces,
        vectors=vectors,
        pooled=pooled,
        dim=dim,
        tree=tree,
    )


def write_jsonl_corpus(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_json(record), sort_keys=True) + "\n")


def read_jsonl_corpus(path) -> list[SentenceRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(record_from_json(json.loads(line)))
            except (KeyError, TypeError) as exc:
                raise CorpusError(f"{path}:{lineno}: malformed record ({exc})") from exc
    return records


def read_embeddings(path) -> list[EmbeddingSequence]:
    """Load and validate the embedding payload of every line in a JSONL corpus."""
    records = read_jsonl_corpus(path)
    embeddings = [r.embedding() for r in records]
    dims = {e.dim for e in embeddings}
    if len(dims) > 1:
        raise CorpusError(f"inconsistent embedding dims in {path}: {sorted(dims)}")
    return embeddings


# ---------------------------------------------------------------------------
# task datasets


@dataclass(frozen=True)
class TaskSchema:
    """Declared shape of a task dataset."""

    kind: str  # "classification" | "regression"
    labels: tuple[str, ...] = ()
    pair: bool = False
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("classification", "regression"):
            raise CorpusError(f"unknown task kind {self.kind!r}")
        if self.kind == "classification" and not self.labels:
            raise CorpusError("classification schema needs a label list")

    @property
    def num_classes(self) -> int:
        return len(self.labels)


@dataclass
class TaskExample:
    """One task row: per-sentence bundles, a label, and a diagnostic tag."""

    sentence_a: SentenceRecord
    sentence_b: SentenceRecord | None
    label: float | int
    category: str | None = None


def sidecar_paths(dataset_path) -> tuple[Path, Path]:
    p = Path(dataset_path)
    stem = p.with_suffix("")
    return Path(f"{stem}.a.jsonl"), Path(f"{stem}.b.jsonl")


def read_task_dataset(path, schema: TaskSchema) -> list[TaskExample]:
    """Read a task TSV and its sidecar JSONL bundles, validating the schema."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise CorpusError(f"{path}: empty dataset")
    header = lines[0].split("\t")
    required = {"sentence_a", "label"}
    if not required <= set(header):
        raise CorpusError(f"{path}: header must include {sorted(required)}")
    if schema.pair and "sentence_b" not in header:
        raise CorpusError(f"{path}: schema requires sentence_b column")
    col = {name: i for i, name in enumerate(header)}

    side_a, side_b = sidecar_paths(path)
    records_a = read_jsonl_corpus(side_a) if side_a.exists() else None
    records_b = read_jsonl_corpus(side_b) if side_b.exists() else None

    examples = []
    rows = [line.split("\t") for line in lines[1:] if line.strip()]
    if records_a is not None and len(records_a) != len(rows):
        raise CorpusError(
            f"{side_a}: {len(records_a)} sidecar lines for {len(rows)} rows"
        )
    if schema.pair and records_b is not None and len(records_b) != len(rows):
        raise CorpusError(
            f"{side_b}: {len(records_b)} sidecar lines for {len(rows)} rows"
        )
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise CorpusError(f"{path}: row {i + 2} has {len(row)} columns, expected {len(header)}")
        raw_label = row[col["label"]]
        if schema.kind == "classification":
            if raw_label not in schema.labels:
                raise CorpusError(f"{path}: unknown label {raw_label!r} at row {i + 2}")
            label: float | int = schema.labels.index(raw_label)
        else:
            label = float(raw_label)
        category = row[col["category"]] if "category" in col else None
        if category is not None and schema.categories is not None:
            if category not in schema.categories:
                raise CorpusError(f"{path}: undeclared category {category!r} at row {i + 2}")
        rec_a = (
            records_a[i]
            if records_a is not None
            else SentenceRecord(sentence=Sentence.from_forms(row[col["sentence_a"]].split()))
        )
        rec_b = None
        if schema.pair:
            rec_b = (
                records_b[i]
                if records_b is not None
                else SentenceRecord(sentence=Sentence.from_forms(row[col["sentence_b"]].split()))
            )
        examples.append(
            TaskExample(sentence_a=rec_a, sentence_b=rec_b, label=label, category=category)
        )
    return examples


def write_task_dataset(path, rows, schema: TaskSchema, records_a=None, records_b=None) -> None:
    """Write a task TSV (rows of dicts) and optional sidecar JSONL files."""
    header = ["sentence_a"]
    if schema.pair:
        header.append("sentence_b")
    header.append("label")
    if any("category" in r for r in rows):
        header.append("category")
    lines = ["\t".join(header)]
    for r in rows:
        lines.append("\t".join(str(r[h]) for h in header))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    side_a, side_b = sidecar_paths(path)
    if records_a is not None:
        write_jsonl_corpus(records_a, side_a)
    if records_b is not None:
        write_jsonl_corpus(records_b, side_b)
