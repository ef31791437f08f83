"""Deterministic synthetic corpora: sentences, trees, graphs, toy embeddings.

Sentences are sequences of 4-token segments ``[switch, noun, verb1, verb2]``.
The switch token controls the tree attachment of its noun (verb1 vs verb2),
verbs chain locally, and every attachment decision is recoverable from a
token's immediate neighbors.  Toy embeddings are static per word type, so a
frozen linear probe faces irreducible ambiguity wherever two candidates share
a type, while a trainable contextual backbone can resolve every attachment.

The semantic graph gives each verb1 an outgoing argument edge to its noun and
a conjunction edge to its verb2.  Independently of the words, a per-sentence
coin decides whether one extra "pattern" edge is added; the task label is the
presence of that pattern.  Surface form and embeddings are identically
distributed for both labels, so pooled-vector baselines sit at chance while
any model that reads the graph can reach perfect accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import (
    CorpusError,
    Sentence,
    SentenceRecord,
    TaskSchema,
    TreeAnnotation,
    collect_relation_vocab,
)
from .graphs import RelationVocab
from .seeding import derive_rng

TREE_LABELS = ("link", "mark", "root", "subj")
TASK_LABELS = ("plain", "pattern")
SEGMENT = 4  # tokens per segment


@dataclass(frozen=True)
class GrammarConfig:
    """Knobs for the synthetic grammar."""

    vocab_size: int = 24
    relations: tuple[str, ...] = ("ARG1", "ARG2", "conj")
    max_len: int = 12
    embedding_dim: int = 16
    pattern_rate: float = 0.5
    label_rule: str = "has:ARG2"

    def __post_init__(self):
        if self.vocab_size < 8:
            raise CorpusError("vocab_size must be at least 8 (2 switches + nouns + verbs)")
        if len(self.relations) < 3:
            raise CorpusError("grammar needs at least 3 relations")
        if self.max_len < SEGMENT:
            raise CorpusError(f"max_len must be at least {SEGMENT}")
        if not self.label_rule.startswith("has:"):
            raise CorpusError(f"unsupported label rule {self.label_rule!r}")
        if self.label_rule.removeprefix("has:") not in self.relations:
            raise CorpusError("label rule references an undeclared relation")

    @property
    def pattern_relation(self) -> str:
        return self.label_rule.removeprefix("has:")


@dataclass
class SyntheticCorpus:
    """Generated bundles plus the task labeling and both relation vocabs."""

    records: list[SentenceRecord]
    labels: list[str]
    categories: list[str]
    schema: TaskSchema
    graph_vocab: RelationVocab
    tree_vocab: RelationVocab
    config: GrammarConfig = field(repr=False)

    def __len__(self) -> int:
        return len(self.records)


class _Lexicon:
    """Word-type inventory with static per-type piece vectors."""

    def __init__(self, config: GrammarConfig, seed: int):
        n_rest = config.vocab_size - 2
        n_nouns = n_rest // 2
        self.switch_forms = ["sa", "sb"]
        self.noun_forms = [f"n{i:02d}" for i in range(n_nouns)]
        self.verb_forms = [f"v{i:02d}" for i in range(n_rest - n_nouns)]
        self._vectors: dict[tuple[str, int], np.ndarray] = {}
        self._config = config
        self._seed = seed

    def pieces_of(self, form: str) -> list[str]:
        # half the inventory splits into two wordpieces, keyed by type
        if len(form) > 2 and int(form[1:]) % 2 == 1:
            return [form[:2], form[2:]]
        return [form]

    def vector(self, form: str, slot: int) -> np.ndarray:
        key = (form, slot)
        if key not in self._vectors:
            rng = derive_rng(self._seed, "piece-vector", form, slot)
            self._vectors[key] = rng.normal(size=self._config.embedding_dim)
        return self._vectors[key]


def _build_sentence(lex: _Lexicon, config: GrammarConfig, rng: np.random.Generator):
    n_segments = int(rng.integers(1, config.max_len // SEGMENT + 1))
    forms, heads, tree_labels = [], [], []
    graph_edges: list[tuple[int, int, str]] = []
    arg1, pattern_rel, conj = (
        config.relations[0],
        config.pattern_relation,
        config.relations[2],
    )
    nouns_at, verb2_at = [], []
    for s in range(n_segments):
        base = SEGMENT * s
        switch = int(rng.integers(0, 2))
        forms += [
            lex.switch_forms[switch],
            lex.noun_forms[int(rng.integers(0, len(lex.noun_forms)))],
            lex.verb_forms[int(rng.integers(0, len(lex.verb_forms)))],
            lex.verb_forms[int(rng.integers(0, len(lex.verb_forms)))],
        ]
        # tree heads are 1-based token positions, 0 for the virtual root
        heads += [base + 2, base + 3 + switch, 0, base + 3]
        tree_labels += ["mark", "subj", "root", "link"]
        graph_edges.append((base + 2, base + 1, arg1))
        graph_edges.append((base + 2, base + 3, conj))
        nouns_at.append(base + 1)
        verb2_at.append(base + 3)
    has_pattern = bool(rng.random() < config.pattern_rate)
    if has_pattern:
        graph_edges.append((verb2_at[0], nouns_at[-1], pattern_rel))
    tops = frozenset({2})  # first segment's verb1
    return forms, heads, tree_labels, graph_edges, tops, has_pattern, n_segments


def _embed(lex: _Lexicon, sentence: Sentence, dim: int):
    """Wordpiece offsets and vectors, with empty-span boundary specials."""
    pieces: list[tuple[int, int]] = [(0, 0)]
    vectors: list[np.ndarray] = [lex.vector("<s>", 0)]
    for form, start, _ in sentence.tokens:
        offset = start
        for slot, piece in enumerate(lex.pieces_of(form)):
            pieces.append((offset, offset + len(piece)))
            vectors.append(lex.vector(form, slot))
            offset += len(piece)
    pieces.append((len(sentence.text), len(sentence.text)))
    vectors.append(lex.vector("</s>", 0))
    mat = np.stack(vectors)
    return tuple(pieces), mat, mat.mean(axis=0)


def generate_synthetic_corpus(
    seed: int, n_sentences: int, config: GrammarConfig | None = None
) -> SyntheticCorpus:
    """Generate a corpus reproducible bit-for-bit under ``seed``."""
    config = config or GrammarConfig()
    lex = _Lexicon(config, seed)
    rng = derive_rng(seed, "grammar")
    records, labels, categories = [], [], []
    for _ in range(n_sentences):
        forms, heads, tree_labels, edges, tops, has_pattern, n_segments = _build_sentence(
            lex, config, rng
        )
        sentence = Sentence.from_forms(forms)
        pieces, vectors, pooled = _embed(lex, sentence, config.embedding_dim)
        records.append(
            SentenceRecord(
                sentence=sentence,
                edges=tuple(edges),
                tops=tops,
                pieces=pieces,
                vectors=vectors,
                pooled=pooled,
                dim=config.embedding_dim,
                tree=TreeAnnotation(heads=tuple(heads), labels=tuple(tree_labels)),
            )
        )
        labels.append(TASK_LABELS[has_pattern])
        categories.append(f"seg{n_segments}-{'pos' if has_pattern else 'neg'}")
    schema = TaskSchema(kind="classification", labels=TASK_LABELS, pair=False)
    return SyntheticCorpus(
        records=records,
        labels=labels,
        categories=categories,
        schema=schema,
        graph_vocab=RelationVocab.from_labels(sorted(config.relations)),
        tree_vocab=collect_relation_vocab([TREE_LABELS]),
        config=config,
    )


def pair_task_from_corpus(corpus: SyntheticCorpus):
    """Pair consecutive sentences; label says whether their patterns agree.

    The label is a pure function of the two graphs, so it exercises the
    cross-graph attention path with the same baseline-vs-graph separation as
    the single-sentence task.
    """
    schema = TaskSchema(kind="classification", labels=("differ", "agree"), pair=True)
    rows, recs_a, recs_b = [], [], []
    pair_labels, pair_categories = [], []
    for i in range(0, len(corpus.records) - 1, 2):
        a, b = corpus.records[i], corpus.records[i + 1]
        agree = corpus.labels[i] == corpus.labels[i + 1]
        recs_a.append(a)
        recs_b.append(b)
        pair_labels.append(schema.labels[agree])
        pair_categories.append("agree" if agree else "differ")
        rows.append(
            {
                "sentence_a": a.sentence.text,
                "sentence_b": b.sentence.text,
                "label": schema.labels[agree],
                "category": pair_categories[-1],
            }
        )
    return schema, rows, recs_a, recs_b, pair_labels, pair_categories


def task_rows(corpus: SyntheticCorpus) -> list[dict]:
    return [
        {"sentence_a": r.sentence.text, "label": lbl, "category": cat}
        for r, lbl, cat in zip(corpus.records, corpus.labels, corpus.categories)
    ]
