"""Optimization and the experiment harness.

Covers downstream finetuning in five modes (baseline classifier on the
sequence summary, the full graph pipeline, the two-headed light variant,
a multitask scaffold with an auxiliary parsing objective, and the GCN/GAT
encoder swaps), parser training in ceiling and probe configurations,
subsampling, and symbolic parameter counting.

Everything is deterministic: every random draw flows from the run seed
through named component streams, per-epoch shuffles included, so a repeated
run reproduces its metrics bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import metrics as M
from .checkpoint import save_checkpoint
from .corpus import TaskExample, TaskSchema
from .decode import assign_labels, chu_liu_edmonds, greedy_graph_decode
from .encoder import (
    EncoderConfig,
    glorot,
    encode,
    init_encoder_params,
    init_layer_params,
    token_mean_matrix,
)
from .graphs import RelationVocab, augment_with_inverse_relations
from .heads import ParserConfig, init_parser_params, parsing_loss, score
from .pair import (
    compose_after_attention,
    cross_graph_update,
    init_pair_attention_params,
    init_pooling_params,
    pool_pair,
    pool_single,
)
from .seeding import derive_rng, derive_seed

MODES = ("baseline", "sift", "sift_light", "scaffold", "gcn", "gat")


class TrainingError(ValueError):
    pass


# ---------------------------------------------------------------------------
# optimizer


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 2e-5
    weight_decay: float = 0.1
    warmup_ratio: float = 0.06
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    epochs: int = 10
    batch_size: int = 32

    def __post_init__(self):
        if not 0.0 <= self.warmup_ratio < 1.0:
            raise TrainingError("warmup_ratio must be in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise TrainingError("epochs and batch_size must be positive")


def schedule_factor(step_index: int, total_steps: int, warmup_ratio: float) -> float:
    """Linear warmup to the peak at ceil(ratio * T), then linear decay to 0."""
    if total_steps <= 0:
        raise TrainingError("schedule needs at least one step")
    s = min(step_index, total_steps)
    warmup = math.ceil(warmup_ratio * total_steps) if warmup_ratio > 0 else 0
    if warmup >= total_steps:  # degenerate tiny runs: fall back to pure decay
        warmup = 0
    if warmup > 0 and s <= warmup:
        return s / warmup
    return (total_steps - s) / (total_steps - warmup)


@dataclass
class AdamWState:
    m: list
    v: list

    @classmethod
    def for_params(cls, params) -> "AdamWState":
        return cls(
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
        )


def adamw_step(
    params,
    grads,
    state: AdamWState,
    cfg: OptimizerConfig,
    step_index: int,
    total_steps: int,
) -> None:
    """One decoupled-weight-decay update with bias correction, in place."""
    lr_t = cfg.learning_rate * schedule_factor(step_index, total_steps, cfg.warmup_ratio)
    beta1, beta2 = cfg.betas
    t = step_index + 1
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            g = np.zeros_like(p.data)
        g = np.asarray(g, dtype=np.float64)
        if not np.all(np.isfinite(g)):
            raise TrainingError("non-finite gradient")
        if g.shape != p.data.shape:
            raise TrainingError(f"gradient shape {g.shape} != param {p.data.shape}")
        state.m[i] = beta1 * state.m[i] + (1 - beta1) * g
        state.v[i] = beta2 * state.v[i] + (1 - beta2) * g * g
        m_hat = state.m[i] / (1 - beta1**t)
        v_hat = state.v[i] / (1 - beta2**t)
        p.data = p.data - lr_t * m_hat / (np.sqrt(v_hat) + cfg.eps)
        p.data = p.data - lr_t * cfg.weight_decay * p.data


# ---------------------------------------------------------------------------
# run configuration


@dataclass(frozen=True)
class Ablations:
    attention: bool = True
    concat: bool = True


@dataclass(frozen=True)
class RunConfig:
    """Everything that defines a downstream finetuning run."""

    mode: str
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    schema: TaskSchema | None = None
    seeds: tuple[int, ...] = (0,)
    ablations: Ablations = field(default_factory=Ablations)
    light_weights: tuple[float, float] = (0.2, 0.8)
    scaffold_weight: float = 0.2
    scaffold_parser_dims: tuple[int, int] = (64, 32)
    relations: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise TrainingError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        variant = {"gcn": "gcn", "gat": "gat"}.get(self.mode, "rgcn")
        if self.encoder.variant != variant and self.mode != "baseline":
            object.__setattr__(self, "encoder", replace(self.encoder, variant=variant))

    @property
    def uses_graphs(self) -> bool:
        return self.mode != "baseline"


# ---------------------------------------------------------------------------
# dataset preparation


@dataclass
class PreparedSentence:
    ag: object  # AugmentedGraph
    align_matrix: np.ndarray  # (tokens, pieces) averaging constants
    vectors: np.ndarray  # (pieces, dim)
    pooled: np.ndarray  # (dim,)
    token_means: np.ndarray  # (tokens, dim)


@dataclass
class PreparedExample:
    a: PreparedSentence
    b: PreparedSentence | None
    label: float | int
    category: str | None


def _embedding_bundle(record):
    if record.dim <= 0:
        raise TrainingError(
            f"sentence {record.sentence.text!r} lacks its graph/embedding sidecar; "
            "graph modes fail fast rather than silently degrading"
        )
    from .corpus import align_tokens  # local import to avoid cycle at module load

    align = align_tokens(record.sentence, record.wordpieces())
    emb = record.embedding()
    mean_mat = token_mean_matrix(align, emb.num_pieces)
    return mean_mat, emb


def _prepare_sentence(record, vocab: RelationVocab) -> PreparedSentence:
    mean_mat, emb = _embedding_bundle(record)
    return PreparedSentence(
        ag=augment_with_inverse_relations(record.graph(vocab), vocab),
        align_matrix=mean_mat,
        vectors=emb.vectors,
        pooled=emb.pooled_vector,
        token_means=mean_mat @ emb.vectors,
    )


def prepare_dataset(examples, vocab: RelationVocab) -> list[PreparedExample]:
    out = []
    for ex in examples:
        out.append(
            PreparedExample(
                a=_prepare_sentence(ex.sentence_a, vocab),
                b=_prepare_sentence(ex.sentence_b, vocab) if ex.sentence_b else None,
                label=ex.label,
                category=ex.category,
            )
        )
    return out


def dataset_vocab(run: RunConfig, examples) -> RelationVocab:
    if run.relations is not None:
        return RelationVocab.from_labels(sorted(run.relations))
    labels = set()
    for ex in examples:
        for rec in (ex.sentence_a, ex.sentence_b):
            if rec is not None:
                labels.update(lbl for _, _, lbl in rec.edges)
    return RelationVocab.from_labels(sorted(labels))


# ---------------------------------------------------------------------------
# downstream model


@dataclass
class LinearHead:
    weight: ad.Value
    bias: ad.Value

    def named_values(self, prefix):
        yield f"{prefix}.weight", self.weight
        yield f"{prefix}.bias", self.bias

    def apply(self, features: ad.Value) -> ad.Value:
        row = ad.reshape(features, (1, features.shape[0]))
        return ad.add(ad.matmul(row, ad.transpose(self.weight)), self.bias)


def _linear(rng, out_dim, in_dim) -> LinearHead:
    return LinearHead(
        weight=ad.param(glorot(rng, out_dim, in_dim)), bias=ad.param(np.zeros(out_dim))
    )


class DownstreamModel:
    """One finetuning architecture, assembled according to the run mode."""

    def __init__(
        self,
        run: RunConfig,
        schema: TaskSchema,
        embedding_dim: int,
        vocab: RelationVocab,
        pair: bool,
        seed: int,
    ):
        self.run = run
        self.schema = schema
        self.pair = pair
        self.vocab = vocab
        self.embedding_dim = embedding_dim
        self.out_dim = schema.num_classes if schema.kind == "classification" else 1
        rng = derive_rng(seed, "model-init")
        h = run.encoder.hidden_dim
        summary_dim = (2 if pair else 1) * embedding_dim
        self.encoder_params = None
        self.pair_attention = None
        self.composition = None
        self.pooling = None
        self.graph_classifier = None
        self.main_classifier = None
        self.adapter = None
        self.scaffold_head = None

        if run.mode in ("sift", "sift_light", "gcn", "gat"):
            self.encoder_params = init_encoder_params(
                run.encoder, embedding_dim, vocab.augmented_size, rng
            )
            if pair:
                self.pair_attention = init_pair_attention_params(h, rng)
                self.composition = [
                    init_layer_params(run.encoder, vocab.augmented_size, rng)
                    for _ in range(run.encoder.num_layers)
                ]
            pooled_dim = (2 if pair else 1) * h
            if run.ablations.concat:
                pooled_dim += summary_dim
            self.pooling = init_pooling_params(pooled_dim)
            self.graph_classifier = _linear(rng, self.out_dim, pooled_dim)
        if run.mode in ("baseline", "sift_light"):
            self.main_classifier = _linear(rng, self.out_dim, summary_dim)
        if run.mode == "scaffold":
            self.adapter = _linear(rng, h, embedding_dim)
            feat_dim = (2 if pair else 1) * h + summary_dim
            self.main_classifier = _linear(rng, self.out_dim, feat_dim)
            arc_dim, label_dim = run.scaffold_parser_dims
            self.scaffold_cfg = ParserConfig(
                mode="ceiling",
                target="graph",
                arc_mlp_dim=arc_dim,
                label_mlp_dim=label_dim,
                freeze_backbone=False,
            )
            self.scaffold_head = init_parser_params(
                self.scaffold_cfg, h, vocab.size, rng
            )

    # -- parameter plumbing -------------------------------------------------

    def named_values(self):
        if self.encoder_params is not None:
            yield from self.encoder_params.named_values("encoder")
        if self.pair_attention is not None:
            yield from self.pair_attention.named_values("pair_attention")
        if self.composition is not None:
            for i, layer in enumerate(self.composition):
                yield from layer.named_values(f"composition.layer{i}")
        if self.pooling is not None:
            yield from self.pooling.named_values("pooling")
        if self.graph_classifier is not None:
            yield from self.graph_classifier.named_values("classifier")
        if self.main_classifier is not None:
            yield from self.main_classifier.named_values("main_head")
        if self.adapter is not None:
            yield from self.adapter.named_values("adapter")
        if self.scaffold_head is not None:
            yield from self.scaffold_head.named_values("parser_head")

    def parameters(self):
        return [v for _, v in self.named_values()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    # -- forward paths --------------------------------------------------------

    def _summary(self, ex: PreparedExample) -> np.ndarray:
        if self.pair:
            return np.concatenate([ex.a.pooled, ex.b.pooled])
        return ex.a.pooled

    def _encode_one(self, prep: PreparedSentence, train, seed, tag) -> ad.Value:
        return encode(
            prep.ag,
            ad.constant(prep.vectors),
            prep.align_matrix,
            self.run.encoder,
            self.encoder_params,
            train=train,
            seed=derive_seed(seed, "encode", tag),
        )

    def _graph_features(self, ex: PreparedExample, train, seed) -> ad.Value:
        summary = ad.constant(self._summary(ex)) if self.run.ablations.concat else None
        if not self.pair:
            h = self._encode_one(ex.a, train, seed, "a")
            return pool_single(h, summary, self.pooling)
        h_a = self._encode_one(ex.a, train, seed, "a")
        h_b = self._encode_one(ex.b, train, seed, "b")
        if self.run.ablations.attention:
            h_a, h_b = cross_graph_update(h_a, h_b, self.pair_attention)
        h_a, h_b = compose_after_attention(
            ex.a.ag,
            h_a,
            ex.b.ag,
            h_b,
            self.composition,
            train=train,
            seed=derive_seed(seed, "compose"),
            dropout_p=self.run.encoder.inter_layer_dropout,
        )
        return pool_pair(h_a, h_b, summary, self.pooling)

    def _scaffold_features(self, ex: PreparedExample, train, seed):
        states = []
        adapted = []
        for prep in (ex.a, ex.b) if self.pair else (ex.a,):
            tokens = self.adapter.weight  # (h, emb)
            s = ad.relu(
                ad.add(
                    ad.matmul(ad.constant(prep.token_means), ad.transpose(tokens)),
                    self.adapter.bias,
                )
            )
            adapted.append(s)
            states.append(ad.row_mean(s))
        feats = ad.concat(states + [ad.constant(self._summary(ex))], axis=0)
        return feats, adapted

    def logits(self, ex: PreparedExample, train=False, seed=0) -> ad.Value:
        """Evaluation-path logits: the single head used at test time."""
        mode = self.run.mode
        if mode in ("sift", "gcn", "gat"):
            return self.graph_classifier.apply(self._graph_features(ex, train, seed))
        if mode in ("baseline", "sift_light"):
            return self.main_classifier.apply(ad.constant(self._summary(ex)))
        if mode == "scaffold":
            feats, _ = self._scaffold_features(ex, train, seed)
            return self.main_classifier.apply(feats)
        raise TrainingError(f"unhandled mode {mode!r}")

    def _supervised(self, logits: ad.Value, label) -> ad.Value:
        if self.schema.kind == "classification":
            return ad.cross_entropy(logits, [int(label)])
        pred = ad.reshape(logits, (1,))
        return ad.mean_squared_error(pred, ad.constant(np.array([float(label)])))

    def loss(self, ex: PreparedExample, train=True, seed=0) -> ad.Value:
        mode = self.run.mode
        if mode in ("baseline", "sift", "gcn", "gat"):
            return self._supervised(self.logits(ex, train, seed), ex.label)
        if mode == "sift_light":
            graph_logits = self.graph_classifier.apply(self._graph_features(ex, train, seed))
            main_logits = self.main_classifier.apply(ad.constant(self._summary(ex)))
            w_graph, w_main = self.run.light_weights
            return ad.add(
                ad.scalar_mul(self._supervised(graph_logits, ex.label), w_graph),
                ad.scalar_mul(self._supervised(main_logits, ex.label), w_main),
            )
        if mode == "scaffold":
            feats, adapted = self._scaffold_features(ex, train, seed)
            main = self._supervised(self.main_classifier.apply(feats), ex.label)
            preps = (ex.a, ex.b) if self.pair else (ex.a,)
            parse_terms = []
            for prep, states in zip(preps, adapted):
                sc = score(states, self.scaffold_cfg, self.scaffold_head)
                parse_terms.append(parsing_loss(sc, prep.ag.base, self.scaffold_cfg))
            aux = parse_terms[0]
            for term in parse_terms[1:]:
                aux = ad.add(aux, term)
            aux = ad.scalar_mul(aux, 1.0 / len(parse_terms))
            return ad.add(main, ad.scalar_mul(aux, self.run.scaffold_weight))
        raise TrainingError(f"unhandled mode {mode!r}")

    def predict(self, ex: PreparedExample):
        out = self.logits(ex, train=False).data
        if self.schema.kind == "classification":
            return int(np.argmax(out[0]))
        return float(out[0, 0])

    def evaluate(self, prepared) -> M.EvalReport:
        preds = [self.predict(ex) for ex in prepared]
        report = M.EvalReport()
        if self.schema.kind == "classification":
            labels = [int(ex.label) for ex in prepared]
            hits = sum(p == g for p, g in zip(preds, labels))
            report.accuracy = hits / len(prepared) if prepared else 1.0
            if self.schema.num_classes >= 2 and prepared:
                report.r_k = M.r_k_correlation(preds, labels, self.schema.num_classes)
            report.per_category = M.accuracy_by_category(prepared, preds)
        else:
            golds = [float(ex.label) for ex in prepared]
            if len(prepared) >= 2:
                report.pearson = M.pearson(preds, golds)
        return report


@dataclass
class TrainResult:
    model: DownstreamModel
    epoch_reports: list
    final_report: M.EvalReport
    train_accuracy_curve: list


def _batches(order, size):
    for i in range(0, len(order), size):
        yield order[i : i + size]


def train_downstream(
    dataset,
    run: RunConfig,
    opt: OptimizerConfig,
    dev_dataset=None,
    seed: int = 0,
) -> TrainResult:
    """Train one downstream run; per-epoch reports come from the dev split."""
    if not dataset:
        raise TrainingError("empty training dataset")
    if run.schema is None:
        raise TrainingError("run config must declare the task schema")
    schema = run.schema
    vocab = dataset_vocab(run, list(dataset) + list(dev_dataset or []))
    prepared = prepare_dataset(dataset, vocab)
    dev_prepared = prepare_dataset(dev_dataset, vocab) if dev_dataset else None
    pair = prepared[0].b is not None
    if schema.pair != pair:
        raise TrainingError("schema pair flag disagrees with the dataset")
    emb_dim = prepared[0].a.vectors.shape[1]
    model = DownstreamModel(run, schema, emb_dim, vocab, pair, seed)
    params = model.parameters()
    state = AdamWState.for_params(params)
    steps_per_epoch = math.ceil(len(prepared) / opt.batch_size)
    total_steps = opt.epochs * steps_per_epoch
    step = 0
    epoch_reports, train_curve = [], []
    for epoch in range(opt.epochs):
        order = list(derive_rng(seed, "shuffle", epoch).permutation(len(prepared)))
        for batch in _batches(order, opt.batch_size):
            model.zero_grad()
            for j, idx in enumerate(batch):
                ex = prepared[idx]
                loss = model.loss(ex, train=True, seed=derive_seed(seed, "dropout", step, j))
                ad.backward(ad.scalar_mul(loss, 1.0 / len(batch)))
            adamw_step(params, [p.grad for p in params], state, opt, step, total_steps)
            step += 1
        model.zero_grad()
        train_report = model.evaluate(prepared)
        train_curve.append(train_report.accuracy)
        epoch_reports.append(model.evaluate(dev_prepared) if dev_prepared else train_report)
    final = epoch_reports[-1]
    return TrainResult(
        model=model,
        epoch_reports=epoch_reports,
        final_report=final,
        train_accuracy_curve=train_curve,
    )


# ---------------------------------------------------------------------------
# parser training (ceiling vs probe)


@dataclass
class ParserPrep:
    token_means: np.ndarray
    gold: object  # SemanticGraph (rooted tree or plain graph)
    n_tokens: int


def prepare_parser_corpus(records, target: str, vocab: RelationVocab) -> list[ParserPrep]:
    out = []
    for rec in records:
        mean_mat, emb = _embedding_bundle(rec)
        gold = rec.tree_graph(vocab) if target == "tree" else rec.graph(vocab)
        out.append(
            ParserPrep(
                token_means=mean_mat @ emb.vectors, gold=gold, n_tokens=len(rec.sentence)
            )
        )
    return out


def _window_features(means: np.ndarray) -> np.ndarray:
    prev = np.vstack([np.zeros((1, means.shape[1])), means[:-1]])
    nxt = np.vstack([means[1:], np.zeros((1, means.shape[1]))])
    return np.concatenate([prev, means, nxt], axis=1)


class ParserModel:
    """Backbone (trainable window contextualizer, or frozen identity) + head."""

    def __init__(
        self,
        cfg: ParserConfig,
        embedding_dim: int,
        num_labels: int,
        backbone_dim: int,
        seed: int,
    ):
        self.cfg = cfg
        rng = derive_rng(seed, "parser-init")
        if cfg.freeze_backbone:
            self.backbone = None
            head_dim = embedding_dim
        else:
            self.backbone = _linear(rng, backbone_dim, 3 * embedding_dim)
            head_dim = backbone_dim
        self.head = init_parser_params(cfg, head_dim, num_labels, rng)

    def named_values(self):
        if self.backbone is not None:
            yield from self.backbone.named_values("backbone")
        yield from self.head.named_values("parser")

    def parameters(self):
        return [v for _, v in self.named_values()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def states(self, prep: ParserPrep) -> ad.Value:
        if self.backbone is None:
            return ad.constant(prep.token_means)
        window = ad.constant(_window_features(prep.token_means))
        return ad.relu(
            ad.add(ad.matmul(window, ad.transpose(self.backbone.weight)), self.backbone.bias)
        )

    def loss(self, prep: ParserPrep) -> ad.Value:
        return parsing_loss(score(self.states(prep), self.cfg, self.head), prep.gold, self.cfg)

    def decode(self, prep: ParserPrep):
        sc = score(self.states(prep), self.cfg, self.head)
        arc = sc.arc_scores.data
        labels = sc.label_scores()
        if self.cfg.target == "tree":
            return assign_labels(chu_liu_edmonds(arc), labels)
        return greedy_graph_decode(arc, labels)

    def evaluate(self, preps, include_tops: bool = False) -> M.EvalReport:
        preds = [self.decode(p) for p in preps]
        report = M.EvalReport()
        if self.cfg.target == "tree":
            golds = [M.tree_from_rooted_graph(p.gold) for p in preps]
            report.las = M.las(preds, golds)
            report.uas = M.uas(preds, golds)
        else:
            golds = [p.gold for p in preps]
            precision, recall, f1 = M.labeled_f1(preds, golds, include_tops=include_tops)
            report.labeled_precision = precision
            report.labeled_recall = recall
            report.labeled_f1 = f1
        report.lem = M.exact_match(preds, golds, labeled=True)
        report.uem = M.exact_match(preds, golds, labeled=False)
        return report


@dataclass
class ParserRunResult:
    model: ParserModel
    report: M.EvalReport


def train_parser(
    train_records,
    dev_records,
    target: str,
    vocab: RelationVocab,
    cfg: ParserConfig,
    opt: OptimizerConfig,
    backbone_dim: int = 64,
    seed: int = 0,
    include_tops: bool = False,
) -> ParserRunResult:
    train_preps = prepare_parser_corpus(train_records, target, vocab)
    dev_preps = prepare_parser_corpus(dev_records, target, vocab)
    if not train_preps:
        raise TrainingError("empty parser corpus")
    emb_dim = train_preps[0].token_means.shape[1]
    model = ParserModel(cfg, emb_dim, vocab.size, backbone_dim, seed)
    params = model.parameters()
    state = AdamWState.for_params(params)
    steps_per_epoch = math.ceil(len(train_preps) / opt.batch_size)
    total_steps = opt.epochs * steps_per_epoch
    step = 0
    for epoch in range(opt.epochs):
        order = list(derive_rng(seed, "parser-shuffle", epoch).permutation(len(train_preps)))
        for batch in _batches(order, opt.batch_size):
            model.zero_grad()
            for idx in batch:
                loss = model.loss(train_preps[idx])
                ad.backward(ad.scalar_mul(loss, 1.0 / len(batch)))
            adamw_step(params, [p.grad for p in params], state, opt, step, total_steps)
            step += 1
    model.zero_grad()
    return ParserRunResult(
        model=model, report=model.evaluate(dev_preps, include_tops=include_tops)
    )


def probe_experiment(
    train_records,
    dev_records,
    vocabs: dict,
    opt: OptimizerConfig,
    targets=("tree", "graph"),
    arc_mlp_dim: int = 512,
    label_mlp_dim: int = 128,
    backbone_dim: int = 64,
    seed: int = 0,
    include_tops: bool = False,
) -> dict:
    """Train ceiling and probe per target; report scores and their deltas."""
    blocks = {}
    for target in targets:
        vocab = vocabs[target]
        ceiling_cfg = ParserConfig(
            mode="ceiling", target=target, arc_mlp_dim=arc_mlp_dim, label_mlp_dim=label_mlp_dim
        )
        probe_cfg = ParserConfig(mode="probe", target=target)
        ceiling = train_parser(
            train_records, dev_records, target, vocab, ceiling_cfg, opt, backbone_dim,
            seed=derive_seed(seed, "ceiling", target), include_tops=include_tops,
        )
        probe = train_parser(
            train_records, dev_records, target, vocab, probe_cfg, opt, backbone_dim,
            seed=derive_seed(seed, "probe", target), include_tops=include_tops,
        )
        fields = ("las", "lem", "uem") if target == "tree" else ("labeled_f1", "lem", "uem")
        blocks[target] = {
            "ceiling": ceiling.report.to_json(),
            "probe": probe.report.to_json(),
            "deltas": M.delta_report(probe.report, ceiling.report, fields),
        }
    return blocks


# ---------------------------------------------------------------------------
# subsampling and parameter counting


def subsample(dataset, fraction: float, seed: int):
    """floor(n * fraction) examples, uniform without replacement, order kept."""
    if not 0 < fraction <= 1:
        raise TrainingError(f"fraction must be in (0, 1], got {fraction}")
    n = len(dataset)
    k = math.floor(n * fraction)
    if k == 0:
        raise TrainingError(f"fraction {fraction} of {n} examples leaves nothing")
    rng = derive_rng(seed, "subsample")
    keep = sorted(rng.choice(n, size=k, replace=False))
    return [dataset[i] for i in keep]


def count_parameters(
    run: RunConfig,
    embedding_dim: int,
    num_relations: int,
    num_classes: int,
    pair: bool,
) -> tuple[int, dict[str, int]]:
    """Exact symbolic parameter count per component, from the config alone."""
    h = run.encoder.hidden_dim
    b = run.encoder.num_bases
    layers = run.encoder.num_layers
    r_aug = 2 * num_relations
    out_dim = max(num_classes, 1)
    summary_dim = (2 if pair else 1) * embedding_dim
    per_layer = {
        "rgcn": b * h * h + r_aug * b + h * h,
        "gcn": 2 * h * h,
        "gat": 2 * h * h + 2 * h,
    }[run.encoder.variant]
    breakdown: dict[str, int] = {}
    if run.mode in ("sift", "sift_light", "gcn", "gat"):
        breakdown["encoder"] = h * embedding_dim + layers * per_layer
        pooled_dim = (2 if pair else 1) * h
        if run.ablations.concat:
            pooled_dim += summary_dim
        if pair:
            breakdown["pair_attention"] = h * h + 2 * h + 1 + h * 4 * h
            breakdown["composition"] = layers * per_layer
        breakdown["pooling"] = 2 * pooled_dim
        breakdown["classifier"] = out_dim * pooled_dim + out_dim
    if run.mode in ("baseline", "sift_light"):
        breakdown["main_head"] = out_dim * summary_dim + out_dim
    if run.mode == "scaffold":
        breakdown["adapter"] = h * embedding_dim + h
        feat_dim = (2 if pair else 1) * h + summary_dim
        breakdown["main_head"] = out_dim * feat_dim + out_dim
        arc_dim, label_dim = run.scaffold_parser_dims
        mlps = 2 * (arc_dim * h + arc_dim) + 2 * (label_dim * h + label_dim)
        arc_biaffine = arc_dim * arc_dim + 2 * arc_dim + 1
        label_biaffine = (
            num_relations * label_dim * label_dim
            + num_relations * 2 * label_dim
            + num_relations
        )
        breakdown["parser_head"] = mlps + arc_biaffine + label_biaffine
    return sum(breakdown.values()), breakdown


def save_model(model, path) -> None:
    save_checkpoint(model.named_values(), path)
