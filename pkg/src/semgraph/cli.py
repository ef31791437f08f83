"""Batch command-line entry point.

Commands: convert (SDP <-> JSONL), probe (ceiling + probe parser runs with a
delta report), finetune (one downstream run), evaluate (checkpoint + dataset
to a metric report), diagnose (per-category accuracy table), gradcheck
(gradient verification suites), subsample (reduced dataset), synth (synthetic
corpus and task files).

Every command validates its flags before doing any work, never mutates its
inputs, writes only under --out, and derives all randomness from --seed via
the package's named seed streams, so identical invocations produce
byte-identical artifacts.  Exit codes: 0 success, 1 validation error,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corpus as cio
from . import metrics as M
from . import synth
from . import training as T
from .checkpoint import load_checkpoint, restore, save_checkpoint
from .encoder import EncoderConfig
from .gradsuite import run_full_suite, run_primitive_checks, run_sift_pair_check
from .graphs import RelationVocab
from .seeding import derive_seed


class CliError(Exception):
    """Flag/config validation failure (exit code 1)."""


def _write_json(path, payload) -> None:
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CliError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise CliError(f"malformed JSON in {path}: {exc}")


def _require(args, *names) -> None:
    for name in names:
        if getattr(args, name.replace("-", "_"), None) in (None, ""):
            raise CliError(f"--{name} is required for this command")


# ---------------------------------------------------------------------------
# config parsing


def _schema_from_json(obj: dict) -> cio.TaskSchema:
    return cio.TaskSchema(
        kind=obj.get("kind", "classification"),
        labels=tuple(obj.get("labels", ())),
        pair=bool(obj.get("pair", False)),
        categories=tuple(obj["categories"]) if obj.get("categories") else None,
    )


def _encoder_from_json(obj: dict) -> EncoderConfig:
    return EncoderConfig(
        num_layers=int(obj.get("num_layers", 2)),
        hidden_dim=int(obj.get("hidden_dim", 256)),
        num_bases=int(obj.get("num_bases", 20)),
        inter_layer_dropout=float(obj.get("inter_layer_dropout", 0.0)),
        final_dropout=float(obj.get("final_dropout", 0.0)),
        variant=obj.get("variant", "rgcn"),
    )


def _optimizer_from_json(obj: dict) -> T.OptimizerConfig:
    return T.OptimizerConfig(
        learning_rate=float(obj.get("learning_rate", 2e-5)),
        weight_decay=float(obj.get("weight_decay", 0.1)),
        warmup_ratio=float(obj.get("warmup_ratio", 0.06)),
        betas=tuple(obj.get("betas", (0.9, 0.999))),
        eps=float(obj.get("eps", 1e-8)),
        epochs=int(obj.get("epochs", 10)),
        batch_size=int(obj.get("batch_size", 32)),
    )


def _run_from_json(obj: dict, mode_override=None) -> tuple[T.RunConfig, T.OptimizerConfig]:
    mode = mode_override or obj.get("mode")
    if not mode:
        raise CliError("run config needs a mode (or pass --mode)")
    if "schema" not in obj:
        raise CliError("run config needs a schema block")
    ablations = obj.get("ablations", {})
    run = T.RunConfig(
        mode=mode,
        encoder=_encoder_from_json(obj.get("encoder", {})),
        schema=_schema_from_json(obj["schema"]),
        seeds=tuple(obj.get("seeds", (0,))),
        ablations=T.Ablations(
            attention=bool(ablations.get("attention", True)),
            concat=bool(ablations.get("concat", True)),
        ),
        light_weights=tuple(obj.get("light_weights", (0.2, 0.8))),
        scaffold_weight=float(obj.get("scaffold_weight", 0.2)),
        scaffold_parser_dims=tuple(obj.get("scaffold_parser_dims", (64, 32))),
        relations=tuple(obj["relations"]) if obj.get("relations") else None,
    )
    return run, _optimizer_from_json(obj.get("optimizer", {}))


def _run_to_json(run: T.RunConfig, opt: T.OptimizerConfig, extra: dict) -> dict:
    schema = run.schema
    payload = {
        "mode": run.mode,
        "encoder": {
            "num_layers": run.encoder.num_layers,
            "hidden_dim": run.encoder.hidden_dim,
            "num_bases": run.encoder.num_bases,
            "inter_layer_dropout": run.encoder.inter_layer_dropout,
            "final_dropout": run.encoder.final_dropout,
            "variant": run.encoder.variant,
        },
        "schema": {
            "kind": schema.kind,
            "labels": list(schema.labels),
            "pair": schema.pair,
            "categories": list(schema.categories) if schema.categories else None,
        },
        "seeds": list(run.seeds),
        "ablations": {"attention": run.ablations.attention, "concat": run.ablations.concat},
        "light_weights": list(run.light_weights),
        "scaffold_weight": run.scaffold_weight,
        "scaffold_parser_dims": list(run.scaffold_parser_dims),
        "relations": list(run.relations) if run.relations else None,
        "optimizer": {
            "learning_rate": opt.learning_rate,
            "weight_decay": opt.weight_decay,
            "warmup_ratio": opt.warmup_ratio,
            "betas": list(opt.betas),
            "eps": opt.eps,
            "epochs": opt.epochs,
            "batch_size": opt.batch_size,
        },
    }
    payload.update(extra)
    return payload


def _grammar_from_json(obj: dict) -> synth.GrammarConfig:
    return synth.GrammarConfig(
        vocab_size=int(obj.get("vocab_size", 24)),
        relations=tuple(obj.get("relations", ("ARG1", "ARG2", "conj"))),
        max_len=int(obj.get("max_len", 12)),
        embedding_dim=int(obj.get("embedding_dim", 16)),
        pattern_rate=float(obj.get("pattern_rate", 0.5)),
        label_rule=obj.get("label_rule", "has:ARG2"),
    )


# ---------------------------------------------------------------------------
# commands


def cmd_convert(args) -> int:
    _require(args, "corpus", "out")
    src, dst = Path(args.corpus), Path(args.out)
    if src.suffix == ".jsonl" and dst.suffix != ".jsonl":
        records = cio.read_jsonl_corpus(src)
        vocab = cio.records_vocab(records)
        pairs = [(r.sentence, r.graph(vocab)) for r in records]
        cio.write_sdp(pairs, vocab, dst)
    elif dst.suffix == ".jsonl":
        pairs, vocab = cio.read_sdp(src)
        records = [
            cio.SentenceRecord(
                sentence=sent,
                edges=tuple((s, t, vocab.label(r)) for s, t, r in g.edges),
                tops=g.top_nodes,
            )
            for sent, g in pairs
        ]
        cio.write_jsonl_corpus(records, dst)
    else:
        raise CliError("convert needs a .jsonl path on exactly one side")
    return 0


def _split_records(records, dev_fraction: float):
    n_dev = max(1, int(len(records) * dev_fraction))
    if n_dev >= len(records):
        raise CliError("corpus too small to split off a dev set")
    return records[:-n_dev], records[-n_dev:]


def cmd_probe(args) -> int:
    _require(args, "corpus", "out")
    cfg = _load_json(args.config) if args.config else {}
    records = cio.read_jsonl_corpus(args.corpus)
    if not records:
        raise CliError(f"empty corpus: {args.corpus}")
    train, dev = _split_records(records, float(cfg.get("dev_fraction", 0.2)))
    targets = tuple(cfg.get("targets", ())) or (
        ("tree", "graph") if records[0].tree is not None else ("graph",)
    )
    vocabs = {}
    if "graph" in targets:
        vocabs["graph"] = cio.records_vocab(records)
    if "tree" in targets:
        if records[0].tree is None:
            raise CliError("corpus has no tree annotations; cannot probe trees")
        vocabs["tree"] = cio.records_tree_vocab(records)
    opt = _optimizer_from_json(
        cfg.get("optimizer", {"learning_rate": 3e-3, "weight_decay": 0.0, "epochs": 4, "batch_size": 8})
    )
    blocks = T.probe_experiment(
        train,
        dev,
        vocabs,
        opt,
        targets=targets,
        arc_mlp_dim=int(cfg.get("arc_mlp_dim", 64)),
        label_mlp_dim=int(cfg.get("label_mlp_dim", 32)),
        backbone_dim=int(cfg.get("backbone_dim", 48)),
        seed=args.seed,
        include_tops=args.include_tops,
    )
    _write_json(args.out, blocks)
    for target in targets:
        block = blocks[target]
        headline = "las" if target == "tree" else "labeled_f1"
        print(f"[{target}]  metric    abs_d    rel_d    ceiling    probe")
        for metric in (headline, "lem", "uem"):
            delta = block["deltas"].get(metric)
            if delta is None:
                continue
            print(
                f"[{target}]  {metric:<9s} {delta['absolute']*100:+7.1f}  "
                f"{delta['relative']*100:+6.1f}%  {block['ceiling'][metric]*100:8.1f}  "
                f"{block['probe'][metric]*100:7.1f}"
            )
    return 0


def _read_task(args, schema: cio.TaskSchema):
    examples = cio.read_task_dataset(args.dataset, schema)
    dev_path = Path(args.dataset).with_suffix(".dev.tsv")
    dev = cio.read_task_dataset(dev_path, schema) if dev_path.exists() else None
    return examples, dev


def cmd_finetune(args) -> int:
    _require(args, "dataset", "config", "out")
    obj = _load_json(args.config)
    run, opt = _run_from_json(obj, mode_override=args.mode)
    examples, dev = _read_task(args, run.schema)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = T.train_downstream(examples, run, opt, dev_dataset=dev, seed=args.seed)
    with open(out_dir / "metrics.jsonl", "w", encoding="utf-8") as fh:
        for epoch, report in enumerate(result.epoch_reports):
            row = {"epoch": epoch, **report.to_json()}
            row["train_accuracy"] = result.train_accuracy_curve[epoch]
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    save_checkpoint(result.model.named_values(), out_dir / "checkpoint.ckpt")
    _write_json(
        out_dir / "run.json",
        _run_to_json(
            run,
            opt,
            {
                "embedding_dim": result.model.embedding_dim,
                "pair": result.model.pair,
                "resolved_relations": list(result.model.vocab.labels),
                "seed": args.seed,
            },
        ),
    )
    _write_json(out_dir / "report.json", result.final_report.to_json())
    print(result.final_report.render_table())
    return 0


def _load_run_dir(run_dir: Path):
    manifest = _load_json(run_dir / "run.json")
    run, opt = _run_from_json(manifest)
    vocab = RelationVocab.from_labels(manifest["resolved_relations"])
    model = T.DownstreamModel(
        run,
        run.schema,
        int(manifest["embedding_dim"]),
        vocab,
        bool(manifest["pair"]),
        seed=int(manifest.get("seed", 0)),
    )
    restore(model.named_values(), load_checkpoint(run_dir / "checkpoint.ckpt"))
    return model, run, opt


def cmd_evaluate(args) -> int:
    _require(args, "dataset")
    run_dir = Path(args.checkpoint)
    if not run_dir.is_dir():
        raise CliError("evaluate expects the finetune output directory")
    model, run, _ = _load_run_dir(run_dir)
    examples = cio.read_task_dataset(args.dataset, run.schema)
    prepared = T.prepare_dataset(examples, model.vocab)
    report = model.evaluate(prepared)
    if args.out:
        _write_json(args.out, report.to_json())
    print(report.render_table())
    return 0


def cmd_diagnose(args) -> int:
    _require(args, "dataset")
    run_dir = Path(args.checkpoint)
    if not run_dir.is_dir():
        raise CliError("diagnose expects the finetune output directory")
    model, run, _ = _load_run_dir(run_dir)
    examples = cio.read_task_dataset(args.dataset, run.schema)
    prepared = T.prepare_dataset(examples, model.vocab)
    preds = [model.predict(ex) for ex in prepared]
    table = M.accuracy_by_category(prepared, preds)
    counts = M.category_counts([ex.category for ex in prepared])
    if args.out:
        _write_json(args.out, {"accuracy": table, "counts": counts})
    width = max(len(k) for k in table)
    for tag in sorted(table):
        n = counts.get(tag, len(prepared))
        print(f"{tag:<{width}}  {table[tag]*100:6.1f}  (n={n})")
    return 0


def cmd_gradcheck(args) -> int:
    tol = args.tol if args.tol is not None else 1e-5
    if args.model == "primitives":
        rows = [
            (name, r.max_rel_error, r.checked, len(r.excluded), r.passed(tol))
            for name, r in run_primitive_checks(seed=args.seed)
        ]
    elif args.model == "sift":
        r = run_sift_pair_check(seed=args.seed)
        rows = [("sift_pair_full", r.max_rel_error, r.checked, len(r.excluded), r.passed(tol))]
    elif args.model == "all":
        rows = run_full_suite(tol=tol, seed=args.seed)
    else:
        raise CliError(f"unknown gradcheck model {args.model!r}")
    worst = 0.0
    all_ok = True
    for name, err, checked, excluded, ok in rows:
        print(f"{name:<20s} max_rel={err:.3e} checked={checked} excluded={excluded} "
              f"{'PASS' if ok else 'FAIL'}")
        worst = max(worst, err)
        all_ok &= ok
    print(f"overall max relative error {worst:.3e} (tol {tol:g}): "
          f"{'PASS' if all_ok else 'FAIL'}")
    return 0 if all_ok else 2


def cmd_subsample(args) -> int:
    _require(args, "dataset", "fraction", "out")
    lines = Path(args.dataset).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise CliError("empty dataset file")
    header, body = lines[0], [line for line in lines[1:] if line.strip()]
    keep = T.subsample(list(range(len(body))), args.fraction, args.seed)
    out = Path(args.out)
    out.write_text("\n".join([header] + [body[i] for i in keep]) + "\n", encoding="utf-8")
    for side_in, side_out in zip(cio.sidecar_paths(args.dataset), cio.sidecar_paths(out)):
        if side_in.exists():
            side_lines = [l for l in side_in.read_text(encoding="utf-8").splitlines() if l.strip()]
            if len(side_lines) != len(body):
                raise CliError(f"{side_in}: sidecar rows do not match the dataset")
            side_out.write_text("\n".join(side_lines[i] for i in keep) + "\n", encoding="utf-8")
    print(f"kept {len(keep)} of {len(body)} rows")
    return 0


def cmd_synth(args) -> int:
    _require(args, "out")
    cfg = _grammar_from_json(_load_json(args.config) if args.config else {})
    n = args.n_sentences
    corpus = synth.generate_synthetic_corpus(args.seed, n, cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cio.write_jsonl_corpus(corpus.records, out_dir / "corpus.jsonl")
    rows = synth.task_rows(corpus)
    split = max(1, int(n * 0.75))
    cio.write_task_dataset(
        out_dir / "task.tsv", rows[:split], corpus.schema, records_a=corpus.records[:split]
    )
    cio.write_task_dataset(
        out_dir / "task.dev.tsv", rows[split:], corpus.schema, records_a=corpus.records[split:]
    )
    run_stub = {
        "mode": "sift",
        "schema": {
            "kind": "classification",
            "labels": list(corpus.schema.labels),
            "pair": False,
        },
        "relations": list(cfg.relations),
        "encoder": {"hidden_dim": 16, "num_bases": 4},
        "optimizer": {
            "learning_rate": 5e-3,
            "weight_decay": 0.0,
            "epochs": 40,
            "batch_size": 16,
        },
    }
    _write_json(out_dir / "run.example.json", run_stub)
    print(f"wrote {n} sentences to {out_dir}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semgraph",
        description="Semantic-graph encoding, probing, finetuning, and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, checkpoint=False):
        p.add_argument("--corpus", help="canonical JSONL or SDP corpus path")
        p.add_argument("--dataset", help="task TSV path (sidecars found next to it)")
        p.add_argument("--config", help="JSON config path")
        p.add_argument("--mode", help="run mode override (baseline|sift|sift_light|scaffold|gcn|gat)")
        p.add_argument("--seed", type=int, default=0, help="root seed for all randomness")
        p.add_argument("--threads", type=int, default=1, help="worker cap (single-process)")
        p.add_argument("--out", help="output file or directory")
        p.add_argument("--fraction", type=float, help="subsample fraction in (0,1]")
        p.add_argument("--tol", type=float, help="gradient check tolerance")
        p.add_argument(
            "--include-tops",
            action="store_true",
            help="score top nodes as virtual-root edges in labeled F1",
        )
        if checkpoint:
            p.add_argument("checkpoint", help="finetune output directory")

    common(sub.add_parser("convert", help="convert between SDP and JSONL"))
    common(sub.add_parser("probe", help="train ceiling+probe parsers and report deltas"))
    common(sub.add_parser("finetune", help="run one downstream finetuning config"))
    common(sub.add_parser("evaluate", help="evaluate a checkpoint on a dataset"), checkpoint=True)
    common(sub.add_parser("diagnose", help="per-category accuracy table"), checkpoint=True)
    grad = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    common(grad)
    grad.add_argument(
        "--model",
        default="all",
        choices=("primitives", "sift", "all"),
        help="which suite to run",
    )
    common(sub.add_parser("subsample", help="write a reduced dataset"))
    syn = sub.add_parser("synth", help="emit a synthetic corpus and task files")
    common(syn)
    syn.add_argument("--n-sentences", type=int, default=256, help="corpus size")
    return parser


COMMANDS = {
    "convert": cmd_convert,
    "probe": cmd_probe,
    "finetune": cmd_finetune,
    "evaluate": cmd_evaluate,
    "diagnose": cmd_diagnose,
    "gradcheck": cmd_gradcheck,
    "subsample": cmd_subsample,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (cio.CorpusError, T.TrainingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1 if isinstance(exc, (cio.CorpusError,)) else 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
