"""End-to-end command-line pipeline in a temp directory: synthesize a corpus,
convert it to SDP and back, probe it, finetune, evaluate, diagnose, and
subsample."""

import tempfile
from pathlib import Path

from semgraph.cli import main

work = Path(tempfile.mkdtemp(prefix="semgraph-demo-"))
print("working in", work)

steps = [
    ["synth", "--seed", "7", "--n-sentences", "120", "--out", str(work / "data")],
    ["convert", "--corpus", str(work / "data/corpus.jsonl"), "--out", str(work / "corpus.sdp")],
    ["convert", "--corpus", str(work / "corpus.sdp"), "--out", str(work / "corpus2.jsonl")],
    ["probe", "--corpus", str(work / "data/corpus.jsonl"), "--seed", "1",
     "--out", str(work / "probe.json")],
    ["finetune", "--dataset", str(work / "data/task.tsv"),
     "--config", str(work / "data/run.example.json"), "--seed", "3",
     "--out", str(work / "run")],
    ["evaluate", str(work / "run"), "--dataset", str(work / "data/task.dev.tsv"),
     "--out", str(work / "eval.json")],
    ["diagnose", str(work / "run"), "--dataset", str(work / "data/task.dev.tsv"),
     "--out", str(work / "diag.json")],
    ["subsample", "--dataset", str(work / "data/task.tsv"), "--fraction", "0.2",
     "--seed", "3", "--out", str(work / "sub.tsv")],
    ["gradcheck", "--model", "sift", "--tol", "1e-5"],
]

for argv in steps:
    print(f"\n$ semgraph {' '.join(argv)}")
    code = main(argv)
    assert code == 0, f"exit {code}"
print("\nall steps completed; artifacts in", work)
