"""Exporter tests against a tiny locally saved encoder.

The output contract is the primary library's canonical JSONL format, so the
validation oracles here are that library's own readers: read_embeddings must
accept every line and align_tokens must cover every reference token.
"""

import json

import numpy as np
import pytest
import torch
from tokenizers import Tokenizer, models, pre_tokenizers, processors
from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

from embed_exporter import ExportJob, export
from embed_exporter.cli import main as cli_main

from semgraph.corpus import align_tokens, read_embeddings, read_jsonl_corpus

WORDS = [
    "the", "a", "dog", "cat", "bird", "ran", "sat", "flew", "fast", "slow",
    "negoti", "##ations", "##ly", "run", "jump", "over", "under", "tree",
]
SPLITTABLE = ["fastly", "slowly", "negotiations"]


@pytest.fixture(scope="session")
def tiny_encoder(tmp_path_factory):
    out = tmp_path_factory.mktemp("encoder")
    vocab = {"[PAD]": 0, "[UNK]": 1, "[CLS]": 2, "[SEP]": 3}
    for w in WORDS:
        vocab[w] = len(vocab)
    tok = Tokenizer(models.WordPiece(vocab=vocab, unk_token="[UNK]"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    tok.post_processor = processors.TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tok,
        pad_token="[PAD]",
        unk_token="[UNK]",
        cls_token="[CLS]",
        sep_token="[SEP]",
    )
    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=16,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=32,
    )
    model = BertModel(config)
    model.eval()
    fast.save_pretrained(out)
    model.save_pretrained(out)
    return out


@pytest.fixture(scope="session")
def sample_file(tmp_path_factory):
    rng = np.random.default_rng(3)
    plain = [w for w in WORDS if not w.startswith("##")]
    lines = []
    for i in range(100):
        n = int(rng.integers(3, 9))
        words = [plain[int(rng.integers(0, len(plain)))] for _ in range(n)]
        if i % 3 == 0:
            words[int(rng.integers(0, n))] = SPLITTABLE[i % len(SPLITTABLE)]
        if i % 7 == 0:
            words[-1] = "zzknownword"  # forces [UNK] with full-word offsets
        lines.append(" ".join(words))
    lines.insert(40, "")  # skipped: empty
    lines.append(" ".join(["dog"] * 40))  # skipped: exceeds the length limit
    path = tmp_path_factory.mktemp("texts") / "sample.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def exported(tiny_encoder, sample_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("out") / "emb.jsonl"
    job = ExportJob(input_path=str(sample_file), encoder=str(tiny_encoder), output_path=str(out))
    report = export(job)
    return out, job, report


def test_line_counts_and_manifest(exported):
    out, job, report = exported
    assert report.written == 100
    assert len(out.read_text().splitlines()) == 100
    manifest = json.loads(job.resolved_manifest().read_text())
    assert manifest["written"] == 100
    reasons = {entry["reason"] for entry in manifest["skipped"]}
    assert reasons == {"empty", "too_long"}
    assert manifest["dim"] == 16


def test_output_passes_primary_embedding_validation(exported):
    out, _, report = exported
    embeddings = read_embeddings(out)
    assert len(embeddings) == 100
    assert all(e.dim == report.dim for e in embeddings)


def test_alignment_covers_every_token(exported):
    out, _, _ = exported
    uncovered = 0
    for record in read_jsonl_corpus(out):
        alignment = align_tokens(record.sentence, record.wordpieces())
        uncovered += sum(stop <= start for start, stop in alignment.spans)
        assert len(alignment.spans) == len(record.sentence)
    assert uncovered == 0


def test_rerun_is_byte_identical(exported, tiny_encoder, sample_file, tmp_path):
    out, _, _ = exported
    again = tmp_path / "again.jsonl"
    export(ExportJob(input_path=str(sample_file), encoder=str(tiny_encoder), output_path=str(again)))
    assert again.read_bytes() == out.read_bytes()


def test_pooled_is_sequence_start_vector(exported):
    out, _, _ = exported
    for record in read_jsonl_corpus(out)[:5]:
        assert np.allclose(record.pooled, record.vectors[0])
        # boundary specials carry empty spans
        assert record.pieces[0] == (0, 0) and record.pieces[-1] == (0, 0)


def test_layer_selection_changes_vectors(tiny_encoder, sample_file, tmp_path):
    final = tmp_path / "final.jsonl"
    first = tmp_path / "first.jsonl"
    export(ExportJob(str(sample_file), str(tiny_encoder), str(final), layer=-1))
    export(ExportJob(str(sample_file), str(tiny_encoder), str(first), layer=0))
    a = read_jsonl_corpus(final)[0]
    b = read_jsonl_corpus(first)[0]
    assert not np.allclose(a.vectors, b.vectors)


def test_layer_out_of_range_rejected(tiny_encoder, sample_file, tmp_path):
    from embed_exporter.exporter import ExportError

    with pytest.raises(ExportError):
        export(ExportJob(str(sample_file), str(tiny_encoder), str(tmp_path / "x.jsonl"), layer=9))


def test_cli_entry(tiny_encoder, sample_file, tmp_path, capsys):
    out = tmp_path / "cli.jsonl"
    code = cli_main(
        ["--input", str(sample_file), "--encoder", str(tiny_encoder), "--out", str(out)]
    )
    assert code == 0
    assert "wrote 100 sentences" in capsys.readouterr().out
    assert cli_main(["--input", str(tmp_path / "missing.txt"), "--encoder", str(tiny_encoder),
                     "--out", str(out)]) == 1
