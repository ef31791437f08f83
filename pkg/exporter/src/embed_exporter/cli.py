"""Command-line wrapper: one sentence per input line in, canonical JSONL out."""

from __future__ import annotations

import argparse
import sys

from .exporter import ExportError, ExportJob, export


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="embed-exporter",
        description="Export per-wordpiece contextual vectors to canonical JSONL.",
    )
    parser.add_argument("--input", required=True, help="text file, one sentence per line")
    parser.add_argument("--encoder", required=True, help="local model directory or name")
    parser.add_argument("--out", required=True, help="output JSONL path")
    parser.add_argument("--layer", type=int, default=-1, help="hidden-state layer (-1 = final)")
    parser.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    job = ExportJob(
        input_path=args.input,
        encoder=args.encoder,
        output_path=args.out,
        layer=args.layer,
        manifest_path=args.manifest,
    )
    try:
        report = export(job)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {report.written} sentences (dim {report.dim}), "
          f"skipped {len(report.skipped)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
