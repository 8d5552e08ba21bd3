"""`wavetok-export`: one-shot conversion of a checkpoint into engine manifests."""

from __future__ import annotations

import argparse
import json
import sys

from .backends import resolve_checkpoint
from .errors import ExportError
from .jobs import ExportJob, export_text_bank, export_vit_weights, load_labels, load_templates


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavetok-export",
        description="Convert a CLIP-style checkpoint and prompt set into "
        "wavetok manifest files",
    )
    parser.add_argument(
        "--checkpoint", required=True,
        help="path to a torch state dict, or synthetic:<arch>[?seed=N]",
    )
    parser.add_argument("--labels", help="text file, one class label per line")
    parser.add_argument("--prompts", help="template file with {} placeholders; "
                        "defaults to the canonical 80-template set")
    parser.add_argument("--out-bank", help="directory or .json path for the bank manifest")
    parser.add_argument("--out-model", help="directory or .json path for the model manifest")
    parser.add_argument("--dtype", choices=("f32", "f64"), default="f32")
    parser.add_argument("--levels", type=int, default=2,
                        help="wavelet levels the exported model will run at")
    parser.add_argument("--heads", type=int, default=None,
                        help="attention head count, when the checkpoint does not imply one")
    return parser


def main(argv: list[str] | None = None) -> int:
    args_in = list(sys.argv[1:] if argv is None else argv)
    if args_in and args_in[0] == "export":  # tolerate the subcommand form
        args_in = args_in[1:]
    args = build_parser().parse_args(args_in)
    if not args.out_bank and not args.out_model:
        print("error: nothing to do, pass --out-bank and/or --out-model", file=sys.stderr)
        return 2
    if args.out_bank and not args.labels:
        print("error: --out-bank requires --labels", file=sys.stderr)
        return 2
    try:
        backend = resolve_checkpoint(args.checkpoint)
        job = ExportJob(
            checkpoint=args.checkpoint,
            labels=load_labels(args.labels) if args.labels else ["placeholder", "unused"],
            templates=load_templates(args.prompts),
            out_bank=args.out_bank,
            out_model=args.out_model,
            dtype=args.dtype,
            levels=args.levels,
            heads=args.heads,
        )
        written = {}
        if args.out_bank:
            written["bank"] = str(export_text_bank(job, backend))
        if args.out_model:
            written["model"] = str(export_vit_weights(job, backend))
    except (ExportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"source": backend.source, "sha256": backend.sha256, "written": written}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
