"""Command-line surface: dwt, tokenize, classify, sweep, flops, gen-synthetic, selfcheck.

Data goes to stdout, diagnostics to stderr. Exit codes: 0 ok, 1 invariant
failure, 2 usage/configuration error, 3 I/O error. Identical argv and input
files produce byte-identical stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, flopsmodel, inference, modelio, selfcheck, tokenizer, wavelet
from .errors import ConfigurationError, DimensionError, ManifestError, PpmError

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2
EXIT_IO = 3

_PRECISIONS = {"f32": np.float32, "f64": np.float64}


def _parse_thetas(text: str) -> list[float]:
    out = []
    for field in text.split(","):
        field = field.strip()
        if not field:
            continue
        out.append(float("inf") if field in ("inf", "Inf", "INF") else float(field))
    if not out:
        raise ConfigurationError("no thresholds given")
    return out


def _load_model(path: str):
    params = modelio.load_manifest(path)
    from .encoder import ModelParams

    if not isinstance(params, ModelParams):
        raise ConfigurationError(f"{path} is not a model manifest")
    return params


def _load_bank(path: str):
    bank = modelio.load_manifest(path)
    if not isinstance(bank, inference.EmbeddingBank):
        raise ConfigurationError(f"{path} is not a bank manifest")
    return bank


def _cast_params(params, precision: str):
    if precision == "f32":
        return params
    from . import encoder as enc

    blocks = tuple(
        enc.BlockParams(
            **{
                f.name: getattr(b, f.name).astype(np.float64)
                for f in b.__dataclass_fields__.values()
            }
        )
        for b in params.block_params
    )
    import dataclasses

    return dataclasses.replace(
        params,
        proj_weight=params.proj_weight.astype(np.float64),
        proj_bias=params.proj_bias.astype(np.float64),
        level_embed=params.level_embed.astype(np.float64),
        kind_embed=params.kind_embed.astype(np.float64),
        readout_embed=params.readout_embed.astype(np.float64),
        block_params=blocks,
        final_gain=params.final_gain.astype(np.float64),
        final_bias=params.final_bias.astype(np.float64),
        readout_weight=params.readout_weight.astype(np.float64),
        readout_bias=params.readout_bias.astype(np.float64),
    )


def _gate_from_args(args) -> inference.GateConfig:
    space = {"sim": "similarity", "prob": "probability"}[args.score_space]
    if args.theta_per_class is not None:
        return inference.GateConfig(
            kind=args.gate,
            threshold_mode="per_class",
            per_class_factor=args.theta_per_class,
            score_space=space,
        )
    return inference.GateConfig(kind=args.gate, threshold=args.theta, score_space=space)


def cmd_dwt(args) -> int:
    rgb = modelio.load_ppm(args.image)
    dtype = _PRECISIONS[args.precision]
    ycbcr = wavelet.rgb_to_ycbcr(rgb.astype(dtype))
    pyramid = wavelet.decompose(ycbcr, args.levels, dtype=dtype)
    recon = wavelet.reconstruct(pyramid)
    err = float(np.abs(recon.stack() - ycbcr.stack()).max())
    pixel_energy = float((ycbcr.stack().astype(np.float64) ** 2).sum())
    report = {
        "height": ycbcr.height,
        "width": ycbcr.width,
        "levels": args.levels,
        "max_abs_error": err,
        "energy_ratio": wavelet.coefficient_energy(pyramid) / pixel_energy,
        "ll_shape": list(pyramid.ll.shape),
    }
    print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_tokenize(args) -> int:
    height = args.height if args.height else args.hw
    width = args.width if args.width else args.hw
    if height is None or width is None:
        raise ConfigurationError("give --hw or both --height and --width")
    if args.table:
        n_full = (height // args.patch) * (width // args.patch)
        row = [
            str(tokenizer.table1_counts(n_full, args.levels, col))
            for col in range(1, args.levels + 1)
        ]
        print(" ".join(row))
        return EXIT_OK
    plan = tokenizer.build_token_plan(height, width, args.patch, args.levels)
    print(plan.to_json())
    return EXIT_OK


def cmd_classify(args) -> int:
    params = _cast_params(_load_model(args.model), args.precision)
    bank = _load_bank(args.bank)
    rgb = modelio.load_ppm(args.image)
    trace = inference.classify_progressive(rgb, params, bank, _gate_from_args(args))
    if args.trace:
        Path(args.trace).write_text(trace.to_json() + "\n")
    summary = {
        "label": trace.label,
        "prediction": trace.prediction,
        "exit_level": trace.exit_level,
        "tokens_processed": trace.tokens_processed,
        "macs_cached": trace.macs_cached,
        "macs_naive": trace.macs_naive,
    }
    print(json.dumps(summary))
    return EXIT_OK


def cmd_sweep(args) -> int:
    params = _cast_params(_load_model(args.model), args.precision)
    bank = _load_bank(args.bank)
    paths = sorted(Path(args.images).glob("*.ppm"))
    if not paths:
        raise ConfigurationError(f"no .ppm images in {args.images}")
    images = [modelio.load_ppm(p) for p in paths]
    space = {"sim": "similarity", "prob": "probability"}[args.score_space]
    rows = inference.sweep(
        images, params, bank, args.gate, _parse_thetas(args.thetas), score_space=space
    )
    csv_text = inference.sweep_rows_to_csv(rows)
    if args.csv:
        Path(args.csv).write_text(csv_text)
    sys.stdout.write(csv_text)
    return EXIT_OK


def cmd_flops(args) -> int:
    if args.preset:
        cfg = flopsmodel.PRESETS[args.preset]
    else:
        cfg = flopsmodel.CostConfig(
            dim=args.dim,
            blocks=args.blocks,
            heads=args.heads,
            mlp_ratio=args.mlp_ratio,
            patch_input_dim=3 * args.patch * args.patch,
            out_dim=args.out_dim,
        )
    if args.tokens:
        total = flopsmodel.block_macs_full(args.tokens, cfg)
        print(
            json.dumps(
                {"tokens": args.tokens, "macs": total, "gmacs": total / flopsmodel.GIGA}
            )
        )
        return EXIT_OK
    counts = [int(c) for c in args.counts.split(",")]
    exit_step = args.exit if args.exit is not None else len(counts) - 1
    report = flopsmodel.progressive_cost(counts, exit_step, cfg)
    lines = ["step,n_new,n_total,cached,naive,delta"]
    for s in report.steps:
        lines.append(f"{s.step},{s.n_new},{s.n_total},{s.cached},{s.naive},{s.delta}")
    lines.append(
        f"total,,,{report.cached_total},{report.naive_total},"
        f"{report.naive_total - report.cached_total}"
    )
    lines.append(f"overhead,,,,,{report.overhead:.6f}")
    text = "\n".join(lines) + "\n"
    if args.csv:
        Path(args.csv).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_gen_synthetic(args) -> int:
    spec = modelio.SyntheticSpec(
        dim=args.dim,
        blocks=args.blocks,
        heads=args.heads,
        mlp_ratio=args.mlp_ratio,
        patch=args.patch,
        levels=args.levels,
        out_dim=args.out_dim,
        classes=args.classes,
        temperature=args.temperature,
    )
    params, bank = modelio.gen_synthetic(args.seed, spec, dtype=_PRECISIONS[args.precision])
    written = []
    if args.out_model:
        modelio.save_manifest(params, args.out_model)
        written.append(args.out_model)
    if args.out_bank:
        modelio.save_manifest(bank, args.out_bank)
        written.append(args.out_bank)
    if args.sample_images:
        out_dir = Path(args.sample_images)
        out_dir.mkdir(parents=True, exist_ok=True)
        for i in range(args.num_images):
            img = modelio.gen_synthetic_image(args.seed + 1000 + i, args.image_size, args.image_size)
            path = out_dir / f"sample_{i:03d}.ppm"
            modelio.save_ppm(img, path)
            written.append(str(path))
    print(json.dumps({"written": written}))
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    results = selfcheck.run_selfcheck(args.seed)
    failures = 0
    for r in results:
        status = "PASS" if r.ok else "FAIL"
        failures += 0 if r.ok else 1
        print(f"{status} {r.name}: {r.detail}")
    print(f"{len(results) - failures}/{len(results)} checks passed")
    return EXIT_OK if failures == 0 else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavetok",
        description="Coarse-to-fine wavelet-token transformer inference engine",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"wavetok {__version__} (manifest format {modelio.FORMAT_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dwt", help="decompose/reconstruct an image, report error")
    p.add_argument("--image", required=True)
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--precision", choices=("f32", "f64"), default="f32")
    p.set_defaults(func=cmd_dwt)

    p = sub.add_parser("tokenize", help="print a token plan or count table row")
    p.add_argument("--hw", type=int, help="square input size")
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--patch", type=int, required=True)
    p.add_argument("--levels", type=int, required=True)
    p.add_argument("--table", action="store_true", help="published count row, floor arithmetic")
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("classify", help="progressive zero-shot classification")
    p.add_argument("--image", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--bank", required=True)
    p.add_argument("--gate", choices=("margin", "prob"), default="margin")
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--theta-per-class", type=float, default=None)
    p.add_argument("--score-space", choices=("sim", "prob"), default="prob")
    p.add_argument("--precision", choices=("f32", "f64"), default="f32")
    p.add_argument("--trace", help="write the full per-level trace JSON here")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sweep", help="threshold sweep over a directory of PPMs")
    p.add_argument("--images", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--bank", required=True)
    p.add_argument("--gate", choices=("margin", "prob"), default="margin")
    p.add_argument("--thetas", required=True, help="comma list, inf allowed")
    p.add_argument("--score-space", choices=("sim", "prob"), default="prob")
    p.add_argument("--precision", choices=("f32", "f64"), default="f32")
    p.add_argument("--csv", help="also write the CSV here")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("flops", help="analytic MAC accounting tables")
    p.add_argument("--preset", choices=sorted(flopsmodel.PRESETS))
    p.add_argument("--dim", type=int, default=768)
    p.add_argument("--blocks", type=int, default=12)
    p.add_argument("--heads", type=int, default=12)
    p.add_argument("--mlp-ratio", type=int, default=4)
    p.add_argument("--patch", type=int, default=16)
    p.add_argument("--out-dim", type=int, default=512)
    p.add_argument("--tokens", type=int, help="single full forward at this count")
    p.add_argument("--counts", default="50,198", help="cumulative counts per step")
    p.add_argument("--exit", type=int, default=None)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("gen-synthetic", help="deterministic model/bank/image fixtures")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-model")
    p.add_argument("--out-bank")
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--mlp-ratio", type=int, default=4)
    p.add_argument("--patch", type=int, default=8)
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--out-dim", type=int, default=16)
    p.add_argument("--classes", type=int, default=8)
    p.add_argument("--temperature", type=float, default=100.0)
    p.add_argument("--precision", choices=("f32", "f64"), default="f32")
    p.add_argument("--sample-images", help="directory for sample PPMs")
    p.add_argument("--num-images", type=int, default=4)
    p.add_argument("--image-size", type=int, default=64)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("selfcheck", help="run the invariant suite, exit 0 iff all pass")
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_selfcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PpmError, ManifestError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigurationError, DimensionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
