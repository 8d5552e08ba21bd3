"""Map a CLIP-style visual tower onto the engine's tensor schema.

The source layout is the standard state-dict naming: fused `in_proj` QKV,
`c_fc`/`c_proj` MLP, `ln_post`, and a bias-free `proj`. Torch linears store
weights as (out, in) and apply x @ W.T, while the engine uses x @ W, so
every linear transposes on the way through; `conv1` flattens to the engine's
(channel, row, col) patch layout directly.

Wavelet-specific slots have no counterpart in a flat-patch checkpoint. They
are filled by a fixed documented scheme and flagged `untrained` in the
manifest metadata: detail-band projections copy the LL projection, level and
kind codes start at zero, and every level's readout starts from the class
embedding. No accuracy claims attach to these tensors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ExportError

DROPPED_TENSORS = ("visual.positional_embedding", "visual.ln_pre.weight", "visual.ln_pre.bias")

UNTRAINED_TENSORS = (
    "embed.proj.lh.weight", "embed.proj.lh.bias",
    "embed.proj.hl.weight", "embed.proj.hl.bias",
    "embed.proj.hh.weight", "embed.proj.hh.bias",
    "embed.level", "embed.kind", "embed.readout",
    "readout.bias",
)

# CLIP towers use 64-wide heads.
HEAD_WIDTH = 64


@dataclass(frozen=True)
class VisualArch:
    dim: int
    blocks: int
    heads: int
    patch: int
    out_dim: int
    mlp_ratio: int


@dataclass
class ConversionReport:
    arch: VisualArch
    dropped: tuple[str, ...] = DROPPED_TENSORS
    untrained: tuple[str, ...] = UNTRAINED_TENSORS
    mapped: list[str] = field(default_factory=list)


def _require(state: dict[str, np.ndarray], key: str) -> np.ndarray:
    if key not in state:
        raise ExportError(f"checkpoint is missing tensor {key!r}")
    return np.asarray(state[key])


def infer_visual_arch(state: dict[str, np.ndarray], heads: int | None = None) -> VisualArch:
    """Read the architecture off tensor shapes; fail with tensor names."""
    conv = _require(state, "visual.conv1.weight")
    if conv.ndim != 4 or conv.shape[1] != 3 or conv.shape[2] != conv.shape[3]:
        raise ExportError(
            f"visual.conv1.weight: expected (d, 3, P, P), got {tuple(conv.shape)}"
        )
    dim, _, patch, _ = conv.shape
    proj = _require(state, "visual.proj")
    if proj.ndim != 2 or proj.shape[0] != dim:
        raise ExportError(
            f"visual.proj: expected ({dim}, d_out), got {tuple(proj.shape)}"
        )
    blocks = 0
    while f"visual.transformer.resblocks.{blocks}.ln_1.weight" in state:
        blocks += 1
    if blocks == 0:
        raise ExportError("checkpoint has no visual.transformer.resblocks.*")
    fc = _require(state, "visual.transformer.resblocks.0.mlp.c_fc.weight")
    if fc.shape[1] != dim or fc.shape[0] % dim:
        raise ExportError(
            f"visual.transformer.resblocks.0.mlp.c_fc.weight: expected (r*{dim}, {dim}), "
            f"got {tuple(fc.shape)}"
        )
    if heads is None:
        if dim % HEAD_WIDTH:
            raise ExportError(
                f"cannot infer head count for dim {dim}; pass heads explicitly"
            )
        heads = dim // HEAD_WIDTH
    return VisualArch(
        dim=dim,
        blocks=blocks,
        heads=heads,
        patch=patch,
        out_dim=proj.shape[1],
        mlp_ratio=fc.shape[0] // dim,
    )


def convert_visual_tower(
    state: dict[str, np.ndarray],
    levels: int,
    heads: int | None = None,
) -> tuple[dict[str, np.ndarray], ConversionReport]:
    """Engine tensors for an L-level wavelet schedule from a flat-patch tower."""
    arch = infer_visual_arch(state, heads=heads)
    d = arch.dim
    report = ConversionReport(arch=arch)
    out: dict[str, np.ndarray] = {}

    def take(src: str, want: tuple[int, ...]) -> np.ndarray:
        arr = _require(state, src)
        if tuple(arr.shape) != want:
            raise ExportError(f"{src}: expected {want}, got {tuple(arr.shape)}")
        report.mapped.append(src)
        return arr

    # Patch projection: conv weight (d, 3, P, P) flattens channel-major to
    # (3*P*P) per patch, exactly the engine's token layout.
    conv = take("visual.conv1.weight", (d, 3, arch.patch, arch.patch))
    ll_weight = conv.reshape(d, 3 * arch.patch * arch.patch).T
    zero_bias = np.zeros(d, dtype=conv.dtype)
    for kind in ("ll", "lh", "hl", "hh"):
        out[f"embed.proj.{kind}.weight"] = ll_weight
        out[f"embed.proj.{kind}.bias"] = zero_bias
    out["embed.level"] = np.zeros((levels + 1, d), dtype=conv.dtype)
    out["embed.kind"] = np.zeros((4, d), dtype=conv.dtype)
    cls = take("visual.class_embedding", (d,))
    out["embed.readout"] = np.tile(cls, (levels + 1, 1))

    for i in range(arch.blocks):
        src = f"visual.transformer.resblocks.{i}"
        dst = f"block.{i}"
        out[f"{dst}.ln1.gain"] = take(f"{src}.ln_1.weight", (d,))
        out[f"{dst}.ln1.bias"] = take(f"{src}.ln_1.bias", (d,))
        in_proj = take(f"{src}.attn.in_proj_weight", (3 * d, d))
        in_bias = take(f"{src}.attn.in_proj_bias", (3 * d,))
        out[f"{dst}.attn.wq"] = in_proj[0:d].T
        out[f"{dst}.attn.wk"] = in_proj[d : 2 * d].T
        out[f"{dst}.attn.wv"] = in_proj[2 * d : 3 * d].T
        out[f"{dst}.attn.bq"] = in_bias[0:d]
        out[f"{dst}.attn.bk"] = in_bias[d : 2 * d]
        out[f"{dst}.attn.bv"] = in_bias[2 * d : 3 * d]
        out[f"{dst}.attn.wo"] = take(f"{src}.attn.out_proj.weight", (d, d)).T
        out[f"{dst}.attn.bo"] = take(f"{src}.attn.out_proj.bias", (d,))
        out[f"{dst}.ln2.gain"] = take(f"{src}.ln_2.weight", (d,))
        out[f"{dst}.ln2.bias"] = take(f"{src}.ln_2.bias", (d,))
        rd = arch.mlp_ratio * d
        out[f"{dst}.mlp.w1"] = take(f"{src}.mlp.c_fc.weight", (rd, d)).T
        out[f"{dst}.mlp.b1"] = take(f"{src}.mlp.c_fc.bias", (rd,))
        out[f"{dst}.mlp.w2"] = take(f"{src}.mlp.c_proj.weight", (d, rd)).T
        out[f"{dst}.mlp.b2"] = take(f"{src}.mlp.c_proj.bias", (d,))

    out["final_norm.gain"] = take("visual.ln_post.weight", (d,))
    out["final_norm.bias"] = take("visual.ln_post.bias", (d,))
    out["readout.weight"] = take("visual.proj", (d, arch.out_dim))
    out["readout.bias"] = np.zeros(arch.out_dim, dtype=conv.dtype)
    return out, report
