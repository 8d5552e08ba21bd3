"""Checkpoint access: load torch state dicts, or fabricate synthetic ones.

Real CLIP-style checkpoints ship as torch state dicts with the visual tower
under `visual.*`. Those convert to engine manifests offline, but they carry
no tokenizer, so text banks cannot be produced from a raw state dict; that
path raises with an explanation.

Synthetic checkpoints exist so the whole pipeline is testable without
downloads: same tensor naming and shapes as the real thing, plus a marker
tensor and a hash-bucket bag-of-words text head. Their embeddings carry no
semantics; they are fixtures.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .errors import ExportError

SYNTHETIC_MARKER = "wavetok_synthetic_seed"
SYNTHETIC_HEADS = "wavetok_synthetic_heads"
SYNTHETIC_PREFIX = "synthetic:"


@dataclass(frozen=True)
class ArchSpec:
    name: str
    dim: int
    blocks: int
    heads: int
    patch: int
    out_dim: int
    mlp_ratio: int = 4
    text_width: int = 64
    text_buckets: int = 4096


ARCHS = {
    "vit-b-16": ArchSpec(
        name="vit-b-16", dim=768, blocks=12, heads=12, patch=16, out_dim=512,
        text_width=512, text_buckets=4096,
    ),
    "small": ArchSpec(
        name="small", dim=32, blocks=2, heads=4, patch=8, out_dim=16,
        text_width=16, text_buckets=257,
    ),
}


def make_synthetic_state(arch: ArchSpec, seed: int) -> dict[str, np.ndarray]:
    """A CLIP-shaped random state dict, deterministic in (arch, seed)."""
    rng = np.random.RandomState(seed)

    def u(*shape):
        return rng.uniform(-0.02, 0.02, size=shape).astype(np.float32)

    d, p = arch.dim, arch.patch
    grid = 224 // p
    state: dict[str, np.ndarray] = {
        "visual.class_embedding": u(d),
        "visual.conv1.weight": u(d, 3, p, p),
        "visual.positional_embedding": u(grid * grid + 1, d),
        "visual.ln_pre.weight": u(d),
        "visual.ln_pre.bias": u(d),
    }
    for i in range(arch.blocks):
        pre = f"visual.transformer.resblocks.{i}"
        state[f"{pre}.ln_1.weight"] = u(d)
        state[f"{pre}.ln_1.bias"] = u(d)
        state[f"{pre}.attn.in_proj_weight"] = u(3 * d, d)
        state[f"{pre}.attn.in_proj_bias"] = u(3 * d)
        state[f"{pre}.attn.out_proj.weight"] = u(d, d)
        state[f"{pre}.attn.out_proj.bias"] = u(d)
        state[f"{pre}.ln_2.weight"] = u(d)
        state[f"{pre}.ln_2.bias"] = u(d)
        state[f"{pre}.mlp.c_fc.weight"] = u(arch.mlp_ratio * d, d)
        state[f"{pre}.mlp.c_fc.bias"] = u(arch.mlp_ratio * d)
        state[f"{pre}.mlp.c_proj.weight"] = u(d, arch.mlp_ratio * d)
        state[f"{pre}.mlp.c_proj.bias"] = u(d)
    state["visual.ln_post.weight"] = u(d)
    state["visual.ln_post.bias"] = u(d)
    state["visual.proj"] = u(d, arch.out_dim)
    state["logit_scale"] = np.float32(np.log(100.0)).reshape(())
    state["token_embedding.weight"] = rng.uniform(
        -0.5, 0.5, size=(arch.text_buckets, arch.text_width)
    ).astype(np.float32)
    state["text_projection"] = u(arch.text_width, arch.out_dim)
    state[SYNTHETIC_MARKER] = np.array(seed, dtype=np.int64)
    state[SYNTHETIC_HEADS] = np.array(arch.heads, dtype=np.int64)
    return state


def save_synthetic_checkpoint(path: Path | str, arch_name: str, seed: int) -> Path:
    """Materialize a synthetic checkpoint as a torch-saved state dict."""
    arch = ARCHS[arch_name]
    state = {k: torch.from_numpy(np.asarray(v)) for k, v in make_synthetic_state(arch, seed).items()}
    path = Path(path)
    torch.save(state, path)
    return path


def _token_buckets(prompt: str, buckets: int) -> list[int]:
    words = [w for w in "".join(c if c.isalnum() else " " for c in prompt.lower()).split() if w]
    return [
        int.from_bytes(hashlib.md5(w.encode()).digest()[:8], "little") % buckets
        for w in words
    ]


class CheckpointBackend:
    """State-dict access plus (for synthetic checkpoints) text embedding."""

    def __init__(self, state: dict[str, np.ndarray], source: str, sha256: str):
        self.state = state
        self.source = source
        self.sha256 = sha256

    @property
    def is_synthetic(self) -> bool:
        return SYNTHETIC_MARKER in self.state

    def heads_hint(self) -> int | None:
        """Head count when the checkpoint records one (synthetic fixtures do)."""
        if SYNTHETIC_HEADS in self.state:
            return int(np.asarray(self.state[SYNTHETIC_HEADS]))
        return None

    def logit_scale(self) -> float:
        if "logit_scale" not in self.state:
            raise ExportError(f"{self.source}: checkpoint has no logit_scale")
        return float(np.exp(np.asarray(self.state["logit_scale"], dtype=np.float64)))

    def text_embed(self, prompts: list[str]) -> np.ndarray:
        """One embedding row per prompt. Synthetic checkpoints only."""
        if not self.is_synthetic:
            raise ExportError(
                f"{self.source}: raw state dicts carry no tokenizer, so text "
                "banks cannot be exported from them; use a synthetic: "
                "checkpoint or precompute embeddings with the source runtime"
            )
        table = np.asarray(self.state["token_embedding.weight"], dtype=np.float64)
        proj = np.asarray(self.state["text_projection"], dtype=np.float64)
        rows = []
        for prompt in prompts:
            ids = _token_buckets(prompt, table.shape[0])
            if not ids:
                raise ExportError(f"tokenizer produced no tokens for {prompt!r}")
            rows.append(table[ids].mean(axis=0) @ proj)
        return np.stack(rows)


def resolve_checkpoint(spec: str) -> CheckpointBackend:
    """`synthetic:<arch>[?seed=N]`, or a path to a torch state dict."""
    if spec.startswith(SYNTHETIC_PREFIX):
        body = spec[len(SYNTHETIC_PREFIX):]
        arch_name, _, query = body.partition("?")
        if arch_name not in ARCHS:
            raise ExportError(
                f"unknown synthetic arch {arch_name!r}; choose from {sorted(ARCHS)}"
            )
        seed = 0
        if query:
            key, _, value = query.partition("=")
            if key != "seed" or not value.lstrip("-").isdigit():
                raise ExportError(f"bad synthetic checkpoint query {query!r}")
            seed = int(value)
        state = make_synthetic_state(ARCHS[arch_name], seed)
        digest = hashlib.sha256(spec.encode()).hexdigest()
        return CheckpointBackend(state, source=spec, sha256=digest)

    path = Path(spec)
    if not path.exists():
        raise ExportError(f"checkpoint not found: {spec}")
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    try:
        loaded = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise ExportError(f"cannot load checkpoint {spec}: {exc}") from exc
    if isinstance(loaded, dict) and "state_dict" in loaded:
        loaded = loaded["state_dict"]
    if not isinstance(loaded, dict):
        raise ExportError(f"{spec}: expected a state dict, got {type(loaded).__name__}")
    state = {
        k: v.detach().cpu().numpy() if isinstance(v, torch.Tensor) else np.asarray(v)
        for k, v in loaded.items()
    }
    return CheckpointBackend(state, source=str(path), sha256=digest)
