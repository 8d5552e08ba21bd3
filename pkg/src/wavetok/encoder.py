"""Pre-norm transformer encoder with cross-level causal masking and KV caching.

A query from token group s may attend to keys of groups <= s: bidirectional
inside a group, causal across groups. Because the sequence is ordered
coarse-to-fine, the allowed key set of any query is a prefix, which is what
makes incremental forward passes exact: each step computes queries only for
the new group against cached keys/values plus its own.

Caches store the post-projection K and V of every block, so a finished group
is never touched again; this is the contract the compute model prices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from . import numerics
from .errors import DimensionError, SequencingError
from .tokenizer import TokenPlan, TokenSequence, embed_group

if TYPE_CHECKING:  # pragma: no cover
    from .wavelet import SubbandPyramid


@dataclass(frozen=True)
class BlockParams:
    """Weights of one pre-norm block: LN -> attention -> LN -> MLP."""

    ln1_gain: np.ndarray
    ln1_bias: np.ndarray
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    bq: np.ndarray
    bk: np.ndarray
    bv: np.ndarray
    bo: np.ndarray
    ln2_gain: np.ndarray
    ln2_bias: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray


@dataclass(frozen=True)
class ModelParams:
    """All encoder weights in one immutable container."""

    dim: int
    blocks: int
    heads: int
    mlp_ratio: int
    patch: int
    levels: int
    out_dim: int
    proj_weight: np.ndarray  # (4, 3P^2, d) per subband kind
    proj_bias: np.ndarray  # (4, d)
    level_embed: np.ndarray  # (L+1, d) per group
    kind_embed: np.ndarray  # (4, d)
    readout_embed: np.ndarray  # (L+1, d)
    block_params: tuple[BlockParams, ...]
    final_gain: np.ndarray
    final_bias: np.ndarray
    readout_weight: np.ndarray  # (d, d_out)
    readout_bias: np.ndarray  # (d_out,)

    @property
    def dtype(self) -> np.dtype:
        return self.readout_weight.dtype

    def validate(self) -> None:
        """Check every shape against the configured dims; raise on mismatch."""
        d, p, lv = self.dim, self.patch, self.levels
        if d % self.heads:
            raise DimensionError(f"dim {d} not divisible by heads {self.heads}")
        expect = {
            "proj_weight": (4, 3 * p * p, d),
            "proj_bias": (4, d),
            "level_embed": (lv + 1, d),
            "kind_embed": (4, d),
            "readout_embed": (lv + 1, d),
            "final_gain": (d,),
            "final_bias": (d,),
            "readout_weight": (d, self.out_dim),
            "readout_bias": (self.out_dim,),
        }
        for name, shape in expect.items():
            got = getattr(self, name).shape
            if got != shape:
                raise DimensionError(f"{name}: expected {shape}, got {got}")
        if len(self.block_params) != self.blocks:
            raise DimensionError(
                f"expected {self.blocks} blocks, got {len(self.block_params)}"
            )
        rd = self.mlp_ratio * d
        block_expect = {
            "ln1_gain": (d,), "ln1_bias": (d,),
            "wq": (d, d), "wk": (d, d), "wv": (d, d), "wo": (d, d),
            "bq": (d,), "bk": (d,), "bv": (d,), "bo": (d,),
            "ln2_gain": (d,), "ln2_bias": (d,),
            "w1": (d, rd), "b1": (rd,), "w2": (rd, d), "b2": (d,),
        }
        for i, blk in enumerate(self.block_params):
            for name, shape in block_expect.items():
                got = getattr(blk, name).shape
                if got != shape:
                    raise DimensionError(
                        f"block {i} {name}: expected {shape}, got {got}"
                    )


@dataclass
class KVCache:
    """Per-block accumulated key/value rows plus their group ids.

    Single-writer: one cache belongs to one in-flight image.
    """

    keys: list[np.ndarray]
    values: list[np.ndarray]
    group_ids: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @classmethod
    def empty(cls, params: ModelParams) -> "KVCache":
        zero = np.empty((0, params.dim), dtype=params.dtype)
        return cls(
            keys=[zero.copy() for _ in range(params.blocks)],
            values=[zero.copy() for _ in range(params.blocks)],
        )

    @property
    def n_cached(self) -> int:
        return self.keys[0].shape[0] if self.keys else 0


def attention_allowed(q_group: int, k_group: int) -> bool:
    """Cross-level causality: keys may be at most as fine as the query."""
    return k_group <= q_group


def level_mask(group_ids: np.ndarray) -> np.ndarray:
    """Boolean (n, n) mask, entry (q, k) True iff attention is allowed."""
    g = np.asarray(group_ids)
    return g[None, :] <= g[:, None]


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    n, d = x.shape
    return x.reshape(n, heads, d // heads).transpose(1, 0, 2)  # (h, n, dh)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    h, n, dh = x.shape
    return x.transpose(1, 0, 2).reshape(n, h * dh)


def attention(
    q: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    heads: int,
    allowed: np.ndarray | None = None,
    with_probs: bool = False,
):
    """Multi-head scaled dot-product attention over row-major (n, d) operands.

    ``allowed`` is an optional (n_q, n_k) boolean mask; masked attention
    weights are exactly zero. Returns the merged head output, and the
    (h, n_q, n_k) probability tensor when ``with_probs`` is set.
    """
    dh = q.shape[1] // heads
    qh = _split_heads(q, heads)
    kh = _split_heads(k, heads)
    vh = _split_heads(v, heads)
    scale = 1.0 / np.sqrt(np.asarray(dh, dtype=q.dtype))
    scores = (qh * scale) @ kh.transpose(0, 2, 1)  # (h, n_q, n_k)
    mask = None if allowed is None else allowed[None, :, :]
    probs = numerics.softmax(scores, mask=mask, axis=-1)
    out = _merge_heads(probs @ vh)
    return (out, probs) if with_probs else (out, None)


def _block_forward(
    hidden: np.ndarray,
    blk: BlockParams,
    params: ModelParams,
    k_ctx: np.ndarray | None,
    v_ctx: np.ndarray | None,
    allowed: np.ndarray | None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One pre-norm block over ``hidden``; keys/values are context + own rows."""
    h_norm = numerics.layernorm(hidden, blk.ln1_gain, blk.ln1_bias)
    q = h_norm @ blk.wq + blk.bq
    k = h_norm @ blk.wk + blk.bk
    v = h_norm @ blk.wv + blk.bv
    k_all = k if k_ctx is None else np.concatenate([k_ctx, k], axis=0)
    v_all = v if v_ctx is None else np.concatenate([v_ctx, v], axis=0)
    attn, _ = attention(q, k_all, v_all, params.heads, allowed=allowed)
    hidden = hidden + attn @ blk.wo + blk.bo
    h2 = numerics.layernorm(hidden, blk.ln2_gain, blk.ln2_bias)
    hidden = hidden + numerics.gelu(h2 @ blk.w1 + blk.b1) @ blk.w2 + blk.b2
    return hidden, k, v


def _readout(hidden_row: np.ndarray, params: ModelParams) -> np.ndarray:
    normed = numerics.layernorm(hidden_row, params.final_gain, params.final_bias)
    return normed @ params.readout_weight + params.readout_bias


def forward_step(
    new_embeddings: np.ndarray,
    group_id: int,
    cache: KVCache,
    params: ModelParams,
    readout_index: int = 0,
) -> tuple[np.ndarray, KVCache, np.ndarray]:
    """Incremental pass over one new group, attending to the cache and itself.

    Queries exist only for the new rows; every block's K/V for those rows is
    appended to the cache in place. Returns (new hidden states, cache, the
    group's readout vector).
    """
    x = np.asarray(new_embeddings, dtype=params.dtype)
    if x.ndim != 2 or x.shape[1] != params.dim:
        raise DimensionError(f"expected (m, {params.dim}) embeddings, got {x.shape}")
    if cache.group_ids.size and cache.group_ids.max() >= group_id:
        raise SequencingError(
            f"group {group_id} submitted after group {int(cache.group_ids.max())}; "
            "groups must arrive coarse-to-fine, once each"
        )
    hidden = x
    for b, blk in enumerate(params.block_params):
        hidden, k_new, v_new = _block_forward(
            hidden, blk, params, cache.keys[b], cache.values[b], allowed=None
        )
        cache.keys[b] = np.concatenate([cache.keys[b], k_new], axis=0)
        cache.values[b] = np.concatenate([cache.values[b], v_new], axis=0)
    cache.group_ids = np.concatenate(
        [cache.group_ids, np.full(x.shape[0], group_id, dtype=np.int64)]
    )
    readout = _readout(hidden[readout_index], params)
    return hidden, cache, readout


@dataclass
class FullEncodeResult:
    hidden: np.ndarray  # (n, d) final block outputs
    readouts: np.ndarray  # (L+1, d_out)


def encode_full_masked(sequence: TokenSequence, params: ModelParams) -> FullEncodeResult:
    """Single pass over the whole sequence under the full cross-level mask.

    This is the equivalence oracle for the progressive path and the cost
    model's "naive forward" reference.
    """
    x = np.asarray(sequence.embeddings, dtype=params.dtype)
    if x.ndim != 2 or x.shape[1] != params.dim:
        raise DimensionError(f"expected (n, {params.dim}) embeddings, got {x.shape}")
    allowed = level_mask(sequence.group_ids)
    hidden = x
    for blk in params.block_params:
        hidden, _, _ = _block_forward(hidden, blk, params, None, None, allowed=allowed)
    positions = sequence.plan.readout_positions()
    readouts = np.stack([_readout(hidden[p], params) for p in positions])
    return FullEncodeResult(hidden=hidden, readouts=readouts)


@dataclass
class ProgressiveResult:
    readouts: np.ndarray  # (upto_s+1, d_out)
    hidden: np.ndarray  # (n_processed, d) concatenated per-group finals
    cache: KVCache


def encode_progressive(
    pyramid: "SubbandPyramid",
    plan: TokenPlan,
    params: ModelParams,
    upto_s: int | None = None,
) -> ProgressiveResult:
    """Embed and forward groups 0..upto_s one at a time, reusing the cache."""
    upto = plan.levels if upto_s is None else upto_s
    if not 0 <= upto <= plan.levels:
        raise ValueError(f"upto_s {upto} outside 0..{plan.levels}")
    cache = KVCache.empty(params)
    readouts, hidden_parts = [], []
    for s in range(upto + 1):
        emb = embed_group(pyramid, plan, s, params)
        hidden, cache, v_s = forward_step(
            emb, s, cache, params, readout_index=plan.groups[s].readout_index
        )
        readouts.append(v_s)
        hidden_parts.append(hidden)
    return ProgressiveResult(
        readouts=np.stack(readouts),
        hidden=np.concatenate(hidden_parts, axis=0),
        cache=cache,
    )
