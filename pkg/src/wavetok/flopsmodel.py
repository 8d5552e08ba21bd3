"""Analytic multiply-accumulate accounting for full and KV-cached forwards.

Convention: 1 MAC = 1 reported FLOP, the only convention under which the
usual ~17 G figure for a 197-token ViT-B/16 image tower is reachable.
Elementwise work (norms, softmax, activations) is excluded by default and
available behind a toggle; the acceptance checks keep it off. Text-tower
cost is out of scope throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigurationError

GIGA = 1e9


@dataclass(frozen=True)
class CostConfig:
    dim: int
    blocks: int
    heads: int
    mlp_ratio: int
    patch_input_dim: int  # 3 * P^2
    out_dim: int
    include_elementwise: bool = False

    @classmethod
    def from_model(cls, params) -> "CostConfig":
        return cls(
            dim=params.dim,
            blocks=params.blocks,
            heads=params.heads,
            mlp_ratio=params.mlp_ratio,
            patch_input_dim=3 * params.patch * params.patch,
            out_dim=params.out_dim,
        )


#: CLIP-style ViT-B/16 image tower.
VIT_B16 = CostConfig(
    dim=768, blocks=12, heads=12, mlp_ratio=4, patch_input_dim=768, out_dim=512
)

PRESETS = {"vit-b16": VIT_B16}


def _block_terms(n_new: int, n_total: int, cfg: CostConfig) -> tuple[int, int, int]:
    """(projections, attention, mlp) MACs of one block for n_new query rows."""
    d = cfg.dim
    proj = 4 * n_new * d * d  # Q, K, V, output
    attn = 2 * n_new * n_total * d  # scores + weighted values
    mlp = 2 * n_new * d * (cfg.mlp_ratio * d)
    return proj, attn, mlp


def _elementwise_estimate(n_new: int, n_total: int, cfg: CostConfig) -> int:
    """Rough per-image op count for norms/softmax/GELU/residuals (toggle only)."""
    d = cfg.dim
    per_block = (
        2 * 5 * n_new * d  # two layernorms, ~5 ops per element
        + 4 * cfg.heads * n_new * (n_total // cfg.heads) * cfg.heads  # softmax ~4/score
        + 8 * n_new * cfg.mlp_ratio * d  # gelu ~8/element
        + 2 * n_new * d  # residual adds
    )
    return cfg.blocks * per_block


def block_macs_full(n_tokens: int, cfg: CostConfig) -> int:
    """Total MACs of one full forward over ``n_tokens``: B blocks + embed + readout."""
    if n_tokens < 1:
        raise ConfigurationError(f"n_tokens must be >= 1, got {n_tokens}")
    proj, attn, mlp = _block_terms(n_tokens, n_tokens, cfg)
    total = cfg.blocks * (proj + attn + mlp)
    total += n_tokens * cfg.patch_input_dim * cfg.dim  # patch embedding
    total += cfg.dim * cfg.out_dim  # one readout projection
    if cfg.include_elementwise:
        total += _elementwise_estimate(n_tokens, n_tokens, cfg)
    return total


def step_macs_cached(n_new: int, n_total: int, cfg: CostConfig) -> int:
    """MACs of one incremental step: queries only for the n_new rows.

    Keys/values of earlier tokens come from the cache, so the quadratic term
    shrinks to n_new * n_total. Embedding is paid for the new rows only.
    """
    if n_new > n_total:
        raise ConfigurationError(f"n_new {n_new} exceeds n_total {n_total}")
    if n_new < 1:
        raise ConfigurationError(f"n_new must be >= 1, got {n_new}")
    proj, attn, mlp = _block_terms(n_new, n_total, cfg)
    total = cfg.blocks * (proj + attn + mlp)
    total += n_new * cfg.patch_input_dim * cfg.dim
    total += cfg.dim * cfg.out_dim
    if cfg.include_elementwise:
        total += _elementwise_estimate(n_new, n_total, cfg)
    return total


@dataclass(frozen=True)
class StepCost:
    """Cost of one refinement step, cached path, with the naive re-forward beside it."""

    step: int
    n_new: int
    n_total: int
    embed: int
    projections: int
    attention: int
    mlp: int
    readout: int
    cached: int  # step_macs_cached(n_new, n_total)
    naive: int  # block_macs_full(n_total): re-encode everything
    delta: int  # naive - cached


@dataclass(frozen=True)
class CostReport:
    steps: tuple[StepCost, ...]
    cached_cumulative: tuple[int, ...]
    naive_cumulative: tuple[int, ...]

    @property
    def cached_total(self) -> int:
        return self.cached_cumulative[-1]

    @property
    def naive_total(self) -> int:
        return self.naive_cumulative[-1]

    @property
    def overhead(self) -> float:
        """Fraction of the naive total that caching avoids: (naive - cached) / naive."""
        return (self.naive_total - self.cached_total) / self.naive_total


def _cumulative_counts(plan_or_counts) -> list[int]:
    counts = getattr(plan_or_counts, "cumulative_counts", plan_or_counts)
    counts = list(counts)
    if not counts or any(b <= a for a, b in zip(counts, counts[1:])):
        raise ConfigurationError(f"cumulative counts must be increasing, got {counts}")
    return counts


def progressive_cost(plan_or_counts, exit_step: int, cfg: CostConfig) -> CostReport:
    """Per-step cached vs naive MACs for a schedule, up to ``exit_step``.

    Accepts a TokenPlan or a plain increasing sequence of cumulative token
    counts (one per step), so published count conventions can be priced
    directly.
    """
    counts = _cumulative_counts(plan_or_counts)
    if not 0 <= exit_step < len(counts):
        raise ConfigurationError(
            f"exit_step {exit_step} outside 0..{len(counts) - 1}"
        )
    steps, cached_cum, naive_cum = [], [], []
    cached_running = naive_running = 0
    prev = 0
    for s in range(exit_step + 1):
        n_total = counts[s]
        n_new = n_total - prev
        prev = n_total
        proj, attn, mlp = _block_terms(n_new, n_total, cfg)
        embed = n_new * cfg.patch_input_dim * cfg.dim
        readout = cfg.dim * cfg.out_dim
        cached = step_macs_cached(n_new, n_total, cfg)
        naive = block_macs_full(n_total, cfg)
        cached_running += cached
        naive_running += naive
        steps.append(
            StepCost(
                step=s,
                n_new=n_new,
                n_total=n_total,
                embed=embed,
                projections=cfg.blocks * proj,
                attention=cfg.blocks * attn,
                mlp=cfg.blocks * mlp,
                readout=readout,
                cached=cached,
                naive=naive,
                delta=naive - cached,
            )
        )
        cached_cum.append(cached_running)
        naive_cum.append(naive_running)
    return CostReport(
        steps=tuple(steps),
        cached_cumulative=tuple(cached_cum),
        naive_cumulative=tuple(naive_cum),
    )


@dataclass(frozen=True)
class ExpectedCost:
    macs: float
    tokens: float


def expected_cost(
    exit_fractions: Sequence[float], plan_or_counts, cfg: CostConfig
) -> ExpectedCost:
    """Expectation over exit levels of cached cost and cumulative token count."""
    counts = _cumulative_counts(plan_or_counts)
    fractions = list(exit_fractions)
    if len(fractions) != len(counts):
        raise ConfigurationError(
            f"{len(fractions)} fractions for {len(counts)} exit levels"
        )
    if any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigurationError(f"fractions must be a distribution, got {fractions}")
    macs = tokens = 0.0
    for s, f in enumerate(fractions):
        if f == 0.0:
            continue
        macs += f * progressive_cost(counts, s, cfg).cached_total
        tokens += f * counts[s]
    return ExpectedCost(macs=macs, tokens=tokens)


def solve_two_point_fraction(
    expected_tokens: float, tokens_low: int, tokens_high: int
) -> float:
    """Fraction of samples at the high point given a two-point token expectation."""
    if not tokens_low < tokens_high:
        raise ConfigurationError("tokens_low must be below tokens_high")
    f = (expected_tokens - tokens_low) / (tokens_high - tokens_low)
    if not 0.0 <= f <= 1.0:
        raise ConfigurationError(
            f"expected tokens {expected_tokens} outside [{tokens_low}, {tokens_high}]"
        )
    return f
