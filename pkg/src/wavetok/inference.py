"""Zero-shot scoring, confidence gating, and the progressive inference loop.

Prediction is always the argmax of cosine similarity against the class bank
(lowest index wins ties). Gates decide only whether to stop: the margin gate
fires when top1 - top2 reaches its threshold, the probability gate when the
max softmax probability exceeds it. Both default to probability space
(softmax over temperature-scaled similarities); similarity space is
available. At the last level the result is returned unconditionally.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import numerics
from .encoder import KVCache, ModelParams, forward_step
from .errors import ConfigurationError, NumericError
from .flopsmodel import CostConfig, progressive_cost
from .tokenizer import TokenPlan, build_token_plan, embed_group
from .wavelet import decompose, rgb_to_ycbcr

TOP_K = 5


@dataclass(frozen=True)
class EmbeddingBank:
    """Unit-normalized class embeddings with labels and a softmax temperature."""

    embeddings: np.ndarray  # (M, d_out)
    labels: tuple[str, ...]
    temperature: float

    def __post_init__(self):
        if self.embeddings.ndim != 2 or self.embeddings.shape[0] < 2:
            raise ConfigurationError("bank needs at least 2 class embeddings")
        if len(self.labels) != self.embeddings.shape[0]:
            raise ConfigurationError(
                f"{len(self.labels)} labels for {self.embeddings.shape[0]} embeddings"
            )
        if self.temperature <= 0:
            raise ConfigurationError(f"temperature must be > 0, got {self.temperature}")
        norms = numerics.l2_norm(self.embeddings)
        if np.any(np.abs(norms - 1.0) > 1e-5):
            raise ConfigurationError("bank rows must be unit-normalized on load")

    @property
    def num_classes(self) -> int:
        return self.embeddings.shape[0]


@dataclass(frozen=True)
class GateConfig:
    """Exit rule: kind, threshold, threshold mode, and score space.

    ``per_class`` mode sets the effective threshold to factor * num_classes,
    exposing the class-relative knob verbatim; for probability-space margins
    and many classes that product exceeds 1 and simply never exits early, so
    treat the mode as experimental.
    """

    kind: str = "margin"  # "margin" | "prob"
    threshold: float = 0.0
    threshold_mode: str = "absolute"  # "absolute" | "per_class"
    per_class_factor: float = 0.0
    score_space: str = "probability"  # "probability" | "similarity"

    def __post_init__(self):
        if self.kind not in ("margin", "prob"):
            raise ConfigurationError(f"unknown gate kind {self.kind!r}")
        if self.threshold_mode not in ("absolute", "per_class"):
            raise ConfigurationError(f"unknown threshold mode {self.threshold_mode!r}")
        if self.score_space not in ("probability", "similarity"):
            raise ConfigurationError(f"unknown score space {self.score_space!r}")
        if self.threshold_mode == "absolute" and self.threshold < 0:
            raise ConfigurationError(f"threshold must be >= 0, got {self.threshold}")

    def effective_threshold(self, num_classes: int) -> float:
        if self.threshold_mode == "per_class":
            return self.per_class_factor * num_classes
        return self.threshold


def score(v: np.ndarray, bank: EmbeddingBank) -> np.ndarray:
    """Cosine similarity of a readout against every class embedding."""
    v = np.asarray(v, dtype=np.float64)
    norm = float(numerics.l2_norm(v))
    if norm == 0.0:
        raise NumericError("cannot score a zero-norm readout")
    return (v / norm) @ bank.embeddings.T.astype(np.float64)


def class_probabilities(similarities: np.ndarray, temperature: float) -> np.ndarray:
    """Softmax over temperature-scaled similarities."""
    return numerics.softmax_row(temperature * np.asarray(similarities, dtype=np.float64))


def top_two(values: np.ndarray) -> tuple[float, float]:
    part = np.partition(np.asarray(values, dtype=np.float64), -2)
    return float(part[-1]), float(part[-2])


def margin_exit(scores_in_space: np.ndarray, threshold: float) -> bool:
    """True iff top1 - top2 >= threshold. Ties exit only at threshold 0."""
    s1, s2 = top_two(scores_in_space)
    return s1 - s2 >= threshold


def prob_exit(probabilities: np.ndarray, threshold: float) -> bool:
    """True iff the max probability strictly exceeds the threshold."""
    return float(np.max(probabilities)) > threshold


@dataclass(frozen=True)
class LevelRecord:
    """What one refinement level saw: prediction, top scores, gate value."""

    level: int
    prediction: int
    top_scores: tuple[tuple[int, float], ...]  # (class index, similarity), top-k
    margin_similarity: float
    margin_probability: float
    max_probability: float
    gate_value: float
    exited: bool


@dataclass
class InferenceTrace:
    exit_level: int
    prediction: int
    label: str
    levels: tuple[LevelRecord, ...]
    tokens_processed: int
    macs_cached: int
    macs_naive: int

    def to_dict(self) -> dict:
        return {
            "exit_level": self.exit_level,
            "prediction": self.prediction,
            "label": self.label,
            "tokens_processed": self.tokens_processed,
            "macs_cached": self.macs_cached,
            "macs_naive": self.macs_naive,
            "levels": [
                {
                    "level": r.level,
                    "prediction": r.prediction,
                    "top_scores": [[i, s] for i, s in r.top_scores],
                    "margin_similarity": r.margin_similarity,
                    "margin_probability": r.margin_probability,
                    "max_probability": r.max_probability,
                    "gate_value": r.gate_value,
                    "exited": r.exited,
                }
                for r in self.levels
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _level_stats(v: np.ndarray, bank: EmbeddingBank) -> dict:
    sims = score(v, bank)
    probs = class_probabilities(sims, bank.temperature)
    s1, s2 = top_two(sims)
    p1, p2 = top_two(probs)
    order = np.argsort(-sims, kind="stable")[: min(TOP_K, sims.size)]
    return {
        "sims": sims,
        "probs": probs,
        "prediction": int(np.argmax(sims)),
        "margin_similarity": s1 - s2,
        "margin_probability": p1 - p2,
        "max_probability": p1,
    }


def _gate_fires(stats: dict, gate: GateConfig, theta_eff: float) -> tuple[bool, float]:
    if gate.kind == "margin":
        value = (
            stats["margin_probability"]
            if gate.score_space == "probability"
            else stats["margin_similarity"]
        )
        return value >= theta_eff, value
    value = (
        stats["max_probability"]
        if gate.score_space == "probability"
        else float(np.max(stats["sims"]))
    )
    return value > theta_eff, value


def _plan_for(params: ModelParams, height: int, width: int) -> TokenPlan:
    return build_token_plan(height, width, params.patch, params.levels)


def classify_progressive(
    rgb_image: np.ndarray,
    params: ModelParams,
    bank: EmbeddingBank,
    gate: GateConfig,
    plan: TokenPlan | None = None,
) -> InferenceTrace:
    """Run the coarse-to-fine loop with early exit, reusing the KV cache.

    Refines until the gate fires or the final level is reached; the final
    level returns unconditionally. The trace records every level visited and
    the analytic cost of both the cached path actually taken and a naive
    re-encoding schedule of the same depth.
    """
    if params.out_dim != bank.embeddings.shape[1]:
        raise ConfigurationError(
            f"model out_dim {params.out_dim} != bank dim {bank.embeddings.shape[1]}"
        )
    ycbcr = rgb_to_ycbcr(rgb_image)
    if plan is None:
        plan = _plan_for(params, ycbcr.height, ycbcr.width)
    pyramid = decompose(ycbcr, params.levels, dtype=params.dtype)
    theta_eff = gate.effective_threshold(bank.num_classes)
    cache = KVCache.empty(params)
    records: list[LevelRecord] = []
    for s in range(plan.levels + 1):
        emb = embed_group(pyramid, plan, s, params)
        _, cache, v_s = forward_step(
            emb, s, cache, params, readout_index=plan.groups[s].readout_index
        )
        stats = _level_stats(v_s, bank)
        final_level = s == plan.levels
        fired, gate_value = _gate_fires(stats, gate, theta_eff)
        exited = fired or final_level
        records.append(
            LevelRecord(
                level=s,
                prediction=stats["prediction"],
                top_scores=tuple(
                    (int(i), float(stats["sims"][i]))
                    for i in np.argsort(-stats["sims"], kind="stable")[
                        : min(TOP_K, stats["sims"].size)
                    ]
                ),
                margin_similarity=stats["margin_similarity"],
                margin_probability=stats["margin_probability"],
                max_probability=stats["max_probability"],
                gate_value=gate_value,
                exited=exited,
            )
        )
        if exited:
            break
    exit_level = records[-1].level
    report = progressive_cost(plan, exit_level, CostConfig.from_model(params))
    return InferenceTrace(
        exit_level=exit_level,
        prediction=records[-1].prediction,
        label=bank.labels[records[-1].prediction],
        levels=tuple(records),
        tokens_processed=plan.cumulative_counts[exit_level],
        macs_cached=report.cached_total,
        macs_naive=report.naive_total,
    )


@dataclass(frozen=True)
class LevelScores:
    """All-level gate statistics of one image, for threshold sweeps."""

    predictions: tuple[int, ...]
    margins_similarity: tuple[float, ...]
    margins_probability: tuple[float, ...]
    max_probabilities: tuple[float, ...]
    max_similarities: tuple[float, ...]


def level_scores(
    rgb_image: np.ndarray,
    params: ModelParams,
    bank: EmbeddingBank,
    plan: TokenPlan | None = None,
) -> LevelScores:
    """Run every level once and collect the per-level statistics."""
    ycbcr = rgb_to_ycbcr(rgb_image)
    if plan is None:
        plan = _plan_for(params, ycbcr.height, ycbcr.width)
    pyramid = decompose(ycbcr, params.levels, dtype=params.dtype)
    cache = KVCache.empty(params)
    preds, m_sim, m_prob, p_max, s_max = [], [], [], [], []
    for s in range(plan.levels + 1):
        emb = embed_group(pyramid, plan, s, params)
        _, cache, v_s = forward_step(
            emb, s, cache, params, readout_index=plan.groups[s].readout_index
        )
        stats = _level_stats(v_s, bank)
        preds.append(stats["prediction"])
        m_sim.append(stats["margin_similarity"])
        m_prob.append(stats["margin_probability"])
        p_max.append(stats["max_probability"])
        s_max.append(float(np.max(stats["sims"])))
    return LevelScores(
        predictions=tuple(preds),
        margins_similarity=tuple(m_sim),
        margins_probability=tuple(m_prob),
        max_probabilities=tuple(p_max),
        max_similarities=tuple(s_max),
    )


def exit_level_for(
    scores_record: LevelScores, gate: GateConfig, theta_eff: float, levels: int
) -> int:
    """First level whose gate fires, else the final level."""
    for s in range(levels):
        if gate.kind == "margin":
            value = (
                scores_record.margins_probability[s]
                if gate.score_space == "probability"
                else scores_record.margins_similarity[s]
            )
            if value >= theta_eff:
                return s
        else:
            value = (
                scores_record.max_probabilities[s]
                if gate.score_space == "probability"
                else scores_record.max_similarities[s]
            )
            if value > theta_eff:
                return s
    return levels


@dataclass(frozen=True)
class SweepRow:
    theta: float
    mean_tokens: float
    mean_macs_cached: float
    mean_macs_naive: float
    agreement: float


def sweep(
    images: list[np.ndarray],
    params: ModelParams,
    bank: EmbeddingBank,
    gate_kind: str,
    thetas: list[float],
    labels: list[int] | None = None,
    score_space: str = "probability",
    plan: TokenPlan | None = None,
) -> list[SweepRow]:
    """Threshold sweep over an image set.

    Each image is encoded once to the final level; every threshold then reads
    its exit level off the recorded statistics. Agreement is measured against
    the final-level prediction unless labels are given. Aggregation follows
    the input order, so output is deterministic.
    """
    if not images:
        raise ConfigurationError("sweep needs at least one image")
    if labels is not None and len(labels) != len(images):
        raise ConfigurationError(f"{len(labels)} labels for {len(images)} images")
    gate = GateConfig(kind=gate_kind, threshold=0.0, score_space=score_space)
    if plan is None:
        ycbcr = rgb_to_ycbcr(images[0])
        plan = _plan_for(params, ycbcr.height, ycbcr.width)
    records = [level_scores(img, params, bank, plan=plan) for img in images]
    cfg = CostConfig.from_model(params)
    cost_at = [
        progressive_cost(plan, s, cfg) for s in range(plan.levels + 1)
    ]
    rows = []
    for theta in thetas:
        tokens = macs_c = macs_n = agree = 0.0
        for i, rec in enumerate(records):
            s = exit_level_for(rec, gate, theta, plan.levels)
            tokens += plan.cumulative_counts[s]
            macs_c += cost_at[s].cached_total
            macs_n += cost_at[s].naive_total
            reference = labels[i] if labels is not None else rec.predictions[-1]
            agree += 1.0 if rec.predictions[s] == reference else 0.0
        n = len(records)
        rows.append(
            SweepRow(
                theta=theta,
                mean_tokens=tokens / n,
                mean_macs_cached=macs_c / n,
                mean_macs_naive=macs_n / n,
                agreement=agree / n,
            )
        )
    return rows


SWEEP_CSV_HEADER = "theta,mean_tokens,mean_macs_cached,mean_macs_naive,agreement"


def sweep_rows_to_csv(rows: list[SweepRow]) -> str:
    lines = [SWEEP_CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.theta:.6g},{r.mean_tokens:.6f},{r.mean_macs_cached:.1f},"
            f"{r.mean_macs_naive:.1f},{r.agreement:.6f}"
        )
    return "\n".join(lines) + "\n"
