"""Coarse-to-fine vision transformer inference on wavelet subband tokens.

Pipeline: 2D Haar decomposition -> grouped token plan with per-level readout
tokens -> transformer encoder under a cross-level causal mask with KV-cached
incremental steps -> cosine scoring against a class embedding bank with
confidence-gated early exit -> analytic MAC accounting of the path taken.
"""

__version__ = "0.1.0"

from .distill import FitResult, distill_loss, distill_loss_grad, fit_projection
from .encoder import (
    KVCache,
    ModelParams,
    attention_allowed,
    encode_full_masked,
    encode_progressive,
    forward_step,
    level_mask,
)
from .flopsmodel import (
    VIT_B16,
    CostConfig,
    CostReport,
    block_macs_full,
    expected_cost,
    progressive_cost,
    step_macs_cached,
)
from .inference import (
    EmbeddingBank,
    GateConfig,
    InferenceTrace,
    classify_progressive,
    margin_exit,
    prob_exit,
    score,
    sweep,
)
from .modelio import (
    SyntheticSpec,
    gen_synthetic,
    gen_synthetic_image,
    load_manifest,
    load_ppm,
    save_manifest,
    save_ppm,
)
from .tokenizer import (
    TokenPlan,
    TokenSequence,
    build_token_plan,
    embed_tokens,
    patchify_subband,
    table1_counts,
    token_counts,
)
from .wavelet import (
    SubbandPyramid,
    YCbCrImage,
    decompose,
    dwt2_level,
    idwt2_level,
    reconstruct,
    rgb_to_ycbcr,
    ycbcr_to_rgb,
)

__all__ = [name for name in dir() if not name.startswith("_")]
