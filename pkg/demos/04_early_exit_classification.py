"""Early-exit zero-shot classification: the gate decides per image how many
wavelet levels are worth paying for."""

import numpy as np

from wavetok import GateConfig, classify_progressive, gen_synthetic, gen_synthetic_image
from wavetok.encoder import encode_progressive
from wavetok.inference import EmbeddingBank
from wavetok.tokenizer import build_token_plan
from wavetok.wavelet import decompose, rgb_to_ycbcr

params, bank = gen_synthetic(seed=11)
images = [gen_synthetic_image(seed=100 + i, height=64, width=64) for i in range(4)]
print(f"bank: {bank.num_classes} classes, temperature {bank.temperature}")

# Threshold extremes bracket the compute budget: 0 always stops at the
# coarse level, an unreachable threshold always pays for every token.
for theta in (0.0, np.inf):
    gate = GateConfig(kind="margin", threshold=theta)
    tr = classify_progressive(images[0], params, bank, gate)
    print(f"theta={theta}: exit level {tr.exit_level}, {tr.tokens_processed} tokens, "
          f"{tr.macs_cached / 1e6:.2f} MMACs cached / {tr.macs_naive / 1e6:.2f} naive")

# Now a bank that is genuinely ambiguous at the coarse level: class 0 points
# along the image's own final readout, class 1 is its mirror about the coarse
# readout. Both classes tie exactly at level 0; only refinement separates them.
plan = build_token_plan(64, 64, params.patch, params.levels)
pyr = decompose(rgb_to_ycbcr(images[0]), params.levels, dtype=params.dtype)
readouts = encode_progressive(pyr, plan, params).readouts.astype(np.float64)
v0, vL = readouts[0], readouts[-1]
t1 = vL / np.linalg.norm(vL)
c = float(v0 @ t1) / np.linalg.norm(v0)
w = v0 / np.linalg.norm(v0) - c * t1
w /= np.linalg.norm(w)
t2 = (2 * c * c - 1.0) * t1 + 2.0 * c * np.sqrt(1.0 - c * c) * w
hard_bank = EmbeddingBank(
    embeddings=np.stack([t1, t2]), labels=("target", "decoy"), temperature=100.0
)

gate = GateConfig(kind="margin", threshold=1e-6, score_space="similarity")
trace = classify_progressive(images[0], params, hard_bank, gate)
print(f"\nambiguous 2-class bank, tiny margin threshold in similarity space:")
for rec in trace.levels:
    print(f"  level {rec.level}: margin {rec.gate_value:.6f}, exited={rec.exited}")
print(f"refined to level {trace.exit_level}, predicted '{trace.label}' "
      f"after {trace.tokens_processed} tokens")
