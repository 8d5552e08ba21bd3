"""Built-in invariant suite behind the `selfcheck` CLI subcommand.

Every check is deterministic in the seed and prints one PASS/FAIL line; the
suite exists so a deployment can verify the engine without pytest. Output
carries no timing or path information, so two runs with the same seed are
byte-identical.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import distill, encoder, flopsmodel, inference, modelio, numerics, tokenizer, wavelet


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str


def _desk_model(seed: int):
    return modelio.gen_synthetic(seed, modelio.SyntheticSpec())


def _random_image(seed: int, size: int = 64) -> np.ndarray:
    return modelio.gen_synthetic_image(seed, size, size)


def _check_wavelet_roundtrip(seed: int) -> CheckResult:
    worst = 0.0
    for dtype, tol in ((np.float32, 1e-5), (np.float64, 1e-12)):
        for i in range(5):
            img = _random_image(seed + i)
            ycbcr = wavelet.YCbCrImage.from_stack(img.astype(dtype))
            for levels in (1, 2, 3):
                recon = wavelet.reconstruct(wavelet.decompose(ycbcr, levels, dtype=dtype))
                err = float(np.abs(recon.stack() - img.astype(dtype)).max())
                worst = max(worst, err / tol)
    return CheckResult("wavelet-roundtrip", worst <= 1.0, f"worst err/tol {worst:.3e}")


def _check_wavelet_energy(seed: int) -> CheckResult:
    img = _random_image(seed + 17)
    ycbcr = wavelet.YCbCrImage.from_stack(img)
    pyr = wavelet.decompose(ycbcr, 3, dtype=np.float64)
    pixel_energy = float((img**2).sum())
    rel = abs(wavelet.coefficient_energy(pyr) - pixel_energy) / pixel_energy
    return CheckResult("wavelet-energy", rel <= 1e-5, f"rel err {rel:.3e}")


def _check_wavelet_constant(seed: int) -> CheckResult:
    c = 0.25
    ycbcr = wavelet.YCbCrImage.from_stack(np.full((3, 32, 32), c))
    pyr = wavelet.decompose(ycbcr, 3, dtype=np.float64)
    details_zero = all(
        float(np.abs(b).max()) == 0.0
        for bands in pyr.details
        for b in (bands.lh, bands.hl, bands.hh)
    )
    ll_ok = np.allclose(pyr.ll, (2**3) * c, atol=0)
    return CheckResult(
        "wavelet-constant", details_zero and ll_ok, f"details_zero={details_zero}"
    )


def _check_color_transform(seed: int) -> CheckResult:
    gray = wavelet.rgb_to_ycbcr(np.full((3, 2, 2), 0.6))
    red = wavelet.rgb_to_ycbcr(
        np.stack([np.ones((1, 1)), np.zeros((1, 1)), np.zeros((1, 1))])
    )
    ok = (
        abs(float(gray.y[0, 0]) - 0.6) < 1e-12
        and abs(float(gray.cb[0, 0])) < 1e-12
        and abs(float(red.y[0, 0]) - 0.299) < 1e-12
        and abs(float(red.cr[0, 0]) - 0.5) < 1e-12
    )
    return CheckResult("color-transform", ok, "gray and pure-red fixed points")


def _check_token_counts(seed: int) -> CheckResult:
    published = {
        (1, 1): 197,
        (2, 1): 50, (2, 2): 198,
        (3, 1): 13, (3, 2): 51, (3, 3): 199,
        (4, 1): 4, (4, 2): 14, (4, 3): 52, (4, 4): 200,
    }
    table_ok = all(
        tokenizer.table1_counts(196, lv, col) == val
        for (lv, col), val in published.items()
    )
    plan = tokenizer.build_token_plan(64, 64, 8, 2)
    partition_ok = sum(g.spatial_size for g in plan.groups) == 64
    counts_ok = all(
        plan.cumulative_counts[s] == tokenizer.token_counts(64, 64, 8, 2, s)
        for s in range(3)
    )
    ok = table_ok and partition_ok and counts_ok
    return CheckResult("token-counts", ok, f"table={table_ok} partition={partition_ok}")


def _check_kernels(seed: int) -> CheckResult:
    sm = numerics.softmax_row(np.array([0.0, np.log(3.0)]))
    mm = numerics.matmul(np.array([[1.0, 2], [3, 4]]), np.array([[5.0, 6], [7, 8]]))
    ok = (
        np.allclose(sm, [0.25, 0.75], atol=1e-12)
        and np.allclose(mm, [[19, 22], [43, 50]], atol=0)
        and abs(float(numerics.gelu(np.array(1.0))) - 0.8413447460685429) < 1e-12
    )
    return CheckResult("dense-kernels", ok, "softmax/matmul/gelu fixed points")


def _check_cached_vs_full(seed: int) -> CheckResult:
    params, _ = _desk_model(seed + 101)
    img = _random_image(seed + 102)
    ycbcr = wavelet.rgb_to_ycbcr(img)
    plan = tokenizer.build_token_plan(64, 64, params.patch, params.levels)
    pyr = wavelet.decompose(ycbcr, params.levels, dtype=params.dtype)
    seq = tokenizer.embed_tokens(pyr, plan, params)
    full = encoder.encode_full_masked(seq, params)
    prog = encoder.encode_progressive(pyr, plan, params)
    err = float(np.abs(full.hidden - prog.hidden).max())
    return CheckResult("cached-vs-full", err <= 1e-4, f"max abs diff {err:.3e}")


def _check_level_causality(seed: int) -> CheckResult:
    params, _ = _desk_model(seed + 201)
    img = _random_image(seed + 202)
    plan = tokenizer.build_token_plan(64, 64, params.patch, params.levels)
    pyr = wavelet.decompose(wavelet.rgb_to_ycbcr(img), params.levels, dtype=params.dtype)
    seq = tokenizer.embed_tokens(pyr, plan, params)
    base = encoder.encode_full_masked(seq, params)
    perturbed = tokenizer.TokenSequence(
        embeddings=seq.embeddings.copy(), group_ids=seq.group_ids, plan=plan
    )
    perturbed.embeddings[plan.group_slice(2)] = 0.0
    out = encoder.encode_full_masked(perturbed, params)
    ok = (
        base.readouts[0].tobytes() == out.readouts[0].tobytes()
        and base.readouts[1].tobytes() == out.readouts[1].tobytes()
    )
    return CheckResult("level-causality", ok, "coarse readouts bit-identical")


def _check_mask_soundness(seed: int) -> CheckResult:
    params, _ = _desk_model(seed + 301)
    rng = modelio.SplitMix64(seed + 302)
    n = 12
    gids = np.sort(rng.next_uint64(n) % np.uint64(3)).astype(np.int64)
    x = rng.uniform(n * params.dim, -1.0, 1.0).reshape(n, params.dim).astype(params.dtype)
    allowed = encoder.level_mask(gids)
    _, probs = encoder.attention(x, x, x, params.heads, allowed=allowed, with_probs=True)
    forbidden_mass = float(np.abs(probs[:, ~allowed]).max()) if (~allowed).any() else 0.0
    return CheckResult(
        "mask-soundness", forbidden_mass == 0.0, f"forbidden mass {forbidden_mass:.1e}"
    )


def _check_flops_baseline(seed: int) -> CheckResult:
    total = flopsmodel.block_macs_full(197, flopsmodel.VIT_B16) / flopsmodel.GIGA
    ok = abs(total - 16.87) <= 0.1 * 16.87
    return CheckResult("flops-baseline", ok, f"197-token total {total:.2f} G")


def _check_flops_overhead(seed: int) -> CheckResult:
    report = flopsmodel.progressive_cost([50, 198], 1, flopsmodel.VIT_B16)
    ok = 0.18 <= report.overhead <= 0.25
    return CheckResult("flops-overhead", ok, f"overhead {report.overhead:.3f}")


def _check_expected_cost(seed: int) -> CheckResult:
    targets = {71.93: 6.22, 89.0: 7.8, 160.0: 14.03}
    worst = 0.0
    for tokens, giga in targets.items():
        f = flopsmodel.solve_two_point_fraction(tokens, 50, 198)
        got = flopsmodel.expected_cost([1 - f, f], [50, 198], flopsmodel.VIT_B16)
        worst = max(worst, abs(got.macs / flopsmodel.GIGA - giga) / giga)
    return CheckResult("flops-expected", worst <= 0.05, f"worst rel err {worst:.3f}")


def _check_gates(seed: int) -> CheckResult:
    params, bank = _desk_model(seed + 401)
    img = _random_image(seed + 402)
    zero = inference.classify_progressive(
        img, params, bank, inference.GateConfig(kind="margin", threshold=0.0)
    )
    inf_gate = inference.classify_progressive(
        img, params, bank, inference.GateConfig(kind="margin", threshold=np.inf)
    )
    ok = zero.exit_level == 0 and inf_gate.exit_level == params.levels
    ok = ok and zero.tokens_processed == tokenizer.token_counts(64, 64, 8, 2, 0)
    return CheckResult(
        "gate-extremes", ok, f"exits {zero.exit_level}/{inf_gate.exit_level}"
    )


def _check_gate_monotonicity(seed: int) -> CheckResult:
    params, bank = _desk_model(seed + 501)
    images = [_random_image(seed + 600 + i) for i in range(8)]
    thetas = [0.0, 0.25, 0.5, 0.75, 1.0]
    gate = inference.GateConfig(kind="margin")
    plan = tokenizer.build_token_plan(64, 64, params.patch, params.levels)
    records = [inference.level_scores(img, params, bank, plan=plan) for img in images]
    ok = True
    for rec in records:
        exits = [
            inference.exit_level_for(rec, gate, th, params.levels) for th in thetas
        ]
        ok = ok and all(a <= b for a, b in zip(exits, exits[1:]))
    rows = inference.sweep(images, params, bank, "margin", thetas, plan=plan)
    means = [r.mean_tokens for r in rows]
    ok = ok and all(a <= b for a, b in zip(means, means[1:]))
    return CheckResult("gate-monotonicity", ok, f"mean tokens {means[0]:.1f}->{means[-1]:.1f}")


def _check_distill(seed: int) -> CheckResult:
    rng = modelio.SplitMix64(seed + 701)
    t = rng.uniform(8, -1.0, 1.0)
    zero_loss = distill.distill_loss(np.stack([t, t]), t)
    v = rng.uniform(8, -1.0, 1.0)
    grad = distill.distill_loss_grad(v, t)
    h = 1e-6
    fd = np.empty_like(grad)
    for i in range(v.size):
        vp, vm = v.copy(), v.copy()
        vp[i] += h
        vm[i] -= h
        fd[i] = (distill.distill_loss(vp, t) - distill.distill_loss(vm, t)) / (2 * h)
    rel = float(np.abs(grad - fd).max() / max(np.abs(fd).max(), 1e-12))
    ortho = abs(float(grad @ v))
    ok = zero_loss < 1e-12 and rel <= 1e-5 and ortho <= 1e-10
    return CheckResult("distill-math", ok, f"fd rel {rel:.2e} ortho {ortho:.1e}")


def _check_fit_projection(seed: int) -> CheckResult:
    hidden = np.array([[1.0, 0.5]])
    targets = np.array([[0.3, -0.7]])
    res = distill.fit_projection(hidden, targets, steps=100, learning_rate=0.1)
    decreasing = all(a > b for a, b in zip(res.history, res.history[1:]))
    return CheckResult(
        "fit-projection", decreasing and not res.diverged,
        f"loss {res.history[0]:.4f}->{res.history[-1]:.4f}",
    )


def _check_manifest_roundtrip(seed: int) -> CheckResult:
    params, bank = _desk_model(seed + 801)
    with tempfile.TemporaryDirectory() as tmp:
        mpath = Path(tmp) / "model.json"
        bpath = Path(tmp) / "bank.json"
        modelio.save_manifest(params, mpath)
        modelio.save_manifest(bank, bpath)
        params2 = modelio.load_manifest(mpath)
        bank2 = modelio.load_manifest(bpath)
        ok = (
            params2.readout_weight.tobytes() == params.readout_weight.tobytes()
            and bank2.embeddings.tobytes() == bank.embeddings.tobytes()
            and bank2.labels == bank.labels
        )
        modelio.save_manifest(params2, Path(tmp) / "model2.json")
        ok = ok and (Path(tmp) / "model2.bin").read_bytes() == (
            Path(tmp) / "model.bin"
        ).read_bytes()
    return CheckResult("manifest-roundtrip", ok, "bitwise save/load/save")


def _check_synthetic_determinism(seed: int) -> CheckResult:
    a_params, a_bank = _desk_model(seed)
    b_params, b_bank = _desk_model(seed)
    ok = (
        a_params.readout_weight.tobytes() == b_params.readout_weight.tobytes()
        and a_bank.embeddings.tobytes() == b_bank.embeddings.tobytes()
    )
    c_params, _ = _desk_model(seed + 1)
    ok = ok and a_params.readout_weight.tobytes() != c_params.readout_weight.tobytes()
    return CheckResult("synthetic-determinism", ok, "same seed same bytes")


CHECKS = (
    _check_wavelet_roundtrip,
    _check_wavelet_energy,
    _check_wavelet_constant,
    _check_color_transform,
    _check_token_counts,
    _check_kernels,
    _check_cached_vs_full,
    _check_level_causality,
    _check_mask_soundness,
    _check_flops_baseline,
    _check_flops_overhead,
    _check_expected_cost,
    _check_gates,
    _check_gate_monotonicity,
    _check_distill,
    _check_fit_projection,
    _check_manifest_roundtrip,
    _check_synthetic_determinism,
)


def run_selfcheck(seed: int = 7) -> list[CheckResult]:
    return [check(seed) for check in CHECKS]
