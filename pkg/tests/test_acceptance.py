"""Acceptance suite: one test per release criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Tolerances are pinned here and nowhere else.
"""

import subprocess
import sys
import time

import numpy as np
import pytest

from wavetok.distill import distill_loss, distill_loss_grad, fit_projection
from wavetok.encoder import encode_full_masked, encode_progressive
from wavetok.flopsmodel import (
    GIGA,
    VIT_B16,
    block_macs_full,
    expected_cost,
    progressive_cost,
    solve_two_point_fraction,
)
from wavetok.inference import GateConfig, exit_level_for, level_scores, sweep
from wavetok.modelio import SyntheticSpec, gen_synthetic, gen_synthetic_image
from wavetok.tokenizer import TokenSequence, build_token_plan, embed_tokens, table1_counts
from wavetok.wavelet import YCbCrImage, decompose, reconstruct, rgb_to_ycbcr

DESK = SyntheticSpec(
    dim=32, blocks=2, heads=4, mlp_ratio=4, patch=8, levels=2, out_dim=16, classes=8
)


def report(name: str, detail: str) -> None:
    print(f"ACCEPTANCE PASS - {name}: {detail}")


def test_wavelet_round_trip_100_images():
    start = time.monotonic()
    worst = {np.float32: 0.0, np.float64: 0.0}
    tol = {np.float32: 1e-5, np.float64: 1e-12}
    for i in range(100):
        img = gen_synthetic_image(10_000 + i, 64, 64)
        for dtype in (np.float32, np.float64):
            x = img.astype(dtype)
            for levels in (1, 2, 3):
                recon = reconstruct(decompose(YCbCrImage.from_stack(x), levels, dtype=dtype))
                err = float(np.abs(recon.stack() - x).max())
                worst[dtype] = max(worst[dtype], err)
                assert err <= tol[dtype], (i, dtype, levels, err)
    elapsed = time.monotonic() - start
    assert elapsed < 5.0, f"round-trip suite took {elapsed:.2f}s"
    report(
        "wavelet round-trip",
        f"100 images, L in {{1,2,3}}: worst f32 {worst[np.float32]:.2e} <= 1e-5, "
        f"worst f64 {worst[np.float64]:.2e} <= 1e-12, {elapsed:.2f}s < 5s",
    )


def test_table1_reproduction():
    published = {
        (1, 1): 197,
        (2, 1): 50, (2, 2): 198,
        (3, 1): 13, (3, 2): 51, (3, 3): 199,
        (4, 1): 4, (4, 2): 14, (4, 3): 52, (4, 4): 200,
    }
    for (levels, col), expected in published.items():
        assert table1_counts(196, levels, col) == expected
    report("count table reproduction", "all 10 published values exact")


def test_cached_equals_full_20_pairs():
    start = time.monotonic()
    plan = build_token_plan(64, 64, 8, 2)
    worst = {np.float32: 0.0, np.float64: 0.0}
    tol = {np.float32: 1e-4, np.float64: 1e-10}
    for i in range(20):
        for dtype in (np.float32, np.float64):
            params, _ = gen_synthetic(20_000 + i, DESK, dtype=dtype)
            img = gen_synthetic_image(21_000 + i, 64, 64)
            pyr = decompose(rgb_to_ycbcr(img), 2, dtype=dtype)
            full = encode_full_masked(embed_tokens(pyr, plan, params), params)
            prog = encode_progressive(pyr, plan, params)
            err = float(np.abs(full.hidden - prog.hidden).max())
            err = max(err, float(np.abs(full.readouts - prog.readouts).max()))
            worst[dtype] = max(worst[dtype], err)
            assert err <= tol[dtype], (i, dtype, err)
    elapsed = time.monotonic() - start
    assert elapsed < 30.0, f"equivalence suite took {elapsed:.2f}s"
    report(
        "cached == full equivalence",
        f"20 pairs: worst f32 {worst[np.float32]:.2e} <= 1e-4, "
        f"worst f64 {worst[np.float64]:.2e} <= 1e-10, {elapsed:.2f}s < 30s",
    )


def test_level_causality_50_trials():
    plan = build_token_plan(64, 64, 8, 2)
    trials = 0
    for m in range(10):
        params, _ = gen_synthetic(30_000 + m, DESK)
        img = gen_synthetic_image(31_000 + m, 64, 64)
        pyr = decompose(rgb_to_ycbcr(img), 2, dtype=params.dtype)
        seq = embed_tokens(pyr, plan, params)
        base = encode_full_masked(seq, params)
        rng = np.random.RandomState(32_000 + m)
        for _ in range(5):
            # perturb one token strictly finer than group 0 (and sometimes group 1)
            target_group = int(rng.randint(1, 3))
            sl = plan.group_slice(target_group)
            idx = int(rng.randint(sl.start, sl.stop))
            mutated = TokenSequence(
                embeddings=seq.embeddings.copy(), group_ids=seq.group_ids, plan=plan
            )
            mutated.embeddings[idx] += rng.randn(params.dim).astype(params.dtype)
            out = encode_full_masked(mutated, params)
            for s in range(target_group):
                assert base.readouts[s].tobytes() == out.readouts[s].tobytes()
            trials += 1
    assert trials == 50
    report("level causality", "50 trials, coarser readouts bit-identical")


def test_flops_baseline_vit_b16():
    total = block_macs_full(197, VIT_B16) / GIGA
    assert abs(total - 16.87) <= 0.10 * 16.87
    report("compute baseline", f"197 tokens -> {total:.2f} G, within 10% of 16.87 G")


def test_table2_compute_reproduction():
    published = {71.93: 6.22, 89.0: 7.8, 160.0: 14.03}
    details = []
    for tokens, giga in published.items():
        f = solve_two_point_fraction(tokens, 50, 198)
        got = expected_cost([1.0 - f, f], [50, 198], VIT_B16).macs / GIGA
        rel = abs(got - giga) / giga
        assert rel <= 0.05, (tokens, got, giga)
        details.append(f"{tokens}->{got:.2f}G (ref {giga}, {rel:+.1%})")
    report("expected-cost reproduction", "; ".join(details))


def test_naive_vs_cached_overhead():
    overhead = progressive_cost([50, 198], 1, VIT_B16).overhead
    assert 0.18 <= overhead <= 0.25
    report("naive-vs-cached overhead", f"{overhead:.1%} inside 18-25%")


def test_gate_monotonicity_50_images():
    params, bank = gen_synthetic(40_000, DESK)
    plan = build_token_plan(64, 64, 8, 2)
    images = [gen_synthetic_image(41_000 + i, 64, 64) for i in range(50)]
    records = [level_scores(img, params, bank, plan=plan) for img in images]
    grids = {
        "margin": [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0],
        "prob": [0.0, 0.2, 0.4, 0.6, 0.8, 0.95, 1.0],
    }
    for kind, thetas in grids.items():
        gate = GateConfig(kind=kind)
        for rec in records:
            exits = [exit_level_for(rec, gate, th, plan.levels) for th in thetas]
            assert all(a <= b for a, b in zip(exits, exits[1:])), (kind, exits)
        rows = sweep(images, params, bank, kind, thetas, plan=plan)
        tok = [r.mean_tokens for r in rows]
        assert all(a <= b for a, b in zip(tok, tok[1:])), (kind, tok)
    report(
        "gate monotonicity",
        "50 images, both gates: per-sample exits and sweep mean tokens non-decreasing",
    )


def test_distillation_math():
    t = np.array([0.4, -1.2, 0.8, 2.0])
    assert distill_loss(np.stack([t, t, t]), t) == pytest.approx(0.0, abs=1e-12)
    rng = np.random.RandomState(50_000)
    h = 1e-6
    worst = 0.0
    for _ in range(100):
        v, tt = rng.randn(8), rng.randn(8)
        grad = distill_loss_grad(v, tt)
        fd = np.empty_like(grad)
        for i in range(v.size):
            vp, vm = v.copy(), v.copy()
            vp[i] += h
            vm[i] -= h
            fd[i] = (distill_loss(vp, tt) - distill_loss(vm, tt)) / (2 * h)
        rel = float(np.abs(grad - fd).max()) / max(float(np.abs(fd).max()), 1e-12)
        worst = max(worst, rel)
        assert rel <= 1e-5
    res = fit_projection(
        np.array([[1.0, 0.5]]), np.array([[0.3, -0.7]]), steps=100, learning_rate=0.1
    )
    assert all(a > b for a, b in zip(res.history, res.history[1:]))
    report(
        "distillation math",
        f"loss(v_T)=0; 100 finite-diff cases worst rel {worst:.1e} <= 1e-5; "
        f"2-dim fit strictly decreasing over 100 steps",
    )


def test_determinism_selfcheck_and_csv(tmp_path):
    def run(args):
        return subprocess.run(
            [sys.executable, "-m", "wavetok", *args],
            capture_output=True,
            check=False,
        )

    a = run(["selfcheck", "--seed", "7"])
    b = run(["selfcheck", "--seed", "7"])
    assert a.returncode == 0 and b.returncode == 0
    assert a.stdout == b.stdout

    model, bank_path, imgs = tmp_path / "m.json", tmp_path / "b.json", tmp_path / "imgs"
    gen = run(
        [
            "gen-synthetic", "--seed", "7",
            "--out-model", str(model), "--out-bank", str(bank_path),
            "--sample-images", str(imgs), "--num-images", "4",
        ]
    )
    assert gen.returncode == 0
    sweep_args = [
        "sweep", "--images", str(imgs), "--model", str(model), "--bank", str(bank_path),
        "--gate", "margin", "--thetas", "0,0.25,0.5,0.75,1.0,inf",
    ]
    c = run(sweep_args + ["--csv", str(tmp_path / "s1.csv")])
    d = run(sweep_args + ["--csv", str(tmp_path / "s2.csv")])
    assert c.returncode == 0 and d.returncode == 0
    assert c.stdout == d.stdout
    assert (tmp_path / "s1.csv").read_bytes() == (tmp_path / "s2.csv").read_bytes()
    report("determinism", "selfcheck stdout and sweep CSV byte-identical across runs")


def test_accuracy_figures_replaced_by_agreement():
    # Trained-model accuracy needs distilled weights and is out of reach here;
    # the sweep's agreement-vs-final-level metric stands in. At an unbounded
    # threshold every sample exits at the final level, so agreement is 1 by
    # construction, and the CSV carries the column.
    params, bank = gen_synthetic(60_000, DESK)
    images = [gen_synthetic_image(61_000 + i, 64, 64) for i in range(5)]
    rows = sweep(images, params, bank, "margin", [0.0, np.inf])
    assert rows[-1].agreement == 1.0
    assert 0.0 <= rows[0].agreement <= 1.0
    from wavetok.inference import SWEEP_CSV_HEADER

    assert SWEEP_CSV_HEADER.split(",")[-1] == "agreement"
    report(
        "accuracy stand-in",
        "agreement metric emitted; 1.0 at unbounded threshold by construction",
    )
