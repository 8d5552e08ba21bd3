import dataclasses

import numpy as np
import pytest

from wavetok.errors import ConfigurationError, DimensionError
from wavetok.modelio import gen_synthetic_image
from wavetok.tokenizer import (
    READOUT,
    build_token_plan,
    embed_tokens,
    patchify_subband,
    sincos_position_codes,
    table1_counts,
    token_counts,
)
from wavetok.wavelet import YCbCrImage, decompose

# Every published value of the reference count table (P=16, 224x224, N_full=196).
TABLE1 = {
    (1, 1): 197,
    (2, 1): 50, (2, 2): 198,
    (3, 1): 13, (3, 2): 51, (3, 3): 199,
    (4, 1): 4, (4, 2): 14, (4, 3): 52, (4, 4): 200,
}


class TestPlan:
    def test_256_16_2_group_sizes(self):
        plan = build_token_plan(256, 256, 16, 2)
        # formula: group0 = (256/64)^2, group1 = 3*(256/64)^2, group2 = 3*(256/32)^2
        assert [g.spatial_size for g in plan.groups] == [16, 48, 192]
        cumulative_spatial = np.cumsum([g.spatial_size for g in plan.groups])
        assert list(cumulative_spatial) == [16, 64, 256]
        assert cumulative_spatial[-1] == (256 // 16) ** 2

    def test_64_8_1_partition_of_unity(self):
        plan = build_token_plan(64, 64, 8, 1)
        assert [g.spatial_size for g in plan.groups] == [16, 48]
        assert sum(g.spatial_size for g in plan.groups) == (64 // 8) ** 2

    @pytest.mark.parametrize(
        "h,w,p,l", [(64, 64, 8, 2), (256, 256, 16, 2), (128, 64, 8, 3), (32, 32, 4, 2)]
    )
    def test_spatial_partition(self, h, w, p, l):
        plan = build_token_plan(h, w, p, l)
        assert sum(g.spatial_size for g in plan.groups) == (h // p) * (w // p)

    def test_plan_deterministic(self):
        assert build_token_plan(64, 64, 8, 2) == build_token_plan(64, 64, 8, 2)

    def test_one_readout_per_group_first(self):
        plan = build_token_plan(64, 64, 8, 2)
        for g in plan.groups:
            kinds = [t.kind for t in g.tokens]
            assert kinds.count(READOUT) == 1
            assert g.readout_index == 0 and kinds[0] == READOUT

    def test_detail_order_lh_hl_hh_row_major(self):
        plan = build_token_plan(64, 64, 8, 2)
        g = plan.groups[2]  # level-1 details, 4x4 grid per subband
        spatial = [t for t in g.tokens if t.kind != READOUT]
        assert [t.kind for t in spatial[:16]] == ["LH"] * 16
        assert [t.kind for t in spatial[16:32]] == ["HL"] * 16
        assert [t.kind for t in spatial[32:]] == ["HH"] * 16
        assert [(t.row, t.col) for t in spatial[:4]] == [(0, 0), (0, 1), (0, 2), (0, 3)]

    def test_group_ids_non_decreasing(self):
        gids = build_token_plan(64, 64, 8, 2).group_ids()
        assert np.all(np.diff(gids) >= 0)

    def test_divisibility_error_names_level(self):
        with pytest.raises(ConfigurationError, match="level 2"):
            build_token_plan(48, 48, 8, 2)  # 48/4 = 12, not divisible by 8

    def test_cumulative_matches_token_counts(self):
        plan = build_token_plan(64, 64, 8, 2)
        for s in range(3):
            assert plan.cumulative_counts[s] == token_counts(64, 64, 8, 2, s)

    def test_plan_json_round_trips(self):
        import json

        doc = json.loads(build_token_plan(64, 64, 8, 1).to_json())
        assert doc["cumulative_counts"] == [17, 66]
        assert doc["groups"][0]["spatial_size"] == 16


class TestCounts:
    def test_256_examples(self):
        assert token_counts(256, 256, 16, 2, 2) == 259  # 256/4^0 + 3
        assert token_counts(256, 256, 16, 2, 0) == 17  # 256/16 + 1

    @pytest.mark.parametrize("h,w,p,l", [(256, 256, 16, 2), (64, 64, 8, 2), (64, 64, 8, 1)])
    def test_full_step_is_total_plus_specials(self, h, w, p, l):
        assert token_counts(h, w, p, l, l) == (h // p) * (w // p) + (l + 1)

    def test_step_out_of_range(self):
        with pytest.raises(ValueError):
            token_counts(64, 64, 8, 2, 3)
        with pytest.raises(ValueError):
            token_counts(64, 64, 8, 2, -1)

    def test_table1_reproduces_every_published_value(self):
        for (levels, col), expected in TABLE1.items():
            assert table1_counts(196, levels, col) == expected

    def test_table1_bounds(self):
        with pytest.raises(ValueError):
            table1_counts(196, 2, 0)
        with pytest.raises(ValueError):
            table1_counts(196, 2, 3)
        with pytest.raises(ValueError):
            table1_counts(0, 2, 1)

    def test_conventions_agree_on_divisible_grids(self):
        # 256 spatial tokens divide evenly, so the two conventions differ only
        # by their special-token count: s+1 vs col.
        for s in (1, 2):
            ours = token_counts(256, 256, 16, 2, s)
            published = table1_counts(256, 2, s)
            assert ours - (s + 1) == published - s


class TestPatchify:
    def test_single_patch(self):
        stack = gen_synthetic_image(4, 16, 16)
        tokens = patchify_subband(stack, 16)
        assert tokens.shape == (1, 768)

    def test_constant_stack(self):
        v = 0.123
        tokens = patchify_subband(np.full((3, 32, 32), v), 16)
        assert tokens.shape == (4, 768)
        assert np.all(tokens == v)

    def test_row_major_patch_order(self):
        # mark each 16x16 patch with its grid index
        stack = np.zeros((3, 32, 32))
        for r in range(2):
            for c in range(2):
                stack[:, 16 * r : 16 * (r + 1), 16 * c : 16 * (c + 1)] = 2 * r + c
        tokens = patchify_subband(stack, 16)
        assert [int(t[0]) for t in tokens] == [0, 1, 2, 3]

    def test_channel_major_then_row_major_within_patch(self):
        stack = np.arange(3 * 2 * 2, dtype=float).reshape(3, 2, 2)
        token = patchify_subband(stack, 2)[0]
        # (channel, row, col) flattening == C-order of the (3, P, P) tile
        assert np.array_equal(token, stack.reshape(-1))

    def test_divisibility_error(self):
        with pytest.raises(DimensionError):
            patchify_subband(np.zeros((3, 30, 32)), 16)


class TestEmbedding:
    def test_zero_pyramid_zero_bias_gives_codes_only(self, desk_model, desk_plan):
        params, _ = desk_model
        zeroed = dataclasses.replace(
            params, proj_bias=np.zeros_like(params.proj_bias)
        )
        pyr = decompose(YCbCrImage.from_stack(np.zeros((3, 64, 64))), 2, dtype=params.dtype)
        seq = embed_tokens(pyr, desk_plan, zeroed)
        pos = sincos_position_codes(2, 2, params.dim).astype(params.dtype)
        expected = pos[0] + params.kind_embed[0] + params.level_embed[0]
        got = seq.embeddings[1]  # first LL token (slot 0 is the readout)
        assert np.abs(got - expected).max() <= 1e-6

    def test_group_ids_non_decreasing(self, desk_model, desk_plan, rgb_image):
        params, _ = desk_model
        pyr = decompose(YCbCrImage.from_stack(rgb_image), 2, dtype=params.dtype)
        seq = embed_tokens(pyr, desk_plan, params)
        assert np.all(np.diff(seq.group_ids) >= 0)

    def test_sequence_length_matches_count_formula(self, desk_model, desk_plan, rgb_image):
        params, _ = desk_model
        pyr = decompose(YCbCrImage.from_stack(rgb_image), 2, dtype=params.dtype)
        seq = embed_tokens(pyr, desk_plan, params)
        assert seq.embeddings.shape == (token_counts(64, 64, 8, 2, 2), params.dim)

    def test_readout_slot_is_learned_vector(self, desk_model, desk_plan, rgb_image):
        params, _ = desk_model
        pyr = decompose(YCbCrImage.from_stack(rgb_image), 2, dtype=params.dtype)
        seq = embed_tokens(pyr, desk_plan, params)
        for s, pos in enumerate(desk_plan.readout_positions()):
            assert np.array_equal(seq.embeddings[pos], params.readout_embed[s])

    def test_plan_model_mismatch_rejected(self, desk_model, rgb_image):
        params, _ = desk_model
        plan = build_token_plan(64, 64, 8, 1)  # wrong level count for the model
        pyr = decompose(YCbCrImage.from_stack(rgb_image), 1, dtype=params.dtype)
        with pytest.raises(DimensionError):
            embed_tokens(pyr, plan, params)


class TestPositionCodes:
    def test_shape_and_range(self):
        codes = sincos_position_codes(2, 3, 32)
        assert codes.shape == (6, 32)
        assert np.abs(codes).max() <= 1.0

    def test_distinct_positions_distinct_codes(self):
        codes = sincos_position_codes(4, 4, 32)
        assert np.unique(codes, axis=0).shape[0] == 16

    def test_dim_must_divide_four(self):
        with pytest.raises(ConfigurationError):
            sincos_position_codes(2, 2, 30)
