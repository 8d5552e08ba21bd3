import json

import numpy as np
import pytest

from wavetok.encoder import ModelParams
from wavetok.errors import ManifestError, PpmError
from wavetok.inference import EmbeddingBank
from wavetok.modelio import (
    SplitMix64,
    SyntheticSpec,
    gen_synthetic,
    gen_synthetic_image,
    load_manifest,
    load_ppm,
    model_tensor_schema,
    save_manifest,
    save_ppm,
)

# First outputs of canonical splitmix64 at seed 0.
SPLITMIX_SEED0 = (0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F)


class TestSplitMix:
    def test_reference_vector(self):
        got = tuple(int(v) for v in SplitMix64(0).next_uint64(3))
        assert got == SPLITMIX_SEED0

    def test_stream_continues_across_calls(self):
        a = SplitMix64(9)
        first = [int(v) for v in a.next_uint64(2)]
        second = [int(v) for v in a.next_uint64(2)]
        b = SplitMix64(9)
        assert first + second == [int(v) for v in b.next_uint64(4)]

    def test_uniform_bounds_and_determinism(self):
        u = SplitMix64(3).uniform(10000)
        assert u.min() >= -0.02 and u.max() < 0.02
        assert np.array_equal(u, SplitMix64(3).uniform(10000))


class TestManifests:
    def test_model_round_trip_bitwise(self, tmp_path, desk_model):
        params, _ = desk_model
        path = tmp_path / "model.json"
        save_manifest(params, path)
        loaded = load_manifest(path)
        assert isinstance(loaded, ModelParams)
        for name in ("proj_weight", "level_embed", "readout_weight", "final_gain"):
            assert getattr(loaded, name).tobytes() == getattr(params, name).tobytes()
        for a, b in zip(loaded.block_params, params.block_params):
            assert a.wq.tobytes() == b.wq.tobytes()
            assert a.b2.tobytes() == b.b2.tobytes()

    def test_save_load_save_is_stable(self, tmp_path, desk_model):
        params, _ = desk_model
        save_manifest(params, tmp_path / "a.json")
        save_manifest(load_manifest(tmp_path / "a.json"), tmp_path / "b.json")
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
        assert json.loads((tmp_path / "a.json").read_text())["tensors"] == json.loads(
            (tmp_path / "b.json").read_text()
        )["tensors"]

    def test_bank_round_trip(self, tmp_path, desk_model):
        _, bank = desk_model
        path = tmp_path / "bank.json"
        save_manifest(bank, path)
        loaded = load_manifest(path)
        assert isinstance(loaded, EmbeddingBank)
        assert loaded.embeddings.tobytes() == bank.embeddings.tobytes()
        assert loaded.labels == bank.labels
        assert loaded.temperature == bank.temperature

    def test_corrupt_byte_len_rejected(self, tmp_path, desk_model):
        params, _ = desk_model
        path = tmp_path / "model.json"
        save_manifest(params, path)
        doc = json.loads(path.read_text())
        doc["tensors"][0]["byte_len"] += 4
        path.write_text(json.dumps(doc))
        with pytest.raises(ManifestError, match="byte_len"):
            load_manifest(path)

    def test_offset_gap_rejected(self, tmp_path, desk_model):
        params, _ = desk_model
        path = tmp_path / "model.json"
        save_manifest(params, path)
        doc = json.loads(path.read_text())
        doc["tensors"][1]["byte_offset"] += 8
        path.write_text(json.dumps(doc))
        with pytest.raises(ManifestError, match="overlaps or leaves a gap"):
            load_manifest(path)

    def test_truncated_blob_rejected(self, tmp_path, desk_model):
        params, _ = desk_model
        path = tmp_path / "model.json"
        save_manifest(params, path)
        blob = tmp_path / "model.bin"
        blob.write_bytes(blob.read_bytes()[:-16])
        with pytest.raises(ManifestError, match="truncated"):
            load_manifest(path)

    def test_missing_and_extra_tensors_listed(self, tmp_path, desk_model):
        params, _ = desk_model
        path = tmp_path / "model.json"
        save_manifest(params, path)
        doc = json.loads(path.read_text())
        doc["tensors"][0]["name"] = "not.a.real.tensor"
        path.write_text(json.dumps(doc))
        with pytest.raises(ManifestError) as err:
            load_manifest(path)
        assert "embed.proj.ll.weight" in str(err.value)  # missing
        assert "not.a.real.tensor" in str(err.value)  # extra

    def test_unknown_version_rejected(self, tmp_path, desk_model):
        params, _ = desk_model
        path = tmp_path / "model.json"
        save_manifest(params, path)
        doc = json.loads(path.read_text())
        doc["version"] = 99
        path.write_text(json.dumps(doc))
        with pytest.raises(ManifestError, match="version"):
            load_manifest(path)

    def test_non_unit_bank_normalized_with_warning(self, tmp_path, desk_model):
        _, bank = desk_model
        path = tmp_path / "bank.json"
        save_manifest(bank, path)
        doc = json.loads(path.read_text())
        blob = tmp_path / "bank.bin"
        data = np.frombuffer(blob.read_bytes(), dtype="<f4").copy()
        blob.write_bytes((data * 2.5).tobytes())
        path.write_text(json.dumps(doc))
        with pytest.warns(UserWarning, match="normalizing"):
            loaded = load_manifest(path)
        norms = np.linalg.norm(loaded.embeddings.astype(np.float64), axis=1)
        assert np.abs(norms - 1.0).max() <= 1e-5

    def test_tensor_dict_container_round_trips_a_pyramid(self, tmp_path):
        from wavetok.wavelet import YCbCrImage, decompose, reconstruct

        img = gen_synthetic_image(31, 16, 16).astype(np.float32)
        pyr = decompose(YCbCrImage.from_stack(img), 2)
        stacks = {"ll": pyr.ll}
        for level in (1, 2):
            bands = pyr.detail(level)
            stacks[f"lh{level}"], stacks[f"hl{level}"], stacks[f"hh{level}"] = (
                bands.lh, bands.hl, bands.hh,
            )
        path = tmp_path / "pyramid.json"
        save_manifest(stacks, path)
        loaded = load_manifest(path)
        assert isinstance(loaded, dict)
        assert set(loaded) == set(stacks)
        for name, arr in stacks.items():
            assert loaded[name].tobytes() == arr.tobytes()
        from wavetok.wavelet import DetailBands, SubbandPyramid

        rebuilt = SubbandPyramid(
            levels=2,
            ll=loaded["ll"],
            details=tuple(
                DetailBands(loaded[f"lh{lv}"], loaded[f"hl{lv}"], loaded[f"hh{lv}"])
                for lv in (1, 2)
            ),
            height=16,
            width=16,
        )
        assert np.abs(reconstruct(rebuilt).stack() - img).max() <= 1e-5

    def test_tensor_dict_rejects_mixed_dtypes(self, tmp_path):
        with pytest.raises(TypeError, match="one float dtype"):
            save_manifest(
                {"a": np.zeros(2, np.float32), "b": np.zeros(2, np.float64)},
                tmp_path / "x.json",
            )

    def test_f64_container(self, tmp_path):
        params, bank = gen_synthetic(5, SyntheticSpec(), dtype=np.float64)
        save_manifest(params, tmp_path / "m.json")
        save_manifest(bank, tmp_path / "b.json")
        loaded = load_manifest(tmp_path / "m.json")
        assert loaded.dtype == np.float64
        assert loaded.readout_weight.tobytes() == params.readout_weight.tobytes()


class TestPpm:
    def test_single_white_pixel(self, tmp_path):
        path = tmp_path / "w.ppm"
        path.write_bytes(b"P6\n1 1\n255\n\xff\xff\xff")
        img = load_ppm(path)
        assert img.shape == (3, 1, 1)
        assert np.all(img == 1.0)

    def test_red_blue_pair(self, tmp_path):
        path = tmp_path / "rb.ppm"
        path.write_bytes(b"P6\n2 1\n255\n\xff\x00\x00\x00\x00\xff")
        img = load_ppm(path)
        assert img[0, 0, 0] == 1.0 and img[1, 0, 0] == 0.0 and img[2, 0, 0] == 0.0
        assert img[0, 0, 1] == 0.0 and img[2, 0, 1] == 1.0

    def test_bad_magic_reports_offset(self, tmp_path):
        path = tmp_path / "bad.ppm"
        path.write_bytes(b"P5\n1 1\n255\n\x00")
        with pytest.raises(PpmError) as err:
            load_ppm(path)
        assert err.value.offset == 0

    def test_bad_maxval_reports_offset(self, tmp_path):
        path = tmp_path / "bad.ppm"
        path.write_bytes(b"P6\n1 1\n254\n\x00\x00\x00")
        with pytest.raises(PpmError) as err:
            load_ppm(path)
        assert err.value.offset == 7

    def test_short_payload_rejected(self, tmp_path):
        path = tmp_path / "short.ppm"
        path.write_bytes(b"P6\n2 2\n255\n\x00\x00\x00")
        with pytest.raises(PpmError, match="payload"):
            load_ppm(path)

    def test_save_load_quantized_round_trip(self, tmp_path):
        img = gen_synthetic_image(12, 8, 6)
        path = tmp_path / "x.ppm"
        save_ppm(img, path)
        back = load_ppm(path)
        assert back.shape == img.shape
        assert np.abs(back - img).max() <= 0.5 / 255.0 + 1e-12


class TestSynthetic:
    def test_same_seed_same_bytes(self):
        a_params, a_bank = gen_synthetic(21)
        b_params, b_bank = gen_synthetic(21)
        assert a_params.readout_weight.tobytes() == b_params.readout_weight.tobytes()
        assert a_params.block_params[1].w1.tobytes() == b_params.block_params[1].w1.tobytes()
        assert a_bank.embeddings.tobytes() == b_bank.embeddings.tobytes()

    def test_different_seed_different_bytes(self):
        a_params, _ = gen_synthetic(21)
        b_params, _ = gen_synthetic(22)
        assert a_params.readout_weight.tobytes() != b_params.readout_weight.tobytes()

    def test_generated_model_validates(self):
        params, bank = gen_synthetic(23)
        params.validate()  # does not raise
        assert bank.num_classes == 8
        norms = np.linalg.norm(bank.embeddings.astype(np.float64), axis=1)
        assert np.abs(norms - 1.0).max() <= 1e-5

    def test_weights_within_uniform_range(self):
        params, _ = gen_synthetic(24)
        assert float(np.abs(params.readout_weight).max()) < 0.02
        assert float(np.abs(params.block_params[0].wq).max()) < 0.02

    def test_schema_covers_all_params(self, desk_model):
        params, _ = desk_model
        schema = model_tensor_schema(
            params.dim, params.blocks, params.patch,
            params.levels, params.mlp_ratio, params.out_dim,
        )
        # 4 kinds * 2 + 3 embeds + 16 per block * B + 2 final + 2 readout
        assert len(schema) == 8 + 3 + 16 * params.blocks + 4

    def test_images_deterministic(self):
        assert np.array_equal(gen_synthetic_image(1, 8, 8), gen_synthetic_image(1, 8, 8))
        assert not np.array_equal(gen_synthetic_image(1, 8, 8), gen_synthetic_image(2, 8, 8))
