import json

import numpy as np
import pytest

from wavetok_exporter.errors import ExportError
from wavetok_exporter.manifest import (
    engine_model_schema,
    write_bank_manifest,
    write_container,
)


class TestContainer:
    def test_layout_offsets_are_gap_free(self, tmp_path):
        tensors = [
            ("a", np.zeros((2, 3), dtype=np.float32)),
            ("b", np.zeros(5, dtype=np.float32)),
        ]
        write_container(tmp_path / "x.json", tensors, {"kind": "bank"}, "f32")
        doc = json.loads((tmp_path / "x.json").read_text())
        assert doc["version"] == 1
        assert doc["tensors"][0] == {
            "name": "a", "shape": [2, 3], "byte_offset": 0, "byte_len": 24
        }
        assert doc["tensors"][1]["byte_offset"] == 24
        assert (tmp_path / "x.bin").stat().st_size == 24 + 20

    def test_little_endian_f32_bytes(self, tmp_path):
        write_container(
            tmp_path / "x.json",
            [("v", np.array([1.0, 0.6], dtype=np.float64))],
            {"kind": "bank"},
            "f32",
        )
        blob = (tmp_path / "x.bin").read_bytes()
        assert blob == b"\x00\x00\x80\x3f" + b"\x9a\x99\x19\x3f"

    def test_duplicate_names_rejected(self, tmp_path):
        with pytest.raises(ExportError, match="duplicate"):
            write_container(
                tmp_path / "x.json",
                [("a", np.zeros(1)), ("a", np.zeros(1))],
                {},
                "f32",
            )

    def test_unknown_dtype_rejected(self, tmp_path):
        with pytest.raises(ExportError, match="dtype"):
            write_container(tmp_path / "x.json", [], {}, "f16")


class TestBankWriter:
    def test_row_label_mismatch(self, tmp_path):
        with pytest.raises(ExportError):
            write_bank_manifest(tmp_path / "b.json", np.eye(3), ["a", "b"], 100.0)

    def test_metadata_fields(self, tmp_path):
        write_bank_manifest(
            tmp_path / "b.json", np.eye(2), ["x", "y"], 50.0,
            extra_metadata={"source_checkpoint": "synthetic:small"},
        )
        meta = json.loads((tmp_path / "b.json").read_text())["metadata"]
        assert meta["kind"] == "bank"
        assert meta["classes"] == 2
        assert meta["labels"] == ["x", "y"]
        assert meta["temperature"] == 50.0
        assert meta["source_checkpoint"] == "synthetic:small"


class TestSchema:
    def test_counts(self):
        schema = engine_model_schema(32, 2, 8, 2, 4, 16)
        assert len(schema) == 8 + 3 + 16 * 2 + 4
        names = [n for n, _ in schema]
        assert len(set(names)) == len(names)

    def test_engine_agrees_with_published_schema(self):
        # the engine's own schema function must match ours name for name
        from wavetok.modelio import model_tensor_schema

        ours = engine_model_schema(768, 12, 16, 2, 4, 512)
        theirs = model_tensor_schema(768, 12, 16, 2, 4, 512)
        assert ours == theirs
