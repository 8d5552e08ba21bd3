"""Bit-exact containers: JSON+blob tensor manifests, P6 images, synthetic fixtures.

A manifest is a JSON document naming tensors (shape, byte offset, byte
length) inside one little-endian binary blob stored next to it. Offsets are
ascending and non-overlapping and the blob length is exact, so round-trips
are bitwise lossless and diffing two manifests is diffing two files.

Synthetic fixtures draw every weight from a splitmix64-seeded uniform on
(-0.02, 0.02), constructed in float64 then cast, so identical seeds give
identical bytes on every platform.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoder import BlockParams, ModelParams
from .errors import ManifestError, PpmError
from .inference import EmbeddingBank
from .numerics import l2_norm

FORMAT_VERSION = 1
DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}
_DTYPE_NAMES = {np.dtype(np.float32): "f32", np.dtype(np.float64): "f64"}

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1


class SplitMix64:
    """Counter-based splitmix64 stream; pure uint64 arithmetic, platform-free."""

    def __init__(self, seed: int):
        self._seed = seed & _MASK
        self._counter = 0

    def next_uint64(self, count: int) -> np.ndarray:
        idx = np.arange(self._counter + 1, self._counter + count + 1, dtype=np.uint64)
        self._counter += count
        z = np.uint64(self._seed) + idx * np.uint64(_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    def uniform(self, count: int, low: float = -0.02, high: float = 0.02) -> np.ndarray:
        """float64 uniforms in [low, high) built from the top 53 bits."""
        u = (self.next_uint64(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return low + u * (high - low)


def model_tensor_schema(
    dim: int, blocks: int, patch: int, levels: int, mlp_ratio: int, out_dim: int
) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered (name, shape) contract of a model manifest."""
    p2 = 3 * patch * patch
    schema: list[tuple[str, tuple[int, ...]]] = []
    for kind in ("ll", "lh", "hl", "hh"):
        schema.append((f"embed.proj.{kind}.weight", (p2, dim)))
        schema.append((f"embed.proj.{kind}.bias", (dim,)))
    schema.append(("embed.level", (levels + 1, dim)))
    schema.append(("embed.kind", (4, dim)))
    schema.append(("embed.readout", (levels + 1, dim)))
    rd = mlp_ratio * dim
    for i in range(blocks):
        pre = f"block.{i}"
        schema += [
            (f"{pre}.ln1.gain", (dim,)),
            (f"{pre}.ln1.bias", (dim,)),
            (f"{pre}.attn.wq", (dim, dim)),
            (f"{pre}.attn.wk", (dim, dim)),
            (f"{pre}.attn.wv", (dim, dim)),
            (f"{pre}.attn.wo", (dim, dim)),
            (f"{pre}.attn.bq", (dim,)),
            (f"{pre}.attn.bk", (dim,)),
            (f"{pre}.attn.bv", (dim,)),
            (f"{pre}.attn.bo", (dim,)),
            (f"{pre}.ln2.gain", (dim,)),
            (f"{pre}.ln2.bias", (dim,)),
            (f"{pre}.mlp.w1", (dim, rd)),
            (f"{pre}.mlp.b1", (rd,)),
            (f"{pre}.mlp.w2", (rd, dim)),
            (f"{pre}.mlp.b2", (dim,)),
        ]
    schema += [
        ("final_norm.gain", (dim,)),
        ("final_norm.bias", (dim,)),
        ("readout.weight", (dim, out_dim)),
        ("readout.bias", (out_dim,)),
    ]
    return schema


def _params_to_tensors(params: ModelParams) -> dict[str, np.ndarray]:
    kinds = ("ll", "lh", "hl", "hh")
    tensors: dict[str, np.ndarray] = {}
    for k, kind in enumerate(kinds):
        tensors[f"embed.proj.{kind}.weight"] = params.proj_weight[k]
        tensors[f"embed.proj.{kind}.bias"] = params.proj_bias[k]
    tensors["embed.level"] = params.level_embed
    tensors["embed.kind"] = params.kind_embed
    tensors["embed.readout"] = params.readout_embed
    for i, blk in enumerate(params.block_params):
        pre = f"block.{i}"
        for name, arr in (
            ("ln1.gain", blk.ln1_gain), ("ln1.bias", blk.ln1_bias),
            ("attn.wq", blk.wq), ("attn.wk", blk.wk),
            ("attn.wv", blk.wv), ("attn.wo", blk.wo),
            ("attn.bq", blk.bq), ("attn.bk", blk.bk),
            ("attn.bv", blk.bv), ("attn.bo", blk.bo),
            ("ln2.gain", blk.ln2_gain), ("ln2.bias", blk.ln2_bias),
            ("mlp.w1", blk.w1), ("mlp.b1", blk.b1),
            ("mlp.w2", blk.w2), ("mlp.b2", blk.b2),
        ):
            tensors[f"{pre}.{name}"] = arr
    tensors["final_norm.gain"] = params.final_gain
    tensors["final_norm.bias"] = params.final_bias
    tensors["readout.weight"] = params.readout_weight
    tensors["readout.bias"] = params.readout_bias
    return tensors


def _params_from_tensors(tensors: dict[str, np.ndarray], meta: dict) -> ModelParams:
    kinds = ("ll", "lh", "hl", "hh")
    blocks = []
    for i in range(meta["blocks"]):
        pre = f"block.{i}"
        blocks.append(
            BlockParams(
                ln1_gain=tensors[f"{pre}.ln1.gain"],
                ln1_bias=tensors[f"{pre}.ln1.bias"],
                wq=tensors[f"{pre}.attn.wq"],
                wk=tensors[f"{pre}.attn.wk"],
                wv=tensors[f"{pre}.attn.wv"],
                wo=tensors[f"{pre}.attn.wo"],
                bq=tensors[f"{pre}.attn.bq"],
                bk=tensors[f"{pre}.attn.bk"],
                bv=tensors[f"{pre}.attn.bv"],
                bo=tensors[f"{pre}.attn.bo"],
                ln2_gain=tensors[f"{pre}.ln2.gain"],
                ln2_bias=tensors[f"{pre}.ln2.bias"],
                w1=tensors[f"{pre}.mlp.w1"],
                b1=tensors[f"{pre}.mlp.b1"],
                w2=tensors[f"{pre}.mlp.w2"],
                b2=tensors[f"{pre}.mlp.b2"],
            )
        )
    params = ModelParams(
        dim=meta["dim"],
        blocks=meta["blocks"],
        heads=meta["heads"],
        mlp_ratio=meta["mlp_ratio"],
        patch=meta["patch"],
        levels=meta["levels"],
        out_dim=meta["out_dim"],
        proj_weight=np.stack([tensors[f"embed.proj.{k}.weight"] for k in kinds]),
        proj_bias=np.stack([tensors[f"embed.proj.{k}.bias"] for k in kinds]),
        level_embed=tensors["embed.level"],
        kind_embed=tensors["embed.kind"],
        readout_embed=tensors["embed.readout"],
        block_params=tuple(blocks),
        final_gain=tensors["final_norm.gain"],
        final_bias=tensors["final_norm.bias"],
        readout_weight=tensors["readout.weight"],
        readout_bias=tensors["readout.bias"],
    )
    params.validate()
    return params


def _write_container(
    path: Path, tensors: dict[str, np.ndarray], metadata: dict, dtype_name: str
) -> None:
    dtype = DTYPES[dtype_name]
    entries, chunks, offset = [], [], 0
    for name, arr in tensors.items():
        raw = np.ascontiguousarray(arr, dtype=dtype).tobytes()
        entries.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "byte_offset": offset,
                "byte_len": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    blob_name = path.stem + ".bin"
    doc = {
        "version": FORMAT_VERSION,
        "dtype": dtype_name,
        "blob": blob_name,
        "tensors": entries,
        "metadata": metadata,
    }
    path.write_text(json.dumps(doc, indent=2) + "\n")
    (path.parent / blob_name).write_bytes(b"".join(chunks))


def save_manifest(obj, path) -> None:
    """Write a ModelParams, EmbeddingBank, or plain tensor dict as JSON + blob.

    A dict of named arrays becomes a generic `kind: tensors` container (used
    for image-plane stacks and other intermediates); every array must share
    one float dtype.
    """
    path = Path(path)
    if isinstance(obj, ModelParams):
        meta = {
            "kind": "model",
            "dim": obj.dim,
            "blocks": obj.blocks,
            "heads": obj.heads,
            "mlp_ratio": obj.mlp_ratio,
            "patch": obj.patch,
            "levels": obj.levels,
            "out_dim": obj.out_dim,
        }
        _write_container(path, _params_to_tensors(obj), meta, _DTYPE_NAMES[obj.dtype])
    elif isinstance(obj, EmbeddingBank):
        meta = {
            "kind": "bank",
            "out_dim": obj.embeddings.shape[1],
            "classes": obj.num_classes,
            "labels": list(obj.labels),
            "temperature": obj.temperature,
        }
        dtype_name = _DTYPE_NAMES.get(obj.embeddings.dtype, "f32")
        _write_container(path, {"embeddings": obj.embeddings}, meta, dtype_name)
    elif isinstance(obj, dict):
        if not obj or not all(isinstance(v, np.ndarray) for v in obj.values()):
            raise TypeError("tensor container needs a non-empty dict of arrays")
        dtypes = {_DTYPE_NAMES.get(np.dtype(v.dtype)) for v in obj.values()}
        if len(dtypes) != 1 or None in dtypes:
            raise TypeError(f"tensor container needs one float dtype, got {dtypes}")
        _write_container(path, dict(obj), {"kind": "tensors"}, dtypes.pop())
    else:
        raise TypeError(f"cannot save object of type {type(obj).__name__}")


def _read_container(path: Path) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    if doc.get("version") != FORMAT_VERSION:
        raise ManifestError(
            f"manifest version {doc.get('version')} unsupported (want {FORMAT_VERSION})"
        )
    dtype_name = doc.get("dtype")
    if dtype_name not in DTYPES:
        raise ManifestError(f"unknown dtype {dtype_name!r}")
    dtype = DTYPES[dtype_name]
    blob_path = path.parent / doc["blob"]
    try:
        blob = blob_path.read_bytes()
    except OSError as exc:
        raise ManifestError(f"cannot read blob {blob_path}: {exc}") from exc
    tensors: dict[str, np.ndarray] = {}
    expected_offset = 0
    for entry in doc["tensors"]:
        name = entry["name"]
        if name in tensors:
            raise ManifestError(f"duplicate tensor name {name!r}")
        shape = tuple(entry["shape"])
        offset, length = entry["byte_offset"], entry["byte_len"]
        if offset != expected_offset:
            raise ManifestError(
                f"tensor {name!r}: offset {offset} overlaps or leaves a gap "
                f"(expected {expected_offset})"
            )
        want = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        if length != want:
            raise ManifestError(
                f"tensor {name!r}: byte_len {length} != prod(shape)*itemsize {want}"
            )
        if offset + length > len(blob):
            raise ManifestError(
                f"tensor {name!r}: blob truncated ({len(blob)} bytes, "
                f"need {offset + length})"
            )
        tensors[name] = np.frombuffer(
            blob, dtype=dtype, count=want // dtype.itemsize, offset=offset
        ).reshape(shape)
        expected_offset = offset + length
    if expected_offset != len(blob):
        raise ManifestError(
            f"blob has {len(blob) - expected_offset} trailing bytes beyond the manifest"
        )
    return doc, tensors


def load_manifest(path):
    """Load a manifest; returns ModelParams or EmbeddingBank by its metadata kind."""
    path = Path(path)
    doc, tensors = _read_container(path)
    meta = doc.get("metadata", {})
    kind = meta.get("kind")
    if kind == "model":
        schema = model_tensor_schema(
            meta["dim"], meta["blocks"], meta["patch"],
            meta["levels"], meta["mlp_ratio"], meta["out_dim"],
        )
        names = {name for name, _ in schema}
        missing = sorted(names - tensors.keys())
        extra = sorted(tensors.keys() - names)
        if missing or extra:
            raise ManifestError(f"model tensors mismatch: missing={missing} extra={extra}")
        for name, shape in schema:
            if tensors[name].shape != shape:
                raise ManifestError(
                    f"tensor {name!r}: shape {tensors[name].shape} != metadata {shape}"
                )
        return _params_from_tensors(tensors, meta)
    if kind == "bank":
        if set(tensors) != {"embeddings"}:
            raise ManifestError(
                f"bank tensors mismatch: expected ['embeddings'], got {sorted(tensors)}"
            )
        emb = tensors["embeddings"]
        if emb.shape != (meta["classes"], meta["out_dim"]):
            raise ManifestError(
                f"bank embeddings shape {emb.shape} != metadata "
                f"({meta['classes']}, {meta['out_dim']})"
            )
        norms = l2_norm(emb.astype(np.float64))
        if np.any(norms == 0):
            raise ManifestError("bank contains a zero embedding row")
        if np.any(np.abs(norms - 1.0) > 1e-5):
            warnings.warn("bank rows were not unit-norm; normalizing on load")
            emb = (emb.astype(np.float64) / norms[:, None]).astype(emb.dtype)
        return EmbeddingBank(
            embeddings=emb,
            labels=tuple(meta["labels"]),
            temperature=float(meta["temperature"]),
        )
    if kind == "tensors":
        return tensors
    raise ManifestError(f"unknown manifest kind {kind!r}")


def load_ppm(path) -> np.ndarray:
    """Binary P6, maxval 255 -> (3, H, W) float64 planes in [0, 1]."""
    data = Path(path).read_bytes()
    if data[:3] != b"P6\n":
        raise PpmError("expected 'P6\\n' magic", 0)
    pos = 3
    end = data.find(b"\n", pos)
    if end < 0:
        raise PpmError("missing dimensions line", pos)
    fields = data[pos:end].split()
    if len(fields) != 2 or not all(f.isdigit() for f in fields):
        raise PpmError("dimensions line must be '<width> <height>'", pos)
    width, height = int(fields[0]), int(fields[1])
    if width < 1 or height < 1:
        raise PpmError(f"bad dimensions {width}x{height}", pos)
    pos = end + 1
    if data[pos : pos + 4] != b"255\n":
        raise PpmError("expected maxval '255\\n'", pos)
    pos += 4
    need = width * height * 3
    if len(data) - pos != need:
        raise PpmError(
            f"pixel payload has {len(data) - pos} bytes, expected {need}", pos
        )
    pixels = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos)
    return pixels.reshape(height, width, 3).transpose(2, 0, 1).astype(np.float64) / 255.0


def save_ppm(rgb: np.ndarray, path) -> None:
    """(3, H, W) floats in [0, 1] -> binary P6 with maxval 255."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[0] != 3:
        raise ValueError(f"expected (3, H, W), got {rgb.shape}")
    _, h, w = rgb.shape
    quantized = np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)
    payload = quantized.transpose(1, 2, 0).tobytes()
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + payload)


@dataclass(frozen=True)
class SyntheticSpec:
    """Dims of a generated model/bank pair. Defaults are the desk scale."""

    dim: int = 32
    blocks: int = 2
    heads: int = 4
    mlp_ratio: int = 4
    patch: int = 8
    levels: int = 2
    out_dim: int = 16
    classes: int = 8
    temperature: float = 100.0


def gen_synthetic(
    seed: int, spec: SyntheticSpec = SyntheticSpec(), dtype=np.float32
) -> tuple[ModelParams, EmbeddingBank]:
    """Deterministic random model and bank: one splitmix64 stream, schema order."""
    rng = SplitMix64(seed)
    dt = np.dtype(dtype)

    def draw(shape: tuple[int, ...]) -> np.ndarray:
        n = int(np.prod(shape, dtype=np.int64))
        return rng.uniform(n).astype(dt).reshape(shape)

    schema = model_tensor_schema(
        spec.dim, spec.blocks, spec.patch, spec.levels, spec.mlp_ratio, spec.out_dim
    )
    tensors = {name: draw(shape) for name, shape in schema}
    meta = {
        "dim": spec.dim,
        "blocks": spec.blocks,
        "heads": spec.heads,
        "mlp_ratio": spec.mlp_ratio,
        "patch": spec.patch,
        "levels": spec.levels,
        "out_dim": spec.out_dim,
    }
    params = _params_from_tensors(tensors, meta)
    rows = rng.uniform(spec.classes * spec.out_dim).reshape(spec.classes, spec.out_dim)
    rows = rows / l2_norm(rows)[:, None]
    bank = EmbeddingBank(
        embeddings=rows.astype(dt),
        labels=tuple(f"class_{i}" for i in range(spec.classes)),
        temperature=spec.temperature,
    )
    return params, bank


def gen_synthetic_image(seed: int, height: int, width: int) -> np.ndarray:
    """Deterministic (3, H, W) image with values in [0, 1)."""
    rng = SplitMix64(seed)
    return rng.uniform(3 * height * width, 0.0, 1.0).reshape(3, height, width)
