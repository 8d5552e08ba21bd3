"""Writer for the engine's tensor-manifest container (docs/formats.md).

Implemented against the published format contract, not against the engine's
code, so the two sides stay independently testable: one JSON document plus
one little-endian blob, tensors in order, offsets gap-free, blob length
exact. The engine's loader is the round-trip oracle in the test suite.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ExportError

FORMAT_VERSION = 1
DTYPE_CODES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


def engine_model_schema(
    dim: int, blocks: int, patch: int, levels: int, mlp_ratio: int, out_dim: int
) -> list[tuple[str, tuple[int, ...]]]:
    """The engine's documented model tensor table, in writer order."""
    p2 = 3 * patch * patch
    rd = mlp_ratio * dim
    schema: list[tuple[str, tuple[int, ...]]] = []
    for kind in ("ll", "lh", "hl", "hh"):
        schema.append((f"embed.proj.{kind}.weight", (p2, dim)))
        schema.append((f"embed.proj.{kind}.bias", (dim,)))
    schema.append(("embed.level", (levels + 1, dim)))
    schema.append(("embed.kind", (4, dim)))
    schema.append(("embed.readout", (levels + 1, dim)))
    for i in range(blocks):
        pre = f"block.{i}"
        schema += [
            (f"{pre}.ln1.gain", (dim,)), (f"{pre}.ln1.bias", (dim,)),
            (f"{pre}.attn.wq", (dim, dim)), (f"{pre}.attn.wk", (dim, dim)),
            (f"{pre}.attn.wv", (dim, dim)), (f"{pre}.attn.wo", (dim, dim)),
            (f"{pre}.attn.bq", (dim,)), (f"{pre}.attn.bk", (dim,)),
            (f"{pre}.attn.bv", (dim,)), (f"{pre}.attn.bo", (dim,)),
            (f"{pre}.ln2.gain", (dim,)), (f"{pre}.ln2.bias", (dim,)),
            (f"{pre}.mlp.w1", (dim, rd)), (f"{pre}.mlp.b1", (rd,)),
            (f"{pre}.mlp.w2", (rd, dim)), (f"{pre}.mlp.b2", (dim,)),
        ]
    schema += [
        ("final_norm.gain", (dim,)), ("final_norm.bias", (dim,)),
        ("readout.weight", (dim, out_dim)), ("readout.bias", (out_dim,)),
    ]
    return schema


def write_container(
    json_path: Path | str,
    tensors: list[tuple[str, np.ndarray]],
    metadata: dict,
    dtype_name: str = "f32",
) -> None:
    """Write `<name>.json` + `<name>.bin` next to each other."""
    if dtype_name not in DTYPE_CODES:
        raise ExportError(f"unsupported dtype {dtype_name!r}")
    dtype = DTYPE_CODES[dtype_name]
    json_path = Path(json_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    seen: set[str] = set()
    entries, chunks, offset = [], [], 0
    for name, arr in tensors:
        if name in seen:
            raise ExportError(f"duplicate tensor name {name!r}")
        seen.add(name)
        raw = np.ascontiguousarray(arr, dtype=dtype).tobytes()
        entries.append(
            {
                "name": name,
                "shape": list(np.asarray(arr).shape),
                "byte_offset": offset,
                "byte_len": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    doc = {
        "version": FORMAT_VERSION,
        "dtype": dtype_name,
        "blob": json_path.stem + ".bin",
        "tensors": entries,
        "metadata": metadata,
    }
    json_path.write_text(json.dumps(doc, indent=2) + "\n")
    (json_path.parent / (json_path.stem + ".bin")).write_bytes(b"".join(chunks))


def write_model_manifest(
    json_path: Path | str,
    tensors: dict[str, np.ndarray],
    *,
    dim: int,
    blocks: int,
    heads: int,
    mlp_ratio: int,
    patch: int,
    levels: int,
    out_dim: int,
    dtype_name: str = "f32",
    extra_metadata: dict | None = None,
) -> None:
    """Validate against the schema and write; mismatches name every tensor."""
    schema = engine_model_schema(dim, blocks, patch, levels, mlp_ratio, out_dim)
    names = [name for name, _ in schema]
    missing = sorted(set(names) - tensors.keys())
    extra = sorted(tensors.keys() - set(names))
    if missing or extra:
        raise ExportError(f"tensor set mismatch: missing={missing} extra={extra}")
    bad_shapes = [
        f"{name}: have {tuple(tensors[name].shape)}, want {shape}"
        for name, shape in schema
        if tuple(tensors[name].shape) != shape
    ]
    if bad_shapes:
        raise ExportError("shape mismatch: " + "; ".join(bad_shapes))
    metadata = {
        "kind": "model",
        "dim": dim,
        "blocks": blocks,
        "heads": heads,
        "mlp_ratio": mlp_ratio,
        "patch": patch,
        "levels": levels,
        "out_dim": out_dim,
    }
    metadata.update(extra_metadata or {})
    write_container(
        json_path, [(name, tensors[name]) for name, _ in schema], metadata, dtype_name
    )


def write_bank_manifest(
    json_path: Path | str,
    embeddings: np.ndarray,
    labels: list[str],
    temperature: float,
    *,
    dtype_name: str = "f32",
    extra_metadata: dict | None = None,
) -> None:
    embeddings = np.asarray(embeddings)
    if embeddings.ndim != 2 or embeddings.shape[0] != len(labels):
        raise ExportError(
            f"embeddings {embeddings.shape} do not match {len(labels)} labels"
        )
    metadata = {
        "kind": "bank",
        "out_dim": embeddings.shape[1],
        "classes": embeddings.shape[0],
        "labels": list(labels),
        "temperature": float(temperature),
    }
    metadata.update(extra_metadata or {})
    write_container(json_path, [("embeddings", embeddings)], metadata, dtype_name)
