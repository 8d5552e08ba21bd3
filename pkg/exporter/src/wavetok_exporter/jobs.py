"""Export jobs: prompt banks and image-tower weights into engine manifests."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backends import CheckpointBackend, resolve_checkpoint
from .convert import convert_visual_tower
from .errors import ExportError
from .manifest import write_bank_manifest, write_model_manifest
from .templates import CANONICAL_TEMPLATES


@dataclass
class ExportJob:
    checkpoint: str
    labels: list[str]
    templates: list[str] = field(default_factory=lambda: list(CANONICAL_TEMPLATES))
    out_bank: Path | None = None
    out_model: Path | None = None
    dtype: str = "f32"
    levels: int = 2
    heads: int | None = None  # override when neither checkpoint nor d/64 settles it

    def __post_init__(self):
        if not self.labels:
            raise ExportError("labels must be non-empty")
        dupes = sorted({l for l in self.labels if self.labels.count(l) > 1})
        if dupes:
            raise ExportError(f"duplicate labels: {dupes}")
        if not self.templates:
            raise ExportError("template list must be non-empty")
        bad = [t for t in self.templates if "{}" not in t]
        if bad:
            raise ExportError(f"templates without a {{}} placeholder: {bad}")
        if self.levels < 1:
            raise ExportError(f"levels must be >= 1, got {self.levels}")


def load_labels(path: Path | str) -> list[str]:
    """One class name per line; blanks and '#' comments skipped."""
    lines = Path(path).read_text().splitlines()
    labels = [ln.strip() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    if not labels:
        raise ExportError(f"no labels in {path}")
    return labels


def load_templates(path: Path | str | None) -> list[str]:
    if path is None:
        return list(CANONICAL_TEMPLATES)
    lines = Path(path).read_text().splitlines()
    templates = [ln.strip() for ln in lines if ln.strip()]
    if not templates:
        raise ExportError(f"no templates in {path}")
    return templates


def class_embeddings(job: ExportJob, backend: CheckpointBackend) -> np.ndarray:
    """Unit-normalized mean prompt embedding per class, rows in label order."""
    rows = []
    for label in job.labels:
        prompts = [t.format(label) for t in job.templates]
        emb = backend.text_embed(prompts).mean(axis=0)
        norm = float(np.linalg.norm(emb))
        if norm == 0.0:
            raise ExportError(f"class {label!r} embedded to the zero vector")
        rows.append(emb / norm)
    return np.stack(rows)


def export_text_bank(job: ExportJob, backend: CheckpointBackend | None = None) -> Path:
    """Write the bank manifest; returns the manifest path."""
    if job.out_bank is None:
        raise ExportError("job has no bank output path")
    backend = backend or resolve_checkpoint(job.checkpoint)
    rows = class_embeddings(job, backend)
    out = _manifest_path(job.out_bank, "bank")
    write_bank_manifest(
        out,
        rows,
        job.labels,
        temperature=backend.logit_scale(),
        dtype_name=job.dtype,
        extra_metadata={
            "source_checkpoint": backend.source,
            "source_sha256": backend.sha256,
            "templates": len(job.templates),
        },
    )
    return out


def export_vit_weights(job: ExportJob, backend: CheckpointBackend | None = None) -> Path:
    """Convert the image tower and write the model manifest."""
    if job.out_model is None:
        raise ExportError("job has no model output path")
    backend = backend or resolve_checkpoint(job.checkpoint)
    heads = job.heads if job.heads is not None else backend.heads_hint()
    tensors, report = convert_visual_tower(backend.state, levels=job.levels, heads=heads)
    out = _manifest_path(job.out_model, "model")
    write_model_manifest(
        out,
        tensors,
        dim=report.arch.dim,
        blocks=report.arch.blocks,
        heads=report.arch.heads,
        mlp_ratio=report.arch.mlp_ratio,
        patch=report.arch.patch,
        levels=job.levels,
        out_dim=report.arch.out_dim,
        dtype_name=job.dtype,
        extra_metadata={
            "untrained": True,
            "untrained_tensors": list(report.untrained),
            "dropped_tensors": list(report.dropped),
            "source_checkpoint": backend.source,
            "source_sha256": backend.sha256,
        },
    )
    return out


def _manifest_path(target: Path | str, default_stem: str) -> Path:
    """A directory target becomes <dir>/<stem>.json; a .json path is used as is."""
    target = Path(target)
    if target.suffix == ".json":
        return target
    return target / f"{default_stem}.json"
