"""Checkpoint-to-manifest conversion for the wavetok inference engine.

Targets the engine's documented container format without importing the
engine: the manifest files themselves are the interface.
"""

__version__ = "0.1.0"

from .backends import (
    ARCHS,
    CheckpointBackend,
    make_synthetic_state,
    resolve_checkpoint,
    save_synthetic_checkpoint,
)
from .convert import convert_visual_tower, infer_visual_arch
from .errors import ExportError
from .jobs import (
    ExportJob,
    class_embeddings,
    export_text_bank,
    export_vit_weights,
    load_labels,
    load_templates,
)
from .manifest import write_bank_manifest, write_container, write_model_manifest
from .templates import CANONICAL_TEMPLATES

__all__ = [name for name in dir() if not name.startswith("_")]
