"""Subband pyramid -> ordered, grouped token sequence, plus all count arithmetic.

Group 0 carries the coarse LL tokens, group s >= 1 the detail tokens of
wavelet level L-s+1 in subband order LH, HL, HH (row-major inside each
subband). Every group starts with one readout token, so a full assembly has
spatial_tokens + (L+1) entries. Plans are a pure function of (H, W, P, L).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import ConfigurationError, DimensionError

if TYPE_CHECKING:  # pragma: no cover
    from .encoder import ModelParams
    from .wavelet import SubbandPyramid

KINDS = ("LL", "LH", "HL", "HH")
KIND_INDEX = {name: i for i, name in enumerate(KINDS)}
READOUT = "READOUT"


@dataclass(frozen=True)
class TokenDescriptor:
    """One token's provenance: subband kind, wavelet level, grid position."""

    kind: str
    level: int
    row: int
    col: int


@dataclass(frozen=True)
class TokenGroup:
    group_id: int
    tokens: tuple[TokenDescriptor, ...]
    readout_index: int  # position of the readout token inside the group

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def spatial_size(self) -> int:
        return len(self.tokens) - 1


@dataclass(frozen=True)
class TokenPlan:
    """Deterministic coarse-to-fine token layout for one (H, W, P, L) config."""

    height: int
    width: int
    patch: int
    levels: int
    groups: tuple[TokenGroup, ...]
    cumulative_counts: tuple[int, ...]  # incl. readouts, per step s = 0..L

    @property
    def total_tokens(self) -> int:
        return self.cumulative_counts[-1]

    def group_sizes(self) -> tuple[int, ...]:
        return tuple(g.size for g in self.groups)

    def group_ids(self) -> np.ndarray:
        """Per-token group id over the full sequence, non-decreasing."""
        return np.concatenate(
            [np.full(g.size, g.group_id, dtype=np.int64) for g in self.groups]
        )

    def group_slice(self, group_id: int) -> slice:
        start = sum(g.size for g in self.groups[:group_id])
        return slice(start, start + self.groups[group_id].size)

    def readout_positions(self) -> tuple[int, ...]:
        """Global sequence index of each group's readout token."""
        positions = []
        offset = 0
        for g in self.groups:
            positions.append(offset + g.readout_index)
            offset += g.size
        return tuple(positions)

    def to_json(self) -> str:
        doc = {
            "height": self.height,
            "width": self.width,
            "patch": self.patch,
            "levels": self.levels,
            "cumulative_counts": list(self.cumulative_counts),
            "groups": [
                {
                    "group_id": g.group_id,
                    "size": g.size,
                    "spatial_size": g.spatial_size,
                    "readout_index": g.readout_index,
                    "tokens": [
                        {"kind": t.kind, "level": t.level, "row": t.row, "col": t.col}
                        for t in g.tokens
                    ],
                }
                for g in self.groups
            ],
        }
        return json.dumps(doc, indent=2)


@dataclass
class TokenSequence:
    """Embedded tokens in plan order; group ids are non-decreasing."""

    embeddings: np.ndarray  # (n, d)
    group_ids: np.ndarray  # (n,)
    plan: TokenPlan

    def group(self, group_id: int) -> np.ndarray:
        return self.embeddings[self.plan.group_slice(group_id)]


def _check_strict_dims(height: int, width: int, patch: int, levels: int) -> None:
    if levels < 1:
        raise ConfigurationError(f"levels must be >= 1, got {levels}")
    if patch < 1:
        raise ConfigurationError(f"patch must be >= 1, got {patch}")
    for level in range(1, levels + 1):
        div = 1 << level
        if height % div or (height // div) % patch:
            raise ConfigurationError(
                f"level {level}: height {height} must be divisible by 2^{level} "
                f"with the quotient divisible by patch {patch}"
            )
        if width % div or (width // div) % patch:
            raise ConfigurationError(
                f"level {level}: width {width} must be divisible by 2^{level} "
                f"with the quotient divisible by patch {patch}"
            )


def _grid_dims(height: int, width: int, patch: int, level: int) -> tuple[int, int]:
    return height // (1 << level) // patch, width // (1 << level) // patch


def build_token_plan(height: int, width: int, patch: int, levels: int) -> TokenPlan:
    """Deterministic plan: group 0 = LL^(L) + readout, group s = D^(L-s+1) + readout."""
    _check_strict_dims(height, width, patch, levels)
    groups = []
    for s in range(levels + 1):
        level = levels if s == 0 else levels - s + 1
        gh, gw = _grid_dims(height, width, patch, level)
        tokens = [TokenDescriptor(kind=READOUT, level=level, row=-1, col=-1)]
        kinds = ("LL",) if s == 0 else ("LH", "HL", "HH")
        for kind in kinds:
            for r in range(gh):
                for c in range(gw):
                    tokens.append(TokenDescriptor(kind=kind, level=level, row=r, col=c))
        groups.append(TokenGroup(group_id=s, tokens=tuple(tokens), readout_index=0))
    cumulative, running = [], 0
    for g in groups:
        running += g.size
        cumulative.append(running)
    return TokenPlan(
        height=height,
        width=width,
        patch=patch,
        levels=levels,
        groups=tuple(groups),
        cumulative_counts=tuple(cumulative),
    )


def token_counts(height: int, width: int, patch: int, levels: int, step: int) -> int:
    """Cumulative token count after ``step`` refinements, readouts included.

    Equals HW/P^2 / 4^(L-s) spatial tokens plus s+1 readouts (one for the
    coarse group and one per refinement).
    """
    if not 0 <= step <= levels:
        raise ValueError(f"step {step} outside 0..{levels}")
    _check_strict_dims(height, width, patch, levels)
    spatial_full = (height // patch) * (width // patch)
    return spatial_full // (4 ** (levels - step)) + (step + 1)


def table1_counts(n_full: int, levels: int, col: int) -> int:
    """Published count convention: floor(N/4^(L-col)) + col.

    Reproduces the reference count table, including its floor rounding on
    grids that do not divide evenly.
    """
    if n_full < 1:
        raise ValueError(f"n_full must be >= 1, got {n_full}")
    if not 1 <= col <= levels:
        raise ValueError(f"col {col} outside 1..{levels}")
    return n_full // (4 ** (levels - col)) + col


def patchify_subband(stack: np.ndarray, patch: int) -> np.ndarray:
    """Split a (3, h, w) stack into non-overlapping P x P patch vectors.

    Patches are ordered row-major over the grid; within a patch the layout is
    channel-major, then row-major: (channel, row, col).
    """
    stack = np.asarray(stack)
    if stack.ndim != 3 or stack.shape[0] != 3:
        raise DimensionError(f"expected (3, h, w) stack, got {stack.shape}")
    _, h, w = stack.shape
    if h % patch or w % patch:
        raise DimensionError(f"dims {h}x{w} not divisible by patch {patch}")
    gh, gw = h // patch, w // patch
    tiles = stack.reshape(3, gh, patch, gw, patch)
    tiles = tiles.transpose(1, 3, 0, 2, 4)  # (gh, gw, 3, P, P)
    return tiles.reshape(gh * gw, 3 * patch * patch)


def sincos_position_codes(grid_h: int, grid_w: int, dim: int) -> np.ndarray:
    """Deterministic 2D sinusoidal codes over a grid, row-major, shape (gh*gw, dim).

    Half the channels encode the row index, half the column, each as
    interleaved sin/cos at geometrically spaced frequencies.
    """
    if dim % 4:
        raise ConfigurationError(f"position codes need dim divisible by 4, got {dim}")
    quarter = dim // 4
    omega = 1.0 / (10000.0 ** (np.arange(quarter, dtype=np.float64) / quarter))
    rows = np.repeat(np.arange(grid_h, dtype=np.float64), grid_w)
    cols = np.tile(np.arange(grid_w, dtype=np.float64), grid_h)
    row_angle = rows[:, None] * omega[None, :]
    col_angle = cols[:, None] * omega[None, :]
    return np.concatenate(
        [np.sin(row_angle), np.cos(row_angle), np.sin(col_angle), np.cos(col_angle)],
        axis=1,
    )


def _subband_array(pyramid: "SubbandPyramid", kind: str, level: int) -> np.ndarray:
    if kind == "LL":
        return pyramid.ll
    bands = pyramid.detail(level)
    return {"LH": bands.lh, "HL": bands.hl, "HH": bands.hh}[kind]


def embed_group(
    pyramid: "SubbandPyramid",
    plan: TokenPlan,
    group_id: int,
    params: "ModelParams",
) -> np.ndarray:
    """Embeddings for one group: per-kind patch projection + positional,
    kind and group codes; the readout slot is the group's learned vector."""
    if (pyramid.height, pyramid.width) != (plan.height, plan.width):
        raise DimensionError(
            f"pyramid {pyramid.height}x{pyramid.width} does not match plan "
            f"{plan.height}x{plan.width}"
        )
    if pyramid.levels != plan.levels:
        raise DimensionError(
            f"pyramid has {pyramid.levels} levels, plan has {plan.levels}"
        )
    if plan.patch != params.patch or plan.levels != params.levels:
        raise DimensionError("plan (patch, levels) do not match model params")
    dtype = params.dtype
    group = plan.groups[group_id]
    level = levels_for_group(plan.levels, group_id)
    gh, gw = _grid_dims(plan.height, plan.width, plan.patch, level)
    pos = sincos_position_codes(gh, gw, params.dim).astype(dtype)

    out = np.empty((group.size, params.dim), dtype=dtype)
    out[group.readout_index] = params.readout_embed[group_id]
    offset = 1  # readout occupies slot 0
    kinds = ("LL",) if group_id == 0 else ("LH", "HL", "HH")
    for kind in kinds:
        k = KIND_INDEX[kind]
        patches = patchify_subband(
            _subband_array(pyramid, kind, level), plan.patch
        ).astype(dtype)
        if patches.shape[1] != params.proj_weight.shape[1]:
            raise DimensionError(
                f"patch dim {patches.shape[1]} does not match projection "
                f"input dim {params.proj_weight.shape[1]}"
            )
        emb = patches @ params.proj_weight[k] + params.proj_bias[k]
        emb = emb + pos + params.kind_embed[k] + params.level_embed[group_id]
        out[offset : offset + emb.shape[0]] = emb
        offset += emb.shape[0]
    return out


def embed_tokens(
    pyramid: "SubbandPyramid", plan: TokenPlan, params: "ModelParams"
) -> TokenSequence:
    """Full coarse-to-fine sequence, one group after another."""
    parts = [embed_group(pyramid, plan, s, params) for s in range(plan.levels + 1)]
    return TokenSequence(
        embeddings=np.concatenate(parts, axis=0),
        group_ids=plan.group_ids(),
        plan=plan,
    )


def levels_for_group(levels: int, group_id: int) -> int:
    """Wavelet level feeding a group: L for groups 0 and 1, then finer."""
    return levels if group_id == 0 else levels - group_id + 1
