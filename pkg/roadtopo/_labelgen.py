"""Dynamic, spatially-aware label assignment for discriminator supervision."""

from __future__ import annotations

import logging

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict

from ._errors import ShapeError
from ._params import LabelParams
from ._pyramid import LabelLevel, LabelPyramid
from ._raster import (
    BinaryMask,
    as_mask,
    as_probability,
    build_t0,
    check_same_shape,
    connected_components,
    skeletonize,
)

logger = logging.getLogger(__name__)


class Interruption(BaseModel):
    """A maximal 8-connected run of skeleton pixels missing from T0."""

    model_config = ConfigDict(frozen=True)

    pixels: tuple[tuple[int, int], ...]

    @property
    def size(self) -> int:
        return len(self.pixels)


class LabelResult(BaseModel):
    """Everything computed while labelling one (prediction, ground truth) pair."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    pyramid: LabelPyramid
    t0: BinaryMask
    gt_skeleton: BinaryMask
    interruptions: tuple[Interruption, ...]


def false_negative_set(gt_skeleton: npt.ArrayLike, t0: npt.ArrayLike) -> BinaryMask:
    skeleton = as_mask(gt_skeleton, name="ground-truth skeleton")
    covered = as_mask(t0, name="T0 mask")
    check_same_shape(skeleton, covered, "False-negative set")
    return skeleton & ~covered


def interruptions(fn_set: npt.ArrayLike) -> list[Interruption]:
    """Split false-negative pixels into components, ordered by first pixel."""
    labels, count = connected_components(fn_set)
    if count == 0:
        return []
    rows, cols = np.nonzero(labels)
    owners = labels[rows, cols]
    # np.nonzero walks in row-major order, so a stable sort keeps pixels sorted
    order = np.argsort(owners, kind="stable")
    bounds = np.searchsorted(owners[order], np.arange(1, count + 2))
    found = []
    for k in range(count):
        idx = order[bounds[k] : bounds[k + 1]]
        found.append(
            Interruption(
                pixels=tuple(zip(rows[idx].tolist(), cols[idx].tolist(), strict=True))
            )
        )
    found.sort(key=lambda i: i.pixels[0])
    return found


def _check_divisible(shape: tuple[int, ...], cell: int) -> None:
    if cell <= 0 or shape[0] % cell or shape[1] % cell:
        raise ShapeError(  # noqa: TRY003
            f"Image shape {shape} is not divisible into {cell}x{cell} cells"
        )


def finest_labels(
    gt_skeleton: npt.ArrayLike,
    t0: npt.ArrayLike,
    cell: int = 32,
    min_len: int = 4,
) -> npt.NDArray[np.uint8]:
    """Label a cell 0 when one interruption has `min_len` pixels inside it."""
    fn = false_negative_set(gt_skeleton, t0)
    _check_divisible(fn.shape, cell)
    n_rows, n_cols = fn.shape[0] // cell, fn.shape[1] // cell
    grid = np.ones((n_rows, n_cols), dtype=np.uint8)

    labels, count = connected_components(fn)
    if count == 0:
        return grid
    rows, cols = np.nonzero(labels)
    cell_index = (rows // cell) * n_cols + cols // cell
    key = cell_index.astype(np.int64) * (count + 1) + labels[rows, cols]
    keys, per_cell = np.unique(key, return_counts=True)
    broken = np.unique(keys[per_cell >= min_len] // (count + 1))
    grid.flat[broken] = 0
    return grid


def generate_labels(
    gt_mask: npt.ArrayLike,
    prob: npt.ArrayLike,
    params: LabelParams | None = None,
) -> LabelResult:
    """Run the full labelling pipeline and keep the intermediate masks."""
    params = params or LabelParams()
    truth = as_mask(gt_mask, name="ground truth")
    probs = as_probability(prob)
    check_same_shape(probs, truth, "Prediction against ground truth")
    _check_divisible(truth.shape, params.cell)

    t0 = build_t0(probs, truth, params.threshold, params.dilation)
    skeleton = skeletonize(truth)
    grid = finest_labels(skeleton, t0, params.cell, params.min_interruption)
    pyramid = LabelPyramid.from_finest(grid, params.cell)
    breaks = tuple(interruptions(false_negative_set(skeleton, t0)))
    logger.info(
        "labelled %s input: %d interruption(s), %d broken cell(s) at finest level",
        "x".join(map(str, truth.shape)),
        len(breaks),
        int((grid == 0).sum()),
    )
    return LabelResult(pyramid=pyramid, t0=t0, gt_skeleton=skeleton, interruptions=breaks)


def build_label_pyramid(
    gt_mask: npt.ArrayLike,
    prob: npt.ArrayLike,
    params: LabelParams | None = None,
) -> LabelPyramid:
    return generate_labels(gt_mask, prob, params).pyramid


def vanilla_labels(patch_size: int = 256) -> LabelPyramid:
    """Single whole-image label fixed to 0, the plain adversarial target."""
    return LabelPyramid(levels=[LabelLevel(level=0, patch_size=patch_size, rows=[[0]])])


__all__ = [
    "Interruption",
    "LabelResult",
    "build_label_pyramid",
    "false_negative_set",
    "finest_labels",
    "generate_labels",
    "interruptions",
    "vanilla_labels",
]
