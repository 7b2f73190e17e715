"""Multi-scale label and discriminator-output pyramids.

Level 0 is the coarsest (one label per whole image for a square input), the
last level is the finest grid of ``cell``-sized patches. Every level doubles
the number of rows and columns of the previous one.
"""

from __future__ import annotations

import typing
from collections.abc import Sequence

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ._errors import ShapeError

Bit = typing.Annotated[int, Field(ge=0, le=1)]
Probability = typing.Annotated[float, Field(ge=0.0, le=1.0)]


def _check_grid(rows: Sequence[Sequence[typing.Any]], level: int) -> None:
    if not rows or not rows[0]:
        raise ValueError(f"level {level} is empty")  # noqa: TRY003
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(  # noqa: TRY003
                f"level {level} row {i} has {len(row)} entries, expected {width}"
            )


def _check_levels(levels: Sequence[_LevelLike]) -> None:
    if not levels:
        raise ValueError("a pyramid needs at least one level")  # noqa: TRY003
    for k, level in enumerate(levels):
        if level.level != k:
            raise ValueError(f"level {k} is numbered {level.level}")  # noqa: TRY003
        _check_grid(level.rows, k)
        if k == 0:
            continue
        prev = levels[k - 1]
        if prev.patch_size != 2 * level.patch_size:
            raise ValueError(  # noqa: TRY003
                f"level {k} patch size {level.patch_size} is not half of {prev.patch_size}"
            )
        expected = (2 * len(prev.rows), 2 * len(prev.rows[0]))
        actual = (len(level.rows), len(level.rows[0]))
        if actual != expected:
            raise ValueError(  # noqa: TRY003
                f"level {k} has shape {actual}, expected {expected}"
            )


class _LevelLike(typing.Protocol):
    @property
    def level(self) -> int: ...
    @property
    def patch_size(self) -> int: ...
    @property
    def rows(self) -> Sequence[Sequence[typing.Any]]: ...


class LabelLevel(BaseModel):
    model_config = ConfigDict(frozen=True)

    level: int = Field(ge=0)
    patch_size: int = Field(gt=0)
    rows: list[list[Bit]]


class LabelPyramid(BaseModel):
    """Correct (1) / incorrect (0) labels per patch, at every scale."""

    model_config = ConfigDict(frozen=True)

    levels: list[LabelLevel]

    @model_validator(mode="after")
    def _validate_structure(self) -> typing.Self:
        _check_levels(self.levels)
        for k in range(len(self.levels) - 1):
            parent = np.asarray(self.levels[k].rows, dtype=np.uint8)
            if not np.array_equal(parent, and_reduce(self.levels[k + 1].rows)):
                raise ValueError(  # noqa: TRY003
                    f"level {k} is not the AND-reduction of level {k + 1}"
                )
        return self

    @classmethod
    def from_finest(cls, finest: npt.ArrayLike, patch_size: int) -> typing.Self:
        """Build every coarser level by AND-reducing 2×2 blocks of `finest`."""
        grid = np.asarray(finest, dtype=np.uint8)
        if grid.ndim != 2:
            raise ShapeError(f"Finest label grid must be 2-D, got {grid.shape}")  # noqa: TRY003
        n_rows, n_cols = grid.shape
        depth = int(np.log2(min(n_rows, n_cols))) if grid.size else 0
        if grid.size == 0 or any(n % (1 << depth) for n in (n_rows, n_cols)):
            raise ShapeError(  # noqa: TRY003
                f"Finest label grid {grid.shape} cannot be halved down to one row or column"
            )
        grids = [grid]
        for _ in range(depth):
            grids.append(and_reduce(grids[-1]))
        grids.reverse()
        levels = [
            LabelLevel(
                level=k,
                patch_size=patch_size << (depth - k),
                rows=g.tolist(),
            )
            for k, g in enumerate(grids)
        ]
        return cls(levels=levels)

    @property
    def patch_sizes(self) -> list[int]:
        return [level.patch_size for level in self.levels]

    @property
    def shapes(self) -> list[tuple[int, int]]:
        return [(len(level.rows), len(level.rows[0])) for level in self.levels]

    def matrices(self) -> list[npt.NDArray[np.uint8]]:
        return [np.asarray(level.rows, dtype=np.uint8) for level in self.levels]

    def matrix(self, k: int) -> npt.NDArray[np.uint8]:
        return np.asarray(self.levels[k].rows, dtype=np.uint8)


class OutputLevel(BaseModel):
    model_config = ConfigDict(frozen=True)

    level: int = Field(ge=0)
    patch_size: int = Field(gt=0)
    rows: list[list[Probability]]


class OutputPyramid(BaseModel):
    """Per-patch probabilities emitted by a multi-scale discriminator."""

    model_config = ConfigDict(frozen=True)

    levels: list[OutputLevel]

    @model_validator(mode="after")
    def _validate_structure(self) -> typing.Self:
        _check_levels(self.levels)
        return self

    @classmethod
    def from_matrices(
        cls, matrices: Sequence[npt.ArrayLike], finest_patch: int = 32
    ) -> typing.Self:
        depth = len(matrices) - 1
        return cls(
            levels=[
                OutputLevel(
                    level=k,
                    patch_size=finest_patch << (depth - k),
                    rows=np.asarray(m, dtype=np.float64).tolist(),
                )
                for k, m in enumerate(matrices)
            ]
        )

    def matrices(self) -> list[npt.NDArray[np.float64]]:
        return [np.asarray(level.rows, dtype=np.float64) for level in self.levels]


def and_reduce(grid: npt.ArrayLike) -> npt.NDArray[np.uint8]:
    """Logical AND over non-overlapping 2×2 blocks."""
    g = np.asarray(grid, dtype=np.uint8)
    n_rows, n_cols = g.shape
    if n_rows % 2 or n_cols % 2:
        raise ShapeError(f"Cannot AND-reduce a grid of shape {g.shape}")  # noqa: TRY003
    return g.reshape(n_rows // 2, 2, n_cols // 2, 2).min(axis=(1, 3))


__all__ = [
    "LabelLevel",
    "LabelPyramid",
    "OutputLevel",
    "OutputPyramid",
    "and_reduce",
]
