"""Resolved parameter sets with their published defaults."""

from __future__ import annotations

import typing

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ._errors import DomainError

PYRAMID_PATCH_SIZES: tuple[int, ...] = (256, 128, 64, 32)
"""Patch sizes of the label pyramid for a 256×256 input, coarsest first."""

EPSILON = 1e-7
"""Clamp applied to every probability entering a logarithm."""

MAX_SEED = 2**64 - 1


class _Params(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    @classmethod
    def build(cls, **overrides: typing.Any) -> typing.Self:
        """Validate overrides on top of the defaults.

        `None` values are dropped so unset CLI flags keep the defaults.
        """
        values = {k: v for k, v in overrides.items() if v is not None}
        try:
            return cls.model_validate(values)
        except ValidationError as exc:
            raise DomainError(f"Invalid {cls.__name__}: {exc}") from exc  # noqa: TRY003


class LabelParams(_Params):
    """Knobs of the dynamic label assignment."""

    threshold: float = Field(
        0.5, gt=0.0, lt=1.0, description="Probability at or above which a pixel is road."
    )
    dilation: int = Field(
        3, ge=0, description="Radius of the square dilation applied to the ground truth."
    )
    cell: int = Field(32, gt=0, description="Side of the finest label patch, in pixels.")
    min_interruption: int = Field(
        4, ge=1, description="Smallest missed skeleton run that marks a patch as broken."
    )


class MetricParams(_Params):
    """Knobs of the evaluation metrics."""

    ccq_tolerance: float = Field(
        2.0, ge=0.0, description="Allowed pixel shift when matching skeleton pixels."
    )
    tlts_tolerance: float = Field(
        0.05, ge=0.0, description="Relative path length error still counted as correct."
    )
    match_distance: float = Field(
        25.0, ge=0.0, description="Largest distance at which two nodes correspond."
    )
    path_samples: int = Field(500, gt=0, description="Node pairs sampled for TLTS and APLS.")
    hm_radius: float = Field(
        300.0, ge=0.0, description="Geodesic radius of each holes-and-marbles subgraph."
    )
    hm_subgraphs: int = Field(1000, gt=0, description="Number of holes-and-marbles subgraphs.")
    hm_spacing: float = Field(
        10.0, gt=0.0, description="Geodesic spacing of holes and marbles along the roads."
    )
    junct_angle: float = Field(
        45.0, gt=0.0, le=180.0, description="Largest angle, in degrees, between matched edges."
    )
    render_thickness: int = Field(
        1, ge=1, description="Line thickness used when a ground-truth graph is rendered."
    )
    exhaustive: bool = Field(
        False, description="Enumerate every pair and start node instead of sampling."
    )
    seed: int = Field(0, ge=0, le=MAX_SEED, description="Seed of every sampled metric.")


class LossParams(_Params):
    """Knobs of the reference loss kernels."""

    lambda_a: float = Field(0.005, ge=0.0, description="Weight of the adversarial term.")
    eps: float = Field(
        EPSILON, gt=0.0, lt=0.5, description="Clamp applied to probabilities inside logarithms."
    )
    normalize: bool = Field(False, description="Divide every sum by its element count.")


__all__ = [
    "EPSILON",
    "LabelParams",
    "LossParams",
    "MAX_SEED",
    "MetricParams",
    "PYRAMID_PATCH_SIZES",
]
