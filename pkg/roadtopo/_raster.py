"""Binary raster primitives: thresholding, dilation, thinning and mask algebra.

Arrays are indexed ``[row, col]`` with the origin at the top-left corner,
``x`` running along columns and ``y`` along rows. Pixels outside the image are
treated as background by every neighbourhood operation.
"""

from __future__ import annotations

import logging

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict
from scipy import ndimage
from skimage.morphology import skeletonize as _sk_skeletonize

from ._errors import DomainError, ShapeError

logger = logging.getLogger(__name__)

type BinaryMask = npt.NDArray[np.bool_]
type ProbabilityMap = npt.NDArray[np.float64]
type FloatArray = npt.NDArray[np.float64]

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def as_mask(m: npt.ArrayLike, *, name: str = "mask") -> BinaryMask:
    """Coerce an array-like of 0/1 (or booleans) into a 2-D boolean mask."""
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")  # noqa: TRY003
    if arr.dtype == np.bool_:
        return arr
    invalid = (arr != 0) & (arr != 1)
    if invalid.any():
        row, col = np.argwhere(invalid)[0]
        raise DomainError(  # noqa: TRY003
            f"{name} pixel (row={row}, col={col}) is {arr[row, col]!r}, expected 0 or 1"
        )
    return arr.astype(bool)


def as_probability(p: npt.ArrayLike, *, name: str = "probability map") -> ProbabilityMap:
    """Coerce an array-like into a 2-D float map with values in [0, 1]."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")  # noqa: TRY003
    invalid = ~((arr >= 0.0) & (arr <= 1.0))
    if invalid.any():
        row, col = np.argwhere(invalid)[0]
        raise DomainError(  # noqa: TRY003
            f"{name} pixel (row={row}, col={col}) is {arr[row, col]!r}, outside [0, 1]"
        )
    return arr


def check_same_shape(a: npt.NDArray[np.generic], b: npt.NDArray[np.generic], what: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shapes {a.shape} and {b.shape} differ")  # noqa: TRY003


def threshold_forward(p: npt.ArrayLike, t: float = 0.5) -> BinaryMask:
    """Binarize a probability map; values equal to `t` map to 1."""
    if not 0.0 < t < 1.0:
        raise DomainError(f"Threshold must lie strictly inside (0, 1), got {t}")  # noqa: TRY003
    return as_probability(p) >= t


def ste_backward(grad_out: npt.ArrayLike, p: npt.ArrayLike) -> FloatArray:
    """Backward pass of the straight-through estimator: the identity."""
    grad = np.array(grad_out, dtype=np.float64, copy=True)
    probs = np.asarray(p)
    if grad.shape != probs.shape:
        raise ShapeError(  # noqa: TRY003
            f"Gradient shape {grad.shape} does not match probability map shape {probs.shape}"
        )
    return grad


def dilate(m: npt.ArrayLike, r: int) -> BinaryMask:
    """Dilate with a ``(2r+1)×(2r+1)`` square, i.e. a Chebyshev ball of radius `r`."""
    if r < 0:
        raise DomainError(f"Dilation radius must be non-negative, got {r}")  # noqa: TRY003
    mask = as_mask(m)
    if r == 0:
        return mask.copy()
    grown = ndimage.maximum_filter(
        mask.view(np.uint8), size=2 * r + 1, mode="constant", cval=0
    )
    return grown.astype(bool)


def skeletonize(m: npt.ArrayLike) -> BinaryMask:
    """Zhang-Suen thinning with 8-connectivity."""
    mask = as_mask(m)
    if not mask.any():
        return np.zeros_like(mask)
    return np.asarray(_sk_skeletonize(mask, method="zhang"), dtype=bool)


def mask_intersect(a: npt.ArrayLike, b: npt.ArrayLike) -> BinaryMask:
    ma, mb = as_mask(a, name="left mask"), as_mask(b, name="right mask")
    check_same_shape(ma, mb, "Mask intersection")
    return np.logical_and(ma, mb)


def connected_components(m: npt.ArrayLike) -> tuple[npt.NDArray[np.int32], int]:
    """Label 8-connected foreground components, numbered in raster-scan order."""
    labels, count = ndimage.label(as_mask(m), structure=_EIGHT_CONNECTED)
    return labels, int(count)


def build_t0(
    p: npt.ArrayLike, gt: npt.ArrayLike, t: float = 0.5, r: int = 3
) -> BinaryMask:
    """Thresholded prediction restricted to the dilated ground truth."""
    probs = as_probability(p)
    truth = as_mask(gt, name="ground truth")
    check_same_shape(probs, truth, "Prediction against ground truth")
    t0 = mask_intersect(threshold_forward(probs, t), dilate(truth, r))
    logger.debug("T0 mask built: %d of %d pixels set", int(t0.sum()), t0.size)
    return t0


class DiscriminatorInput(BaseModel):
    """Road mask plus the optional companion image, stacked channel-first."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mask: BinaryMask
    image: npt.NDArray[np.generic] | None = None

    @property
    def channels(self) -> int:
        if self.image is None:
            return 1
        return 1 + (1 if self.image.ndim == 2 else self.image.shape[2])

    def stacked(self) -> FloatArray:
        """Return a ``(C, H, W)`` float array, mask first then image channels."""
        planes = [self.mask.astype(np.float64)[np.newaxis]]
        if self.image is not None:
            image = self.image.astype(np.float64)
            if image.ndim == 2:
                image = image[:, :, np.newaxis]
            planes.append(np.moveaxis(image, 2, 0))
        return np.concatenate(planes, axis=0)


def build_discriminator_input(
    t0: npt.ArrayLike, image: npt.ArrayLike | None = None
) -> DiscriminatorInput:
    mask = as_mask(t0, name="T0 mask")
    if image is None:
        return DiscriminatorInput(mask=mask)
    img = np.asarray(image)
    if img.ndim not in (2, 3) or img.shape[:2] != mask.shape:
        raise ShapeError(  # noqa: TRY003
            f"Image shape {img.shape} does not match mask shape {mask.shape}"
        )
    return DiscriminatorInput(mask=mask, image=img)


__all__ = [
    "BinaryMask",
    "DiscriminatorInput",
    "FloatArray",
    "ProbabilityMap",
    "as_mask",
    "as_probability",
    "build_discriminator_input",
    "build_t0",
    "check_same_shape",
    "connected_components",
    "dilate",
    "mask_intersect",
    "skeletonize",
    "ste_backward",
    "threshold_forward",
]
