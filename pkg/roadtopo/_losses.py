"""Reference loss kernels with analytic gradients.

Losses are sums over pixels or pyramid cells. Every probability entering a
logarithm is clamped to ``[eps, 1 - eps]`` and the gradient is zero wherever
the clamp changed the value. The discriminator network sits between the
generator output and the discriminator outputs; its backward pass is left to
the training stack, and the thresholding stage in front of it backpropagates as
the identity (see `ste_backward`).
"""

from __future__ import annotations

import enum
import math
from collections.abc import Sequence

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict

from ._errors import DomainError, ShapeError
from ._labelgen import vanilla_labels
from ._metrics import Provenance
from ._params import EPSILON, LossParams
from ._pyramid import LabelPyramid, OutputPyramid
from ._raster import FloatArray, as_mask, as_probability, check_same_shape

type PyramidLike = OutputPyramid | LabelPyramid | Sequence[npt.ArrayLike]


class LossKind(enum.StrEnum):
    BCE = "bce"
    DISCRIMINATOR = "discriminator"
    GENERATOR = "generator"
    VANILLA = "vanilla"


class LossValue(BaseModel):
    """A loss with its analytic gradients, each shaped like the input it differentiates."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    loss: float
    grad_pred: FloatArray | None = None
    grad_d_pred: tuple[FloatArray, ...] = ()
    grad_d_real: tuple[FloatArray, ...] = ()
    parts: dict[str, float] = {}


class LossReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: LossKind
    loss: float
    parts: dict[str, float]
    params: LossParams
    provenance: Provenance


def apply_clamp(p: npt.ArrayLike, eps: float = EPSILON) -> tuple[FloatArray, npt.NDArray[np.bool_]]:
    """Clamp into ``[eps, 1 - eps]``; also return where the input was left as is."""
    if not 0.0 < eps < 0.5:
        raise DomainError(f"Clamp epsilon must lie in (0, 0.5), got {eps}")  # noqa: TRY003
    arr = np.asarray(p, dtype=np.float64)
    free = (arr >= eps) & (arr <= 1.0 - eps)
    return np.clip(arr, eps, 1.0 - eps), free


def _total(terms: FloatArray) -> float:
    return math.fsum(terms.ravel().tolist())


def _bce_terms(
    p: FloatArray, y: FloatArray, eps: float
) -> tuple[float, FloatArray]:
    clamped, free = apply_clamp(p, eps)
    terms = -(y * np.log(clamped) + (1.0 - y) * np.log1p(-clamped))
    grad = np.where(free, (clamped - y) / (clamped * (1.0 - clamped)), 0.0)
    return _total(terms), grad


def _neg_log_terms(p: FloatArray, eps: float) -> tuple[float, FloatArray]:
    clamped, free = apply_clamp(p, eps)
    return _total(-np.log(clamped)), np.where(free, -1.0 / clamped, 0.0)


def _levels(pyramid: PyramidLike, name: str) -> list[FloatArray]:
    if isinstance(pyramid, (OutputPyramid, LabelPyramid)):
        return [m.astype(np.float64) for m in pyramid.matrices()]
    levels = []
    for k, level in enumerate(pyramid):
        levels.append(as_probability(level, name=f"{name} level {k}"))
    if not levels:
        raise ShapeError(f"{name} has no levels")  # noqa: TRY003
    return levels


def _check_pyramids(**pyramids: list[FloatArray]) -> None:
    (first_name, first), *rest = pyramids.items()
    for name, levels in rest:
        if len(levels) != len(first):
            raise ShapeError(  # noqa: TRY003
                f"{name} has {len(levels)} levels, {first_name} has {len(first)}"
            )
        for k, (a, b) in enumerate(zip(first, levels, strict=True)):
            if a.shape != b.shape:
                raise ShapeError(  # noqa: TRY003
                    f"Level {k}: {first_name} is {a.shape}, {name} is {b.shape}"
                )


def _cells(levels: list[FloatArray]) -> int:
    return sum(level.size for level in levels)


def bce_loss(
    pred: npt.ArrayLike,
    gt: npt.ArrayLike,
    *,
    eps: float = EPSILON,
    normalize: bool = False,
    with_grad: bool = True,
) -> LossValue:
    """Pixel-wise binary cross-entropy of a probability map against a mask."""
    probs = as_probability(pred, name="prediction")
    truth = as_mask(gt, name="ground truth")
    check_same_shape(probs, truth, "BCE prediction against ground truth")
    loss, grad = _bce_terms(probs, truth.astype(np.float64), eps)
    if normalize:
        loss, grad = loss / probs.size, grad / probs.size
    return LossValue(
        loss=loss,
        grad_pred=grad if with_grad else None,
        parts={"bce": loss},
    )


def discriminator_loss(
    d_on_pred: PyramidLike,
    labels: PyramidLike,
    d_on_real: PyramidLike,
    *,
    eps: float = EPSILON,
    normalize: bool = False,
) -> LossValue:
    """Multi-scale discriminator loss.

    Outputs on the prediction are pushed towards the per-patch labels, outputs
    on the ground truth towards 1 everywhere.
    """
    fake = _levels(d_on_pred, "discriminator output on prediction")
    targets = _levels(labels, "label pyramid")
    real = _levels(d_on_real, "discriminator output on ground truth")
    _check_pyramids(labels=targets, d_on_pred=fake, d_on_real=real)

    fake_loss, fake_grads = 0.0, []
    real_loss, real_grads = 0.0, []
    for p, y, r in zip(fake, targets, real, strict=True):
        term, grad = _bce_terms(p, y, eps)
        fake_loss += term
        fake_grads.append(grad)
        term, grad = _neg_log_terms(r, eps)
        real_loss += term
        real_grads.append(grad)
    if normalize:
        n_fake, n_real = _cells(fake), _cells(real)
        fake_loss /= n_fake
        real_loss /= n_real
        fake_grads = [g / n_fake for g in fake_grads]
        real_grads = [g / n_real for g in real_grads]
    return LossValue(
        loss=fake_loss + real_loss,
        grad_d_pred=tuple(fake_grads),
        grad_d_real=tuple(real_grads),
        parts={"fake": fake_loss, "real": real_loss},
    )


def generator_loss(
    pred: npt.ArrayLike,
    gt: npt.ArrayLike,
    d_on_pred: PyramidLike,
    lambda_a: float = 0.005,
    *,
    eps: float = EPSILON,
    normalize: bool = False,
) -> LossValue:
    """BCE plus the weighted adversarial term ``-log D`` over every pyramid cell."""
    if lambda_a < 0:
        raise DomainError(  # noqa: TRY003
            f"Adversarial weight must be non-negative, got {lambda_a}"
        )
    segmentation = bce_loss(pred, gt, eps=eps, normalize=normalize)
    outputs = _levels(d_on_pred, "discriminator output on prediction")
    adversarial = 0.0
    grads = []
    for level in outputs:
        term, grad = _neg_log_terms(level, eps)
        adversarial += term
        grads.append(lambda_a * grad)
    if normalize:
        n = _cells(outputs)
        adversarial /= n
        grads = [g / n for g in grads]
    return LossValue(
        loss=segmentation.loss + lambda_a * adversarial,
        grad_pred=segmentation.grad_pred,
        grad_d_pred=tuple(grads),
        parts={"bce": segmentation.loss, "adversarial": adversarial},
    )


def recursive_generator_loss(
    preds: Sequence[npt.ArrayLike],
    gt: npt.ArrayLike,
    d_outputs: Sequence[PyramidLike],
    lambda_a: float = 0.005,
    *,
    eps: float = EPSILON,
    normalize: bool = False,
) -> LossValue:
    """Generator loss summed over the predictions of a recurrent generator.

    `grad_pred` stacks one gradient per recursion; `grad_d_pred` lists the
    pyramid gradients of every recursion in order.
    """
    if len(preds) != len(d_outputs) or not preds:
        raise ShapeError(  # noqa: TRY003
            f"Got {len(preds)} prediction(s) but {len(d_outputs)} discriminator output(s)"
        )
    steps = [
        generator_loss(p, gt, d, lambda_a, eps=eps, normalize=normalize)
        for p, d in zip(preds, d_outputs, strict=True)
    ]
    parts = {
        name: math.fsum(step.parts[name] for step in steps) for name in ("bce", "adversarial")
    }
    return LossValue(
        loss=math.fsum(step.loss for step in steps),
        grad_pred=np.stack([step.grad_pred for step in steps if step.grad_pred is not None]),
        grad_d_pred=tuple(g for step in steps for g in step.grad_d_pred),
        parts=parts,
    )


def vanilla_gan_reduction(
    d_scalar_on_pred: float, d_scalar_on_real: float, *, eps: float = EPSILON
) -> LossValue:
    """Single-output discriminator loss with the prediction always labelled 0."""
    return discriminator_loss(
        [[[d_scalar_on_pred]]],
        vanilla_labels(),
        [[[d_scalar_on_real]]],
        eps=eps,
    )


__all__ = [
    "LossKind",
    "LossReport",
    "LossValue",
    "PyramidLike",
    "apply_clamp",
    "bce_loss",
    "discriminator_loss",
    "generator_loss",
    "recursive_generator_loss",
    "vanilla_gan_reduction",
]
