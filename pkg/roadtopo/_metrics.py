"""Topology-aware evaluation of predicted road networks.

Raster overlap is measured with relaxed correctness / completeness / quality on
skeletons. Connectivity is measured on road graphs: shortest-path agreement
(TLTS and APLS), junction recovery (JUNCT) and local reachability (holes and
marbles). Every sampled metric draws from a seeded generator so reports are
reproducible.
"""

from __future__ import annotations

import itertools
import logging
import math
import typing
from collections.abc import Iterable, Mapping, Sequence

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field
from scipy import ndimage
from scipy.spatial import cKDTree

from . import __version__
from ._errors import DomainError
from ._graph import (
    RoadGraph,
    connected_pairs,
    junctions,
    mask_to_graph,
    render_graph,
    snap_node,
    walk_points,
)
from ._params import PYRAMID_PATCH_SIZES, LabelParams, LossParams, MetricParams
from ._raster import as_mask, check_same_shape, skeletonize

logger = logging.getLogger(__name__)

REPORT_FORMAT_VERSION = 1

Fraction = typing.Annotated[float, Field(ge=0.0, le=1.0)]

# independent random streams per metric, so changing one sample count
# never shifts the draws of another metric
_TLTS_STREAM = 0
_APLS_GT_STREAM = 1
_APLS_PRED_STREAM = 2
_HM_STREAM = 3


class _Result(BaseModel):
    model_config = ConfigDict(frozen=True)


class CcqResult(_Result):
    correctness: Fraction
    completeness: Fraction
    quality: Fraction
    tp_pred: int = Field(ge=0)
    tp_gt: int = Field(ge=0)
    n_pred: int = Field(ge=0)
    n_gt: int = Field(ge=0)

    @classmethod
    def from_counts(cls, tp_pred: int, tp_gt: int, n_pred: int, n_gt: int) -> typing.Self:
        if n_pred == 0 and n_gt == 0:
            correctness = completeness = quality = 1.0
        else:
            correctness = tp_pred / n_pred if n_pred else 1.0
            completeness = tp_gt / n_gt if n_gt else 1.0
            quality = tp_pred / (n_pred + n_gt - tp_gt)
        return cls(
            correctness=correctness,
            completeness=completeness,
            quality=quality,
            tp_pred=tp_pred,
            tp_gt=tp_gt,
            n_pred=n_pred,
            n_gt=n_gt,
        )


class PrecisionRecall(_Result):
    precision: Fraction
    recall: Fraction
    f1: Fraction

    @classmethod
    def from_ratios(cls, precision: float, recall: float, **extra: typing.Any) -> typing.Self:
        total = precision + recall
        f1 = 2 * precision * recall / total if total > 0 else 0.0
        return cls(precision=precision, recall=recall, f1=f1, **extra)


class HolesAndMarblesResult(PrecisionRecall):
    holes: int = Field(ge=0)
    matched_holes: int = Field(ge=0)
    marbles: int = Field(ge=0)
    matched_marbles: int = Field(ge=0)

    @classmethod
    def from_counts(
        cls, holes: int, matched_holes: int, marbles: int, matched_marbles: int
    ) -> typing.Self:
        return cls.from_ratios(
            matched_marbles / marbles if marbles else 0.0,
            matched_holes / holes if holes else 1.0,
            holes=holes,
            matched_holes=matched_holes,
            marbles=marbles,
            matched_marbles=matched_marbles,
        )


class MatchedPathSample(_Result):
    """One ground-truth path and its counterpart in the prediction."""

    gt: tuple[int, int]
    pred: tuple[int, int] | None
    gt_length: float
    pred_length: float | None

    @property
    def feasible(self) -> bool:
        return self.pred_length is not None


class TltsResult(_Result):
    correct: Fraction
    too_long: Fraction
    too_short: Fraction
    infeasible: Fraction
    n_samples: int = Field(ge=0)


class AplsResult(_Result):
    score: Fraction
    gt_to_pred: Fraction
    pred_to_gt: Fraction
    n_samples: int = Field(ge=0)


class ResolvedParams(_Result):
    """Every knob in effect for a run, defaults included."""

    metrics: MetricParams = MetricParams()
    labels: LabelParams = LabelParams()
    losses: LossParams = LossParams()
    pyramid_patch_sizes: tuple[int, ...] = PYRAMID_PATCH_SIZES


class Provenance(_Result):
    inputs: dict[str, str] = {}
    tool_version: str = __version__
    format_version: int = REPORT_FORMAT_VERSION


class Report(_Result):
    metrics: dict[str, float]
    counts: dict[str, int]
    seeds: dict[str, int]
    params: ResolvedParams
    provenance: Provenance


class Summary(_Result):
    """Pooled result of a batch of reports."""

    tiles: list[str]
    metrics: dict[str, float]
    counts: dict[str, int]
    params: ResolvedParams
    provenance: Provenance
    errors: dict[str, str] = {}


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


def ccq(pred: npt.ArrayLike, gt: npt.ArrayLike, tol: float = 2.0) -> CcqResult:
    """Relaxed correctness, completeness and quality of skeletonized masks."""
    if tol < 0:
        raise DomainError(f"CCQ tolerance must be non-negative, got {tol}")  # noqa: TRY003
    pred_s = skeletonize(as_mask(pred, name="prediction"))
    gt_s = skeletonize(as_mask(gt, name="ground truth"))
    check_same_shape(pred_s, gt_s, "CCQ prediction against ground truth")
    n_pred, n_gt = int(pred_s.sum()), int(gt_s.sum())

    tp_pred = tp_gt = 0
    if n_pred and n_gt:
        to_gt = ndimage.distance_transform_edt(~gt_s)
        to_pred = ndimage.distance_transform_edt(~pred_s)
        tp_pred = int((pred_s & (to_gt <= tol)).sum())
        tp_gt = int((gt_s & (to_pred <= tol)).sum())
    return CcqResult.from_counts(tp_pred, tp_gt, n_pred, n_gt)


def _pair_pool(g: RoadGraph) -> tuple[list[list[int]], npt.NDArray[np.float64]]:
    pools = [c for c in g.components() if len(c) >= 2]
    weights = np.array([len(c) * (len(c) - 1) / 2 for c in pools], dtype=np.float64)
    return pools, weights


def sample_connected_pairs(
    g: RoadGraph, n: int, rng: np.random.Generator
) -> list[tuple[int, int]]:
    """Draw `n` node pairs uniformly among pairs joined by a path."""
    pools, weights = _pair_pool(g)
    if not pools:
        return []
    picks = rng.choice(len(pools), size=n, p=weights / weights.sum())
    pairs = []
    for k in picks:
        pool = pools[k]
        i, j = rng.choice(len(pool), size=2, replace=False)
        pairs.append((pool[i], pool[j]))
    return pairs


def _reference_pairs(
    g: RoadGraph, n_samples: int, seed: int, stream: int, exhaustive: bool
) -> list[tuple[int, int]]:
    if exhaustive:
        return connected_pairs(g)
    return sample_connected_pairs(g, n_samples, _rng(seed, stream))


class _Snapper:
    def __init__(self, source: RoadGraph, target: RoadGraph, max_dist: float) -> None:
        self.source = source
        self.target = target
        self.max_dist = max_dist
        self._memo: dict[int, int | None] = {}

    def __call__(self, node: int) -> int | None:
        if node not in self._memo:
            self._memo[node] = snap_node(self.target, self.source.point(node), self.max_dist)
        return self._memo[node]


def match_paths(
    ref: RoadGraph,
    other: RoadGraph,
    pairs: Iterable[tuple[int, int]],
    match_dist: float = 25.0,
) -> list[MatchedPathSample]:
    """Pair every reference path with the path between the snapped endpoints."""
    snap = _Snapper(ref, other, match_dist)
    samples = []
    for a, b in pairs:
        gt_length = ref.distances_from(a)[b]
        ah, bh = snap(a), snap(b)
        if ah is None or bh is None:
            samples.append(
                MatchedPathSample(gt=(a, b), pred=None, gt_length=gt_length, pred_length=None)
            )
            continue
        samples.append(
            MatchedPathSample(
                gt=(a, b),
                pred=(ah, bh),
                gt_length=gt_length,
                pred_length=other.distances_from(ah).get(bh),
            )
        )
    return samples


def _no_pairs(g: RoadGraph) -> DomainError:
    return DomainError(  # noqa: TRY003
        f"Ground-truth graph ({g.n_nodes} nodes) has no connected node pair"
    )


def tlts(
    pred: RoadGraph,
    gt: RoadGraph,
    n_samples: int = 500,
    rel_tol: float = 0.05,
    match_dist: float = 25.0,
    seed: int = 0,
    *,
    exhaustive: bool = False,
) -> TltsResult:
    """Fraction of ground-truth paths reproduced within `rel_tol` of their length."""
    pairs = _reference_pairs(gt, n_samples, seed, _TLTS_STREAM, exhaustive)
    if not pairs:
        raise _no_pairs(gt)
    counts = dict.fromkeys(("correct", "too_long", "too_short", "infeasible"), 0)
    for sample in match_paths(gt, pred, pairs, match_dist):
        if sample.pred_length is None:
            counts["infeasible"] += 1
        elif abs(sample.pred_length - sample.gt_length) <= rel_tol * sample.gt_length:
            counts["correct"] += 1
        elif sample.pred_length > sample.gt_length:
            counts["too_long"] += 1
        else:
            counts["too_short"] += 1
    total = len(pairs)
    logger.debug("TLTS over %d path(s): %s", total, counts)
    return TltsResult(n_samples=total, **{k: v / total for k, v in counts.items()})


def _path_penalty(sample: MatchedPathSample) -> float:
    if sample.pred_length is None:
        return 1.0
    if sample.gt_length == 0:
        return 0.0 if sample.pred_length == 0 else 1.0
    return min(1.0, abs(sample.gt_length - sample.pred_length) / sample.gt_length)


def _apls_direction(
    ref: RoadGraph, other: RoadGraph, pairs: Sequence[tuple[int, int]], match_dist: float
) -> float:
    if not pairs:
        return 0.0
    penalties = [_path_penalty(s) for s in match_paths(ref, other, pairs, match_dist)]
    return 1.0 - math.fsum(penalties) / len(penalties)


def apls(
    pred: RoadGraph,
    gt: RoadGraph,
    n_samples: int = 500,
    match_dist: float = 25.0,
    seed: int = 0,
    *,
    exhaustive: bool = False,
) -> AplsResult:
    """Symmetric average path length similarity, the harmonic mean of both directions."""
    gt_pairs = _reference_pairs(gt, n_samples, seed, _APLS_GT_STREAM, exhaustive)
    if not gt_pairs:
        raise _no_pairs(gt)
    pred_pairs = _reference_pairs(pred, n_samples, seed, _APLS_PRED_STREAM, exhaustive)
    forward = _apls_direction(gt, pred, gt_pairs, match_dist)
    backward = _apls_direction(pred, gt, pred_pairs, match_dist)
    score = 2 * forward * backward / (forward + backward) if forward and backward else 0.0
    score = min(score, 1.0)
    return AplsResult(
        score=score,
        gt_to_pred=forward,
        pred_to_gt=backward,
        n_samples=len(gt_pairs) + len(pred_pairs),
    )


def _greedy_closest(
    left: npt.NDArray[np.float64], right: npt.NDArray[np.float64], max_dist: float
) -> list[tuple[int, int]]:
    """One-to-one matching taking the globally closest remaining pair first."""
    if not len(left) or not len(right):
        return []
    near = cKDTree(left).sparse_distance_matrix(cKDTree(right), max_dist, output_type="ndarray")
    candidates = sorted((float(d), int(i), int(j)) for i, j, d in near)
    used_left: set[int] = set()
    used_right: set[int] = set()
    matched = []
    for _, i, j in candidates:
        if i in used_left or j in used_right:
            continue
        used_left.add(i)
        used_right.add(j)
        matched.append((i, j))
    return matched


def _edge_directions(g: RoadGraph, node: int, lookahead: float) -> list[float]:
    """Heading in degrees of every incident edge, taken `lookahead` along it."""
    origin = g.point(node)
    headings = []
    for other in g.neighbors(node):
        line = g.edge_line(node, other)
        x, y = line.interpolate(min(line.length, lookahead)).coords[0]
        headings.append(math.degrees(math.atan2(y - origin[1], x - origin[0])))
    return headings


def _angle_between(a: float, b: float) -> float:
    return abs((a - b + 180.0) % 360.0 - 180.0)


def _captured_edges(gt_dirs: list[float], pred_dirs: list[float], angle_tol: float) -> int:
    candidates = sorted(
        (_angle_between(g, p), i, j)
        for (i, g), (j, p) in itertools.product(enumerate(gt_dirs), enumerate(pred_dirs))
        if _angle_between(g, p) <= angle_tol
    )
    used_gt: set[int] = set()
    used_pred: set[int] = set()
    for _, i, j in candidates:
        if i not in used_gt and j not in used_pred:
            used_gt.add(i)
            used_pred.add(j)
    return len(used_gt)


def junct(
    pred: RoadGraph,
    gt: RoadGraph,
    match_dist: float = 25.0,
    angle_tol: float = 45.0,
) -> PrecisionRecall:
    """Junction f1: matched junctions scored by how many incident edges agree."""
    gt_j, pred_j = junctions(gt), junctions(pred)
    matches = _greedy_closest(gt.points[gt_j], pred.points[pred_j], match_dist)
    recall_sum = precision_sum = 0.0
    for i, j in matches:
        v, u = gt_j[i], pred_j[j]
        gt_dirs = _edge_directions(gt, v, match_dist)
        pred_dirs = _edge_directions(pred, u, match_dist)
        captured = _captured_edges(gt_dirs, pred_dirs, angle_tol)
        recall_sum += captured / len(gt_dirs)
        precision_sum += 1.0 - (len(pred_dirs) - captured) / len(pred_dirs)
    recall = recall_sum / len(gt_j) if gt_j else 1.0
    precision = precision_sum / len(pred_j) if pred_j else 1.0
    logger.debug(
        "JUNCT matched %d of %d gt / %d predicted junction(s)",
        len(matches),
        len(gt_j),
        len(pred_j),
    )
    return PrecisionRecall.from_ratios(precision, recall)


def holes_and_marbles(
    pred: RoadGraph,
    gt: RoadGraph,
    radius: float = 300.0,
    n_subgraphs: int = 1000,
    match_dist: float = 25.0,
    spacing: float = 10.0,
    seed: int = 0,
    *,
    exhaustive: bool = False,
) -> HolesAndMarblesResult:
    """Pooled precision and recall of control points walked out from shared starts."""
    if gt.n_nodes == 0:
        raise DomainError("Holes and marbles needs a non-empty ground-truth graph")  # noqa: TRY003
    if exhaustive:
        starts: Iterable[int] = range(gt.n_nodes)
    else:
        starts = _rng(seed, _HM_STREAM).integers(0, gt.n_nodes, size=n_subgraphs).tolist()

    snap = _Snapper(gt, pred, match_dist)
    holes_of: dict[int, npt.NDArray[np.float64]] = {}
    marbles_of: dict[int, npt.NDArray[np.float64]] = {}
    holes = matched_holes = marbles = matched_marbles = 0
    for start in starts:
        if start not in holes_of:
            holes_of[start] = walk_points(gt, start, radius, spacing)
        hole_xy = holes_of[start]
        holes += len(hole_xy)
        target = snap(start)
        if target is None:
            continue
        if target not in marbles_of:
            marbles_of[target] = walk_points(pred, target, radius, spacing)
        marble_xy = marbles_of[target]
        marbles += len(marble_xy)
        to_marble, _ = cKDTree(marble_xy).query(hole_xy)
        to_hole, _ = cKDTree(hole_xy).query(marble_xy)
        matched_holes += int((to_marble <= match_dist).sum())
        matched_marbles += int((to_hole <= match_dist).sum())
    return HolesAndMarblesResult.from_counts(holes, matched_holes, marbles, matched_marbles)


def evaluate_all(
    pred_mask: npt.ArrayLike,
    gt: npt.ArrayLike | RoadGraph,
    params: MetricParams | None = None,
    *,
    inputs: Mapping[str, str] | None = None,
) -> Report:
    """Run every metric on one prediction and collect a report.

    A ground-truth graph is rendered at the prediction's size for CCQ and used
    as is for the graph metrics; a ground-truth mask is converted to a graph.
    """
    params = params or MetricParams()
    pred = as_mask(pred_mask, name="prediction")
    if isinstance(gt, RoadGraph):
        gt_graph = gt
        gt_raster = render_graph(gt, pred.shape[1], pred.shape[0], params.render_thickness)
    else:
        gt_raster = as_mask(gt, name="ground truth")
        check_same_shape(pred, gt_raster, "Prediction against ground truth")
        gt_graph = mask_to_graph(gt_raster)
    pred_graph = mask_to_graph(pred)
    logger.info(
        "evaluating %d-node prediction against %d-node ground truth",
        pred_graph.n_nodes,
        gt_graph.n_nodes,
    )

    overlap = ccq(pred, gt_raster, params.ccq_tolerance)
    paths = tlts(
        pred_graph,
        gt_graph,
        params.path_samples,
        params.tlts_tolerance,
        params.match_distance,
        params.seed,
        exhaustive=params.exhaustive,
    )
    similarity = apls(
        pred_graph,
        gt_graph,
        params.path_samples,
        params.match_distance,
        params.seed,
        exhaustive=params.exhaustive,
    )
    junction = junct(pred_graph, gt_graph, params.match_distance, params.junct_angle)
    local = holes_and_marbles(
        pred_graph,
        gt_graph,
        params.hm_radius,
        params.hm_subgraphs,
        params.match_distance,
        params.hm_spacing,
        params.seed,
        exhaustive=params.exhaustive,
    )
    return Report(
        metrics={
            "ccq_correctness": overlap.correctness,
            "ccq_completeness": overlap.completeness,
            "ccq_quality": overlap.quality,
            "tlts": paths.correct,
            "tlts_too_long": paths.too_long,
            "tlts_too_short": paths.too_short,
            "tlts_infeasible": paths.infeasible,
            "apls": similarity.score,
            "apls_gt_to_pred": similarity.gt_to_pred,
            "apls_pred_to_gt": similarity.pred_to_gt,
            "junct_precision": junction.precision,
            "junct_recall": junction.recall,
            "junct_f1": junction.f1,
            "hm_precision": local.precision,
            "hm_recall": local.recall,
            "hm_f1": local.f1,
        },
        counts={
            "ccq_tp_pred": overlap.tp_pred,
            "ccq_tp_gt": overlap.tp_gt,
            "ccq_n_pred": overlap.n_pred,
            "ccq_n_gt": overlap.n_gt,
            "tlts_samples": paths.n_samples,
            "apls_samples": similarity.n_samples,
            "hm_holes": local.holes,
            "hm_matched_holes": local.matched_holes,
            "hm_marbles": local.marbles,
            "hm_matched_marbles": local.matched_marbles,
            "pred_nodes": pred_graph.n_nodes,
            "gt_nodes": gt_graph.n_nodes,
        },
        seeds={
            "tlts": params.seed,
            "apls": params.seed,
            "holes_and_marbles": params.seed,
        },
        params=ResolvedParams(metrics=params),
        provenance=Provenance(inputs=dict(inputs or {})),
    )


_MEAN_METRICS = (
    "tlts",
    "tlts_too_long",
    "tlts_too_short",
    "tlts_infeasible",
    "apls",
    "apls_gt_to_pred",
    "apls_pred_to_gt",
    "junct_precision",
    "junct_recall",
    "junct_f1",
)


def summarize(
    reports: Mapping[str, Report], errors: Mapping[str, str] | None = None
) -> Summary:
    """Pool per-tile reports.

    CCQ and holes and marbles are recomputed from summed counts; the remaining
    metrics are averaged over tiles. Tiles are visited in sorted order so the
    result does not depend on how the reports were produced. Tiles that could
    not be evaluated are listed in `errors` with their message.
    """
    if not reports:
        raise DomainError("Cannot summarize an empty batch")  # noqa: TRY003
    names = sorted(reports)
    ordered = [reports[name] for name in names]
    counts = {
        key: sum(r.counts[key] for r in ordered) for key in ordered[0].counts
    }
    overlap = CcqResult.from_counts(
        counts["ccq_tp_pred"], counts["ccq_tp_gt"], counts["ccq_n_pred"], counts["ccq_n_gt"]
    )
    local = HolesAndMarblesResult.from_counts(
        counts["hm_holes"],
        counts["hm_matched_holes"],
        counts["hm_marbles"],
        counts["hm_matched_marbles"],
    )
    metrics = {
        "ccq_correctness": overlap.correctness,
        "ccq_completeness": overlap.completeness,
        "ccq_quality": overlap.quality,
    }
    for key in _MEAN_METRICS:
        metrics[key] = math.fsum(r.metrics[key] for r in ordered) / len(ordered)
    metrics |= {
        "hm_precision": local.precision,
        "hm_recall": local.recall,
        "hm_f1": local.f1,
    }
    inputs = {
        f"{name}.{role}": path
        for name, report in zip(names, ordered, strict=True)
        for role, path in report.provenance.inputs.items()
    }
    return Summary(
        tiles=names,
        metrics=metrics,
        counts=counts,
        params=ordered[0].params,
        provenance=Provenance(inputs=inputs),
        errors=dict(sorted((errors or {}).items())),
    )


__all__ = [
    "AplsResult",
    "CcqResult",
    "HolesAndMarblesResult",
    "MatchedPathSample",
    "PrecisionRecall",
    "Provenance",
    "REPORT_FORMAT_VERSION",
    "Report",
    "ResolvedParams",
    "Summary",
    "TltsResult",
    "apls",
    "ccq",
    "evaluate_all",
    "holes_and_marbles",
    "junct",
    "match_paths",
    "sample_connected_pairs",
    "summarize",
    "tlts",
]
