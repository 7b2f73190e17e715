import itertools
from collections.abc import Callable

import networkx as nx
import numpy as np
import pytest

from roadtopo import (
    DomainError,
    LabelParams,
    MetricParams,
    RoadGraph,
    ShapeError,
    apls,
    ccq,
    connected_pairs,
    evaluate_all,
    holes_and_marbles,
    junct,
    mask_to_graph,
    match_paths,
    render_graph,
    sample_connected_pairs,
    scale_graph,
    skeletonize,
    summarize,
    tlts,
    walk_points,
)

from .builders import ladder, random_blobs, road_network

FAST = MetricParams(path_samples=100, hm_subgraphs=100)


def _star(arms: list[tuple[int, int]], at: tuple[int, int] = (0, 0)) -> RoadGraph:
    points = [at] + [(at[0] + dx, at[1] + dy) for dx, dy in arms]
    return RoadGraph(points, [(0, i) for i in range(1, len(points))])


def _lengths(g: RoadGraph) -> dict[int, dict[int, float]]:
    reference = nx.Graph()
    reference.add_nodes_from(range(g.n_nodes))
    for a, b in g.edges():
        reference.add_edge(a, b, w=g.edge_length(a, b))
    return dict(nx.all_pairs_dijkstra_path_length(reference, weight="w"))


def _without(g: RoadGraph, removed: list[tuple[int, int]]) -> RoadGraph:
    return RoadGraph(g.points, [e for e in g.edges() if e not in removed])


def _degraded_network() -> np.ndarray:
    mask = road_network()
    mask[20, 40:46] = False
    mask[80, 10:20] = False
    return mask


def test_ccq_identity() -> None:
    result = ccq(road_network(), road_network())
    assert (result.correctness, result.completeness, result.quality) == (1.0, 1.0, 1.0)
    assert result.tp_pred == result.n_pred > 0


def test_ccq_both_empty() -> None:
    result = ccq(np.zeros((8, 8)), np.zeros((8, 8)))
    assert (result.correctness, result.completeness, result.quality) == (1.0, 1.0, 1.0)


def test_ccq_empty_prediction() -> None:
    result = ccq(np.zeros((96, 96)), road_network())
    assert result.completeness == 0.0
    assert result.quality == 0.0


@pytest.mark.parametrize(("shift", "expected"), [(2, 1.0), (3, 0.0)])
def test_ccq_shift_against_tolerance(shift: int, expected: float) -> None:
    gt = np.zeros((40, 60), dtype=bool)
    gt[20, 10:51] = True
    pred = np.roll(gt, shift, axis=0)
    result = ccq(pred, gt, tol=2.0)
    assert result.quality == expected
    assert result.correctness == result.completeness == expected


def test_ccq_matches_brute_force(rng: np.random.Generator) -> None:
    for _ in range(200):
        pred, gt = random_blobs(rng), random_blobs(rng)
        p = np.argwhere(skeletonize(pred))
        g = np.argwhere(skeletonize(gt))
        if not len(p) or not len(g):
            continue
        d = np.linalg.norm(p[:, None] - g[None], axis=-1)
        result = ccq(pred, gt)
        assert result.tp_pred == int((d.min(axis=1) <= 2.0).sum())
        assert result.tp_gt == int((d.min(axis=0) <= 2.0).sum())
        assert result.quality == pytest.approx(
            result.tp_pred / (len(p) + len(g) - result.tp_gt)
        )


def test_ccq_negative_tolerance() -> None:
    with pytest.raises(DomainError):
        ccq(np.zeros((4, 4)), np.zeros((4, 4)), tol=-1)


def test_sampled_pairs_are_connected(rng: np.random.Generator) -> None:
    g = RoadGraph(
        [(0, 0), (10, 0), (50, 0), (60, 0), (70, 0), (90, 90)], [(0, 1), (2, 3), (3, 4)]
    )
    reachable = set(connected_pairs(g))
    pairs = sample_connected_pairs(g, 200, rng)
    assert len(pairs) == 200
    assert all(tuple(sorted(p)) in reachable for p in pairs)
    assert {tuple(sorted(p)) for p in pairs} == reachable


def test_tlts_identity(ladder_graph: RoadGraph) -> None:
    result = tlts(ladder_graph, ladder_graph, exhaustive=True)
    assert result.correct == 1.0
    assert result.n_samples == 15


def test_tlts_matches_oracle(ladder_graph: RoadGraph, broken_ladder: RoadGraph) -> None:
    truth, pred = _lengths(ladder_graph), _lengths(broken_ladder)
    pairs = list(itertools.combinations(range(6), 2))
    correct = sum(abs(pred[a][b] - truth[a][b]) <= 0.05 * truth[a][b] for a, b in pairs)
    result = tlts(broken_ladder, ladder_graph, exhaustive=True)
    assert result.correct == pytest.approx(correct / len(pairs))
    assert result.correct == pytest.approx(14 / 15)
    assert result.too_long == pytest.approx(1 / 15)
    assert result.too_short == result.infeasible == 0.0


def test_tlts_scaled_prediction_is_too_long(ladder_graph: RoadGraph) -> None:
    result = tlts(scale_graph(ladder_graph, 1.10), ladder_graph, exhaustive=True)
    assert result.correct == 0.0
    assert result.too_long == 1.0


def test_paths_against_empty_prediction(ladder_graph: RoadGraph) -> None:
    empty = RoadGraph(np.empty((0, 2)))
    assert tlts(empty, ladder_graph, n_samples=50).infeasible == 1.0
    result = apls(empty, ladder_graph, n_samples=50)
    assert result.score == 0.0
    assert result.pred_to_gt == 0.0


def test_no_connected_pair() -> None:
    gt = RoadGraph([(0, 0), (5, 5)])
    with pytest.raises(DomainError):
        tlts(gt, gt)
    with pytest.raises(DomainError):
        apls(gt, gt)


def test_apls_matches_oracle(ladder_graph: RoadGraph, broken_ladder: RoadGraph) -> None:
    result = apls(broken_ladder, ladder_graph, exhaustive=True)
    # only the rung 1-4 detour differs: 100 in the truth, 300 in the prediction
    assert result.gt_to_pred == pytest.approx(1 - 1 / 15)
    assert result.pred_to_gt == pytest.approx(1 - (2 / 3) / 15)
    forward, backward = 14 / 15, 43 / 45
    assert result.score == pytest.approx(2 * forward * backward / (forward + backward))


def test_apls_identity(ladder_graph: RoadGraph) -> None:
    result = apls(ladder_graph, ladder_graph, exhaustive=True)
    assert result.score == 1.0
    assert result.n_samples == 30


def test_sampling_is_seeded(ladder_graph: RoadGraph, broken_ladder: RoadGraph) -> None:
    first = tlts(broken_ladder, ladder_graph, n_samples=40, seed=11)
    second = tlts(broken_ladder, ladder_graph, n_samples=40, seed=11)
    assert first == second
    assert apls(broken_ladder, ladder_graph, 40, seed=3) == apls(
        broken_ladder, ladder_graph, 40, seed=3
    )


def test_removing_edges_never_helps(ladder_graph: RoadGraph) -> None:
    removals = [(1, 4), (3, 4), (2, 5), (0, 1)]
    scores = []
    for k in range(len(removals) + 1):
        pred = _without(ladder_graph, removals[:k])
        scores.append(
            (
                tlts(pred, ladder_graph, exhaustive=True).correct,
                apls(pred, ladder_graph, exhaustive=True).gt_to_pred,
            )
        )
    for before, after in itertools.pairwise(scores):
        assert after[0] <= before[0]
        assert after[1] <= before[1]
    assert scores[-1] < scores[0]


def test_match_paths(ladder_graph: RoadGraph) -> None:
    far = RoadGraph(ladder_graph.points + (500, 500), ladder_graph.edges())
    (sample,) = match_paths(ladder_graph, far, [(0, 5)])
    assert not sample.feasible
    assert sample.gt_length == 300.0

    (sample,) = match_paths(ladder_graph, scale_graph(ladder_graph, 1.1), [(0, 5)])
    assert sample.pred == (0, 5)
    assert sample.pred_length == pytest.approx(330.0)


def test_junct_identity(ladder_graph: RoadGraph) -> None:
    result = junct(ladder_graph, ladder_graph)
    assert (result.precision, result.recall, result.f1) == (1.0, 1.0, 1.0)


def test_junct_missing_arm() -> None:
    gt = _star([(50, 0), (-50, 0), (0, 50), (0, -50)])
    pred = _star([(50, 0), (-50, 0), (0, 50)])
    result = junct(pred, gt)
    assert result.recall == pytest.approx(3 / 4)
    assert result.precision == 1.0
    assert result.f1 == pytest.approx(6 / 7)


def test_junct_no_predicted_junction() -> None:
    gt = _star([(50, 0), (-50, 0), (0, 50)])
    pred = RoadGraph([(-50, 0), (50, 0)], [(0, 1)])
    result = junct(pred, gt)
    assert result.recall == 0.0
    assert result.f1 == 0.0


def test_junct_misplaced_junction() -> None:
    gt = _star([(50, 0), (-50, 0), (0, 50)])
    pred = _star([(50, 0), (-50, 0), (0, 50)], at=(40, 40))
    result = junct(pred, gt)
    assert (result.precision, result.recall) == (0.0, 0.0)


def test_junct_rotated_arms_miss_the_angle() -> None:
    gt = _star([(50, 0), (-50, 0), (0, 50)])
    pred = _star([(50, 0), (-50, 0), (50, 50)])
    result = junct(pred, gt, angle_tol=30.0)
    assert result.recall == pytest.approx(2 / 3)
    assert result.precision == pytest.approx(2 / 3)


def test_junct_no_junctions_anywhere() -> None:
    line = RoadGraph([(0, 0), (50, 0)], [(0, 1)])
    result = junct(line, line)
    assert (result.precision, result.recall, result.f1) == (1.0, 1.0, 1.0)


def test_hm_identity(ladder_graph: RoadGraph) -> None:
    result = holes_and_marbles(ladder_graph, ladder_graph, radius=150, exhaustive=True)
    assert (result.precision, result.recall, result.f1) == (1.0, 1.0, 1.0)
    assert result.holes == result.marbles > 0


def test_hm_far_translation_matches_nothing(ladder_graph: RoadGraph) -> None:
    far = RoadGraph(ladder_graph.points + (1000, 1000), ladder_graph.edges())
    result = holes_and_marbles(far, ladder_graph, exhaustive=True)
    assert result.marbles == 0
    assert (result.precision, result.recall, result.f1) == (0.0, 0.0, 0.0)


def test_hm_missing_component() -> None:
    pred, gt = _two_bars()
    result = holes_and_marbles(pred, gt, exhaustive=True)
    assert (result.holes, result.matched_holes) == (66, 33)
    assert (result.marbles, result.matched_marbles) == (33, 33)
    assert result.precision == 1.0
    assert result.recall == 0.5
    assert result.f1 == pytest.approx(2 / 3)


def _hm_brute_force(
    pred: RoadGraph,
    gt: RoadGraph,
    radius: float,
    match_dist: float = 25.0,
    spacing: float = 10.0,
) -> tuple[int, int, int, int]:
    holes = matched_holes = marbles = matched_marbles = 0
    for start in range(gt.n_nodes):
        hole_xy = walk_points(gt, start, radius, spacing)
        holes += len(hole_xy)
        if pred.n_nodes == 0:
            continue
        gaps = np.linalg.norm(pred.points - gt.point(start), axis=1)
        if gaps.min() > match_dist:
            continue
        marble_xy = walk_points(pred, int(np.argmin(gaps)), radius, spacing)
        marbles += len(marble_xy)
        d = np.linalg.norm(hole_xy[:, None] - marble_xy[None], axis=-1)
        matched_holes += int((d.min(axis=1) <= match_dist).sum())
        matched_marbles += int((d.min(axis=0) <= match_dist).sum())
    return holes, matched_holes, marbles, matched_marbles


def _two_bars() -> tuple[RoadGraph, RoadGraph]:
    gt = RoadGraph(
        [(0, 0), (50, 0), (100, 0), (0, 200), (50, 200), (100, 200)],
        [(0, 1), (1, 2), (3, 4), (4, 5)],
    )
    return RoadGraph([(0, 0), (50, 0), (100, 0)], [(0, 1), (1, 2)]), gt


@pytest.mark.parametrize(
    ("pair", "radius"),
    [
        (lambda: (ladder(without=(1, 4)), ladder()), 150.0),
        (lambda: (ladder(), ladder(without=(1, 4))), 300.0),
        (lambda: (scale_graph(ladder(), 1.1), ladder()), 120.0),
        (_two_bars, 300.0),
        (lambda: (mask_to_graph(_degraded_network()), mask_to_graph(road_network())), 60.0),
    ],
)
def test_hm_matches_brute_force(
    pair: Callable[[], tuple[RoadGraph, RoadGraph]], radius: float
) -> None:
    pred, gt = pair()
    result = holes_and_marbles(pred, gt, radius=radius, exhaustive=True)
    counts = (result.holes, result.matched_holes, result.marbles, result.matched_marbles)
    assert counts == _hm_brute_force(pred, gt, radius)


def test_hm_sampled_starts_are_seeded(
    ladder_graph: RoadGraph, broken_ladder: RoadGraph
) -> None:
    first = holes_and_marbles(broken_ladder, ladder_graph, 120, 50, seed=9)
    second = holes_and_marbles(broken_ladder, ladder_graph, 120, 50, seed=9)
    assert first == second


def test_hm_empty_truth(ladder_graph: RoadGraph) -> None:
    with pytest.raises(DomainError):
        holes_and_marbles(ladder_graph, RoadGraph(np.empty((0, 2))))


def test_evaluate_identity() -> None:
    report = evaluate_all(road_network(), road_network(), FAST)
    for key in ("ccq_quality", "tlts", "apls", "junct_f1", "hm_f1"):
        assert report.metrics[key] == 1.0, key
    for key in ("tlts_too_long", "tlts_too_short", "tlts_infeasible"):
        assert report.metrics[key] == 0.0, key
    assert report.counts["tlts_samples"] == 100


@pytest.mark.parametrize("seed", range(20))
def test_evaluate_identity_on_random_masks(seed: int) -> None:
    mask = random_blobs(np.random.default_rng(seed))
    report = evaluate_all(mask, mask, FAST)
    for key in ("ccq_quality", "tlts", "apls", "junct_f1", "hm_f1"):
        assert report.metrics[key] == 1.0, key


def test_evaluate_params_block_lists_defaults() -> None:
    report = evaluate_all(road_network(), road_network())
    assert report.params.metrics == MetricParams()
    assert report.params.labels == LabelParams()
    assert report.params.losses.lambda_a == 0.005
    assert report.params.pyramid_patch_sizes == (256, 128, 64, 32)
    assert report.provenance.format_version == 1


def test_evaluate_seeds_are_recorded() -> None:
    params = FAST.model_copy(update={"seed": 5})
    report = evaluate_all(_degraded_network(), road_network(), params)
    assert report.seeds == {"tlts": 5, "apls": 5, "holes_and_marbles": 5}


def test_evaluate_same_seed_same_report() -> None:
    first = evaluate_all(_degraded_network(), road_network(), FAST)
    second = evaluate_all(_degraded_network(), road_network(), FAST)
    assert first.model_dump_json(indent=2) == second.model_dump_json(indent=2)


def test_evaluate_translation_invariance() -> None:
    params = FAST.model_copy(update={"match_distance": 24.5})
    base = evaluate_all(_degraded_network(), road_network(), params)
    pad = ((7, 0), (3, 0))
    moved = evaluate_all(
        np.pad(_degraded_network(), pad), np.pad(road_network(), pad), params
    )
    assert moved.counts == base.counts
    assert moved.metrics == pytest.approx(base.metrics)


def test_evaluate_graph_truth_is_rendered_for_ccq(ladder_graph: RoadGraph) -> None:
    pred = render_graph(ladder_graph, 201, 101)
    report = evaluate_all(pred, ladder_graph, FAST)
    assert report.metrics["ccq_quality"] == 1.0
    assert report.counts["gt_nodes"] == 6


def test_evaluate_shape_mismatch() -> None:
    with pytest.raises(ShapeError):
        evaluate_all(np.zeros((8, 8)), np.zeros((8, 9)))


def test_summarize_pools_counts_and_averages() -> None:
    good = evaluate_all(road_network(), road_network(), FAST, inputs={"pred": "a.pgm"})
    bad = evaluate_all(_degraded_network(), road_network(), FAST, inputs={"pred": "b.pgm"})
    summary = summarize({"b": bad, "a": good})
    assert summary.tiles == ["a", "b"]
    assert summary.metrics["tlts"] == pytest.approx(
        (good.metrics["tlts"] + bad.metrics["tlts"]) / 2
    )
    tp = good.counts["ccq_tp_pred"] + bad.counts["ccq_tp_pred"]
    n = good.counts["ccq_n_pred"] + bad.counts["ccq_n_pred"]
    assert summary.metrics["ccq_correctness"] == pytest.approx(tp / n)
    assert summary.counts["hm_holes"] == good.counts["hm_holes"] + bad.counts["hm_holes"]
    assert summary.provenance.inputs == {"a.pred": "a.pgm", "b.pred": "b.pgm"}


def test_summarize_order_does_not_matter() -> None:
    reports = {
        name: evaluate_all(mask, road_network(), FAST)
        for name, mask in [("x", road_network()), ("y", _degraded_network())]
    }
    reordered = dict(reversed(list(reports.items())))
    assert summarize(reports) == summarize(reordered)


def test_summarize_empty_batch() -> None:
    with pytest.raises(DomainError):
        summarize({})


def test_summarize_lists_errors_in_order() -> None:
    report = evaluate_all(road_network(), road_network(), FAST)
    summary = summarize({"a": report}, {"z": "broken", "c": "unreadable"})
    assert summary.tiles == ["a"]
    assert list(summary.errors.items()) == [("c", "unreadable"), ("z", "broken")]
    assert summarize({"a": report}).errors == {}
