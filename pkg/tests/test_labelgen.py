import numpy as np
import pytest
from pydantic import ValidationError

from roadtopo import (
    PYRAMID_PATCH_SIZES,
    LabelParams,
    LabelPyramid,
    OutputPyramid,
    ShapeError,
    and_reduce,
    build_label_pyramid,
    false_negative_set,
    finest_labels,
    generate_labels,
    interruptions,
    vanilla_labels,
)

from .builders import interrupted_prediction, road_bar


def _zeros(pyramid: LabelPyramid) -> list[list[tuple[int, int]]]:
    return [[tuple(p) for p in np.argwhere(m == 0).tolist()] for m in pyramid.matrices()]


def test_six_pixel_interruption_breaks_one_cell() -> None:
    pyramid = build_label_pyramid(road_bar(), interrupted_prediction(gap=6))
    assert pyramid.patch_sizes == list(PYRAMID_PATCH_SIZES)
    assert pyramid.shapes == [(1, 1), (2, 2), (4, 4), (8, 8)]
    assert _zeros(pyramid) == [[(0, 0)], [(0, 0)], [(1, 1)], [(2, 3)]]
    for k in range(3):
        np.testing.assert_array_equal(pyramid.matrix(k), and_reduce(pyramid.matrix(k + 1)))


def test_three_pixel_interruption_is_ignored() -> None:
    pyramid = build_label_pyramid(road_bar(), interrupted_prediction(gap=3))
    assert all(m.all() for m in pyramid.matrices())


def test_perfect_prediction_is_all_ones() -> None:
    pyramid = build_label_pyramid(road_bar(), road_bar().astype(np.float64))
    assert all(m.all() for m in pyramid.matrices())


def test_generate_labels_keeps_intermediates() -> None:
    result = generate_labels(road_bar(), interrupted_prediction(gap=6))
    assert len(result.interruptions) == 1
    (gap,) = result.interruptions
    assert gap.size == 6
    assert gap.pixels[0] == (80, 100)
    assert not result.t0[80, 100:106].any()
    assert result.gt_skeleton[80, 100:106].all()
    assert gap.model_dump() == {"pixels": tuple((80, c) for c in range(100, 106))}
    with pytest.raises(ValidationError):
        result.t0 = result.gt_skeleton  # type: ignore[misc]


def test_min_interruption_is_configurable() -> None:
    params = LabelParams(min_interruption=7)
    pyramid = build_label_pyramid(road_bar(), interrupted_prediction(gap=6), params)
    assert all(m.all() for m in pyramid.matrices())


def test_interruption_straddling_cells() -> None:
    skeleton = np.zeros((64, 64), dtype=bool)
    t0 = np.zeros((64, 64), dtype=bool)
    skeleton[5, 28:36] = True
    assert finest_labels(skeleton, t0, cell=32, min_len=4).tolist() == [[0, 0], [1, 1]]

    skeleton[5, 28] = False
    assert finest_labels(skeleton, t0, cell=32, min_len=4).tolist() == [[1, 0], [1, 1]]


def test_short_runs_in_one_cell_do_not_add_up() -> None:
    skeleton = np.zeros((64, 64), dtype=bool)
    skeleton[5, 2:4] = True
    skeleton[5, 10:12] = True
    grid = finest_labels(skeleton, np.zeros_like(skeleton), cell=32, min_len=4)
    assert grid.all()


def test_interruptions_are_ordered() -> None:
    fn = np.zeros((10, 10), dtype=bool)
    fn[7, 1:4] = True
    fn[2, 5:7] = True
    found = interruptions(fn)
    assert [i.pixels[0] for i in found] == [(2, 5), (7, 1)]
    assert [i.size for i in found] == [2, 3]


def test_false_negatives_are_missed_skeleton_pixels() -> None:
    skeleton = np.zeros((4, 4), dtype=bool)
    skeleton[1, :] = True
    t0 = np.zeros((4, 4), dtype=bool)
    t0[1, :2] = True
    assert np.argwhere(false_negative_set(skeleton, t0)).tolist() == [[1, 2], [1, 3]]


def test_size_not_divisible_by_cell() -> None:
    with pytest.raises(ShapeError):
        build_label_pyramid(np.zeros((100, 100)), np.zeros((100, 100)))


def test_shape_mismatch() -> None:
    with pytest.raises(ShapeError):
        build_label_pyramid(np.zeros((64, 64)), np.zeros((64, 32)))


def test_rectangular_input() -> None:
    gt = np.zeros((128, 64), dtype=bool)
    pyramid = build_label_pyramid(gt, np.zeros((128, 64)))
    assert pyramid.shapes == [(2, 1), (4, 2)]
    assert pyramid.patch_sizes == [64, 32]


def test_vanilla_labels() -> None:
    pyramid = vanilla_labels()
    assert pyramid.shapes == [(1, 1)]
    assert pyramid.matrix(0).tolist() == [[0]]


def test_pyramid_rejects_broken_propagation() -> None:
    with pytest.raises(ValidationError):
        LabelPyramid.model_validate(
            {
                "levels": [
                    {"level": 0, "patch_size": 64, "rows": [[1]]},
                    {"level": 1, "patch_size": 32, "rows": [[1, 0], [1, 1]]},
                ]
            }
        )


@pytest.mark.parametrize(
    "levels",
    [
        [],
        [
            {"level": 0, "patch_size": 64, "rows": [[1]]},
            {"level": 1, "patch_size": 16, "rows": [[1, 1], [1, 1]]},
        ],
        [
            {"level": 0, "patch_size": 64, "rows": [[1]]},
            {"level": 1, "patch_size": 32, "rows": [[1, 1, 1], [1, 1, 1]]},
        ],
        [{"level": 1, "patch_size": 64, "rows": [[1]]}],
        [{"level": 0, "patch_size": 64, "rows": [[2]]}],
    ],
)
def test_pyramid_rejects_malformed_levels(levels: list[dict[str, object]]) -> None:
    with pytest.raises(ValidationError):
        LabelPyramid.model_validate({"levels": levels})


def test_output_pyramid_from_matrices() -> None:
    pyramid = OutputPyramid.from_matrices([np.full((2**k, 2**k), 0.25) for k in range(4)])
    assert [level.patch_size for level in pyramid.levels] == list(PYRAMID_PATCH_SIZES)
    with pytest.raises(ValidationError):
        OutputPyramid.from_matrices([[[1.5]]])


def test_and_reduce_odd_grid() -> None:
    with pytest.raises(ShapeError):
        and_reduce(np.ones((3, 2)))
