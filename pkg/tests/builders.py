import numpy as np
import numpy.typing as npt

from roadtopo import RoadGraph

LADDER_POINTS = [(0, 0), (100, 0), (200, 0), (0, 100), (100, 100), (200, 100)]
LADDER_EDGES = [(0, 1), (1, 2), (0, 3), (1, 4), (2, 5), (3, 4), (4, 5)]


def ladder(without: tuple[int, int] | None = None) -> RoadGraph:
    edges = [e for e in LADDER_EDGES if e != without]
    return RoadGraph(LADDER_POINTS, edges)


def road_bar(
    shape: tuple[int, int] = (256, 256),
    rows: tuple[int, int] = (79, 82),
    cols: tuple[int, int] = (10, 246),
) -> npt.NDArray[np.bool_]:
    """Horizontal road three pixels thick."""
    mask = np.zeros(shape, dtype=bool)
    mask[rows[0] : rows[1], cols[0] : cols[1]] = True
    return mask


def interrupted_prediction(gap_start: int = 100, gap: int = 6) -> npt.NDArray[np.float64]:
    """Confident prediction of `road_bar` with a break of `gap` columns."""
    prob = np.where(road_bar(), 0.9, 0.05)
    prob[:, gap_start : gap_start + gap] = 0.05
    return prob


def plus_mask(size: int = 31, arm: int = 10) -> npt.NDArray[np.bool_]:
    """Two one-pixel lines of ``2 * arm + 1`` pixels crossing at the centre."""
    mask = np.zeros((size, size), dtype=bool)
    c = size // 2
    mask[c, c - arm : c + arm + 1] = True
    mask[c - arm : c + arm + 1, c] = True
    return mask


def road_network(size: int = 96) -> npt.NDArray[np.bool_]:
    """A cross, a detached bar and an L-turn: junctions, terminals and bends."""
    mask = np.zeros((size, size), dtype=bool)
    mask[20, 5:60] = True
    mask[5:50, 30] = True
    mask[80, 10:70] = True
    mask[55:90, 85] = True
    mask[55, 70:86] = True
    return mask


def random_blobs(
    rng: np.random.Generator, shape: tuple[int, int] = (64, 64), count: int = 6
) -> npt.NDArray[np.bool_]:
    """Union of random thin rectangles, a rough stand-in for road masks.

    Every rectangle is at least five pixels long so none thins away entirely.
    """
    mask = np.zeros(shape, dtype=bool)
    h, w = shape
    for _ in range(count):
        thickness = int(rng.integers(1, 4))
        if rng.random() < 0.5:
            r = int(rng.integers(0, h - thickness + 1))
            c0 = int(rng.integers(0, w - 5))
            c1 = int(rng.integers(c0 + 4, w))
            mask[r : r + thickness, c0 : c1 + 1] = True
        else:
            c = int(rng.integers(0, w - thickness + 1))
            r0 = int(rng.integers(0, h - 5))
            r1 = int(rng.integers(r0 + 4, h))
            mask[r0 : r1 + 1, c : c + thickness] = True
    return mask
