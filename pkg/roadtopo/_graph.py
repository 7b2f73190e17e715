"""Geometric road graphs: construction from masks, rendering, paths and walks.

Node coordinates are pixel units with ``x`` along columns and ``y`` along rows;
a node at integer ``(x, y)`` sits on the centre of pixel ``[y, x]``. Every edge
carries a polyline (a straight segment unless built from a skeleton chain) and
its length is the length of that polyline.
"""

from __future__ import annotations

import functools
import itertools
import logging
import math
import typing
from collections.abc import Iterable, Mapping

import networkx as nx
import numpy as np
import numpy.typing as npt
import shapely
from scipy.spatial import cKDTree
from shapely.geometry import LineString
from shapely.ops import substring

from ._errors import DomainError, FormatError, GraphReferenceError
from ._raster import BinaryMask, as_mask, dilate, skeletonize

logger = logging.getLogger(__name__)

DISTANCE_CACHE_SIZE = 1024
"""Shortest-path trees kept per graph."""

CHAIN_TOLERANCE = 1.0
"""Douglas-Peucker tolerance, in pixels, applied to extracted skeleton chains."""

type Point = tuple[float, float]
type PointArray = npt.NDArray[np.float64]


class PathQuery(typing.NamedTuple):
    source: int
    target: int


class RoadGraph:
    """Immutable undirected graph of road centrelines with dense node ids."""

    __hash__ = None  # type: ignore[assignment]

    def __init__(
        self,
        points: npt.ArrayLike,
        edges: Iterable[tuple[int, int]] = (),
        geometries: Mapping[tuple[int, int], npt.ArrayLike] | None = None,
    ) -> None:
        """Build a graph.

        Args:
            points: ``(n, 2)`` node coordinates, node `i` at row `i`.
            edges: pairs of node ids.
            geometries: optional interior polyline points per edge, keyed by the
                pair as given in `edges` and ordered from its first to its
                second node.
        """
        pts = np.array(points, dtype=np.float64).reshape(-1, 2)
        if not np.isfinite(pts).all():
            node = int(np.flatnonzero(~np.isfinite(pts).all(axis=1))[0])
            raise FormatError(  # noqa: TRY003
                f"Node {node} has non-finite coordinates {tuple(pts[node].tolist())}"
            )
        pts.flags.writeable = False
        geometries = geometries or {}
        n = len(pts)

        graph = nx.Graph()
        graph.add_nodes_from(range(n))
        for a, b in edges:
            a, b = int(a), int(b)
            for node in (a, b):
                if not 0 <= node < n:
                    raise GraphReferenceError(  # noqa: TRY003
                        f"Edge ({a}, {b}) references unknown node {node}"
                    )
            if a == b:
                raise FormatError(f"Self-loop on node {a}")  # noqa: TRY003
            if graph.has_edge(a, b):
                raise FormatError(f"Duplicate edge ({a}, {b})")  # noqa: TRY003
            if (a, b) in geometries:
                interior = np.asarray(geometries[(a, b)], dtype=np.float64).reshape(-1, 2)
            elif (b, a) in geometries:
                interior = np.asarray(geometries[(b, a)], dtype=np.float64).reshape(-1, 2)[::-1]
            else:
                interior = np.empty((0, 2))
            if not np.isfinite(interior).all():
                raise FormatError(  # noqa: TRY003
                    f"Edge ({a}, {b}) has non-finite polyline coordinates"
                )
            lo, hi = min(a, b), max(a, b)
            if lo != a:
                interior = interior[::-1]
            line = LineString(np.vstack([pts[lo], interior, pts[hi]]))
            graph.add_edge(lo, hi, length=float(line.length), geometry=line)

        self._points = pts
        self._graph = nx.freeze(graph)
        # LRU of full shortest-path trees, owned by this instance
        self._distances = functools.lru_cache(maxsize=DISTANCE_CACHE_SIZE)(self._shortest_tree)

    def __repr__(self) -> str:
        return f"RoadGraph(n_nodes={self.n_nodes}, n_edges={self.n_edges})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RoadGraph):
            return NotImplemented
        if not np.array_equal(self._points, other._points):
            return False
        if self.edges() != other.edges():
            return False
        return all(
            np.array_equal(self.interior_points(a, b), other.interior_points(a, b))
            for a, b in self.edges()
        )

    @property
    def n_nodes(self) -> int:
        return len(self._points)

    @property
    def n_edges(self) -> int:
        return self._graph.number_of_edges()

    @property
    def points(self) -> PointArray:
        return self._points

    @property
    def total_length(self) -> float:
        return math.fsum(length for _, _, length in self._graph.edges(data="length"))

    def check_node(self, node: int) -> None:
        if not 0 <= node < self.n_nodes:
            raise DomainError(  # noqa: TRY003
                f"Node id {node} is outside 0..{self.n_nodes - 1}"
            )

    def point(self, node: int) -> PointArray:
        self.check_node(node)
        return self._points[node]

    def neighbors(self, node: int) -> list[int]:
        self.check_node(node)
        return sorted(self._graph.adj[node])

    def degree(self, node: int) -> int:
        self.check_node(node)
        return int(self._graph.degree[node])

    def edges(self) -> list[tuple[int, int]]:
        """All edges as ``(low, high)`` pairs, sorted."""
        return sorted((min(a, b), max(a, b)) for a, b in self._graph.edges())

    def edge_length(self, a: int, b: int) -> float:
        return float(self._graph.edges[a, b]["length"])

    def edge_line(self, a: int, b: int) -> LineString:
        """Edge polyline oriented from `a` to `b`."""
        line: LineString = self._graph.edges[a, b]["geometry"]
        return line if a < b else line.reverse()

    def interior_points(self, a: int, b: int) -> PointArray:
        coords = shapely.get_coordinates(self.edge_line(a, b))
        return coords[1:-1]

    def components(self) -> list[list[int]]:
        return self._components

    @functools.cached_property
    def _components(self) -> list[list[int]]:
        found = [sorted(c) for c in nx.connected_components(self._graph)]
        return sorted(found, key=lambda c: c[0])

    @functools.cached_property
    def kdtree(self) -> cKDTree:
        return cKDTree(self._points if self.n_nodes else np.empty((0, 2)))

    def as_networkx(self) -> nx.Graph:
        """Frozen networkx view with ``length`` and ``geometry`` edge attributes."""
        return self._graph

    def _shortest_tree(self, source: int) -> dict[int, float]:
        return nx.single_source_dijkstra_path_length(self._graph, source, weight="length")

    def distances_from(self, source: int, cutoff: float | None = None) -> dict[int, float]:
        """Geodesic distances from `source`.

        Uncut results are cached for the last `DISTANCE_CACHE_SIZE` sources and
        shared between callers, so they must not be modified.
        """
        self.check_node(source)
        if cutoff is None:
            return self._distances(source)
        return nx.single_source_dijkstra_path_length(
            self._graph, source, cutoff=cutoff, weight="length"
        )


def _pixel_graph(
    skeleton: BinaryMask,
) -> tuple[npt.NDArray[np.intp], list[int], list[int], list[int]]:
    """CSR adjacency of skeleton pixels.

    Diagonal steps are only linked when neither shared orthogonal pixel is set,
    so the pixel graph has no triangles.
    """
    h, w = skeleton.shape
    pad = np.pad(skeleton, 1)

    def shifted(dr: int, dc: int) -> BinaryMask:
        return pad[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]

    steps = (
        ((0, 1), skeleton & shifted(0, 1)),
        ((1, 0), skeleton & shifted(1, 0)),
        ((1, 1), skeleton & shifted(1, 1) & ~shifted(0, 1) & ~shifted(1, 0)),
        ((1, -1), skeleton & shifted(1, -1) & ~shifted(0, -1) & ~shifted(1, 0)),
    )
    pixel_ids = np.flatnonzero(skeleton)
    src_parts, dst_parts = [], []
    for (dr, dc), sel in steps:
        r, c = np.nonzero(sel)
        src_parts.append(r * w + c)
        dst_parts.append((r + dr) * w + (c + dc))
    src = np.searchsorted(pixel_ids, np.concatenate(src_parts))
    dst = np.searchsorted(pixel_ids, np.concatenate(dst_parts))
    m = len(src)

    u = np.concatenate([src, dst])
    v = np.concatenate([dst, src])
    eid = np.concatenate([np.arange(m), np.arange(m)])
    order = np.lexsort((v, u))
    indptr = np.searchsorted(u[order], np.arange(len(pixel_ids) + 1))
    return pixel_ids, indptr.tolist(), v[order].tolist(), eid[order].tolist()


def mask_to_graph(m: npt.ArrayLike) -> RoadGraph:
    """Skeletonize a mask and contract its pixel graph into a road graph.

    Junctions and terminals become nodes and every degree-2 chain becomes one
    edge following the chain's pixels, simplified within `CHAIN_TOLERANCE`. A
    chain that would close a self-loop or duplicate an existing edge keeps
    interior pixels as extra nodes; an isolated cycle is anchored on its first
    pixel in row-major order.
    """
    skeleton = skeletonize(as_mask(m))
    pixel_ids, ip, nbr, eid = _pixel_graph(skeleton)
    n = len(pixel_ids)
    width = skeleton.shape[1]
    is_key = [ip[i + 1] - ip[i] != 2 for i in range(n)]
    visited = bytearray(len(eid) // 2)

    def walk(start: int, pos: int) -> list[int]:
        visited[eid[pos]] = 1
        path = [start, nbr[pos]]
        prev, cur = start, nbr[pos]
        while not is_key[cur]:
            p = ip[cur]
            if nbr[p] == prev:
                p += 1
            visited[eid[p]] = 1
            prev, cur = cur, nbr[p]
            path.append(cur)
        return path

    chains: list[list[int]] = []
    for s in range(n):
        if is_key[s]:
            chains.extend(walk(s, p) for p in range(ip[s], ip[s + 1]) if not visited[eid[p]])
    for s in range(n):
        if not is_key[s] and not visited[eid[ip[s]]]:
            is_key[s] = True
            chains.append(walk(s, ip[s]))

    kept = {s for s in range(n) if is_key[s]}
    pieces: list[list[int]] = []
    linked: set[tuple[int, int]] = set()
    for path in chains:
        a, b = path[0], path[-1]
        n_steps = len(path) - 1
        if a == b or (min(a, b), max(a, b)) in linked:
            cuts = sorted({n_steps // 3, 2 * n_steps // 3} - {0, n_steps})
            bounds = [0, *cuts, n_steps]
            split = [path[i : j + 1] for i, j in itertools.pairwise(bounds)]
        else:
            split = [path]
        for piece in split:
            a, b = piece[0], piece[-1]
            kept.update((a, b))
            linked.add((min(a, b), max(a, b)))
            pieces.append(piece)

    order = sorted(kept)
    dense = {pixel: i for i, pixel in enumerate(order)}
    rows, cols = np.divmod(pixel_ids, width)
    xy = np.column_stack([cols, rows]).astype(np.float64)
    # staircase chains overstate length; simplification keeps both end pixels
    lines = shapely.simplify([LineString(xy[p]) for p in pieces], CHAIN_TOLERANCE)
    geometries = {
        (dense[p[0]], dense[p[-1]]): shapely.get_coordinates(line)[1:-1]
        for p, line in zip(pieces, lines, strict=True)
    }
    graph = RoadGraph(xy[order], geometries.keys(), geometries)
    logger.debug(
        "skeleton of %d pixels contracted to %d nodes, %d edges",
        n,
        graph.n_nodes,
        graph.n_edges,
    )
    return graph


def _supercover(x0: float, y0: float, x1: float, y1: float) -> list[tuple[int, int]]:
    """Every pixel ``(col, row)`` the segment touches, both sides of corner crossings."""
    # shift so that pixel i spans [i, i + 1)
    x0, y0, x1, y1 = x0 + 0.5, y0 + 0.5, x1 + 0.5, y1 + 0.5
    ix, iy = math.floor(x0), math.floor(y0)
    ex, ey = math.floor(x1), math.floor(y1)
    dx, dy = x1 - x0, y1 - y0
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    t_dx = abs(1.0 / dx) if dx else math.inf
    t_dy = abs(1.0 / dy) if dy else math.inf
    t_x = ((ix + 1 - x0) if dx > 0 else (x0 - ix)) * t_dx if dx else math.inf
    t_y = ((iy + 1 - y0) if dy > 0 else (y0 - iy)) * t_dy if dy else math.inf

    cells = [(ix, iy)]
    remaining = abs(ex - ix) + abs(ey - iy)
    while remaining > 0:
        if abs(t_x - t_y) <= 1e-12:
            cells.append((ix + sx, iy))
            cells.append((ix, iy + sy))
            ix, iy = ix + sx, iy + sy
            t_x += t_dx
            t_y += t_dy
            remaining -= 2
        elif t_x < t_y:
            ix += sx
            t_x += t_dx
            remaining -= 1
        else:
            iy += sy
            t_y += t_dy
            remaining -= 1
        cells.append((ix, iy))
    return cells


def render_graph(g: RoadGraph, width: int, height: int, thickness: int = 1) -> BinaryMask:
    """Rasterize every node and the on-canvas part of every edge polyline, then thicken."""
    if width <= 0 or height <= 0:
        raise DomainError(f"Canvas must be positive, got {width}x{height}")  # noqa: TRY003
    if thickness < 1:
        raise DomainError(f"Thickness must be at least 1, got {thickness}")  # noqa: TRY003
    canvas = np.zeros((height, width), dtype=bool)
    cells: list[tuple[int, int]] = []
    for a, b in g.edges():
        # pixel i spans [i - 0.5, i + 0.5), so the margin keeps every border cell
        clipped = shapely.clip_by_rect(g.edge_line(a, b), -1.0, -1.0, width, height)
        for part in shapely.get_parts(clipped):
            for (xa, ya), (xb, yb) in itertools.pairwise(shapely.get_coordinates(part)):
                cells.extend(_supercover(xa, ya, xb, yb))
    for x, y in g.points:
        cells.append((math.floor(x + 0.5), math.floor(y + 0.5)))
    if cells:
        xs, ys = np.asarray(cells, dtype=np.int64).T
        inside = (xs >= 0) & (xs < width) & (ys >= 0) & (ys < height)
        canvas[ys[inside], xs[inside]] = True
    return dilate(canvas, thickness // 2)


def shortest_path_length(g: RoadGraph, query: PathQuery | tuple[int, int]) -> float | None:
    """Exact geodesic distance, or `None` when the target is unreachable."""
    source, target = query
    g.check_node(target)
    return g.distances_from(source).get(target)


def snap_node(g: RoadGraph, p: npt.ArrayLike, max_dist: float = 25.0) -> int | None:
    """Nearest node within `max_dist`, smallest id on ties."""
    if max_dist < 0:
        raise DomainError(f"Snap distance must be non-negative, got {max_dist}")  # noqa: TRY003
    if g.n_nodes == 0:
        return None
    query = np.asarray(p, dtype=np.float64)
    found = g.kdtree.query_ball_point(query, r=max_dist * (1 + 1e-9) + 1e-9)
    if not found:
        return None
    candidates = np.array(sorted(found), dtype=np.intp)
    offsets = g.points[candidates] - query
    dist = np.hypot(offsets[:, 0], offsets[:, 1])
    best = int(np.argmin(dist))
    if dist[best] > max_dist:
        return None
    return int(candidates[best])


def junctions(g: RoadGraph) -> list[int]:
    return [node for node in range(g.n_nodes) if g.degree(node) >= 3]


def subgraph_within(g: RoadGraph, center: int, radius: float) -> RoadGraph:
    """Nodes within geodesic `radius` of `center`, outgoing edges cut at the radius.

    Kept nodes are renumbered in ascending original id order; boundary nodes
    inserted on truncated edges follow them.
    """
    if radius < 0:
        raise DomainError(f"Radius must be non-negative, got {radius}")  # noqa: TRY003
    dist = g.distances_from(center, cutoff=radius)
    inside = sorted(dist)
    dense = {node: i for i, node in enumerate(inside)}
    points = [g.point(node) for node in inside]
    edges: list[tuple[int, int]] = []
    geometries: dict[tuple[int, int], PointArray] = {}
    for u in inside:
        for v in g.neighbors(u):
            if v in dense:
                if u < v:
                    edges.append((dense[u], dense[v]))
                    geometries[edges[-1]] = g.interior_points(u, v)
                continue
            remaining = radius - dist[u]
            if remaining <= 0:
                continue
            coords = shapely.get_coordinates(substring(g.edge_line(u, v), 0.0, remaining))
            points.append(coords[-1])
            edges.append((dense[u], len(points) - 1))
            geometries[edges[-1]] = coords[1:-1]
    return RoadGraph(np.asarray(points).reshape(-1, 2), edges, geometries)


def walk_points(g: RoadGraph, start: int, max_dist: float, spacing: float) -> PointArray:
    """Points every `spacing` of geodesic distance from `start`, up to `max_dist`.

    Points along every reachable path are interpolated on the edge polylines;
    a point closer than ``spacing / 2`` to an earlier one (ordered by geodesic
    distance, then coordinates) is dropped. Returns an ``(k, 2)`` array.
    """
    if spacing <= 0:
        raise DomainError(f"Spacing must be positive, got {spacing}")  # noqa: TRY003
    dist = g.distances_from(start, cutoff=max_dist)
    tol = 1e-9 * max(1.0, spacing)
    geo = [np.zeros(1)]
    coords = [g.point(start).reshape(1, 2)]
    for u in sorted(dist):
        du = dist[u]
        for v in g.neighbors(u):
            length = g.edge_length(u, v)
            dv = dist.get(v, math.inf)
            reach = min(du + length, max_dist, (du + dv + length) / 2)
            k_first = math.ceil((du - tol) / spacing)
            k_last = math.floor((reach + tol) / spacing)
            if k_last < k_first:
                continue
            marks = np.arange(k_first, k_last + 1) * spacing
            offsets = np.clip(marks - du, 0.0, length)
            found = shapely.line_interpolate_point(g.edge_line(u, v), offsets)
            geo.append(marks)
            coords.append(shapely.get_coordinates(found))

    all_geo = np.concatenate(geo)
    all_xy = np.vstack(coords)
    order = np.lexsort((all_xy[:, 1], all_xy[:, 0], all_geo))
    tree = cKDTree(all_xy)
    dropped = np.zeros(len(all_xy), dtype=bool)
    kept: list[int] = []
    for i in order:
        if dropped[i]:
            continue
        kept.append(int(i))
        for j in tree.query_ball_point(all_xy[i], r=spacing / 2 * (1 - 1e-9)):
            dropped[j] = True
    return all_xy[kept]


def scale_graph(g: RoadGraph, factor: float) -> RoadGraph:
    """Multiply every coordinate by `factor` about the origin."""
    if factor <= 0:
        raise DomainError(f"Scale factor must be positive, got {factor}")  # noqa: TRY003
    edges = g.edges()
    return RoadGraph(
        g.points * factor,
        edges,
        {(a, b): g.interior_points(a, b) * factor for a, b in edges},
    )


def connected_pairs(g: RoadGraph) -> list[tuple[int, int]]:
    """Every unordered pair ``(a, b)``, ``a < b``, joined by some path."""
    pairs: list[tuple[int, int]] = []
    for component in g.components():
        pairs.extend(itertools.combinations(component, 2))
    return sorted(pairs)


def all_pairs_lengths(g: RoadGraph) -> dict[int, dict[int, float]]:
    """Geodesic distances between every node and everything it reaches."""
    return {node: g.distances_from(node) for node in range(g.n_nodes)}


__all__ = [
    "CHAIN_TOLERANCE",
    "DISTANCE_CACHE_SIZE",
    "PathQuery",
    "Point",
    "PointArray",
    "RoadGraph",
    "all_pairs_lengths",
    "connected_pairs",
    "junctions",
    "mask_to_graph",
    "render_graph",
    "scale_graph",
    "shortest_path_length",
    "snap_node",
    "subgraph_within",
    "walk_points",
]
