"""Reading and writing masks, road graphs, pyramids and reports.

Every reader accepts a local path or an ``http(s)://`` URL.
"""

from __future__ import annotations

import enum
import io
import json
import logging
import math
import pathlib
import typing
from collections.abc import Callable

import httpx
import numpy as np
import numpy.typing as npt
import yaml
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ._errors import DomainError, FormatError, GraphReferenceError
from ._graph import RoadGraph
from ._metrics import Report
from ._pyramid import LabelPyramid, OutputPyramid
from ._raster import BinaryMask, FloatArray, ProbabilityMap, as_mask, as_probability

logger = logging.getLogger(__name__)

type Source = str | pathlib.Path


class MaskKind(enum.StrEnum):
    BINARY = "binary"
    PROBABILITY = "probability"


def _is_url(source: Source) -> bool:
    return isinstance(source, str) and source.startswith(("http://", "https://"))


def _is_yaml(source: Source) -> bool:
    return str(source).endswith((".yaml", ".yml"))


def _is_document(source: Source) -> bool:
    return _is_yaml(source) or str(source).endswith(".json")


def _load_from_url(url: str) -> bytes:
    try:
        response = httpx.get(url, follow_redirects=True, timeout=30)
        response.raise_for_status()
    except httpx.HTTPError as exc:
        raise OSError(f"Cannot fetch {url}: {exc}") from exc  # noqa: TRY003
    return response.content


def _read_bytes(source: Source) -> bytes:
    if _is_url(source):
        return _load_from_url(str(source))
    return pathlib.Path(source).read_bytes()


def _read_text(source: Source) -> str:
    try:
        return _read_bytes(source).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{source}: not valid UTF-8 text") from exc  # noqa: TRY003


def _load_document(source: Source) -> typing.Any:
    text = _read_text(source)
    try:
        if _is_yaml(source):
            return yaml.safe_load(text)
        return json.loads(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise FormatError(f"{source}: {exc}") from exc  # noqa: TRY003


def _read_model[M: BaseModel](model: type[M], source: Source) -> M:
    raw = _load_document(source)
    try:
        return model.model_validate(raw)
    except ValidationError as exc:
        raise FormatError(f"{source}: invalid {model.__name__}: {exc}") from exc  # noqa: TRY003


def _write_document(document: BaseModel, path: Source) -> None:
    target = pathlib.Path(path)
    if _is_yaml(target):
        text = yaml.safe_dump(document.model_dump(mode="json"), sort_keys=False)
    else:
        text = document.model_dump_json(indent=2) + "\n"
    target.write_text(text, encoding="utf-8")


# Rasters


def _parse_pgm(data: bytes, origin: Source) -> npt.NDArray[np.uint8]:
    """Decode a binary PGM; ``#`` comments are allowed between header fields."""
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and (data[pos : pos + 1].isspace() or data[pos] == ord("#")):
            if data[pos] == ord("#"):
                newline = data.find(b"\n", pos)
                pos = len(data) if newline == -1 else newline
            pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace() and data[pos] != ord("#"):
            pos += 1
        if start == pos:
            raise FormatError(f"{origin}: truncated PGM header")  # noqa: TRY003
        tokens.append(data[start:pos])

    magic, *fields = tokens
    if magic != b"P5":
        raise FormatError(f"{origin}: expected PGM magic P5, got {magic!r}")  # noqa: TRY003
    try:
        width, height, maxval = (int(field) for field in fields)
    except ValueError as exc:
        raise FormatError(f"{origin}: malformed PGM header {fields!r}") from exc  # noqa: TRY003
    if width <= 0 or height <= 0:
        raise FormatError(f"{origin}: invalid PGM size {width}x{height}")  # noqa: TRY003
    if maxval != 255:
        raise FormatError(f"{origin}: PGM maxval must be 255, got {maxval}")  # noqa: TRY003
    if pos >= len(data):
        raise FormatError(f"{origin}: PGM header is not followed by pixel data")  # noqa: TRY003

    payload = data[pos + 1 :]
    expected = width * height
    if len(payload) != expected:
        raise FormatError(  # noqa: TRY003
            f"{origin}: header declares {width}x{height} = {expected} pixels, "
            f"payload has {len(payload)} bytes"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width)


def _decode_raster(data: bytes, origin: Source) -> npt.NDArray[np.uint8]:
    if data.startswith(b"P5") or str(origin).endswith(".pgm"):
        return _parse_pgm(data, origin)
    try:
        image = Image.open(io.BytesIO(data))
        image.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise FormatError(f"{origin}: unreadable raster: {exc}") from exc  # noqa: TRY003
    if image.mode == "1":
        image = image.convert("L")
    if image.mode != "L":
        raise FormatError(  # noqa: TRY003
            f"{origin}: expected an 8-bit single-channel raster, got mode {image.mode}"
        )
    return np.asarray(image, dtype=np.uint8)


def read_raw_mask(source: Source) -> npt.NDArray[np.uint8]:
    return _decode_raster(_read_bytes(source), source)


@typing.overload
def read_mask(source: Source, kind: typing.Literal[MaskKind.BINARY] = ...) -> BinaryMask: ...
@typing.overload
def read_mask(source: Source, kind: typing.Literal[MaskKind.PROBABILITY]) -> ProbabilityMap: ...
@typing.overload
def read_mask(source: Source, kind: MaskKind | str) -> BinaryMask | ProbabilityMap: ...
def read_mask(
    source: Source, kind: MaskKind | str = MaskKind.BINARY
) -> BinaryMask | ProbabilityMap:
    """Read an 8-bit raster as a binary mask (0/255) or a probability map (v/255)."""
    raw = read_raw_mask(source)
    if MaskKind(kind) is MaskKind.PROBABILITY:
        return raw.astype(np.float64) / 255.0
    invalid = (raw != 0) & (raw != 255)
    if invalid.any():
        row, col = np.argwhere(invalid)[0]
        raise DomainError(  # noqa: TRY003
            f"{source}: pixel (row={row}, col={col}) is {raw[row, col]}, "
            "a binary mask only holds 0 or 255"
        )
    return raw == 255


def write_mask(m: npt.ArrayLike, path: Source) -> None:
    """Write a mask (booleans) or probability map (floats, quantized by 255)."""
    arr = np.asarray(m)
    if arr.dtype == np.bool_:
        raw = as_mask(arr).astype(np.uint8) * 255
    else:
        raw = np.rint(as_probability(arr) * 255.0).astype(np.uint8)
    target = pathlib.Path(path)
    if target.suffix.lower() == ".pgm":
        height, width = raw.shape
        target.write_bytes(f"P5\n{width} {height}\n255\n".encode("ascii") + raw.tobytes())
    else:
        Image.fromarray(raw).save(target)


def read_image(source: Source) -> FloatArray:
    """Companion image in [0, 1], ``(H, W)`` or ``(H, W, C)``."""
    try:
        image = Image.open(io.BytesIO(_read_bytes(source)))
        image.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise FormatError(f"{source}: unreadable image: {exc}") from exc  # noqa: TRY003
    if image.mode not in ("L", "RGB", "RGBA"):
        image = image.convert("RGB")
    return np.asarray(image, dtype=np.float64) / 255.0


# Graphs


class NodeRecord(BaseModel):
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    id: int = Field(ge=0)
    x: float
    y: float


class EdgeRecord(BaseModel):
    """An edge with interior polyline points between its two nodes."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    a: int = Field(ge=0)
    b: int = Field(ge=0)
    via: list[tuple[float, float]] = []


class GraphDocument(BaseModel):
    model_config = ConfigDict(frozen=True)

    nodes: list[NodeRecord] = []
    edges: list[tuple[int, int] | EdgeRecord] = []

    @classmethod
    def from_graph(cls, graph: RoadGraph) -> typing.Self:
        nodes = [
            NodeRecord(id=i, x=float(x), y=float(y)) for i, (x, y) in enumerate(graph.points)
        ]
        edges: list[tuple[int, int] | EdgeRecord] = []
        for a, b in graph.edges():
            via = graph.interior_points(a, b)
            if len(via):
                edges.append(EdgeRecord(a=a, b=b, via=[(float(x), float(y)) for x, y in via]))
            else:
                edges.append((a, b))
        return cls(nodes=nodes, edges=edges)

    def to_graph(self, origin: Source = "<document>") -> RoadGraph:
        nodes: dict[int, tuple[float, float]] = {}
        for node in self.nodes:
            if node.id in nodes:
                raise FormatError(f"{origin}: duplicate node id {node.id}")  # noqa: TRY003
            nodes[node.id] = (node.x, node.y)
        edges = []
        for edge in self.edges:
            if isinstance(edge, EdgeRecord):
                edges.append((edge.a, edge.b, edge.via))
            else:
                edges.append((edge[0], edge[1], []))
        return _assemble_graph(nodes, edges, origin)


type _EdgeSpec = tuple[int, int, typing.Sequence[tuple[float, float]]]


def _assemble_graph(
    nodes: dict[int, tuple[float, float]], edges: list[_EdgeSpec], origin: Source
) -> RoadGraph:
    """Remap arbitrary node ids onto ``0..n-1`` in ascending id order."""
    dense = {node: i for i, node in enumerate(sorted(nodes))}
    pairs: list[tuple[int, int]] = []
    via: dict[tuple[int, int], npt.NDArray[np.float64]] = {}
    for a, b, points in edges:
        for node in (a, b):
            if node not in dense:
                raise GraphReferenceError(  # noqa: TRY003
                    f"{origin}: edge ({a}, {b}) references unknown node {node}"
                )
        pair = (dense[a], dense[b])
        pairs.append(pair)
        via[pair] = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    points_xy = np.array([nodes[node] for node in sorted(nodes)], dtype=np.float64)
    try:
        return RoadGraph(points_xy.reshape(-1, 2), pairs, via)
    except FormatError as exc:
        raise FormatError(f"{origin}: {exc}") from exc  # noqa: TRY003


def _number[T](cast: Callable[[str], T], text: str, where: str) -> T:
    try:
        return cast(text)
    except ValueError as exc:
        raise FormatError(f"{where}: {text!r} is not a valid number") from exc  # noqa: TRY003


def _coordinate(text: str, where: str) -> float:
    value = _number(float, text, where)
    if not math.isfinite(value):
        raise FormatError(f"{where}: coordinate {text!r} is not finite")  # noqa: TRY003
    return value


def _parse_graph_text(text: str, origin: Source) -> RoadGraph:
    nodes: dict[int, tuple[float, float]] = {}
    edges: list[_EdgeSpec] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        record = line.strip()
        if not record or record.startswith("#"):
            continue
        where = f"{origin}:{lineno}"
        kind, *fields = record.split()
        match kind:
            case "N" if len(fields) == 3:
                node = _number(int, fields[0], where)
                if node < 0:
                    raise FormatError(f"{where}: negative node id {node}")  # noqa: TRY003
                if node in nodes:
                    raise FormatError(f"{where}: duplicate node id {node}")  # noqa: TRY003
                nodes[node] = (_coordinate(fields[1], where), _coordinate(fields[2], where))
            case "E" if len(fields) >= 2 and len(fields) % 2 == 0:
                coords = [_coordinate(v, where) for v in fields[2:]]
                via = list(zip(coords[::2], coords[1::2], strict=True))
                edges.append((_number(int, fields[0], where), _number(int, fields[1], where), via))
            case _:
                raise FormatError(f"{where}: unrecognized record {record!r}")  # noqa: TRY003
    return _assemble_graph(nodes, edges, origin)


def read_graph(source: Source) -> RoadGraph:
    """Read a graph from the line format, or from a JSON/YAML document by extension."""
    if _is_document(source):
        graph = _read_model(GraphDocument, source).to_graph(source)
    else:
        graph = _parse_graph_text(_read_text(source), source)
    logger.debug("read %r from %s", graph, source)
    return graph


def _format_graph_text(graph: RoadGraph) -> str:
    lines = [f"N {i} {float(x)!r} {float(y)!r}" for i, (x, y) in enumerate(graph.points)]
    for a, b in graph.edges():
        via = "".join(f" {float(x)!r} {float(y)!r}" for x, y in graph.interior_points(a, b))
        lines.append(f"E {a} {b}{via}")
    return "".join(f"{line}\n" for line in lines)


def write_graph(graph: RoadGraph, path: Source) -> None:
    if _is_document(path):
        _write_document(GraphDocument.from_graph(graph), path)
    else:
        pathlib.Path(path).write_text(_format_graph_text(graph), encoding="utf-8")


# Pyramids and reports


def read_label_pyramid(source: Source) -> LabelPyramid:
    return _read_model(LabelPyramid, source)


def write_label_pyramid(pyramid: LabelPyramid, path: Source) -> None:
    _write_document(pyramid, path)


def read_output_pyramid(source: Source) -> OutputPyramid:
    return _read_model(OutputPyramid, source)


def write_output_pyramid(pyramid: OutputPyramid, path: Source) -> None:
    _write_document(pyramid, path)


def read_report(source: Source) -> Report:
    return _read_model(Report, source)


def write_report(report: BaseModel, path: Source) -> None:
    """Write any report-like model as indented JSON with a trailing newline."""
    target = pathlib.Path(path)
    target.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")


__all__ = [
    "EdgeRecord",
    "GraphDocument",
    "MaskKind",
    "NodeRecord",
    "Source",
    "read_graph",
    "read_image",
    "read_label_pyramid",
    "read_mask",
    "read_output_pyramid",
    "read_raw_mask",
    "read_report",
    "write_graph",
    "write_label_pyramid",
    "write_mask",
    "write_output_pyramid",
    "write_report",
]
