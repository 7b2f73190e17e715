"""Topology-aware labels, losses and metrics for road segmentation"""

__version__ = "0.1.0"

from ._errors import DomainError, FormatError, GraphReferenceError, RoadTopoError, ShapeError
from ._graph import (
    CHAIN_TOLERANCE,
    DISTANCE_CACHE_SIZE,
    PathQuery,
    RoadGraph,
    all_pairs_lengths,
    connected_pairs,
    junctions,
    mask_to_graph,
    render_graph,
    scale_graph,
    shortest_path_length,
    snap_node,
    subgraph_within,
    walk_points,
)
from ._io import (
    EdgeRecord,
    GraphDocument,
    MaskKind,
    NodeRecord,
    read_graph,
    read_image,
    read_label_pyramid,
    read_mask,
    read_output_pyramid,
    read_raw_mask,
    read_report,
    write_graph,
    write_label_pyramid,
    write_mask,
    write_output_pyramid,
    write_report,
)
from ._labelgen import (
    Interruption,
    LabelResult,
    build_label_pyramid,
    false_negative_set,
    finest_labels,
    generate_labels,
    interruptions,
    vanilla_labels,
)
from ._losses import (
    LossKind,
    LossReport,
    LossValue,
    apply_clamp,
    bce_loss,
    discriminator_loss,
    generator_loss,
    recursive_generator_loss,
    vanilla_gan_reduction,
)
from ._metrics import (
    AplsResult,
    CcqResult,
    HolesAndMarblesResult,
    MatchedPathSample,
    REPORT_FORMAT_VERSION,
    PrecisionRecall,
    Provenance,
    Report,
    ResolvedParams,
    Summary,
    TltsResult,
    apls,
    ccq,
    evaluate_all,
    holes_and_marbles,
    junct,
    match_paths,
    sample_connected_pairs,
    summarize,
    tlts,
)
from ._params import EPSILON, PYRAMID_PATCH_SIZES, LabelParams, LossParams, MetricParams
from ._pyramid import LabelLevel, LabelPyramid, OutputLevel, OutputPyramid, and_reduce
from ._raster import (
    DiscriminatorInput,
    build_discriminator_input,
    build_t0,
    connected_components,
    dilate,
    mask_intersect,
    skeletonize,
    ste_backward,
    threshold_forward,
)

__all__ = [
    "CHAIN_TOLERANCE",
    "DISTANCE_CACHE_SIZE",
    "EPSILON",
    "PYRAMID_PATCH_SIZES",
    "REPORT_FORMAT_VERSION",
    "AplsResult",
    "CcqResult",
    "DiscriminatorInput",
    "DomainError",
    "EdgeRecord",
    "FormatError",
    "GraphDocument",
    "GraphReferenceError",
    "HolesAndMarblesResult",
    "Interruption",
    "LabelLevel",
    "LabelParams",
    "LabelPyramid",
    "LabelResult",
    "LossKind",
    "LossParams",
    "LossReport",
    "LossValue",
    "MaskKind",
    "MatchedPathSample",
    "MetricParams",
    "NodeRecord",
    "OutputLevel",
    "OutputPyramid",
    "PathQuery",
    "PrecisionRecall",
    "Provenance",
    "Report",
    "ResolvedParams",
    "RoadGraph",
    "RoadTopoError",
    "ShapeError",
    "Summary",
    "TltsResult",
    "all_pairs_lengths",
    "and_reduce",
    "apls",
    "apply_clamp",
    "bce_loss",
    "build_discriminator_input",
    "build_label_pyramid",
    "build_t0",
    "ccq",
    "connected_components",
    "connected_pairs",
    "dilate",
    "discriminator_loss",
    "evaluate_all",
    "false_negative_set",
    "finest_labels",
    "generate_labels",
    "generator_loss",
    "holes_and_marbles",
    "interruptions",
    "junct",
    "junctions",
    "match_paths",
    "mask_intersect",
    "mask_to_graph",
    "read_graph",
    "read_image",
    "read_label_pyramid",
    "read_mask",
    "read_output_pyramid",
    "read_raw_mask",
    "read_report",
    "recursive_generator_loss",
    "render_graph",
    "sample_connected_pairs",
    "scale_graph",
    "shortest_path_length",
    "skeletonize",
    "snap_node",
    "ste_backward",
    "subgraph_within",
    "summarize",
    "threshold_forward",
    "tlts",
    "vanilla_gan_reduction",
    "vanilla_labels",
    "walk_points",
    "write_graph",
    "write_label_pyramid",
    "write_mask",
    "write_output_pyramid",
    "write_report",
]
