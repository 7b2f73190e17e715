"""CLI entry point for roadtopo."""

from __future__ import annotations

import concurrent.futures
import logging
import math
import pathlib
import sys
import typing
from collections.abc import Callable, Sequence

import click
import numpy as np
import yaml
from pydantic import BaseModel

from . import __version__
from ._errors import DomainError, RoadTopoError, ShapeError
from ._graph import RoadGraph, mask_to_graph, render_graph, scale_graph
from ._io import (
    MaskKind,
    read_graph,
    read_image,
    read_label_pyramid,
    read_mask,
    read_output_pyramid,
    write_graph,
    write_label_pyramid,
    write_mask,
    write_report,
)
from ._labelgen import generate_labels
from ._losses import (
    LossKind,
    LossReport,
    LossValue,
    bce_loss,
    discriminator_loss,
    generator_loss,
    vanilla_gan_reduction,
)
from ._metrics import REPORT_FORMAT_VERSION, Provenance, Report, evaluate_all, summarize
from ._params import LabelParams, LossParams, MetricParams
from ._raster import BinaryMask, build_discriminator_input, skeletonize

logger = logging.getLogger(__name__)


_LOG_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


def _load_config(ctx: click.Context, param: click.Parameter, value: str | None) -> None:
    if value is None:
        return
    try:
        with open(value, encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as exc:
        raise click.BadParameter(str(exc), ctx=ctx, param=param) from exc
    if data is None:
        return
    if not isinstance(data, dict):
        raise click.BadParameter(
            "expected a mapping of subcommand names to option values", ctx=ctx, param=param
        )
    ctx.default_map = {**(ctx.default_map or {}), **data}


def _model_options[F: Callable[..., typing.Any]](model: type[BaseModel]) -> Callable[[F], F]:
    """One option per field of `model`, defaulting to the field default."""

    def decorator(f: F) -> F:
        for name, info in reversed(model.model_fields.items()):
            flag = name.replace("_", "-")
            if info.annotation is bool:
                f = click.option(
                    f"--{flag}/--no-{flag}",
                    name,
                    default=info.default,
                    show_default=True,
                    help=info.description,
                )(f)
            else:
                f = click.option(
                    f"--{flag}",
                    name,
                    type=info.annotation,
                    default=info.default,
                    show_default=True,
                    help=info.description,
                )(f)
        return f

    return decorator


def _build_params[P: (MetricParams, LabelParams, LossParams)](
    model: type[P], options: dict[str, typing.Any]
) -> P:
    try:
        return model.build(**options)
    except DomainError as exc:
        raise click.UsageError(str(exc)) from exc


def _emit(document: BaseModel, out: pathlib.Path | None) -> None:
    if out is None:
        click.echo(document.model_dump_json(indent=2))
    else:
        write_report(document, out)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(
    __version__,
    prog_name="roadtopo",
    message=f"%(prog)s %(version)s (report format {REPORT_FORMAT_VERSION})",
)
@click.option(
    "--config",
    type=click.Path(dir_okay=False),
    is_eager=True,
    expose_value=False,
    callback=_load_config,
    help="YAML or JSON file of option defaults, keyed by subcommand.",
)
@click.option("-v", "--verbose", count=True, help="Log progress (-v) or details (-vv).")
def cli(verbose: int) -> None:
    """Topology-aware labels, losses and metrics for road segmentation."""
    logging.basicConfig(
        level=_LOG_LEVELS[min(verbose, len(_LOG_LEVELS) - 1)],
        format="%(levelname)s %(name)s: %(message)s",
    )


# metrics


def _read_ground_truth(source: str, as_graph: bool) -> RoadGraph | BinaryMask:
    return read_graph(source) if as_graph else read_mask(source)


def _evaluate_pair(
    job: tuple[str, str, str, bool, MetricParams],
) -> tuple[str, Report]:
    name, pred, gt, gt_is_graph, params = job
    try:
        report = evaluate_all(
            read_mask(pred),
            _read_ground_truth(gt, gt_is_graph),
            params,
            inputs={"pred": pred, "gt": gt},
        )
    except ShapeError as exc:
        raise ShapeError(f"{pred} and {gt}: {exc}") from exc  # noqa: TRY003
    return name, report


def _evaluate_tile(
    job: tuple[str, str, str, bool, MetricParams],
) -> tuple[str, Report | str]:
    """Like `_evaluate_pair`, but a tile that cannot be scored yields its error message."""
    try:
        return _evaluate_pair(job)
    except (RoadTopoError, OSError) as exc:
        return job[0], str(exc)


def _files_by_stem(directory: pathlib.Path) -> dict[str, pathlib.Path]:
    return {
        path.stem: path
        for path in sorted(directory.iterdir())
        if path.is_file() and not path.name.startswith(".")
    }


def _pair_by_stem(
    pred_dir: pathlib.Path, gt_dir: pathlib.Path
) -> list[tuple[str, pathlib.Path, pathlib.Path]]:
    preds, gts = _files_by_stem(pred_dir), _files_by_stem(gt_dir)
    for stem in sorted(preds.keys() ^ gts.keys()):
        logger.warning("no counterpart for %r, skipped", stem)
    common = sorted(preds.keys() & gts.keys())
    if not common:
        raise DomainError(  # noqa: TRY003
            f"No file in {pred_dir} shares a name with a file in {gt_dir}"
        )
    return [(stem, preds[stem], gts[stem]) for stem in common]


def _run_batch(
    jobs: list[tuple[str, str, str, bool, MetricParams]], workers: int
) -> tuple[dict[str, Report], dict[str, str]]:
    reports: dict[str, Report] = {}
    errors: dict[str, str] = {}

    def collect(name: str, outcome: Report | str) -> None:
        if isinstance(outcome, Report):
            reports[name] = outcome
        else:
            logger.warning("%s not scored: %s", name, outcome)
            errors[name] = outcome

    with click.progressbar(length=len(jobs), label="Evaluating", file=sys.stderr) as bar:
        if workers == 1:
            for job in jobs:
                collect(*_evaluate_tile(job))
                bar.update(1)
        else:
            with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
                for outcome in pool.map(_evaluate_tile, jobs):
                    collect(*outcome)
                    bar.update(1)
    return reports, errors


@cli.command()
@click.option("--pred", required=True, help="Predicted mask, or a directory of them.")
@click.option("--gt", help="Ground-truth mask, or a directory of them.")
@click.option("--gt-graph", help="Ground-truth graph, or a directory of them.")
@click.option(
    "-o",
    "--out",
    type=click.Path(path_type=pathlib.Path),
    help="Report file, or output directory in batch mode. Prints to stdout if omitted.",
)
@click.option(
    "--workers",
    type=click.IntRange(min=1),
    default=1,
    show_default=True,
    help="Parallel processes in batch mode.",
)
@_model_options(MetricParams)
def metrics(
    pred: str,
    gt: str | None,
    gt_graph: str | None,
    out: pathlib.Path | None,
    workers: int,
    **options: typing.Any,
) -> None:
    """Score predicted road masks against ground truth.

    With directories for --pred and --gt (or --gt-graph), files are paired by
    name without extension; one report per pair and a pooled summary.json are
    written to the --out directory. Pairs that cannot be scored are listed
    under "errors" in the summary; the run fails only when none can.
    """
    if (gt is None) == (gt_graph is None):
        raise click.UsageError("Exactly one of --gt and --gt-graph is required")  # noqa: TRY003
    params = _build_params(MetricParams, options)
    truth = typing.cast(str, gt if gt is not None else gt_graph)
    gt_is_graph = gt_graph is not None

    if not pathlib.Path(pred).is_dir():
        _, report = _evaluate_pair(("", pred, truth, gt_is_graph, params))
        _emit(report, out)
        return

    if out is None:
        raise click.UsageError("--out is required when --pred is a directory")  # noqa: TRY003
    pairs = _pair_by_stem(pathlib.Path(pred), pathlib.Path(truth))
    jobs = [(stem, str(p), str(g), gt_is_graph, params) for stem, p, g in pairs]
    logger.info("evaluating %d pair(s) with %d worker(s)", len(jobs), workers)
    reports, errors = _run_batch(jobs, workers)
    if not reports:
        raise DomainError(f"None of the {len(jobs)} pair(s) could be scored")  # noqa: TRY003
    out.mkdir(parents=True, exist_ok=True)
    for stem, report in reports.items():
        write_report(report, out / f"{stem}.json")
    write_report(summarize(reports, errors), out / "summary.json")


# labels


@cli.command()
@click.option("--pred", required=True, help="Predicted probability map.")
@click.option("--gt", required=True, help="Ground-truth mask.")
@click.option(
    "-o",
    "--out",
    type=click.Path(path_type=pathlib.Path),
    help="Label pyramid document (JSON or YAML). Prints to stdout if omitted.",
)
@click.option(
    "--t0-out",
    type=click.Path(path_type=pathlib.Path),
    help="Also write the thresholded, ground-truth-restricted prediction.",
)
@click.option("--image", help="Companion image stacked into the discriminator input.")
@click.option(
    "--input-out",
    type=click.Path(path_type=pathlib.Path),
    help="Write the stacked discriminator input as a .npy array.",
)
@_model_options(LabelParams)
def labels(
    pred: str,
    gt: str,
    out: pathlib.Path | None,
    t0_out: pathlib.Path | None,
    image: str | None,
    input_out: pathlib.Path | None,
    **options: typing.Any,
) -> None:
    """Generate the multi-scale label pyramid for one prediction."""
    params = _build_params(LabelParams, options)
    prob = read_mask(pred, MaskKind.PROBABILITY)
    truth = read_mask(gt)
    if prob.shape != truth.shape:
        raise ShapeError(  # noqa: TRY003
            f"{pred} has shape {prob.shape} but {gt} has shape {truth.shape}"
        )
    result = generate_labels(truth, prob, params)
    if out is None:
        click.echo(result.pyramid.model_dump_json(indent=2))
    else:
        write_label_pyramid(result.pyramid, out)
    if t0_out is not None:
        write_mask(result.t0, t0_out)
    if input_out is not None:
        companion = read_image(image) if image is not None else None
        np.save(input_out, build_discriminator_input(result.t0, companion).stacked())


# rasters and graphs


@cli.command("skeletonize")
@click.option("--mask", "mask_path", required=True, help="Binary road mask.")
@click.option("-o", "--out", required=True, type=click.Path(path_type=pathlib.Path))
def skeletonize_command(mask_path: str, out: pathlib.Path) -> None:
    """Thin a road mask to one-pixel-wide centrelines."""
    write_mask(skeletonize(read_mask(mask_path)), out)


@cli.command()
@click.option("--mask", "mask_path", required=True, help="Binary road mask.")
@click.option(
    "-o",
    "--out",
    required=True,
    type=click.Path(path_type=pathlib.Path),
    help="Graph file: line format, or JSON/YAML by extension.",
)
def mask2graph(mask_path: str, out: pathlib.Path) -> None:
    """Extract the centreline graph of a road mask."""
    graph = mask_to_graph(read_mask(mask_path))
    logger.info("extracted %r", graph)
    write_graph(graph, out)


@cli.command()
@click.option("--graph", "graph_path", required=True, help="Road graph file.")
@click.option("-o", "--out", required=True, type=click.Path(path_type=pathlib.Path))
@click.option("--width", type=click.IntRange(min=1), help="Canvas width before scaling.")
@click.option("--height", type=click.IntRange(min=1), help="Canvas height before scaling.")
@click.option(
    "--scale",
    type=click.FloatRange(min=0.0, min_open=True),
    default=1.0,
    show_default=True,
    help="Factor applied to coordinates and canvas, e.g. 0.5 for half resolution.",
)
@click.option("--thickness", type=click.IntRange(min=1), default=1, show_default=True)
def render(
    graph_path: str,
    out: pathlib.Path,
    width: int | None,
    height: int | None,
    scale: float,
    thickness: int,
) -> None:
    """Rasterize a road graph.

    The canvas defaults to the smallest one holding every node.
    """
    graph = read_graph(graph_path)
    extent = graph.points.max(axis=0) if graph.n_nodes else np.zeros(2)
    width = width or int(math.floor(extent[0])) + 1
    height = height or int(math.floor(extent[1])) + 1
    if scale != 1.0:
        graph = scale_graph(graph, scale)
        width, height = math.ceil(width * scale), math.ceil(height * scale)
    write_mask(render_graph(graph, width, height, thickness), out)


# losses


def _require(value: typing.Any, flag: str, kind: LossKind) -> typing.Any:
    if value is None:
        raise click.UsageError(f"{flag} is required for --kind {kind}")  # noqa: TRY003
    return value


def _save_gradients(value: LossValue, directory: pathlib.Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    if value.grad_pred is not None:
        np.save(directory / "grad_pred.npy", value.grad_pred)
    for k, grad in enumerate(value.grad_d_pred):
        np.save(directory / f"grad_d_pred_{k}.npy", grad)
    for k, grad in enumerate(value.grad_d_real):
        np.save(directory / f"grad_d_real_{k}.npy", grad)


@cli.command()
@click.option(
    "--kind",
    type=click.Choice([k.value for k in LossKind], case_sensitive=False),
    required=True,
    help="Loss to evaluate.",
)
@click.option("--pred", help="Predicted probability map (bce, generator).")
@click.option("--gt", help="Ground-truth mask (bce, generator).")
@click.option("--d-pred", help="Discriminator outputs on the prediction.")
@click.option("--labels", "labels_path", help="Label pyramid (discriminator).")
@click.option("--d-real", help="Discriminator outputs on the ground truth (discriminator).")
@click.option("--d-pred-scalar", type=click.FloatRange(0.0, 1.0), help="Scalar output (vanilla).")
@click.option("--d-real-scalar", type=click.FloatRange(0.0, 1.0), help="Scalar output (vanilla).")
@click.option("-o", "--out", type=click.Path(path_type=pathlib.Path), help="Loss report.")
@click.option(
    "--grad-out",
    type=click.Path(file_okay=False, path_type=pathlib.Path),
    help="Directory receiving the gradients as .npy arrays.",
)
@_model_options(LossParams)
def loss(
    kind: str,
    pred: str | None,
    gt: str | None,
    d_pred: str | None,
    labels_path: str | None,
    d_real: str | None,
    d_pred_scalar: float | None,
    d_real_scalar: float | None,
    out: pathlib.Path | None,
    grad_out: pathlib.Path | None,
    **options: typing.Any,
) -> None:
    """Evaluate a reference loss and its gradients."""
    params = _build_params(LossParams, options)
    loss_kind = LossKind(kind.lower())
    inputs: dict[str, str] = {}
    match loss_kind:
        case LossKind.BCE:
            inputs = {
                "pred": _require(pred, "--pred", loss_kind),
                "gt": _require(gt, "--gt", loss_kind),
            }
            value = bce_loss(
                read_mask(inputs["pred"], MaskKind.PROBABILITY),
                read_mask(inputs["gt"]),
                eps=params.eps,
                normalize=params.normalize,
            )
        case LossKind.DISCRIMINATOR:
            inputs = {
                "d_pred": _require(d_pred, "--d-pred", loss_kind),
                "labels": _require(labels_path, "--labels", loss_kind),
                "d_real": _require(d_real, "--d-real", loss_kind),
            }
            value = discriminator_loss(
                read_output_pyramid(inputs["d_pred"]),
                read_label_pyramid(inputs["labels"]),
                read_output_pyramid(inputs["d_real"]),
                eps=params.eps,
                normalize=params.normalize,
            )
        case LossKind.GENERATOR:
            inputs = {
                "pred": _require(pred, "--pred", loss_kind),
                "gt": _require(gt, "--gt", loss_kind),
                "d_pred": _require(d_pred, "--d-pred", loss_kind),
            }
            value = generator_loss(
                read_mask(inputs["pred"], MaskKind.PROBABILITY),
                read_mask(inputs["gt"]),
                read_output_pyramid(inputs["d_pred"]),
                params.lambda_a,
                eps=params.eps,
                normalize=params.normalize,
            )
        case LossKind.VANILLA:
            value = vanilla_gan_reduction(
                _require(d_pred_scalar, "--d-pred-scalar", loss_kind),
                _require(d_real_scalar, "--d-real-scalar", loss_kind),
                eps=params.eps,
            )
    report = LossReport(
        kind=loss_kind,
        loss=value.loss,
        parts=value.parts,
        params=params,
        provenance=Provenance(inputs=inputs),
    )
    _emit(report, out)
    if grad_out is not None:
        _save_gradients(value, grad_out)


def run(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return the process exit status.

    Usage errors exit with 1, data and I/O errors with 2.
    """
    try:
        result = cli.main(
            args=list(argv) if argv is not None else None,
            prog_name="roadtopo",
            standalone_mode=False,
        )
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except (RoadTopoError, OSError) as exc:
        click.echo(f"Error: {exc}", err=True)
        return 2
    return result if isinstance(result, int) else 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


__all__ = ["cli", "main", "run"]
