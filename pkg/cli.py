"""
Command-line entry point for the quadtree ladder toolkit
"""
import json
import logging
from typing import List, Optional, Tuple

import typer
from rich.console import Console
from rich.table import Table

from config.config import (
    DEFAULT_EPSILON,
    DEFAULT_QPS,
    ERROR_RATE_DENOMINATOR,
    GROUP_SIZE,
    LOG_LEVEL,
    MIN_CALIBRATION_SAMPLES,
    N_JOBS,
    SIM_REPLICATIONS,
    SIM_SEED,
    SUPERBLOCK_JOBS,
    TRAIN_COUNT,
)
from models.simulation import export_sweep, run_preset
from services.ladder_encoder import GroupSchedule, LadderEncoder
from services.metrics import bd_psnr, bd_rate, load_rd_curve, run_confusion
from utils.errors import QtreeError
from utils.log_utils import setup_logging

app = typer.Typer(help="Two-resolution quadtree partition search with early termination.",
                  add_completion=False)
console = Console()
err_console = Console(stderr=True)
logger = logging.getLogger(__name__)


def _dims(text: Optional[str]) -> Optional[Tuple[int, int]]:
    if text is None:
        return None
    try:
        width, height = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise typer.BadParameter(f"Expected WxH, got '{text}'")
    if width <= 0 or height <= 0:
        raise typer.BadParameter(f"Dimensions must be positive, got '{text}'")
    return width, height


def _qps(text: str) -> List[int]:
    try:
        return sorted({int(part) for part in text.split(",") if part.strip()})
    except ValueError:
        raise typer.BadParameter(f"Expected comma-separated integers, got '{text}'")


def _fail(error: Exception) -> None:
    err_console.print(f"[bold red]Error:[/bold red] {error}")
    raise typer.Exit(code=1)


@app.callback()
def main(log_level: str = typer.Option(LOG_LEVEL, "--log-level", help="Logging level")):
    setup_logging(log_level)


@app.command()
def encode(
    source: str = typer.Option(..., "--input", "-i", help="Source Y4M sequence"),
    lo: str = typer.Option(..., "--lo", help="Low-resolution WxH"),
    hi: Optional[str] = typer.Option(None, "--hi", help="High-resolution WxH (default: source size)"),
    qp: str = typer.Option(",".join(map(str, DEFAULT_QPS)), "--qp", help="Comma-separated QPs"),
    epsilon: float = typer.Option(DEFAULT_EPSILON, "--epsilon", help="Type II error budget"),
    group: int = typer.Option(GROUP_SIZE, "--group", help="Frames per group"),
    train: int = typer.Option(TRAIN_COUNT, "--train", help="Fully searched training frames per group"),
    report: Optional[str] = typer.Option(None, "--report", help="Write the JSON run report here"),
    reference: bool = typer.Option(False, "--reference", help="Also run the full-search pass"),
    force_tau: Optional[float] = typer.Option(None, "--force-tau", help="Override tau at every depth"),
    denominator: str = typer.Option(ERROR_RATE_DENOMINATOR, "--denominator", help="joint or conditional"),
    min_samples: int = typer.Option(MIN_CALIBRATION_SAMPLES, "--min-samples"),
    jobs: int = typer.Option(N_JOBS, "--jobs", help="Parallel workers over frame pairs"),
    sb_jobs: int = typer.Option(SUPERBLOCK_JOBS, "--sb-jobs", help="Parallel workers over superblock rows"),
):
    """Encode a sequence at two resolutions with early termination"""
    try:
        encoder = LadderEncoder(epsilon, GroupSchedule(group, train), denominator, min_samples, jobs,
                                show_progress=True, superblock_jobs=sb_jobs)
        run = encoder.encode(source, _dims(hi), _dims(lo), _qps(qp), reference, force_tau, report)
    except (QtreeError, OSError) as e:
        _fail(e)

    table = Table(title=f"{run.sequence}: {run.frame_count} frames")
    for column in ("QP", "low nodes", "accelerated nodes", "reference nodes", "fires", "cost delta"):
        table.add_column(column, justify="right")
    for q in run.qps:
        table.add_row(
            str(q.qp),
            str(q.low.node_count),
            str(q.accelerated.node_count),
            str(q.reference.node_count) if q.reference else "-",
            str(sum(q.termination_fires.values())),
            f"{q.cost_delta_pct:.3f}%" if q.cost_delta_pct is not None else "-",
        )
    console.print(table)
    if run.node_reduction_pct is not None:
        console.print(f"Node reduction {run.node_reduction_pct:.2f}%, RD cost increase {run.cost_delta_pct:.3f}%")

    confusion = Table(title="Training-set errors per depth")
    for column in ("depth", "samples", "type I", "type II"):
        confusion.add_column(column, justify="right")
    for row in run_confusion(run):
        confusion.add_row(str(row.depth), str(row.samples), str(row.type1_errors), str(row.type2_errors))
    console.print(confusion)


@app.command("dump-depthmaps")
def dump_depthmaps(
    source: str = typer.Option(..., "--input", "-i", help="Source Y4M sequence"),
    output: str = typer.Option(..., "--output", "-o", help="Depth map file to write"),
    size: Optional[str] = typer.Option(None, "--size", help="Encode at WxH (default: source size)"),
    qp: int = typer.Option(DEFAULT_QPS[0], "--qp"),
    frames: Optional[int] = typer.Option(None, "--frames", help="Stop after this many frames"),
    jobs: int = typer.Option(N_JOBS, "--jobs"),
):
    """Full-search every frame at one resolution and write its depth maps"""
    try:
        count = LadderEncoder(n_jobs=jobs, show_progress=True).dump_depthmaps(source, _dims(size), qp, output, frames)
    except (QtreeError, OSError) as e:
        _fail(e)
    console.print(f"Wrote {count} depth maps to {output}")


@app.command("train-only")
def train_only(
    source: str = typer.Option(..., "--input", "-i", help="Source Y4M sequence"),
    lo: str = typer.Option(..., "--lo", help="Low-resolution WxH"),
    hi: Optional[str] = typer.Option(None, "--hi", help="High-resolution WxH (default: source size)"),
    qp: int = typer.Option(DEFAULT_QPS[0], "--qp"),
    epsilon: float = typer.Option(DEFAULT_EPSILON, "--epsilon"),
    train: int = typer.Option(TRAIN_COUNT, "--train"),
    model: Optional[str] = typer.Option(None, "--model", help="Write the calibrated model here"),
    denominator: str = typer.Option(ERROR_RATE_DENOMINATOR, "--denominator"),
    jobs: int = typer.Option(N_JOBS, "--jobs"),
):
    """Calibrate a model from the first training frames only"""
    try:
        encoder = LadderEncoder(epsilon, GroupSchedule(max(train, 1), train), denominator, n_jobs=jobs)
        fitted = encoder.train_only(source, _dims(hi), _dims(lo), qp, model)
    except (QtreeError, OSError) as e:
        _fail(e)

    table = Table(title=f"Calibration at QP {qp}, epsilon {epsilon}")
    for column in ("depth", "enabled", "margin", "tau", "type I", "type II", "samples"):
        table.add_column(column, justify="right")
    for entry in fitted.depths:
        table.add_row(str(entry.depth), str(entry.enabled), str(entry.margin), f"{entry.tau:.1f}",
                      f"{entry.type1_rate:.3f}", f"{entry.type2_rate:.3f}", str(entry.sample_count))
    console.print(table)


@app.command()
def simulate(
    preset: str = typer.Option("bias-sweep", "--preset", help="moments, bias-sweep or link"),
    replications: int = typer.Option(SIM_REPLICATIONS, "--replications"),
    seed: int = typer.Option(SIM_SEED, "--seed"),
    out_json: Optional[str] = typer.Option(None, "--out-json", help="Write the JSON result here"),
    csv: Optional[str] = typer.Option(None, "--csv", help="Write the result table as CSV"),
    svg: Optional[str] = typer.Option(None, "--svg", help="Write the bias-variance chart as SVG"),
    jobs: int = typer.Option(N_JOBS, "--jobs"),
):
    """Run a synthetic-field simulator preset"""
    try:
        run = run_preset(preset, replications, seed, jobs)
    except (QtreeError, OSError) as e:
        _fail(e)

    payload = json.dumps(run.to_dict(), indent=2, default=float)
    if out_json:
        with open(out_json, "w", encoding="utf-8") as handle:
            handle.write(payload)
        logger.info("Wrote simulation result to %s", out_json)
    else:
        console.print_json(payload)
    if run.table is not None and (csv or svg):
        export_sweep(run.table, csv, svg if preset == "bias-sweep" else None)


@app.command()
def bd(
    ref: str = typer.Option(..., "--ref", help="Reference curve CSV (rate,psnr)"),
    test: str = typer.Option(..., "--test", help="Test curve CSV (rate,psnr)"),
):
    """Bjontegaard deltas between two RD curves"""
    try:
        reference, candidate = load_rd_curve(ref), load_rd_curve(test)
        psnr_delta = bd_psnr(reference, candidate)
    except (QtreeError, OSError) as e:
        _fail(e)
    try:
        console.print(f"BD-rate: {bd_rate(reference, candidate):+.4f}%")
    except QtreeError as e:
        console.print(f"[yellow]BD-rate: n/a ({e})[/yellow]")
    console.print(f"BD-PSNR: {psnr_delta:+.4f} dB")


if __name__ == "__main__":
    app()
