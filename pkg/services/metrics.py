"""
Scoring utilities: run summaries, per-depth confusion and Bjontegaard deltas
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from config.config import COST_BUDGET
from models.inference import CalibrationSample, ErrorStats, InferenceModel, evaluate_errors
from services.report import RunReport
from utils.errors import DomainError, InvalidArgumentError, ReportError

logger = logging.getLogger(__name__)

MIN_CURVE_POINTS = 4


@dataclass(frozen=True)
class RdPoint:
    rate: float  # kbit/s
    psnr: float  # dB

    def __post_init__(self):
        if not self.rate > 0:
            raise InvalidArgumentError(f"Rate must be positive, got {self.rate}")


RdCurve = Sequence[RdPoint]


def _curve_arrays(curve: RdCurve, name: str, distinct_psnr: bool = False):
    if len(curve) < MIN_CURVE_POINTS:
        raise InvalidArgumentError(f"{name} curve needs at least {MIN_CURVE_POINTS} points, got {len(curve)}")
    rates = np.array([point.rate for point in curve], dtype=np.float64)
    psnrs = np.array([point.psnr for point in curve], dtype=np.float64)
    if len(np.unique(rates)) != len(rates):
        raise InvalidArgumentError(f"{name} curve has repeated rates")
    if distinct_psnr and len(np.unique(psnrs)) != len(psnrs):
        raise InvalidArgumentError(f"{name} curve has repeated PSNR values")
    return np.log(rates), psnrs


def _mean_fit_difference(x_ref: np.ndarray, y_ref: np.ndarray,
                         x_test: np.ndarray, y_test: np.ndarray) -> float:
    """Mean of (test fit - reference fit) over the shared x interval, cubic fits of y on x"""
    low = max(x_ref.min(), x_test.min())
    high = min(x_ref.max(), x_test.max())
    if not low < high:
        raise DomainError(f"Curves do not overlap (shared interval [{low:.4g}, {high:.4g}])")

    ref_integral = np.polyint(np.polyfit(x_ref, y_ref, 3))
    test_integral = np.polyint(np.polyfit(x_test, y_test, 3))
    ref_area = np.polyval(ref_integral, high) - np.polyval(ref_integral, low)
    test_area = np.polyval(test_integral, high) - np.polyval(test_integral, low)
    return (test_area - ref_area) / (high - low)


def bd_rate(reference: RdCurve, test: RdCurve) -> float:
    """
    Bjontegaard delta rate of test against reference

    Args:
        reference: Reference (rate, PSNR) points
        test: Test (rate, PSNR) points

    Returns:
        Average bitrate difference at equal PSNR, in percent
    """
    ref_log_rate, ref_psnr = _curve_arrays(reference, "Reference", distinct_psnr=True)
    test_log_rate, test_psnr = _curve_arrays(test, "Test", distinct_psnr=True)
    mean_diff = _mean_fit_difference(ref_psnr, ref_log_rate, test_psnr, test_log_rate)
    return 100.0 * (np.exp(mean_diff) - 1.0)


def bd_psnr(reference: RdCurve, test: RdCurve) -> float:
    """Bjontegaard delta PSNR of test against reference, in dB at equal rate"""
    ref_log_rate, ref_psnr = _curve_arrays(reference, "Reference")
    test_log_rate, test_psnr = _curve_arrays(test, "Test")
    return float(_mean_fit_difference(ref_log_rate, ref_psnr, test_log_rate, test_psnr))


def load_rd_curve(csv_path: str) -> List[RdPoint]:
    """Read a curve from a CSV file with 'rate' and 'psnr' columns"""
    frame = pd.read_csv(csv_path)
    frame.columns = [column.strip().lower() for column in frame.columns]
    missing = {"rate", "psnr"} - set(frame.columns)
    if missing:
        raise InvalidArgumentError(f"{csv_path} lacks column(s): {', '.join(sorted(missing))}")
    frame = frame.sort_values("rate")
    return [RdPoint(float(row.rate), float(row.psnr)) for row in frame.itertuples(index=False)]


class QpSummary(BaseModel):
    qp: int
    delta_t_proxy: float
    delta_cost: float


class DepthConfusion(BaseModel):
    depth: int
    samples: int = 0
    type1_errors: int = 0
    type2_errors: int = 0


class RunSummary(BaseModel):
    per_qp: List[QpSummary] = Field(default_factory=list)
    confusion: List[DepthConfusion] = Field(default_factory=list)
    delta_t_proxy: float
    delta_cost: float
    cost_budget: float
    within_budget: bool


def _relative(accelerated: float, reference: float, what: str) -> float:
    if reference <= 0:
        raise ReportError(f"Reference {what} is zero; nothing was encoded")
    return (accelerated - reference) / reference


def summarize(run: RunReport, cost_budget: float = COST_BUDGET) -> RunSummary:
    """
    Node-count and RD-cost deltas of the accelerated pass against full search

    Args:
        run: Report of a run made in reference mode
        cost_budget: Largest acceptable relative cost increase

    Returns:
        RunSummary with per-QP values and the aggregate over all QPs
    """
    if not run.qps:
        raise ReportError("Run report has no QP entries")
    missing = [qp_report.qp for qp_report in run.qps if qp_report.reference is None]
    if missing:
        raise ReportError(f"No reference pass for QP {', '.join(map(str, missing))}; rerun with --reference")

    per_qp = [
        QpSummary(
            qp=qp_report.qp,
            delta_t_proxy=_relative(qp_report.accelerated.node_count, qp_report.reference.node_count, "node count"),
            delta_cost=_relative(qp_report.accelerated.total_cost, qp_report.reference.total_cost, "cost"),
        )
        for qp_report in run.qps
    ]
    # Aggregated as totals over QPs, not as a mean of ratios
    delta_t = _relative(sum(q.accelerated.node_count for q in run.qps),
                        sum(q.reference.node_count for q in run.qps), "node count")
    delta_cost = _relative(sum(q.accelerated.total_cost for q in run.qps),
                           sum(q.reference.total_cost for q in run.qps), "cost")
    if delta_cost < 0:
        logger.warning("Accelerated cost below full search (%.3g); check the reference pass", delta_cost)
    return RunSummary(per_qp=per_qp, confusion=run_confusion(run), delta_t_proxy=delta_t,
                      delta_cost=delta_cost, cost_budget=cost_budget, within_budget=delta_cost <= cost_budget)


def per_depth_confusion(samples: Sequence[CalibrationSample], model: InferenceModel) -> Dict[int, ErrorStats]:
    """Type I / type II counts of model at each depth it covers"""
    confusion = {}
    for entry in model.depths:
        group = [sample for sample in samples if sample.depth == entry.depth]
        if not group:
            confusion[entry.depth] = ErrorStats(0, 0, 0)
            continue
        # A disabled depth always searches the split
        tau = entry.tau if entry.enabled else 0.0
        confusion[entry.depth] = evaluate_errors(group, entry.margin, tau)
    return confusion


def run_confusion(run: RunReport) -> List[DepthConfusion]:
    """Training-set confusion counts per depth, summed over every group and QP of a run"""
    totals: Dict[int, DepthConfusion] = {}
    for qp_report in run.qps:
        for group in qp_report.groups:
            for entry in group.depths:
                row = totals.setdefault(entry.depth, DepthConfusion(depth=entry.depth))
                row.samples += entry.sample_count
                row.type1_errors += entry.type1_errors
                row.type2_errors += entry.type2_errors
    return [totals[depth] for depth in sorted(totals)]
