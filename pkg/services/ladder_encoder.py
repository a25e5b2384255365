"""
Two-resolution ladder encoding with model-backed early termination
"""
import hashlib
import logging
import os
import time
from dataclasses import dataclass, field
from itertools import islice
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from joblib import Parallel, delayed
from tqdm import tqdm

from config.config import (
    DEFAULT_EPSILON,
    DEFAULT_QPS,
    ERROR_RATE_DENOMINATOR,
    GROUP_SIZE,
    MIN_CALIBRATION_SAMPLES,
    N_JOBS,
    SUPERBLOCK_JOBS,
    TRAIN_COUNT,
)
from models.inference import (
    InferenceModel,
    calibrate,
    collect_samples,
    force_tau,
    save_model,
)
from models.partition import FrameEncoding, RdoConfig, encode_frame
from services.early_termination import EarlyTerminator
from services.metrics import per_depth_confusion, summarize
from services.report import FrameStats, GroupCalibration, PassStats, QpReport, RunReport
from utils.errors import ConfigError, InputMismatchError, InvalidArgumentError
from utils.frame_utils import (
    FrameBuffer,
    LadderFrames,
    prepare_ladder_frames,
    read_y4m,
    write_depthmap,
)

logger = logging.getLogger(__name__)

Dims = Tuple[int, int]


@dataclass(frozen=True)
class GroupSchedule:
    group_size: int = GROUP_SIZE
    train_count: int = TRAIN_COUNT

    def __post_init__(self):
        if not 0 < self.train_count <= self.group_size:
            raise ConfigError(
                f"train_count must lie in [1, group_size]; got {self.train_count} of {self.group_size}"
            )


@dataclass
class GroupResult:
    """Outcome of one group: both passes, the group's model and its report fragment"""

    low: List[FrameEncoding]
    high: List[FrameEncoding]
    model: InferenceModel
    calibration: GroupCalibration
    training_frames: int
    low_seconds: float = 0.0
    high_seconds: float = 0.0
    fires: Dict[int, int] = field(default_factory=dict)
    pruned: int = 0


def _encode_frames(frames: Sequence[FrameBuffer], cfg: RdoConfig, n_jobs: int = 1,
                   superblock_jobs: int = 1) -> List[FrameEncoding]:
    if n_jobs == 1:
        return [encode_frame(frame, cfg, n_jobs=superblock_jobs) for frame in frames]
    return Parallel(n_jobs=n_jobs)(
        delayed(encode_frame)(frame, cfg, n_jobs=superblock_jobs) for frame in frames
    )


def _encode_pair(hi_frame: FrameBuffer, lo_frame: FrameBuffer, cfg: RdoConfig,
                 model: Optional[InferenceModel], hi_dims: Dims, lo_dims: Dims,
                 superblock_jobs: int) -> Tuple[FrameEncoding, FrameEncoding, float, float]:
    """Low-resolution frame first, then its high-resolution partner terminated against it"""
    started = time.perf_counter()
    low = encode_frame(lo_frame, cfg, n_jobs=superblock_jobs)
    low_seconds = time.perf_counter() - started

    terminator = None if model is None else EarlyTerminator(model, low.depth_map, hi_dims, lo_dims)
    started = time.perf_counter()
    high = encode_frame(hi_frame, cfg, terminator, n_jobs=superblock_jobs)
    return low, high, low_seconds, time.perf_counter() - started


def _encode_pairs(hi_frames: Sequence[FrameBuffer], lo_frames: Sequence[FrameBuffer], cfg: RdoConfig,
                  model: Optional[InferenceModel], hi_dims: Dims, lo_dims: Dims,
                  n_jobs: int, superblock_jobs: int) -> List[Tuple[FrameEncoding, FrameEncoding, float, float]]:
    pairs = list(zip(hi_frames, lo_frames))
    if n_jobs == 1 or len(pairs) < 2:
        return [_encode_pair(hi, lo, cfg, model, hi_dims, lo_dims, superblock_jobs) for hi, lo in pairs]
    return Parallel(n_jobs=n_jobs)(
        delayed(_encode_pair)(hi, lo, cfg, model, hi_dims, lo_dims, superblock_jobs) for hi, lo in pairs
    )


def encode_group(hi_frames: Sequence[FrameBuffer], lo_frames: Sequence[FrameBuffer],
                 hi_dims: Dims, lo_dims: Dims, cfg: RdoConfig,
                 sched: GroupSchedule = GroupSchedule(), epsilon: float = DEFAULT_EPSILON,
                 group_index: int = 0, first_frame: int = 0,
                 tau_override: Optional[float] = None,
                 denominator: str = ERROR_RATE_DENOMINATOR,
                 min_samples: int = MIN_CALIBRATION_SAMPLES,
                 n_jobs: int = 1, superblock_jobs: int = 1) -> GroupResult:
    """
    Encode one group of frames at both resolutions

    Frames run as (low, high) pairs: each high-resolution frame starts as
    soon as its own low-resolution frame is done, and pairs are spread over
    joblib workers.

    Args:
        hi_frames: Padded high-resolution frames of the group
        lo_frames: Padded low-resolution frames, aligned frame for frame
        hi_dims: High-resolution content (width, height)
        lo_dims: Low-resolution content (width, height)
        cfg: RDO configuration shared by both passes
        sched: Group size and number of fully searched training frames
        epsilon: Type II error budget for calibration
        group_index: Position of the group in the sequence
        first_frame: Sequence index of the group's first frame
        tau_override: Force this tau at every depth after calibration
        denominator: Error rate denominator for calibration
        min_samples: Minimum samples per depth for calibration
        n_jobs: joblib workers over frame pairs
        superblock_jobs: joblib workers over superblock rows inside a frame

    Returns:
        GroupResult with both passes, the model and the calibration record
    """
    if len(hi_frames) != len(lo_frames):
        raise InputMismatchError(
            f"Resolution streams are not aligned: {len(hi_frames)} vs {len(lo_frames)} frames"
        )
    if not hi_frames or len(hi_frames) > sched.group_size:
        raise InvalidArgumentError(f"A group holds 1..{sched.group_size} frames, got {len(hi_frames)}")

    training = min(sched.train_count, len(hi_frames))
    outcomes = _encode_pairs(hi_frames[:training], lo_frames[:training], cfg, None,
                             hi_dims, lo_dims, n_jobs, superblock_jobs)

    samples = collect_samples(
        [high.trees for _, high, _, _ in outcomes],
        [low.depth_map for low, _, _, _ in outcomes],
        hi_dims, lo_dims, n_jobs=n_jobs,
    )
    model = calibrate(samples, epsilon, denominator=denominator, min_samples=min_samples)
    if tau_override is not None:
        model = force_tau(model, tau_override)

    # The low-resolution pass is never accelerated
    outcomes += _encode_pairs(hi_frames[training:], lo_frames[training:], cfg, model,
                              hi_dims, lo_dims, n_jobs, superblock_jobs)
    low = [outcome[0] for outcome in outcomes]
    high = [outcome[1] for outcome in outcomes]

    fires: Dict[int, int] = {}
    pruned = 0
    for encoding in high[training:]:
        for depth, count in encoding.counter.fires.items():
            fires[depth] = fires.get(depth, 0) + count
        pruned += encoding.counter.pruned

    calibration = GroupCalibration.from_model(
        model, group_index, first_frame, len(hi_frames), training, len(samples),
        per_depth_confusion(samples, model),
    )
    logger.info("Group %d (frames %d-%d, QP %d): %d samples, %d terminations",
                group_index, first_frame, first_frame + len(hi_frames) - 1, cfg.qp,
                len(samples), sum(fires.values()))
    return GroupResult(low, high, model, calibration, training,
                       sum(outcome[2] for outcome in outcomes), sum(outcome[3] for outcome in outcomes),
                       fires, pruned)


def depthmap_digest(encodings: Sequence[FrameEncoding]) -> str:
    digest = hashlib.sha256()
    for encoding in encodings:
        digest.update(encoding.depth_map.digest())
    return digest.hexdigest()


def _iter_groups(frames: Iterator[FrameBuffer], hi_dims: Dims, lo_dims: Dims,
                 group_size: int) -> Iterator[List[LadderFrames]]:
    while True:
        chunk = list(islice(frames, group_size))
        if not chunk:
            return
        yield [prepare_ladder_frames(frame, hi_dims, lo_dims) for frame in chunk]


def _record_group(report: QpReport, result: GroupResult, first_frame: int,
                  reference: Optional[List[FrameEncoding]], ref_seconds: float) -> None:
    report.groups.append(result.calibration)
    report.low.add(sum(e.counter.evaluations for e in result.low),
                   sum(e.total_cost for e in result.low), result.low_seconds)
    report.accelerated.add(sum(e.counter.evaluations for e in result.high),
                           sum(e.total_cost for e in result.high), result.high_seconds)
    for depth, count in result.fires.items():
        report.termination_fires[depth] = report.termination_fires.get(depth, 0) + count
    report.pruned_candidates += result.pruned

    if reference is not None:
        report.reference = report.reference or PassStats()
        report.reference.add(sum(e.counter.evaluations for e in reference),
                             sum(e.total_cost for e in reference), ref_seconds)

    for offset, (low, high) in enumerate(zip(result.low, result.high)):
        stats = FrameStats(
            index=first_frame + offset,
            accelerated=offset >= result.training_frames,
            low_cost=low.total_cost,
            low_nodes=low.counter.evaluations,
            high_cost=high.total_cost,
            high_nodes=high.counter.evaluations,
        )
        if reference is not None:
            ref = reference[offset]
            stats.reference_cost = ref.total_cost
            stats.reference_nodes = ref.counter.evaluations
            if high.total_cost < ref.total_cost:
                logger.warning("Frame %d: accelerated cost %.1f below full search %.1f",
                               stats.index, high.total_cost, ref.total_cost)
        report.frames.append(stats)


def run_ladder(sequence: str, hi_dims: Optional[Dims], lo_dims: Dims,
               qps: Sequence[int] = DEFAULT_QPS, epsilon: float = DEFAULT_EPSILON,
               sched: GroupSchedule = GroupSchedule(), reference: bool = False,
               tau_override: Optional[float] = None,
               denominator: str = ERROR_RATE_DENOMINATOR,
               min_samples: int = MIN_CALIBRATION_SAMPLES,
               n_jobs: int = 1, show_progress: bool = False, superblock_jobs: int = 1) -> RunReport:
    """
    Run the accelerated two-resolution pipeline on a Y4M sequence for every QP

    Args:
        sequence: Path to the source Y4M file
        hi_dims: High-resolution target (width, height); None keeps the source size
        lo_dims: Low-resolution target (width, height)
        qps: Quantizer indices to encode
        epsilon: Type II error budget
        sched: Group schedule
        reference: Also run the full-search high-resolution pass and the
            standalone low-resolution check
        tau_override: Force tau at every depth (0 reproduces full RDO exactly)
        denominator: Error rate denominator for calibration
        min_samples: Minimum samples per depth for calibration
        n_jobs: joblib workers over frames
        show_progress: Display a progress bar over groups
        superblock_jobs: joblib workers over superblock rows inside a frame

    Returns:
        RunReport with per-QP and aggregate statistics
    """
    header, frames = read_y4m(sequence)
    hi_dims = tuple(hi_dims or (header.width, header.height))
    lo_dims = tuple(lo_dims)
    configs = [RdoConfig.from_qp(qp) for qp in qps]

    report = RunReport(
        sequence=os.path.basename(sequence),
        source_dims=(header.width, header.height),
        hi_dims=hi_dims,
        lo_dims=lo_dims,
        epsilon=epsilon,
        group_size=sched.group_size,
        train_count=sched.train_count,
        forced_tau=tau_override,
        qps=[QpReport(qp=cfg.qp, rd_lambda=cfg.lambda_) for cfg in configs],
    )
    low_digests = {cfg.qp: [hashlib.sha256(), hashlib.sha256()] for cfg in configs}

    groups = _iter_groups(frames, hi_dims, lo_dims, sched.group_size)
    total_groups = -(-header.frame_count // sched.group_size)
    first_frame = 0
    for group_index, group in enumerate(tqdm(groups, total=total_groups, desc="Groups",
                                             unit="group", disable=not show_progress)):
        hi_frames = [frames_pair.hi for frames_pair in group]
        lo_frames = [frames_pair.lo for frames_pair in group]
        for cfg, qp_report in zip(configs, report.qps):
            result = encode_group(hi_frames, lo_frames, hi_dims, lo_dims, cfg, sched, epsilon,
                                  group_index, first_frame, tau_override, denominator, min_samples, n_jobs,
                                  superblock_jobs)
            ref_encodings = None
            ref_seconds = 0.0
            if reference:
                started = time.perf_counter()
                # Training frames already ran the full search
                ref_encodings = result.high[:result.training_frames] + _encode_frames(
                    hi_frames[result.training_frames:], cfg, n_jobs, superblock_jobs)
                ref_seconds = time.perf_counter() - started
                standalone = _encode_frames(lo_frames, cfg, n_jobs, superblock_jobs)
                low_digests[cfg.qp][0].update(depthmap_digest(result.low).encode())
                low_digests[cfg.qp][1].update(depthmap_digest(standalone).encode())
            _record_group(qp_report, result, first_frame, ref_encodings, ref_seconds)
        first_frame += len(group)

    report.frame_count = first_frame
    if reference:
        for qp_report in report.qps:
            pipeline, standalone = low_digests[qp_report.qp]
            qp_report.low_pass_identical = pipeline.hexdigest() == standalone.hexdigest()
        summary = summarize(report)
        for qp_report, qp_summary in zip(report.qps, summary.per_qp):
            qp_report.node_reduction_pct = -100.0 * qp_summary.delta_t_proxy
            qp_report.cost_delta_pct = 100.0 * qp_summary.delta_cost
        report.node_reduction_pct = -100.0 * summary.delta_t_proxy
        report.cost_delta_pct = 100.0 * summary.delta_cost

    for qp_report in report.qps:
        logger.info("QP %d: accelerated %d nodes, cost %.4g; low %d nodes",
                    qp_report.qp, qp_report.accelerated.node_count, qp_report.accelerated.total_cost,
                    qp_report.low.node_count)
    return report


class LadderEncoder:
    """Service wrapping the ladder pipeline and its stage commands"""

    def __init__(self, epsilon: float = DEFAULT_EPSILON, schedule: Optional[GroupSchedule] = None,
                 denominator: str = ERROR_RATE_DENOMINATOR, min_samples: int = MIN_CALIBRATION_SAMPLES,
                 n_jobs: int = N_JOBS, show_progress: bool = False,
                 superblock_jobs: int = SUPERBLOCK_JOBS):
        """
        Initialize the encoder service

        Args:
            epsilon: Type II error budget
            schedule: Group schedule (defaults from config)
            denominator: Error rate denominator for calibration
            min_samples: Minimum samples per depth for calibration
            n_jobs: joblib workers over frames
            show_progress: Display progress bars
            superblock_jobs: joblib workers over superblock rows inside a frame
        """
        self.epsilon = epsilon
        self.schedule = schedule or GroupSchedule()
        self.denominator = denominator
        self.min_samples = min_samples
        self.n_jobs = n_jobs
        self.show_progress = show_progress
        self.superblock_jobs = superblock_jobs

    def encode(self, sequence: str, hi_dims: Optional[Dims], lo_dims: Dims,
               qps: Sequence[int] = DEFAULT_QPS, reference: bool = False,
               tau_override: Optional[float] = None, report_path: Optional[str] = None) -> RunReport:
        """Run the pipeline and optionally write the JSON report"""
        report = run_ladder(sequence, hi_dims, lo_dims, qps, self.epsilon, self.schedule, reference,
                            tau_override, self.denominator, self.min_samples, self.n_jobs,
                            self.show_progress, self.superblock_jobs)
        if report_path:
            report.save(report_path)
            logger.info("Wrote report to %s", report_path)
        return report

    def dump_depthmaps(self, sequence: str, dims: Optional[Dims], qp: int, output_path: str,
                       max_frames: Optional[int] = None) -> int:
        """
        Full-search every frame at one resolution and write the depth maps

        Args:
            sequence: Path to the source Y4M file
            dims: Target (width, height); None keeps the source size
            qp: Quantizer index
            output_path: Concatenated QLDP output file
            max_frames: Stop after this many frames

        Returns:
            Number of depth maps written
        """
        header, frames = read_y4m(sequence)
        dims = tuple(dims or (header.width, header.height))
        cfg = RdoConfig.from_qp(qp)
        count = 0
        with open(output_path, "wb") as handle:
            for frame in tqdm(islice(frames, max_frames), total=max_frames or header.frame_count,
                              desc="Frames", unit="frame", disable=not self.show_progress):
                padded = prepare_ladder_frames(frame, dims, dims).hi
                encoding = encode_frame(padded, cfg, n_jobs=self.n_jobs)
                write_depthmap(handle, encoding.depth_map, count)
                count += 1
        logger.info("Wrote %d depth maps to %s", count, output_path)
        return count

    def train_only(self, sequence: str, hi_dims: Optional[Dims], lo_dims: Dims, qp: int,
                   model_path: Optional[str] = None) -> InferenceModel:
        """Calibrate a model from the first group's training frames"""
        header, frames = read_y4m(sequence)
        hi_dims = tuple(hi_dims or (header.width, header.height))
        group = [prepare_ladder_frames(frame, hi_dims, lo_dims)
                 for frame in islice(frames, self.schedule.train_count)]
        cfg = RdoConfig.from_qp(qp)
        lo = _encode_frames([pair.lo for pair in group], cfg, self.n_jobs, self.superblock_jobs)
        hi = _encode_frames([pair.hi for pair in group], cfg, self.n_jobs, self.superblock_jobs)
        samples = collect_samples([e.trees for e in hi], [e.depth_map for e in lo], hi_dims, tuple(lo_dims),
                                  n_jobs=self.n_jobs)
        model = calibrate(samples, self.epsilon, denominator=self.denominator, min_samples=self.min_samples)
        if model_path:
            save_model(model, model_path)
            logger.info("Wrote model to %s", model_path)
        return model
