"""
Inference model calibration: margin and threshold search per block depth
"""
import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from config.config import (
    ERROR_RATE_DENOMINATOR,
    MIN_CALIBRATION_SAMPLES,
    TAU_GRID,
)
from models.neighborhood import (
    DepthMap,
    NeighborhoodSpec,
    candidate_margins,
    colocate,
    neighborhood_mean,
)
from models.partition import PartitionMode, PartitionTree, block_depth
from utils.errors import (
    CalibrationError,
    ConfigError,
    DegenerateRegionError,
    InputMismatchError,
    InvalidArgumentError,
)

logger = logging.getLogger(__name__)

TRAINED_DEPTHS = (0, 1, 2, 3)
DENOMINATORS = ("joint", "conditional")

Dims = Tuple[int, int]


@dataclass(frozen=True)
class CalibrationSample:
    depth: int
    x1: int
    x2_prime_by_margin: Dict[int, float]


@dataclass(frozen=True)
class ErrorStats:
    type1: int
    type2: int
    total: int


@dataclass(frozen=True)
class DepthModel:
    depth: int
    margin: int
    tau: float
    enabled: bool
    type1_rate: float = 0.0
    type2_rate: float = 0.0
    sample_count: int = 0


@dataclass(frozen=True)
class InferenceModel:
    depths: Tuple[DepthModel, ...]
    epsilon: float
    denominator: str = "joint"

    def for_depth(self, depth: int) -> Optional[DepthModel]:
        for entry in self.depths:
            if entry.depth == depth:
                return entry
        return None


def _frame_samples(trees: Sequence[PartitionTree], lo_map: DepthMap, hi_dims: Dims,
                   lo_dims: Dims) -> List[CalibrationSample]:
    samples = []
    for tree in trees:
        for node in tree.iter_squares():
            depth = block_depth(node.rect)
            if depth not in TRAINED_DEPTHS:
                continue
            region = colocate(node.rect, hi_dims, lo_dims, bounds=lo_map.dims)
            try:
                values = {
                    margin: neighborhood_mean(lo_map, region, NeighborhoodSpec(margin, depth))
                    for margin in candidate_margins(depth)
                }
            except DegenerateRegionError:
                logger.debug("Skipping block %s: no co-located area", node.rect)
                continue
            samples.append(CalibrationSample(depth, int(node.mode == PartitionMode.SPLIT4), values))
    return samples


def collect_samples(hi_trees: Sequence[Sequence[PartitionTree]], lo_maps: Sequence[DepthMap],
                    hi_dims: Dims, lo_dims: Dims, n_jobs: int = 1) -> List[CalibrationSample]:
    """
    Build calibration samples from fully searched training frames

    Args:
        hi_trees: Per frame, the high-resolution superblock trees
        lo_maps: Per frame, the low-resolution depth map
        hi_dims: High-resolution content (width, height)
        lo_dims: Low-resolution content (width, height)
        n_jobs: joblib workers over frames

    Returns:
        One sample per square block of depth 0..3 in the chosen trees
    """
    if len(hi_trees) != len(lo_maps):
        raise InputMismatchError(
            f"Training passes disagree: {len(hi_trees)} high-resolution frames, {len(lo_maps)} low-resolution maps"
        )
    if n_jobs == 1:
        per_frame = [_frame_samples(trees, lo_map, hi_dims, lo_dims) for trees, lo_map in zip(hi_trees, lo_maps)]
    else:
        per_frame = Parallel(n_jobs=n_jobs)(
            delayed(_frame_samples)(trees, lo_map, hi_dims, lo_dims)
            for trees, lo_map in zip(hi_trees, lo_maps)
        )
    return [sample for frame_samples in per_frame for sample in frame_samples]


def _counts(x2: np.ndarray, x1: np.ndarray, tau: float) -> Tuple[int, int]:
    """(type1, type2) counts under the rule 'predict non-split iff x2 < tau'"""
    predicted_split = x2 >= tau
    type1 = int(np.count_nonzero(predicted_split & (x1 == 0)))
    type2 = int(np.count_nonzero(~predicted_split & (x1 == 1)))
    return type1, type2


def _rates(type1: int, type2: int, x1: np.ndarray, denominator: str) -> Tuple[float, float]:
    total = len(x1)
    if denominator == "joint":
        return type1 / total, type2 / total
    positives = int(np.count_nonzero(x1 == 1))
    negatives = total - positives
    return (type1 / negatives if negatives else 0.0,
            type2 / positives if positives else 0.0)


def evaluate_errors(samples: Sequence[CalibrationSample], margin: int, tau: float) -> ErrorStats:
    """Count type I / type II errors of (margin, tau) over samples"""
    try:
        x2 = np.array([sample.x2_prime_by_margin[margin] for sample in samples], dtype=np.float64)
    except KeyError:
        raise InvalidArgumentError(f"Margin {margin} was not evaluated for every sample")
    x1 = np.array([sample.x1 for sample in samples], dtype=np.int64)
    type1, type2 = _counts(x2, x1, tau)
    return ErrorStats(type1, type2, len(samples))


def _calibrate_bounded(x2_by_margin: Dict[int, np.ndarray], x1: np.ndarray, epsilon: float,
                       denominator: str, taus: Sequence[float]) -> Optional[Tuple[int, float, float, float]]:
    """Largest tau within the type II budget per margin, then the margin with fewest type I errors"""
    best = None
    for margin in sorted(x2_by_margin):
        x2 = x2_by_margin[margin]
        chosen = None
        for tau in taus:
            type1, type2 = _counts(x2, x1, tau)
            rate1, rate2 = _rates(type1, type2, x1, denominator)
            if rate2 <= epsilon:
                chosen = (tau, rate1, rate2)
        if chosen is None:
            continue
        if best is None or chosen[1] < best[2]:
            best = (margin, chosen[0], chosen[1], chosen[2])
    return best


def _calibrate_total(x2: np.ndarray, x1: np.ndarray, denominator: str,
                     taus: Sequence[float]) -> Tuple[float, float, float]:
    """Tau minimizing the total error count"""
    best = None
    for tau in taus:
        type1, type2 = _counts(x2, x1, tau)
        if best is None or type1 + type2 < best[0]:
            best = (type1 + type2, tau, type1, type2)
    _, tau, type1, type2 = best
    rate1, rate2 = _rates(type1, type2, x1, denominator)
    return tau, rate1, rate2


def calibrate(samples: Sequence[CalibrationSample], epsilon: float,
              denominator: str = ERROR_RATE_DENOMINATOR,
              min_samples: int = MIN_CALIBRATION_SAMPLES,
              taus: Sequence[float] = TAU_GRID) -> InferenceModel:
    """
    Fit the per-depth (margin, tau) table

    Args:
        samples: Calibration samples from training frames
        epsilon: Type II error rate budget for depths 0-2
        denominator: 'joint' (rates over all samples) or 'conditional'
        min_samples: Depths with fewer samples are disabled
        taus: Threshold grid, ascending

    Returns:
        InferenceModel covering depths 0..3
    """
    if not 0.0 < epsilon < 1.0:
        raise ConfigError(f"epsilon must lie in (0, 1), got {epsilon}")
    if denominator not in DENOMINATORS:
        raise ConfigError(f"Unknown error rate denominator '{denominator}'")
    if not samples:
        raise CalibrationError("No calibration samples at any depth")

    entries = []
    for depth in TRAINED_DEPTHS:
        group = [sample for sample in samples if sample.depth == depth]
        margins = candidate_margins(depth)
        if len(group) < min_samples:
            if group:
                logger.warning("Depth %d has only %d samples; early termination disabled", depth, len(group))
            entries.append(DepthModel(depth, margins[0], 0.0, False, sample_count=len(group)))
            continue

        x1 = np.array([sample.x1 for sample in group], dtype=np.int64)
        x2_by_margin = {
            margin: np.array([sample.x2_prime_by_margin[margin] for sample in group], dtype=np.float64)
            for margin in margins
        }
        if depth < 3:
            bounded = _calibrate_bounded(x2_by_margin, x1, epsilon, denominator, taus)
            if bounded is None:
                raise CalibrationError(
                    f"Depth {depth}: no threshold in {tuple(taus)} keeps type II errors within {epsilon}"
                )
            margin, tau, rate1, rate2 = bounded
        else:
            margin = 0
            tau, rate1, rate2 = _calibrate_total(x2_by_margin[0], x1, denominator, taus)
        entries.append(DepthModel(depth, margin, tau, True, rate1, rate2, len(group)))
        logger.info("Depth %d: margin %d, tau %.1f, type I %.3f, type II %.3f (%d samples)",
                    depth, margin, tau, rate1, rate2, len(group))

    return InferenceModel(tuple(entries), epsilon, denominator)


def force_tau(model: InferenceModel, tau: float) -> InferenceModel:
    """Copy of model with tau overridden at every depth"""
    return replace(model, depths=tuple(replace(entry, tau=tau) for entry in model.depths))


def save_model(model: InferenceModel, path: str) -> None:
    """Persist a model as diffable key = value text"""
    lines = [
        "# quadtree ladder inference model",
        f"epsilon = {model.epsilon!r}",
        f"error_rate_denominator = {model.denominator}",
    ]
    for entry in model.depths:
        prefix = f"depth.{entry.depth}"
        lines += [
            f"{prefix}.margin = {entry.margin}",
            f"{prefix}.tau = {entry.tau!r}",
            f"{prefix}.enabled = {str(entry.enabled).lower()}",
            f"{prefix}.type1_rate = {entry.type1_rate!r}",
            f"{prefix}.type2_rate = {entry.type2_rate!r}",
            f"{prefix}.sample_count = {entry.sample_count}",
        ]
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def load_model(path: str) -> InferenceModel:
    """Read a model written by save_model"""
    values = {}
    with open(path, "r", encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{number}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = value

    try:
        entries = []
        for depth in TRAINED_DEPTHS:
            prefix = f"depth.{depth}"
            entries.append(DepthModel(
                depth=depth,
                margin=int(values[f"{prefix}.margin"]),
                tau=float(values[f"{prefix}.tau"]),
                enabled=values[f"{prefix}.enabled"] == "true",
                type1_rate=float(values[f"{prefix}.type1_rate"]),
                type2_rate=float(values[f"{prefix}.type2_rate"]),
                sample_count=int(values[f"{prefix}.sample_count"]),
            ))
        return InferenceModel(tuple(entries), float(values["epsilon"]),
                              values.get("error_rate_denominator", "joint"))
    except (KeyError, ValueError) as e:
        raise ConfigError(f"Malformed model file {path}: {e}")
