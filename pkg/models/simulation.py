"""
Synthetic simulator for the neighborhood estimator: a drifting random field,
Bernoulli partition indicators through monotone links, and Monte Carlo checks
of the estimator's moments, bias bound and cross-resolution link
"""
import json
import logging
import os
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.special import expit, logit

from config.config import PRESETS_DIR, SIM_CHUNK_SIZE, SIM_REPLICATIONS, SIM_SEED
from utils.errors import ConfigError, InvalidArgumentError

logger = logging.getLogger(__name__)

Offset = Tuple[int, int]

# Monte Carlo slack, in standard errors, for bound and sd checks
MC_TOLERANCE_SE = 4.0

# Stream tags keep each sampler on its own random sequence for a given seed
FIELD_STREAM = 0
PARTITION_STREAM = 1
MOMENTS_STREAM = 2
LINK_STREAM = 3
SWEEP_STREAM = 4


@dataclass(frozen=True)
class LinkFunction:
    """Monotone map from field value to split probability"""

    kind: str = "logistic"
    location: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind != "logistic":
            raise ConfigError(f"Unsupported link kind '{self.kind}'")
        if not self.scale > 0 or not np.isfinite(self.scale):
            raise ConfigError(f"Link scale must be positive and finite, got {self.scale}")

    def __call__(self, mu):
        return expit((np.asarray(mu, dtype=np.float64) - self.location) / self.scale)

    def derivative(self, mu):
        p = self(mu)
        return p * (1.0 - p) / self.scale

    def inverse(self, p):
        return self.location + self.scale * logit(np.asarray(p, dtype=np.float64))


@dataclass(frozen=True)
class FieldParams:
    mu0: float = 1.5
    beta: Tuple[float, float] = (0.5, 0.2)
    sigma2: float = 0.05
    seed: int = SIM_SEED

    def __post_init__(self):
        if self.sigma2 < 0:
            raise InvalidArgumentError(f"sigma2 must be non-negative, got {self.sigma2}")
        if len(self.beta) != 2:
            raise InvalidArgumentError("beta has two components")


@dataclass(frozen=True)
class SyntheticField:
    """Field values at lattice offsets around a reference block at the origin"""

    params: FieldParams
    offsets: np.ndarray  # (n, 2) integer offsets, origin first
    mu: np.ndarray  # (n,)

    @property
    def n(self) -> int:
        return len(self.mu)

    def value_at(self, offset: Offset) -> float:
        return float(self.mu[self._index(offset)])

    def _index(self, offset: Offset) -> int:
        matches = np.flatnonzero((self.offsets == np.asarray(offset)).all(axis=1))
        if not len(matches):
            raise InvalidArgumentError(f"Offset {offset} is not on the field lattice")
        return int(matches[0])


@dataclass(frozen=True)
class EstimatorReport:
    n: int
    empirical_mean: float
    empirical_sd: float
    predicted_mean: float
    predicted_sd: float
    bias_bound: float
    reference_probability: float
    replications: int

    @property
    def standard_error(self) -> float:
        return self.empirical_sd / np.sqrt(self.replications)


@dataclass
class LinkReport:
    pairs: pd.DataFrame
    max_discrepancy: float
    composed_monotone: bool
    replications: int


def square_offsets(radius: int) -> np.ndarray:
    """Integer offsets of the (2r+1)^2 lattice square of Chebyshev radius r, origin first"""
    if radius < 0:
        raise InvalidArgumentError(f"Radius must be non-negative, got {radius}")
    span = np.arange(-radius, radius + 1)
    xs, ys = np.meshgrid(span, span)
    offsets = np.column_stack([xs.ravel(), ys.ravel()])
    order = np.argsort((np.abs(offsets) ** 2).sum(axis=1), kind="stable")
    return offsets[order]


def _draw_mu(params: FieldParams, offsets: np.ndarray, rng: np.random.Generator,
             size: Optional[int] = None) -> np.ndarray:
    """mu(eta) ~ N(mu0 + beta . eta, |eta| sigma2), independently per offset"""
    offsets = np.asarray(offsets, dtype=np.float64)
    mean = params.mu0 + offsets @ np.asarray(params.beta, dtype=np.float64)
    sd = np.sqrt(np.linalg.norm(offsets, axis=1) * params.sigma2)
    shape = mean.shape if size is None else (size,) + mean.shape
    return mean + sd * rng.standard_normal(shape)


def sample_field(params: FieldParams, offsets: Optional[np.ndarray] = None,
                 radius: int = 1) -> SyntheticField:
    """
    Realize the field at lattice offsets around the reference block

    Args:
        params: Drift, variance and seed
        offsets: Explicit (n, 2) offsets; defaults to square_offsets(radius)
        radius: Lattice radius when offsets is omitted

    Returns:
        SyntheticField, reproducible from params.seed
    """
    offsets = square_offsets(radius) if offsets is None else np.asarray(offsets, dtype=np.int64).reshape(-1, 2)
    rng = np.random.default_rng([params.seed, FIELD_STREAM])
    mu = _draw_mu(params, offsets, rng)
    return SyntheticField(params, offsets, mu)


def sample_partitions(synthetic: SyntheticField, g: LinkFunction,
                      blocks: Optional[Sequence[Offset]] = None,
                      rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Independent Bernoulli indicators with P(X=1) = g(mu) at each requested block"""
    if blocks is None:
        mu = synthetic.mu
    else:
        mu = np.array([synthetic.value_at(block) for block in blocks], dtype=np.float64)
    rng = rng or np.random.default_rng([synthetic.params.seed, PARTITION_STREAM])
    return (rng.random(mu.shape) < g(mu)).astype(np.uint8)


def bias_bound(params: FieldParams, g: LinkFunction, offsets: np.ndarray) -> float:
    """(1/n) |g'(mu0)| |beta| sum |eta|"""
    norms = np.linalg.norm(np.asarray(offsets, dtype=np.float64), axis=1)
    return float(g.derivative(params.mu0) * np.linalg.norm(params.beta) * norms.sum() / len(norms))


def _chunks(replications: int, chunk_size: int = SIM_CHUNK_SIZE) -> List[int]:
    if replications < 2:
        raise InvalidArgumentError(f"Need at least 2 replications, got {replications}")
    full, rest = divmod(replications, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def _run_chunks(task, replications: int, n_jobs: int) -> np.ndarray:
    sizes = _chunks(replications)
    if n_jobs == 1:
        parts = [task(index, size) for index, size in enumerate(sizes)]
    else:
        parts = Parallel(n_jobs=n_jobs)(delayed(task)(index, size) for index, size in enumerate(sizes))
    return np.concatenate(parts)


def estimator_moments(synthetic: SyntheticField, g: LinkFunction,
                      replications: int = SIM_REPLICATIONS, n_jobs: int = 1) -> EstimatorReport:
    """
    Moments of the neighborhood mean of indicators over a fixed field realization

    Args:
        synthetic: Realized field; the n blocks are its offsets
        g: Link from field value to split probability
        replications: Indicator resamplings
        n_jobs: joblib workers over chunks

    Returns:
        EstimatorReport with empirical and predicted mean/sd and the bias bound
    """
    p = g(synthetic.mu)
    n = synthetic.n

    def task(chunk: int, size: int) -> np.ndarray:
        rng = np.random.default_rng([synthetic.params.seed, MOMENTS_STREAM, chunk])
        return (rng.random((size, n)) < p).mean(axis=1)

    estimates = _run_chunks(task, replications, n_jobs)
    return EstimatorReport(
        n=n,
        empirical_mean=float(estimates.mean()),
        empirical_sd=float(estimates.std(ddof=1)),
        predicted_mean=float(p.mean()),
        predicted_sd=float(np.sqrt((p * (1.0 - p)).sum()) / n),
        bias_bound=bias_bound(synthetic.params, g, synthetic.offsets),
        reference_probability=float(g(synthetic.params.mu0)),
        replications=replications,
    )


def _sweep_row(params: FieldParams, g: LinkFunction, radius: int, config_index: int,
               replications: int, n_jobs: int) -> Dict[str, Any]:
    offsets = square_offsets(radius)
    target = float(g(params.mu0))

    def task(chunk: int, size: int) -> np.ndarray:
        rng = np.random.default_rng([params.seed, SWEEP_STREAM, config_index, chunk])
        mu = _draw_mu(params, offsets, rng, size)
        return (rng.random(mu.shape) < g(mu)).mean(axis=1)

    estimates = _run_chunks(task, replications, n_jobs)
    bias = float(estimates.mean()) - target
    sd = float(estimates.std(ddof=1))
    standard_error = sd / np.sqrt(replications)
    bound = bias_bound(params, g, offsets)
    return {
        "radius": radius,
        "n": len(offsets),
        "bias": bias,
        "abs_bias": abs(bias),
        "sd": sd,
        "bound": bound,
        "mse": bias * bias + sd * sd,
        "rmse": float(np.sqrt(bias * bias + sd * sd)),
        "standard_error": standard_error,
        "within_bound": abs(bias) <= bound + MC_TOLERANCE_SE * standard_error,
    }


def bias_variance_sweep(params: FieldParams, g: LinkFunction, radii: Sequence[int],
                        replications: int = SIM_REPLICATIONS, n_jobs: int = 1) -> pd.DataFrame:
    """
    Bias and spread of the neighborhood estimator as the neighborhood grows

    Each replication draws a fresh field and fresh indicators; bias is
    measured against g(mu0) at the reference block.

    Args:
        params: Field parameters
        g: Link function
        radii: Ascending lattice radii
        replications: Monte Carlo replications per radius
        n_jobs: joblib workers over chunks

    Returns:
        DataFrame with one row per radius
    """
    radii = list(radii)
    if not radii:
        raise InvalidArgumentError("No radii to sweep")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise InvalidArgumentError(f"Radii must be strictly ascending, got {radii}")

    rows = [_sweep_row(params, g, radius, index, replications, n_jobs) for index, radius in enumerate(radii)]
    table = pd.DataFrame(rows)
    violations = table.loc[~table["within_bound"], "radius"].tolist()
    if violations:
        logger.warning("Bias exceeds the linearized bound at radii %s", violations)
    return table


def best_radius(table: pd.DataFrame) -> int:
    """Radius with the smallest bias^2 + variance"""
    return int(table.loc[table["mse"].idxmin(), "radius"])


def _check_invertible(g: LinkFunction, mu_low: float, mu_high: float) -> None:
    grid = np.linspace(mu_low - 1.0, mu_high + 1.0, 65)
    values = g(grid)
    if np.any(values <= 0.0) or np.any(values >= 1.0) or np.any(np.diff(values) <= 0):
        raise ConfigError(
            f"g2 is not invertible over the field range [{mu_low:.3g}, {mu_high:.3g}]"
        )


def cross_resolution_link(params: FieldParams, g1: LinkFunction, g2: LinkFunction,
                          pairs: Sequence[Offset], replications: int = SIM_REPLICATIONS) -> LinkReport:
    """
    Check that g1(g2^-1(E X2)) recovers E X1 for block pairs

    The low-resolution block sits at the origin with field value mu0; its
    high-resolution partner sits at each offset in pairs.

    Args:
        params: Field parameters
        g1: High-resolution link
        g2: Low-resolution link (must be invertible over the field range)
        pairs: Offsets of the high-resolution block from the co-located point
        replications: Indicator draws per block

    Returns:
        LinkReport with a per-pair table, the largest discrepancy and the
        monotonicity check of the composed map
    """
    offsets = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if not len(offsets):
        raise InvalidArgumentError("No block pairs given")
    rng = np.random.default_rng([params.seed, LINK_STREAM])
    mu1 = _draw_mu(params, offsets, rng)
    _check_invertible(g2, float(min(mu1.min(), params.mu0)), float(max(mu1.max(), params.mu0)))

    p2 = float(g2(params.mu0))
    p1 = g1(mu1)
    ex2 = (rng.random((replications, len(offsets))) < p2).mean(axis=0)
    ex1 = (rng.random((replications, len(offsets))) < p1).mean(axis=0)
    clipped = np.clip(ex2, 1.0 / (2 * replications), 1.0 - 1.0 / (2 * replications))
    predicted = g1(g2.inverse(clipped))

    table = pd.DataFrame({
        "dx": offsets[:, 0],
        "dy": offsets[:, 1],
        "distance": np.linalg.norm(offsets, axis=1),
        "mu1": mu1,
        "ex2": ex2,
        "ex1": ex1,
        "predicted_ex1": predicted,
        "discrepancy": np.abs(predicted - ex1),
        # Discrepancy left once sampling noise is removed
        "link_error": np.abs(g1(params.mu0) - p1),
    })

    grid = np.linspace(0.05, 0.95, 91)
    composed = g1(g2.inverse(grid))
    monotone = bool(np.all(np.diff(composed) > 0))
    if not monotone:
        logger.warning("Composed link is not strictly increasing on the sampled grid")
    return LinkReport(table, float(table["discrepancy"].max()), monotone, replications)


DEFAULT_PRESETS = {
    "moments": {
        "field": {"mu0": 1.5, "beta": [0.5, 0.2], "sigma2": 0.05},
        "link": {"location": 0.0, "scale": 1.0},
        "radius": 2,
    },
    "bias-sweep": {
        "field": {"mu0": 1.5, "beta": [0.5, 0.2], "sigma2": 0.05},
        "link": {"location": 0.0, "scale": 1.0},
        "radii": [0, 1, 2, 3, 4, 5, 6, 7, 8],
    },
    "link": {
        "field": {"mu0": 1.5, "beta": [0.5, 0.2], "sigma2": 0.05},
        "g1": {"location": -0.5, "scale": 1.5},
        "g2": {"location": 0.0, "scale": 1.0},
        "pairs": [[0, 0], [1, 0], [2, 0], [4, 0], [8, 0]],
    },
}


def load_presets() -> Dict[str, Dict[str, Any]]:
    """Load simulator presets, writing the built-in set when the file is missing"""
    presets_path = os.path.join(PRESETS_DIR, "simulator_presets.json")

    if not os.path.exists(presets_path):
        os.makedirs(os.path.dirname(presets_path), exist_ok=True)
        with open(presets_path, "w", encoding="utf-8") as f:
            json.dump(DEFAULT_PRESETS, f, indent=2)
        return DEFAULT_PRESETS

    try:
        with open(presets_path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, ValueError) as e:
        logger.warning("Error loading simulator presets from %s: %s; using defaults", presets_path, e)
        return DEFAULT_PRESETS


@dataclass
class SimulationRun:
    preset: str
    summary: Dict[str, Any]
    table: Optional[pd.DataFrame] = None

    def to_dict(self) -> Dict[str, Any]:
        result = {"preset": self.preset, **self.summary}
        if self.table is not None:
            result["table"] = json.loads(self.table.to_json(orient="records"))
        return result


def _field_params(spec: Dict[str, Any], seed: int) -> FieldParams:
    return FieldParams(float(spec["mu0"]), tuple(spec["beta"]), float(spec["sigma2"]), seed)


def _link(spec: Dict[str, Any]) -> LinkFunction:
    return LinkFunction(spec.get("kind", "logistic"), float(spec["location"]), float(spec["scale"]))


def run_preset(name: str, replications: int = SIM_REPLICATIONS, seed: int = SIM_SEED,
               n_jobs: int = 1) -> SimulationRun:
    """
    Run a named simulator preset

    Args:
        name: 'moments', 'bias-sweep' or 'link'
        replications: Monte Carlo replications
        seed: Base seed
        n_jobs: joblib workers

    Returns:
        SimulationRun with a JSON-ready summary and, for tables, a DataFrame
    """
    presets = load_presets()
    if name not in presets:
        raise ConfigError(f"Unknown preset '{name}'. Available: {', '.join(sorted(presets))}")
    spec = presets[name]
    try:
        params = _field_params(spec["field"], seed)
        if name == "moments":
            synthetic = sample_field(params, radius=int(spec["radius"]))
            report = estimator_moments(synthetic, _link(spec["link"]), replications, n_jobs)
            return SimulationRun(name, {"params": asdict(params), "report": asdict(report)})
        if name == "bias-sweep":
            table = bias_variance_sweep(params, _link(spec["link"]), spec["radii"], replications, n_jobs)
            return SimulationRun(name, {"params": asdict(params), "best_radius": best_radius(table)}, table)
        link = cross_resolution_link(params, _link(spec["g1"]), _link(spec["g2"]),
                                     [tuple(pair) for pair in spec["pairs"]], replications)
        return SimulationRun(
            name,
            {"params": asdict(params), "max_discrepancy": link.max_discrepancy,
             "composed_monotone": link.composed_monotone},
            link.pairs,
        )
    except KeyError as e:
        raise ConfigError(f"Preset '{name}' is missing key {e}")


def export_sweep(table: pd.DataFrame, csv_path: Optional[str] = None, svg_path: Optional[str] = None) -> None:
    """Write a sweep table as CSV and/or an SVG chart of bias, sd, bound and RMSE against radius"""
    if csv_path:
        table.to_csv(csv_path, index=False)
        logger.info("Wrote sweep table to %s", csv_path)
    if svg_path:
        from matplotlib.figure import Figure

        fig = Figure(figsize=(7, 4))
        ax = fig.add_subplot(1, 1, 1)
        for column, label in (("abs_bias", "|bias|"), ("sd", "sd"), ("bound", "bias bound"), ("rmse", "RMSE")):
            ax.plot(table["radius"], table[column], marker="o", label=label)
        ax.set_xlabel("Neighborhood radius (blocks)")
        ax.set_ylabel("Estimator error")
        ax.legend()
        fig.tight_layout()
        fig.savefig(svg_path, format="svg")
        logger.info("Wrote sweep chart to %s", svg_path)
