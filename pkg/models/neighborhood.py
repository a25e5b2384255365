"""
Co-located neighborhood estimator over a low-resolution depth map
"""
from dataclasses import dataclass
from functools import cached_property
from math import floor
from typing import TYPE_CHECKING, Dict, Optional, Tuple

import numpy as np

from config.config import MARGIN_GRID, MAX_DEPTH
from utils.errors import DegenerateRegionError, InvalidArgumentError

if TYPE_CHECKING:
    from models.partition import BlockRect

Dims = Tuple[int, int]


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Rasterized leaf depths of one frame, stored as a (height, width) array"""

    width: int
    height: int
    depths: np.ndarray

    def __post_init__(self):
        depths = np.array(self.depths, dtype=np.uint8, copy=True).reshape(self.height, self.width)
        if depths.size and depths.max() > MAX_DEPTH:
            raise InvalidArgumentError(f"Depth values must lie in [0, {MAX_DEPTH}]")
        depths.setflags(write=False)
        object.__setattr__(self, "depths", depths)

    @classmethod
    def blank(cls, width: int, height: int) -> "DepthMap":
        return cls(width, height, np.zeros((height, width), dtype=np.uint8))

    @property
    def dims(self) -> Dims:
        return self.width, self.height

    @cached_property
    def _tables(self) -> Dict[int, np.ndarray]:
        return {}

    def indicator_table(self, threshold: int) -> np.ndarray:
        """Summed-area table of the indicator depth >= threshold"""
        if threshold not in self._tables:
            table = np.zeros((self.height + 1, self.width + 1), dtype=np.float64)
            indicator = (self.depths >= threshold).astype(np.float64)
            table[1:, 1:] = indicator.cumsum(axis=0).cumsum(axis=1)
            self._tables[threshold] = table
        return self._tables[threshold]

    def digest(self) -> bytes:
        return self.depths.tobytes()


@dataclass(frozen=True)
class NeighborhoodSpec:
    margin: int
    depth: int

    def __post_init__(self):
        if self.margin != 0 and self.margin not in MARGIN_GRID:
            raise InvalidArgumentError(f"Margin {self.margin} is not 0 or a multiple of 8 in [8, 128]")
        if not 0 <= self.depth <= MAX_DEPTH - 1:
            raise InvalidArgumentError(f"Neighborhood depth {self.depth} outside [0, {MAX_DEPTH - 1}]")


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle with real-valued coordinates"""

    x: float
    y: float
    w: float
    h: float

    @property
    def x1(self) -> float:
        return self.x + self.w

    @property
    def y1(self) -> float:
        return self.y + self.h


def candidate_margins(depth: int) -> Tuple[int, ...]:
    """Margins searched during calibration; depth 3 always uses the bare block"""
    return (0,) if depth >= 3 else MARGIN_GRID


def colocate(rect: "BlockRect", hi_dims: Dims, lo_dims: Dims, bounds: Optional[Dims] = None) -> Region:
    """
    Map a high-resolution block into low-resolution coordinates

    Args:
        rect: Block in the high-resolution frame
        hi_dims: (width, height) of the high-resolution content
        lo_dims: (width, height) of the low-resolution content
        bounds: Clip bounds, defaults to lo_dims (pass the padded map size to keep
            blocks that lie in padding)

    Returns:
        Real-valued region, clipped to bounds
    """
    scale_x = lo_dims[0] / hi_dims[0]
    scale_y = lo_dims[1] / hi_dims[1]
    bound_w, bound_h = bounds or lo_dims

    x0 = min(max(rect.x * scale_x, 0.0), bound_w)
    y0 = min(max(rect.y * scale_y, 0.0), bound_h)
    x1 = min(max((rect.x + rect.w) * scale_x, 0.0), bound_w)
    y1 = min(max((rect.y + rect.h) * scale_y, 0.0), bound_h)
    return Region(x0, y0, x1 - x0, y1 - y0)


def _integral_at(table: np.ndarray, x: float, y: float) -> float:
    # The integral of a piecewise-constant raster is bilinear between table nodes
    height, width = table.shape[0] - 1, table.shape[1] - 1
    i0 = min(int(floor(x)), width - 1)
    j0 = min(int(floor(y)), height - 1)
    fx = x - i0
    fy = y - j0
    top = (1.0 - fx) * table[j0, i0] + fx * table[j0, i0 + 1]
    bottom = (1.0 - fx) * table[j0 + 1, i0] + fx * table[j0 + 1, i0 + 1]
    return float((1.0 - fy) * top + fy * bottom)


def neighborhood_mean(depth_map: DepthMap, region: Region, spec: NeighborhoodSpec) -> float:
    """
    Area-weighted share of the expanded region whose depth reaches spec.depth + 1

    Args:
        depth_map: Low-resolution depth map
        region: Co-located region in map coordinates
        spec: Margin (map pixels) and the depth of the block being predicted

    Returns:
        Estimator value in [0, 1]
    """
    x0 = max(region.x - spec.margin, 0.0)
    y0 = max(region.y - spec.margin, 0.0)
    x1 = min(region.x1 + spec.margin, float(depth_map.width))
    y1 = min(region.y1 + spec.margin, float(depth_map.height))
    if x1 <= x0 or y1 <= y0:
        raise DegenerateRegionError(
            f"Region ({region.x:.2f}, {region.y:.2f}, {region.w:.2f}, {region.h:.2f}) "
            f"with margin {spec.margin} does not intersect the {depth_map.width}x{depth_map.height} map"
        )

    table = depth_map.indicator_table(spec.depth + 1)
    covered = (
        _integral_at(table, x1, y1)
        - _integral_at(table, x0, y1)
        - _integral_at(table, x1, y0)
        + _integral_at(table, x0, y0)
    )
    mean = covered / ((x1 - x0) * (y1 - y0))
    return min(max(mean, 0.0), 1.0)
