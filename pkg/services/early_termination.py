"""
Model-backed early termination of the SPLIT4 search
"""
import logging
from typing import Optional, Tuple

from models.inference import InferenceModel
from models.neighborhood import DepthMap, NeighborhoodSpec, colocate, neighborhood_mean
from models.partition import BlockRect, block_depth
from utils.errors import DegenerateRegionError

logger = logging.getLogger(__name__)


class EarlyTerminator:
    """Decides, per high-resolution square, whether the 4-way split is searched"""

    def __init__(self, model: Optional[InferenceModel] = None, lo_map: Optional[DepthMap] = None,
                 hi_dims: Optional[Tuple[int, int]] = None, lo_dims: Optional[Tuple[int, int]] = None):
        """
        Initialize the terminator

        Args:
            model: Trained inference model; None permits every split (full RDO)
            lo_map: Depth map of the current frame's low-resolution pass
            hi_dims: High-resolution content (width, height)
            lo_dims: Low-resolution content (width, height)
        """
        self.model = model
        self.lo_map = lo_map
        self.hi_dims = hi_dims
        self.lo_dims = lo_dims

    @classmethod
    def null(cls) -> "EarlyTerminator":
        return cls()

    def estimate(self, rect: BlockRect) -> Optional[float]:
        """Neighborhood estimate for rect with its depth's trained margin, None if unavailable"""
        depth = block_depth(rect)
        entry = self.model.for_depth(depth) if self.model is not None else None
        if entry is None or not entry.enabled:
            return None
        region = colocate(rect, self.hi_dims, self.lo_dims, bounds=self.lo_map.dims)
        try:
            return neighborhood_mean(self.lo_map, region, NeighborhoodSpec(entry.margin, depth))
        except DegenerateRegionError:
            logger.debug("No co-located area for %s; searching split", rect)
            return None

    def should_terminate(self, rect: BlockRect) -> bool:
        """True when the neighborhood estimate falls strictly below the depth's tau"""
        if self.model is None:
            return False
        estimate = self.estimate(rect)
        if estimate is None:
            return False
        return estimate < self.model.for_depth(block_depth(rect)).tau


def should_terminate(term: EarlyTerminator, rect: BlockRect) -> bool:
    return term.should_terminate(rect)
