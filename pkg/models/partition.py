"""
Quadtree partition search over 64x64 superblocks
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, Iterator, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from config.config import (
    HEADER_BITS,
    LAMBDA_SCALE,
    MIN_BLOCK_SIZE,
    SPLIT_BITS,
    SUPERBLOCK_SIZE,
)
from models.neighborhood import DepthMap
from utils.errors import ConfigError, InvalidArgumentError
from utils.frame_utils import FrameBuffer

logger = logging.getLogger(__name__)


class PartitionMode(IntEnum):
    """Partition choices for a square block; the value order is the tie-break order"""

    NONE = 0
    HORZ = 1
    VERT = 2
    SPLIT4 = 3


@dataclass(frozen=True)
class BlockRect:
    x: int
    y: int
    w: int
    h: int

    @property
    def is_square(self) -> bool:
        return self.w == self.h

    @property
    def can_split(self) -> bool:
        return self.is_square and self.w >= 2 * MIN_BLOCK_SIZE

    def horz_halves(self) -> Tuple["BlockRect", "BlockRect"]:
        half = self.h // 2
        return (BlockRect(self.x, self.y, self.w, half),
                BlockRect(self.x, self.y + half, self.w, half))

    def vert_halves(self) -> Tuple["BlockRect", "BlockRect"]:
        half = self.w // 2
        return (BlockRect(self.x, self.y, half, self.h),
                BlockRect(self.x + half, self.y, half, self.h))

    def quadrants(self) -> Tuple["BlockRect", ...]:
        half = self.w // 2
        return tuple(
            BlockRect(self.x + dx, self.y + dy, half, half)
            for dy in (0, half)
            for dx in (0, half)
        )


def block_depth(rect: BlockRect) -> int:
    """Depth of a block by its longer edge: min(log2(64/w), log2(64/h))"""
    longer = max(rect.w, rect.h)
    if longer > SUPERBLOCK_SIZE or SUPERBLOCK_SIZE % longer:
        raise InvalidArgumentError(f"Illegal block shape {rect.w}x{rect.h}")
    return (SUPERBLOCK_SIZE // longer).bit_length() - 1


def rd_lambda(qp: int) -> float:
    """HEVC-style Lagrange multiplier for a quantizer index"""
    return LAMBDA_SCALE * 2 ** ((qp - 12) / 3)


@dataclass(frozen=True)
class RdoConfig:
    qp: int
    lambda_: float
    split_bits: float = SPLIT_BITS
    header_bits: float = HEADER_BITS

    def __post_init__(self):
        if self.lambda_ <= 0:
            raise ConfigError(f"lambda must be positive, got {self.lambda_}")
        if self.split_bits <= 0 or self.header_bits <= 0:
            raise ConfigError("split_bits and header_bits must be positive")

    @classmethod
    def from_qp(cls, qp: int, split_bits: float = SPLIT_BITS, header_bits: float = HEADER_BITS) -> "RdoConfig":
        return cls(qp, rd_lambda(qp), split_bits, header_bits)

    @property
    def split_rate(self) -> float:
        return self.lambda_ * self.split_bits


@dataclass
class NodeCounter:
    """Per-task accumulator of search work; merge task counters with +"""

    evaluations: int = 0
    pruned: int = 0
    fires: Dict[int, int] = field(default_factory=dict)

    def record_fire(self, depth: int, pruned: int) -> None:
        self.fires[depth] = self.fires.get(depth, 0) + 1
        self.pruned += pruned

    def __add__(self, other: "NodeCounter") -> "NodeCounter":
        fires = Counter(self.fires)
        fires.update(other.fires)
        return NodeCounter(self.evaluations + other.evaluations, self.pruned + other.pruned, dict(fires))


@dataclass(frozen=True)
class PartitionTree:
    rect: BlockRect
    mode: PartitionMode
    cost: float
    children: Tuple["PartitionTree", ...] = ()

    def iter_nodes(self) -> Iterator["PartitionTree"]:
        yield self
        for child in self.children:
            yield from child.iter_nodes()

    def iter_squares(self) -> Iterator["PartitionTree"]:
        """Square nodes of the chosen tree: the root and everything under SPLIT4"""
        yield self
        if self.mode == PartitionMode.SPLIT4:
            for child in self.children:
                yield from child.iter_squares()

    def structure(self) -> tuple:
        """Mode skeleton of the tree, independent of costs"""
        return (int(self.mode), tuple(child.structure() for child in self.children))


class SplitTerminator(Protocol):
    def should_terminate(self, rect: BlockRect) -> bool:
        ...


@dataclass
class FrameEncoding:
    """Search result for one padded frame"""

    trees: List[PartitionTree]
    depth_map: DepthMap
    counter: NodeCounter
    total_cost: float


def full_search_candidates(size: int) -> int:
    """Candidates an unterminated search evaluates on a square of this size"""
    if size < 2 * MIN_BLOCK_SIZE:
        return 1
    return 4 + 4 * full_search_candidates(size // 2)


def leaf_cost(frame: FrameBuffer, rect: BlockRect, cfg: RdoConfig) -> float:
    """
    Cost of coding rect as one block with DC prediction

    Args:
        frame: Padded frame containing rect
        rect: Block to cost
        cfg: RDO configuration

    Returns:
        SSE around the block mean plus lambda times the per-leaf header rate
    """
    s1, s2 = frame.integrals
    x0, y0, x1, y1 = rect.x, rect.y, rect.x + rect.w, rect.y + rect.h
    total = int(s1[y1, x1] - s1[y0, x1] - s1[y1, x0] + s1[y0, x0])
    squares = int(s2[y1, x1] - s2[y0, x1] - s2[y1, x0] + s2[y0, x0])
    sse = max(squares - total * total / (rect.w * rect.h), 0.0)
    return sse + cfg.lambda_ * cfg.header_bits


def _two_way(frame: FrameBuffer, halves: Tuple[BlockRect, BlockRect], mode: PartitionMode,
             parent: BlockRect, cfg: RdoConfig) -> PartitionTree:
    first = PartitionTree(halves[0], PartitionMode.NONE, leaf_cost(frame, halves[0], cfg))
    second = PartitionTree(halves[1], PartitionMode.NONE, leaf_cost(frame, halves[1], cfg))
    return PartitionTree(parent, mode, first.cost + second.cost + cfg.split_rate, (first, second))


def rdo_search(frame: FrameBuffer, rect: BlockRect, cfg: RdoConfig,
               terminator: Optional[SplitTerminator] = None,
               counter: Optional[NodeCounter] = None) -> PartitionTree:
    """
    Minimum-cost partition tree of a square block

    Args:
        frame: Padded frame containing rect
        rect: Square block to search
        cfg: RDO configuration
        terminator: Decides whether SPLIT4 is skipped; None runs the full search
        counter: Accumulates evaluations, fires and pruned candidates

    Returns:
        The argmin tree; ties resolve NONE < HORZ < VERT < SPLIT4
    """
    if counter is None:
        counter = NodeCounter()

    best = PartitionTree(rect, PartitionMode.NONE, leaf_cost(frame, rect, cfg))
    counter.evaluations += 1
    if not rect.can_split:
        return best

    for mode, halves in ((PartitionMode.HORZ, rect.horz_halves()), (PartitionMode.VERT, rect.vert_halves())):
        candidate = _two_way(frame, halves, mode, rect, cfg)
        counter.evaluations += 1
        if candidate.cost < best.cost:
            best = candidate

    if terminator is not None and terminator.should_terminate(rect):
        counter.record_fire(block_depth(rect), full_search_candidates(rect.w) - 3)
        return best

    children = tuple(rdo_search(frame, quadrant, cfg, terminator, counter) for quadrant in rect.quadrants())
    split_cost = sum(child.cost for child in children) + cfg.split_rate
    counter.evaluations += 1
    if split_cost < best.cost:
        best = PartitionTree(rect, PartitionMode.SPLIT4, split_cost, children)
    return best


def tree_cost(frame: FrameBuffer, tree: PartitionTree, cfg: RdoConfig) -> float:
    """Recompute the cost of a given tree from the pixels"""
    if tree.mode == PartitionMode.NONE:
        return leaf_cost(frame, tree.rect, cfg)
    if tree.mode == PartitionMode.SPLIT4:
        return sum(tree_cost(frame, child, cfg) for child in tree.children) + cfg.split_rate
    first, second = tree.children
    return leaf_cost(frame, first.rect, cfg) + leaf_cost(frame, second.rect, cfg) + cfg.split_rate


def _paint(tree: PartitionTree, depths: np.ndarray) -> None:
    rect = tree.rect
    if tree.mode == PartitionMode.SPLIT4:
        for child in tree.children:
            _paint(child, depths)
        return
    # 2-way splits count as a non-split of their parent square
    depths[rect.y:rect.y + rect.h, rect.x:rect.x + rect.w] = block_depth(rect)


def tree_to_depthmap(tree: PartitionTree, depth_map: DepthMap) -> DepthMap:
    """Return a copy of depth_map with the leaves of tree rasterized into it"""
    rect = tree.rect
    if rect.x + rect.w > depth_map.width or rect.y + rect.h > depth_map.height:
        raise InvalidArgumentError("Depth map does not cover the tree")
    depths = np.array(depth_map.depths, copy=True)
    _paint(tree, depths)
    return DepthMap(depth_map.width, depth_map.height, depths)


def frame_depthmap(trees: Sequence[PartitionTree], width: int, height: int) -> DepthMap:
    depths = np.zeros((height, width), dtype=np.uint8)
    for tree in trees:
        _paint(tree, depths)
    return DepthMap(width, height, depths)


def superblock_grid(frame: FrameBuffer, size: int = SUPERBLOCK_SIZE) -> List[BlockRect]:
    """Raster-order superblocks of a padded frame"""
    if frame.width % size or frame.height % size:
        raise InvalidArgumentError(f"Frame {frame.width}x{frame.height} is not padded to {size}")
    return [BlockRect(x, y, size, size)
            for y in range(0, frame.height, size)
            for x in range(0, frame.width, size)]


def _search_batch(frame: FrameBuffer, rects: Sequence[BlockRect], cfg: RdoConfig,
                  terminator: Optional[SplitTerminator]) -> Tuple[List[PartitionTree], NodeCounter]:
    counter = NodeCounter()
    trees = [rdo_search(frame, rect, cfg, terminator, counter) for rect in rects]
    return trees, counter


def encode_frame(frame: FrameBuffer, cfg: RdoConfig, terminator: Optional[SplitTerminator] = None,
                 superblock: int = SUPERBLOCK_SIZE, n_jobs: int = 1) -> FrameEncoding:
    """
    Search every superblock of a padded frame

    Args:
        frame: Frame padded to the superblock grid
        cfg: RDO configuration
        terminator: Early terminator, None for full RDO
        superblock: Root block size
        n_jobs: joblib workers; superblock rows are split into one batch per worker

    Returns:
        FrameEncoding with trees in raster order and the merged counter
    """
    rects = superblock_grid(frame, superblock)
    if n_jobs == 1:
        batches = [_search_batch(frame, rects, cfg, terminator)]
    else:
        per_row = frame.width // superblock
        rows = [rects[i:i + per_row] for i in range(0, len(rects), per_row)]
        batches = Parallel(n_jobs=n_jobs)(
            delayed(_search_batch)(frame, row, cfg, terminator) for row in rows
        )

    trees: List[PartitionTree] = []
    counter = NodeCounter()
    for batch_trees, batch_counter in batches:
        trees.extend(batch_trees)
        counter = counter + batch_counter

    total_cost = sum(tree.cost for tree in trees)
    depth_map = frame_depthmap(trees, frame.width, frame.height)
    logger.debug("Encoded %dx%d frame at QP %d: %d evaluations", frame.width, frame.height,
                 cfg.qp, counter.evaluations)
    return FrameEncoding(trees, depth_map, counter, total_cost)
