"""
Tests for the quadtree partition search
"""
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from models.neighborhood import DepthMap
from models.partition import (
    BlockRect,
    NodeCounter,
    PartitionMode,
    PartitionTree,
    RdoConfig,
    block_depth,
    encode_frame,
    full_search_candidates,
    leaf_cost,
    rd_lambda,
    rdo_search,
    tree_cost,
    tree_to_depthmap,
)
from utils.errors import ConfigError, InvalidArgumentError
from utils.frame_utils import FrameBuffer
from tests.conftest import natural_frame


def constant_frame(width, height, value=128):
    return FrameBuffer(width, height, np.full((height, width), value, dtype=np.uint8))


class AlwaysTerminate:
    def should_terminate(self, rect):
        return True


class RandomTerminate:
    def __init__(self, seed):
        self.rng = np.random.default_rng(seed)

    def should_terminate(self, rect):
        return bool(self.rng.random() < 0.5)


# Integer-valued costs, so exact ties survive float arithmetic
TIE_CONFIG = RdoConfig(qp=0, lambda_=1.0, split_bits=4.0, header_bits=4.0)


def all_trees(samples: np.ndarray, x: int, y: int, size: int, cfg: RdoConfig, memo: dict) -> list:
    """
    Every legal partition tree of a square as (exact cost, structure)

    Trees are listed NONE, HORZ, VERT, then SPLIT4 with children enumerated
    the same way, so the first minimum follows the search's tie-break.
    """
    header = Fraction(cfg.lambda_ * cfg.header_bits)
    split_rate = Fraction(cfg.split_rate)

    def leaf(rx, ry, w, h):
        key = (rx, ry, w, h)
        if key not in memo:
            block = samples[ry:ry + h, rx:rx + w].astype(np.int64)
            n, total = w * h, int(block.sum())
            memo[key] = Fraction(n * int((block * block).sum()) - total * total, n) + header
        return memo[key]

    whole = (int(PartitionMode.NONE), ())
    trees = [(leaf(x, y, size, size), whole)]
    if size < 8:
        return trees
    half = size // 2
    trees.append((leaf(x, y, size, half) + leaf(x, y + half, size, half) + split_rate,
                  (int(PartitionMode.HORZ), (whole, whole))))
    trees.append((leaf(x, y, half, size) + leaf(x + half, y, half, size) + split_rate,
                  (int(PartitionMode.VERT), (whole, whole))))
    children = [all_trees(samples, x + dx, y + dy, half, cfg, memo) for dy in (0, half) for dx in (0, half)]
    for combo in product(*children):
        trees.append((sum(cost for cost, _ in combo) + split_rate,
                      (int(PartitionMode.SPLIT4), tuple(shape for _, shape in combo))))
    return trees


def oracle_frame(kind: int, trial: int, rng: np.random.Generator):
    if kind == 0:
        return rng.integers(0, 256, size=(64, 64), dtype=np.uint8), RdoConfig.from_qp(int(rng.choice([22, 27, 32, 37])))
    if kind == 1:
        return natural_frame(64, 64, seed=trial).samples, RdoConfig.from_qp(int(rng.choice([22, 27, 32, 37])))
    if kind == 2:
        return np.full((64, 64), rng.integers(0, 256), dtype=np.uint8), RdoConfig.from_qp(27)
    cells = rng.integers(0, 2, size=(16, 16))
    return np.kron(cells, np.ones((4, 4), dtype=np.int64)).astype(np.uint8), TIE_CONFIG
    half = size // 2
    split_rate = lam * split_bits
    costs.append(leaf(x, y, size, half) + leaf(x, y + half, size, half) + split_rate)
    costs.append(leaf(x, y, half, size) + leaf(x + half, y, half, size) + split_rate)
    children = [all_tree_costs(samples, x + dx, y + dy, half, lam, header_bits, split_bits, memo)
                for dy in (0, half) for dx in (0, half)]
    for a in children[0]:
        for b in children[1]:
            for c in children[2]:
                for d in children[3]:
                    costs.append(a + b + c + d + split_rate)
    return costs


class TestGeometry:
    @pytest.mark.parametrize("w,h,depth", [(64, 64, 0), (32, 16, 1), (16, 32, 1), (8, 8, 3), (4, 4, 4), (8, 4, 3)])
    def test_block_depth(self, w, h, depth):
        assert block_depth(BlockRect(0, 0, w, h)) == depth

    def test_illegal_shape(self):
        with pytest.raises(InvalidArgumentError):
            block_depth(BlockRect(0, 0, 128, 128))

    def test_split_legality(self):
        assert BlockRect(0, 0, 8, 8).can_split
        assert not BlockRect(0, 0, 4, 4).can_split
        assert not BlockRect(0, 0, 16, 8).can_split

    def test_quadrants_tile_in_raster_order(self):
        quads = BlockRect(64, 0, 32, 32).quadrants()
        assert [(q.x, q.y) for q in quads] == [(64, 0), (80, 0), (64, 16), (80, 16)]

    def test_full_search_candidates(self):
        assert [full_search_candidates(s) for s in (4, 8, 16, 32, 64)] == [1, 8, 36, 148, 596]


class TestRdoConfig:
    def test_lambda_mapping(self):
        assert rd_lambda(12) == pytest.approx(0.85)
        assert rd_lambda(27) == pytest.approx(0.85 * 32)
        assert RdoConfig.from_qp(32).lambda_ > RdoConfig.from_qp(22).lambda_

    def test_rejects_non_positive_values(self):
        with pytest.raises(ConfigError):
            RdoConfig(qp=22, lambda_=0.0)
        with pytest.raises(ConfigError):
            RdoConfig(qp=22, lambda_=1.0, split_bits=0.0)


class TestLeafCost:
    def test_constant_block_costs_only_rate(self):
        cfg = RdoConfig.from_qp(27)
        frame = constant_frame(64, 64, 77)
        for size in (4, 16, 64):
            assert leaf_cost(frame, BlockRect(0, 0, size, size), cfg) == pytest.approx(cfg.lambda_ * cfg.header_bits)

    def test_single_bright_corner(self):
        samples = np.zeros((8, 8), dtype=np.uint8)
        samples[0, 0] = 255
        cfg = RdoConfig.from_qp(22)
        expected = 15 * (255 / 16) ** 2 + (255 - 255 / 16) ** 2 + cfg.lambda_ * cfg.header_bits
        assert leaf_cost(FrameBuffer(8, 8, samples), BlockRect(0, 0, 4, 4), cfg) == pytest.approx(expected)

    def test_increases_with_lambda(self, frame_128):
        rect = BlockRect(32, 32, 16, 16)
        low = leaf_cost(frame_128, rect, RdoConfig.from_qp(22))
        high = leaf_cost(frame_128, rect, RdoConfig.from_qp(37))
        assert high > low


class TestRdoSearch:
    def test_constant_superblock_stays_whole(self):
        tree = rdo_search(constant_frame(64, 64), BlockRect(0, 0, 64, 64), RdoConfig.from_qp(27))
        assert tree.mode == PartitionMode.NONE
        assert tree.children == ()

    def test_vertical_edge_selects_vert(self):
        samples = np.zeros((64, 64), dtype=np.uint8)
        samples[:, 32:] = 255
        tree = rdo_search(FrameBuffer(64, 64, samples), BlockRect(0, 0, 64, 64), RdoConfig.from_qp(22))
        assert tree.mode == PartitionMode.VERT
        assert [child.rect for child in tree.children] == [BlockRect(0, 0, 32, 64), BlockRect(32, 0, 32, 64)]

    def test_matches_exhaustive_enumeration_on_16x16_roots(self):
        rng = np.random.default_rng(42)
        checked = tied = 0
        for trial in range(64):
            samples, cfg = oracle_frame(trial % 4, trial, rng)
            frame = FrameBuffer(64, 64, samples)
            memo = {}
            for y in range(0, 64, 16):
                for x in range(0, 64, 16):
                    tree = rdo_search(frame, BlockRect(x, y, 16, 16), cfg)
                    trees = all_trees(samples, x, y, 16, cfg, memo)
                    assert len(trees) == 259
                    best = min(cost for cost, _ in trees)
                    winners = [shape for cost, shape in trees if cost == best]
                    assert tree.structure() == winners[0]
                    assert tree.cost == pytest.approx(float(best), rel=1e-12, abs=1e-6)
                    tied += len(winners) > 1
                    checked += 1
        assert checked == 1024
        assert tied > 0

    def test_exact_tie_keeps_the_whole_block(self):
        samples = np.zeros((8, 8), dtype=np.uint8)
        samples[:4, :4] = 1
        samples[4:, 4:] = 1
        tree = rdo_search(FrameBuffer(8, 8, samples), BlockRect(0, 0, 8, 8), TIE_CONFIG)
        costs = [cost for cost, _ in all_trees(samples, 0, 0, 8, TIE_CONFIG, {})]
        assert costs[0] == costs[-1] == 20
        assert tree.mode == PartitionMode.NONE
        assert tree.cost == 20.0

    def test_cost_is_self_consistent(self, frame_128):
        cfg = RdoConfig.from_qp(27)
        encoding = encode_frame(frame_128, cfg)
        for tree in encoding.trees:
            assert tree_cost(frame_128, tree, cfg) == tree.cost

    def test_children_match_modes(self, frame_128):
        encoding = encode_frame(frame_128, RdoConfig.from_qp(22))
        expected = {PartitionMode.NONE: 0, PartitionMode.HORZ: 2, PartitionMode.VERT: 2, PartitionMode.SPLIT4: 4}
        for tree in encoding.trees:
            for node in tree.iter_nodes():
                assert len(node.children) == expected[node.mode]
                if node.children:
                    assert sum(c.rect.w * c.rect.h for c in node.children) == node.rect.w * node.rect.h

    def test_null_search_counts_geometry_only(self, frame_128):
        for qp in (22, 37):
            encoding = encode_frame(frame_128, RdoConfig.from_qp(qp))
            assert encoding.counter.evaluations == 4 * 596
            assert encoding.counter.pruned == 0

    def test_forbidden_split_never_appears(self, frame_128):
        counter = NodeCounter()
        tree = rdo_search(frame_128, BlockRect(0, 0, 64, 64), RdoConfig.from_qp(22), AlwaysTerminate(), counter)
        assert all(node.mode != PartitionMode.SPLIT4 for node in tree.iter_nodes())
        assert counter.evaluations == 3
        assert counter.pruned == 593
        assert counter.fires == {0: 1}

    def test_termination_never_lowers_cost(self, frame_128):
        cfg = RdoConfig.from_qp(27)
        full = encode_frame(frame_128, cfg)
        for seed in range(5):
            fast = encode_frame(frame_128, cfg, RandomTerminate(seed))
            assert fast.total_cost >= full.total_cost
            assert full.counter.evaluations - fast.counter.evaluations == fast.counter.pruned

    def test_parallel_rows_match_serial(self, frame_128):
        cfg = RdoConfig.from_qp(32)
        serial = encode_frame(frame_128, cfg)
        parallel = encode_frame(frame_128, cfg, n_jobs=2)
        assert [t.structure() for t in serial.trees] == [t.structure() for t in parallel.trees]
        assert serial.counter.evaluations == parallel.counter.evaluations
        np.testing.assert_array_equal(serial.depth_map.depths, parallel.depth_map.depths)

    def test_unpadded_frame_rejected(self):
        with pytest.raises(InvalidArgumentError):
            encode_frame(constant_frame(65, 64), RdoConfig.from_qp(22))


class TestDepthMapPainting:
    root = BlockRect(0, 0, 64, 64)

    def _leaf(self, rect):
        return PartitionTree(rect, PartitionMode.NONE, 0.0)

    def test_root_none(self):
        result = tree_to_depthmap(self._leaf(self.root), DepthMap.blank(64, 64))
        assert np.all(result.depths == 0)

    def test_root_split(self):
        tree = PartitionTree(self.root, PartitionMode.SPLIT4, 0.0,
                             tuple(self._leaf(q) for q in self.root.quadrants()))
        base = DepthMap(64, 64, np.full((64, 64), 4, dtype=np.uint8))
        assert np.all(tree_to_depthmap(tree, base).depths == 1)

    def test_two_way_split_counts_as_parent(self):
        tree = PartitionTree(self.root, PartitionMode.HORZ, 0.0,
                             tuple(self._leaf(h) for h in self.root.horz_halves()))
        base = DepthMap(64, 64, np.full((64, 64), 3, dtype=np.uint8))
        assert np.all(tree_to_depthmap(tree, base).depths == 0)

    def test_map_must_cover_tree(self):
        with pytest.raises(InvalidArgumentError):
            tree_to_depthmap(self._leaf(BlockRect(64, 0, 64, 64)), DepthMap.blank(64, 64))
