"""
Tests for the model-backed split terminator
"""
import numpy as np
import pytest

from models.inference import DepthModel, InferenceModel
from models.neighborhood import DepthMap
from models.partition import BlockRect, RdoConfig, encode_frame
from services.early_termination import EarlyTerminator, should_terminate


def uniform_model(tau, margin=8, enabled=True):
    depths = tuple(DepthModel(d, 0 if d == 3 else margin, tau, enabled) for d in range(4))
    return InferenceModel(depths, epsilon=0.1)


def flat_map(value, size=64):
    return DepthMap(size, size, np.full((size, size), value, dtype=np.uint8))


class TestEarlyTerminator:
    def test_null_never_terminates(self):
        term = EarlyTerminator.null()
        assert not term.should_terminate(BlockRect(0, 0, 64, 64))
        assert term.estimate(BlockRect(0, 0, 64, 64)) is None

    def test_shallow_neighborhood_terminates(self):
        term = EarlyTerminator(uniform_model(0.5), flat_map(0), (64, 64), (64, 64))
        assert term.estimate(BlockRect(0, 0, 64, 64)) == 0.0
        assert should_terminate(term, BlockRect(0, 0, 64, 64))

    def test_deep_neighborhood_keeps_split(self):
        term = EarlyTerminator(uniform_model(0.5), flat_map(4), (64, 64), (64, 64))
        for size in (64, 32, 16, 8):
            assert not term.should_terminate(BlockRect(0, 0, size, size))

    def test_comparison_is_strict(self):
        depths = np.zeros((64, 64), dtype=np.uint8)
        depths[:, 32:] = 1
        term = EarlyTerminator(uniform_model(0.5, margin=0), DepthMap(64, 64, depths), (64, 64), (64, 64))
        rect = BlockRect(0, 0, 64, 64)
        assert term.estimate(rect) == pytest.approx(0.5)
        assert not term.should_terminate(rect)

    def test_zero_tau_never_terminates(self):
        term = EarlyTerminator(uniform_model(0.0), flat_map(0), (64, 64), (64, 64))
        assert not term.should_terminate(BlockRect(16, 16, 16, 16))

    def test_disabled_depth_never_terminates(self):
        term = EarlyTerminator(uniform_model(1.0, enabled=False), flat_map(0), (64, 64), (64, 64))
        assert term.estimate(BlockRect(0, 0, 64, 64)) is None
        assert not term.should_terminate(BlockRect(0, 0, 64, 64))

    def test_depth_four_is_not_modelled(self):
        term = EarlyTerminator(uniform_model(1.0), flat_map(0), (64, 64), (64, 64))
        assert not term.should_terminate(BlockRect(0, 0, 4, 4))

    def test_disjoint_region_searches_split(self):
        lo_map = DepthMap(64, 32, np.zeros((32, 64), dtype=np.uint8))
        term = EarlyTerminator(uniform_model(1.0, margin=0), lo_map, (128, 64), (64, 32))
        assert not term.should_terminate(BlockRect(0, 64, 64, 64))

    def test_terminated_search_cost(self, frame_128):
        cfg = RdoConfig.from_qp(22)
        full = encode_frame(frame_128, cfg)
        term = EarlyTerminator(uniform_model(1.0), flat_map(0, 128), (128, 128), (128, 128))
        fast = encode_frame(frame_128, cfg, term)
        assert fast.counter.fires == {0: 4}
        assert fast.counter.pruned == 4 * 593
        assert fast.total_cost >= full.total_cost
        assert np.all(np.asarray(fast.depth_map.depths) == 0)
