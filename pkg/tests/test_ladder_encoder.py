"""
End-to-end tests for the two-resolution ladder pipeline
"""
import numpy as np
import pytest

from models.inference import load_model
from models.partition import PartitionMode, RdoConfig, encode_frame, full_search_candidates
from services.ladder_encoder import GroupSchedule, LadderEncoder, encode_group, run_ladder
from services.metrics import run_confusion, summarize
from services.report import RunReport
from utils.errors import ConfigError, InputMismatchError, InvalidArgumentError
from utils.frame_utils import FrameBuffer, prepare_ladder_frames, read_depthmaps
from tests.conftest import natural_sequence

LO_DIMS = (96, 72)
SCHEDULE = GroupSchedule(group_size=3, train_count=1)
QPS = [22, 27, 32, 37]
CLIP_SEEDS = [4, 11, 19]


@pytest.fixture
def reference_run(small_clip):
    return run_ladder(small_clip, None, LO_DIMS, qps=[22, 32], sched=SCHEDULE,
                      reference=True, min_samples=1)


class TestGroupSchedule:
    @pytest.mark.parametrize("group,train", [(4, 0), (4, 5), (1, 2)])
    def test_invalid(self, group, train):
        with pytest.raises(ConfigError):
            GroupSchedule(group, train)

    def test_training_may_fill_the_group(self):
        assert GroupSchedule(4, 4).train_count == 4


class TestEncodeGroup:
    def _frames(self, count):
        pairs = [prepare_ladder_frames(f, (128, 96), LO_DIMS) for f in natural_sequence(128, 96, count, seed=4)]
        return [p.hi for p in pairs], [p.lo for p in pairs]

    def test_streams_must_align(self):
        hi, lo = self._frames(3)
        with pytest.raises(InputMismatchError):
            encode_group(hi, lo[:2], (128, 96), LO_DIMS, RdoConfig.from_qp(27), SCHEDULE)

    def test_group_size_enforced(self):
        hi, lo = self._frames(4)
        with pytest.raises(InvalidArgumentError):
            encode_group(hi, lo, (128, 96), LO_DIMS, RdoConfig.from_qp(27), SCHEDULE)

    def test_training_frames_are_full_search(self):
        hi, lo = self._frames(3)
        result = encode_group(hi, lo, (128, 96), LO_DIMS, RdoConfig.from_qp(27), SCHEDULE, min_samples=1)
        assert result.training_frames == 1
        assert result.high[0].counter.evaluations == 4 * 596
        assert result.high[0].counter.pruned == 0
        assert len(result.calibration.depths) == 4
        assert result.pruned == sum(e.counter.pruned for e in result.high[1:])

    def test_model_covers_all_depths(self):
        hi, lo = self._frames(2)
        result = encode_group(hi, lo, (128, 96), LO_DIMS, RdoConfig.from_qp(22), GroupSchedule(2, 2),
                              min_samples=1)
        assert [entry.depth for entry in result.model.depths] == [0, 1, 2, 3]
        assert result.fires == {} and result.pruned == 0

    @pytest.mark.parametrize("qp", QPS)
    @pytest.mark.parametrize("seed", CLIP_SEEDS)
    def test_zero_tau_trees_match_full_search(self, seed, qp):
        pairs = [prepare_ladder_frames(f, (128, 96), LO_DIMS) for f in natural_sequence(128, 96, 3, seed=seed)]
        hi, lo = [p.hi for p in pairs], [p.lo for p in pairs]
        cfg = RdoConfig.from_qp(qp)
        result = encode_group(hi, lo, (128, 96), LO_DIMS, cfg, SCHEDULE, tau_override=0.0, min_samples=1)
        assert result.fires == {} and result.pruned == 0
        for frame, encoding in zip(hi, result.high):
            full = encode_frame(frame, cfg)
            assert [t.structure() for t in encoding.trees] == [t.structure() for t in full.trees]
            assert encoding.total_cost == full.total_cost

    def test_flat_group_never_splits(self):
        flat = FrameBuffer(128, 64, np.full((64, 128), 120, dtype=np.uint8))
        pair = prepare_ladder_frames(flat, (128, 64), (96, 48))
        result = encode_group([pair.hi] * 50, [pair.lo] * 50, (128, 64), (96, 48), RdoConfig.from_qp(27),
                              GroupSchedule(50, 5), min_samples=1)
        accelerated = result.high[5:]
        for encoding in accelerated:
            modes = [node.mode for tree in encoding.trees for node in tree.iter_nodes()]
            assert PartitionMode.SPLIT4 not in modes
            assert encoding.counter.evaluations == 2 * 3
            assert encoding.counter.evaluations < 2 * full_search_candidates(64)
        assert result.fires == {0: 90}
        assert result.pruned == 90 * (full_search_candidates(64) - 3)

    def test_calibration_records_training_errors(self):
        hi, lo = self._frames(3)
        result = encode_group(hi, lo, (128, 96), LO_DIMS, RdoConfig.from_qp(22), SCHEDULE, min_samples=1)
        for entry in result.calibration.depths:
            assert entry.type1_errors + entry.type2_errors <= entry.sample_count
            if entry.enabled:
                assert entry.type2_errors == round(entry.type2_rate * entry.sample_count)
                assert entry.type1_errors == round(entry.type1_rate * entry.sample_count)

    def test_superblock_workers_match_serial(self):
        hi, lo = self._frames(3)
        cfg = RdoConfig.from_qp(27)
        serial = encode_group(hi, lo, (128, 96), LO_DIMS, cfg, SCHEDULE, min_samples=1)
        threaded = encode_group(hi, lo, (128, 96), LO_DIMS, cfg, SCHEDULE, min_samples=1,
                                n_jobs=2, superblock_jobs=2)
        assert threaded.model == serial.model
        assert threaded.fires == serial.fires
        for mine, theirs in zip(threaded.high, serial.high):
            assert [t.structure() for t in mine.trees] == [t.structure() for t in theirs.trees]
            assert mine.counter.evaluations == theirs.counter.evaluations



class TestRunLadder:
    def test_zero_tau_reproduces_full_search(self, small_clip):
        report = run_ladder(small_clip, None, LO_DIMS, qps=[27], sched=SCHEDULE, reference=True,
                            tau_override=0.0, min_samples=1)
        qp = report.qps[0]
        assert qp.accelerated.node_count == qp.reference.node_count
        assert qp.accelerated.total_cost == qp.reference.total_cost
        assert qp.termination_fires == {}
        assert qp.node_reduction_pct == 0.0
        assert report.forced_tau == 0.0

    def test_work_is_conserved(self, reference_run):
        for qp in reference_run.qps:
            assert qp.accelerated.node_count + qp.pruned_candidates == qp.reference.node_count
            assert qp.accelerated.total_cost >= qp.reference.total_cost
            for frame in qp.frames:
                assert frame.high_nodes <= frame.reference_nodes
                assert frame.high_cost >= frame.reference_cost

    def test_low_pass_is_unaccelerated(self, reference_run):
        assert all(qp.low_pass_identical for qp in reference_run.qps)

    def test_group_layout(self, reference_run):
        assert reference_run.frame_count == 6
        qp = reference_run.qps[0]
        assert len(qp.groups) == 2
        assert [g.first_frame for g in qp.groups] == [0, 3]
        assert [f.accelerated for f in qp.frames] == [False, True, True, False, True, True]
        training = [f for f in qp.frames if not f.accelerated]
        assert all(f.high_nodes == f.reference_nodes for f in training)

    def test_summary_matches_report(self, reference_run):
        summary = summarize(reference_run)
        assert reference_run.node_reduction_pct == pytest.approx(-100.0 * summary.delta_t_proxy)
        assert reference_run.cost_delta_pct == pytest.approx(100.0 * summary.delta_cost)
        assert summary.delta_t_proxy <= 0.0
        assert summary.delta_cost >= 0.0
        assert [q.qp for q in summary.per_qp] == [22, 32]

    def test_summary_carries_confusion(self, reference_run):
        summary = summarize(reference_run)
        assert summary.confusion == run_confusion(reference_run)
        assert [row.depth for row in summary.confusion] == [0, 1, 2, 3]
        depth0 = summary.confusion[0]
        # Each group samples every superblock of its training frames once per QP
        assert depth0.samples == 2 * 2 * 4
        assert depth0.type1_errors + depth0.type2_errors <= depth0.samples

    def test_larger_epsilon_trades_cost_for_nodes(self, make_y4m):
        for seed in (3, 8, 13):
            clip = make_y4m(natural_sequence(256, 192, 4, seed=seed), name=f"clip{seed}.y4m")
            runs = {eps: run_ladder(clip, None, (192, 144), qps=QPS, epsilon=eps, sched=GroupSchedule(4, 2),
                                    reference=True, min_samples=1)
                    for eps in (0.1, 0.2)}
            assert runs[0.2].node_reduction_pct >= runs[0.1].node_reduction_pct
            assert runs[0.2].cost_delta_pct >= runs[0.1].cost_delta_pct

    def test_without_reference(self, small_clip):
        report = run_ladder(small_clip, None, LO_DIMS, qps=[37], sched=SCHEDULE, min_samples=1)
        qp = report.qps[0]
        assert qp.reference is None
        assert qp.low_pass_identical is None
        assert report.node_reduction_pct is None
        assert qp.low.node_count == 6 * 4 * 596

    def test_parallel_matches_serial(self, small_clip):
        serial = run_ladder(small_clip, None, LO_DIMS, qps=[27], sched=SCHEDULE, min_samples=1)
        parallel = run_ladder(small_clip, None, LO_DIMS, qps=[27], sched=SCHEDULE, min_samples=1, n_jobs=2)
        assert serial.qps[0].accelerated.node_count == parallel.qps[0].accelerated.node_count
        assert serial.qps[0].termination_fires == parallel.qps[0].termination_fires


class TestLadderEncoder:
    def test_report_file(self, small_clip, tmp_path):
        path = str(tmp_path / "report.json")
        encoder = LadderEncoder(schedule=SCHEDULE, min_samples=1, n_jobs=1)
        report = encoder.encode(small_clip, None, LO_DIMS, qps=[27], reference=True, report_path=path)
        loaded = RunReport.load(path)
        assert loaded.sequence == "clip.y4m"
        assert loaded.hi_dims == (128, 96)
        assert loaded.qps[0].accelerated.node_count == report.qps[0].accelerated.node_count
        assert loaded.qps[0].termination_fires == report.qps[0].termination_fires

    def test_dump_depthmaps(self, small_clip, tmp_path):
        path = str(tmp_path / "maps.qldp")
        encoder = LadderEncoder(n_jobs=1)
        assert encoder.dump_depthmaps(small_clip, None, 27, path, max_frames=2) == 2
        records = read_depthmaps(path)
        assert [index for index, _ in records] == [0, 1]
        assert records[0][1].dims == (128, 128)

    def test_train_only_writes_model(self, small_clip, tmp_path):
        path = str(tmp_path / "model.txt")
        encoder = LadderEncoder(schedule=GroupSchedule(4, 2), min_samples=1, n_jobs=1)
        model = encoder.train_only(small_clip, None, LO_DIMS, 22, model_path=path)
        assert load_model(path) == model
        assert model.for_depth(0).sample_count == 8
