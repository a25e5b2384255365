"""
Run report schema for ladder encodes (serialized as JSON)
"""
from dataclasses import asdict
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field

from models.inference import ErrorStats, InferenceModel


class PassStats(BaseModel):
    """Work and cost of one encoding pass, summed over frames"""

    node_count: int = 0
    total_cost: float = 0.0
    wall_clock_s: float = 0.0

    def add(self, node_count: int, total_cost: float, seconds: float = 0.0) -> None:
        self.node_count += node_count
        self.total_cost += total_cost
        self.wall_clock_s += seconds


class DepthCalibration(BaseModel):
    depth: int
    margin: int
    tau: float
    enabled: bool
    type1_rate: float
    type2_rate: float
    sample_count: int
    type1_errors: int = 0
    type2_errors: int = 0


class GroupCalibration(BaseModel):
    group_index: int
    first_frame: int
    frame_count: int
    training_frames: int
    sample_count: int
    depths: List[DepthCalibration] = Field(default_factory=list)

    @classmethod
    def from_model(cls, model: InferenceModel, group_index: int, first_frame: int, frame_count: int,
                   training_frames: int, sample_count: int,
                   confusion: Optional[Dict[int, ErrorStats]] = None) -> "GroupCalibration":
        confusion = confusion or {}
        depths = []
        for entry in model.depths:
            errors = confusion.get(entry.depth, ErrorStats(0, 0, 0))
            depths.append(DepthCalibration(**asdict(entry), type1_errors=errors.type1, type2_errors=errors.type2))
        return cls(
            group_index=group_index,
            first_frame=first_frame,
            frame_count=frame_count,
            training_frames=training_frames,
            sample_count=sample_count,
            depths=depths,
        )


class FrameStats(BaseModel):
    index: int
    accelerated: bool
    low_cost: float
    low_nodes: int
    high_cost: float
    high_nodes: int
    reference_cost: Optional[float] = None
    reference_nodes: Optional[int] = None


class QpReport(BaseModel):
    qp: int
    rd_lambda: float
    low: PassStats = Field(default_factory=PassStats)
    accelerated: PassStats = Field(default_factory=PassStats)
    reference: Optional[PassStats] = None
    termination_fires: Dict[int, int] = Field(default_factory=dict)
    pruned_candidates: int = 0
    groups: List[GroupCalibration] = Field(default_factory=list)
    frames: List[FrameStats] = Field(default_factory=list)
    low_pass_identical: Optional[bool] = None
    node_reduction_pct: Optional[float] = None
    cost_delta_pct: Optional[float] = None


class RunReport(BaseModel):
    sequence: str
    source_dims: Tuple[int, int]
    hi_dims: Tuple[int, int]
    lo_dims: Tuple[int, int]
    frame_count: int = 0
    epsilon: float
    group_size: int
    train_count: int
    forced_tau: Optional[float] = None
    qps: List[QpReport] = Field(default_factory=list)
    node_reduction_pct: Optional[float] = None
    cost_delta_pct: Optional[float] = None

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(self.model_dump_json(indent=2))

    @classmethod
    def load(cls, path: str) -> "RunReport":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.model_validate_json(handle.read())
