"""
Smoke tests for the dashboard figures
"""
import numpy as np
import pandas as pd

from models.neighborhood import DepthMap
from services.metrics import RdPoint
from services.report import FrameStats, PassStats, QpReport, RunReport
from utils.visualization import (
    calibration_table,
    create_bd_curves_chart,
    create_bias_sweep_chart,
    create_calibration_chart,
    create_cost_delta_chart,
    create_depthmap_heatmap,
    create_node_count_chart,
)


def make_report(with_reference=True):
    qp = QpReport(
        qp=27,
        rd_lambda=27.2,
        low=PassStats(node_count=100),
        accelerated=PassStats(node_count=80, total_cost=101.0),
        reference=PassStats(node_count=120, total_cost=100.0) if with_reference else None,
        frames=[FrameStats(index=0, accelerated=True, low_cost=1.0, low_nodes=10, high_cost=101.0,
                           high_nodes=80, reference_cost=100.0 if with_reference else None)],
    )
    return RunReport(sequence="clip.y4m", source_dims=(128, 96), hi_dims=(128, 96), lo_dims=(96, 72),
                     epsilon=0.1, group_size=3, train_count=1, qps=[qp])


def test_node_count_chart_has_all_passes():
    fig = create_node_count_chart(make_report())
    assert {trace.name for trace in fig.data} == {"low", "accelerated", "reference"}


def test_cost_delta_needs_reference():
    assert len(create_cost_delta_chart(make_report()).data) == 1
    assert len(create_cost_delta_chart(make_report(False)).data) == 0


def test_calibration_without_groups():
    report = make_report()
    assert calibration_table(report).empty
    assert len(create_calibration_chart(report).layout.annotations) == 1


def test_bias_sweep_chart():
    table = pd.DataFrame({"radius": [0, 1], "abs_bias": [0.0, 0.01], "sd": [0.4, 0.1],
                          "bound": [0.0, 0.08], "rmse": [0.4, 0.1], "mse": [0.16, 0.01]})
    assert len(create_bias_sweep_chart(table).data) == 4


def test_bd_and_heatmap():
    points = [RdPoint(r, p) for r, p in ((100, 30), (200, 33), (400, 36), (800, 38.5))]
    assert len(create_bd_curves_chart(points, points).data) == 2
    depth_map = DepthMap(8, 8, np.zeros((8, 8), dtype=np.uint8))
    assert create_depthmap_heatmap(depth_map).data[0].z.shape == (8, 8)
