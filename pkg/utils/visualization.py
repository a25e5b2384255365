"""
Visualization utilities for the quadtree ladder dashboard
"""
from typing import Sequence

import numpy as np
import pandas as pd
import plotly.express as px
import plotly.graph_objects as go

from models.neighborhood import DepthMap
from services.metrics import RdPoint
from services.report import RunReport

PASS_COLORS = {
    "low": "#10B981",  # Green
    "accelerated": "#F59E0B",  # Orange
    "reference": "#1E3A8A",  # Navy
}


def _empty_figure(message: str):
    fig = go.Figure()
    fig.add_annotation(
        text=message,
        xref="paper", yref="paper",
        x=0.5, y=0.5,
        showarrow=False,
        font=dict(size=16)
    )
    return fig


def create_node_count_chart(report: RunReport):
    """
    Grouped bars of node evaluations per pass and QP

    Args:
        report: Run report

    Returns:
        Plotly figure object
    """
    if not report.qps:
        return _empty_figure("No QP results available")

    rows = []
    for qp_report in report.qps:
        rows.append({"QP": str(qp_report.qp), "Pass": "low", "Nodes": qp_report.low.node_count})
        rows.append({"QP": str(qp_report.qp), "Pass": "accelerated", "Nodes": qp_report.accelerated.node_count})
        if qp_report.reference is not None:
            rows.append({"QP": str(qp_report.qp), "Pass": "reference", "Nodes": qp_report.reference.node_count})
    df = pd.DataFrame(rows)

    fig = px.bar(
        df,
        x="QP",
        y="Nodes",
        color="Pass",
        barmode="group",
        title="Node Evaluations per Pass",
        color_discrete_map=PASS_COLORS,
    )
    fig.update_layout(
        xaxis_title="QP",
        yaxis_title="Candidates evaluated",
        height=400,
        margin=dict(l=20, r=20, t=50, b=40),
    )
    return fig


def create_cost_delta_chart(report: RunReport):
    """Per-frame relative RD cost increase of the accelerated pass over full search"""
    rows = [
        {"Frame": frame.index, "QP": str(qp_report.qp),
         "Cost delta (%)": 100.0 * (frame.high_cost - frame.reference_cost) / frame.reference_cost}
        for qp_report in report.qps
        for frame in qp_report.frames
        if frame.reference_cost
    ]
    if not rows:
        return _empty_figure("Run with a reference pass to see cost deltas")

    fig = px.line(
        pd.DataFrame(rows),
        x="Frame",
        y="Cost delta (%)",
        color="QP",
        markers=True,
        title="RD Cost Increase per Frame",
    )
    fig.update_layout(height=400, yaxis=dict(rangemode="tozero"))
    return fig


def calibration_table(report: RunReport) -> pd.DataFrame:
    rows = [
        {"QP": qp_report.qp, "Group": group.group_index, **depth.model_dump()}
        for qp_report in report.qps
        for group in qp_report.groups
        for depth in group.depths
    ]
    return pd.DataFrame(rows)


def create_calibration_chart(report: RunReport):
    """Calibrated tau per depth across groups"""
    df = calibration_table(report)
    if df.empty:
        return _empty_figure("No calibration data available")
    df = df[df["enabled"]]
    if df.empty:
        return _empty_figure("Early termination was disabled at every depth")

    fig = px.scatter(
        df,
        x="Group",
        y="tau",
        color=df["depth"].astype(str),
        symbol=df["QP"].astype(str),
        hover_data=["margin", "type1_rate", "type2_rate", "sample_count"],
        title="Calibrated Thresholds",
        labels={"color": "Depth", "symbol": "QP"},
    )
    fig.update_layout(height=400, yaxis=dict(range=[-0.05, 1.05]))
    return fig


def create_bias_sweep_chart(table: pd.DataFrame):
    """
    Bias, spread and bound of the neighborhood estimator against radius

    Args:
        table: Output of bias_variance_sweep

    Returns:
        Plotly figure object
    """
    if table.empty:
        return _empty_figure("No sweep data available")

    fig = go.Figure()
    for column, label in (("abs_bias", "|bias|"), ("sd", "sd"), ("bound", "bias bound"), ("rmse", "RMSE")):
        fig.add_trace(go.Scatter(x=table["radius"], y=table[column], mode="lines+markers", name=label))

    best = table.loc[table["mse"].idxmin()]
    fig.add_vline(x=float(best["radius"]), line_dash="dash", line_color="gray",
                  annotation_text=f"best r = {int(best['radius'])}")
    fig.update_layout(
        title="Bias-Variance Trade-off",
        xaxis_title="Neighborhood radius (blocks)",
        yaxis_title="Estimator error",
        height=450,
    )
    return fig


def create_bd_curves_chart(reference: Sequence[RdPoint], test: Sequence[RdPoint]):
    """Both RD curves on a log-rate axis"""
    fig = go.Figure()
    for name, curve in (("Reference", reference), ("Test", test)):
        points = sorted(curve, key=lambda point: point.rate)
        fig.add_trace(go.Scatter(
            x=[point.rate for point in points],
            y=[point.psnr for point in points],
            mode="lines+markers",
            name=name,
        ))
    fig.update_layout(
        title="Rate-Distortion Curves",
        xaxis=dict(title="Rate (kbit/s)", type="log"),
        yaxis_title="PSNR (dB)",
        height=400,
    )
    return fig


def create_depthmap_heatmap(depth_map: DepthMap, title: str = "Block Depth"):
    """Heatmap of a depth map, one cell per pixel"""
    fig = px.imshow(
        np.asarray(depth_map.depths),
        zmin=0,
        zmax=4,
        color_continuous_scale="Viridis",
        title=title,
    )
    fig.update_layout(height=400, coloraxis_colorbar=dict(title="Depth"))
    return fig
