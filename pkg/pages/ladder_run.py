"""
Ladder run page: encode a sequence or load a saved report
"""
import os

import pandas as pd
import streamlit as st

from config.config import DEFAULT_EPSILON, DEFAULT_QPS, GROUP_SIZE, OUTPUT_DIR, TRAIN_COUNT
from services.ladder_encoder import GroupSchedule, LadderEncoder
from services.metrics import run_confusion, summarize
from services.report import RunReport
from utils.errors import QtreeError
from utils.frame_utils import read_depthmaps, save_uploaded_file
from utils.visualization import (
    calibration_table,
    create_calibration_chart,
    create_cost_delta_chart,
    create_depthmap_heatmap,
    create_node_count_chart,
)


def show_ladder_run_page():
    """Display the ladder run page"""

    st.markdown('<h1 class="main-header">Ladder Run</h1>', unsafe_allow_html=True)

    tabs = st.tabs(["Run", "Results", "Calibration"])

    with tabs[0]:
        show_run_tab()

    with tabs[1]:
        show_results_tab()

    with tabs[2]:
        show_calibration_tab()


def _parse_dims(text: str):
    width, height = (int(part) for part in text.lower().split("x"))
    return width, height


def show_run_tab():
    """Upload a sequence and run, or load an existing report"""

    st.markdown("### Encode a sequence")
    uploaded_file = st.file_uploader("Choose a Y4M file", type=["y4m"])

    col1, col2 = st.columns(2)
    with col1:
        hi_text = st.text_input("High resolution (WxH, blank keeps the source)", "")
        lo_text = st.text_input("Low resolution (WxH)", "480x270")
        qps = st.multiselect("QPs", options=list(range(10, 52)), default=list(DEFAULT_QPS))
    with col2:
        epsilon = st.slider("Type II error budget (epsilon)", 0.01, 0.5, DEFAULT_EPSILON, 0.01)
        group_size = st.number_input("Group size", min_value=1, value=GROUP_SIZE)
        train_count = st.number_input("Training frames per group", min_value=1, value=TRAIN_COUNT)
        reference = st.checkbox("Run the full-search reference pass", value=True)

    if uploaded_file is not None and st.button("Run Ladder Encode"):
        with st.spinner("Encoding..."):
            try:
                path = save_uploaded_file(uploaded_file)
                hi_dims = _parse_dims(hi_text) if hi_text.strip() else None
                encoder = LadderEncoder(epsilon=epsilon,
                                        schedule=GroupSchedule(int(group_size), int(train_count)))
                report = encoder.encode(path, hi_dims, _parse_dims(lo_text), sorted(qps), reference=reference)
                report.sequence = uploaded_file.name
                os.makedirs(OUTPUT_DIR, exist_ok=True)
                report_path = os.path.join(OUTPUT_DIR, f"{os.path.splitext(uploaded_file.name)[0]}_report.json")
                report.save(report_path)
                st.session_state.run_report = report
                st.success(f"Encode finished, report saved to {report_path}. See the Results tab.")
            except (QtreeError, ValueError, OSError) as e:
                st.error(f"Encode failed: {e}")

    st.markdown("---")
    st.markdown("### Or load a saved report")
    report_file = st.file_uploader("Choose a report JSON", type=["json"], key="report_json")
    if report_file is not None:
        try:
            st.session_state.run_report = RunReport.model_validate_json(report_file.getvalue())
            st.success(f"Loaded report for {st.session_state.run_report.sequence}")
        except ValueError as e:
            st.error(f"Not a valid run report: {e}")


def show_results_tab():
    report = st.session_state.get("run_report")
    if report is None:
        st.info("No run yet. Encode a sequence or load a report first.")
        return

    st.markdown(f"**Sequence:** {report.sequence} ({report.frame_count} frames, "
                f"{report.hi_dims[0]}x{report.hi_dims[1]} / {report.lo_dims[0]}x{report.lo_dims[1]})")

    if all(qp_report.reference is not None for qp_report in report.qps):
        try:
            summary = summarize(report)
            col1, col2, col3 = st.columns(3)
            col1.metric("Node reduction", f"{-100 * summary.delta_t_proxy:.1f}%")
            col2.metric("RD cost increase", f"{100 * summary.delta_cost:.2f}%")
            col3.metric("Within cost budget", "yes" if summary.within_budget else "no")
        except QtreeError as e:
            st.error(str(e))

    st.plotly_chart(create_node_count_chart(report), use_container_width=True)
    st.plotly_chart(create_cost_delta_chart(report), use_container_width=True)

    rows = [
        {"QP": q.qp, "lambda": q.rd_lambda, "fires": sum(q.termination_fires.values()),
         "pruned candidates": q.pruned_candidates, "low pass identical": q.low_pass_identical}
        for q in report.qps
    ]
    st.dataframe(pd.DataFrame(rows), use_container_width=True)
    st.download_button("Download report JSON", report.model_dump_json(indent=2),
                       file_name=f"{os.path.splitext(report.sequence)[0]}_report.json", mime="application/json")


def show_calibration_tab():
    report = st.session_state.get("run_report")
    if report is None:
        st.info("No run yet. Encode a sequence or load a report first.")
    else:
        st.plotly_chart(create_calibration_chart(report), use_container_width=True)
        st.dataframe(calibration_table(report), use_container_width=True)

        st.markdown("#### Training-set errors per depth")
        confusion = pd.DataFrame([row.model_dump() for row in run_confusion(report)])
        st.dataframe(confusion, use_container_width=True)

    st.markdown("---")
    st.markdown("### Inspect dumped depth maps")
    maps_file = st.file_uploader("Choose a depth map file", type=["qldp"], key="depthmaps")
    if maps_file is not None:
        try:
            records = read_depthmaps(save_uploaded_file(maps_file))
        except (QtreeError, OSError) as e:
            st.error(f"Could not read depth maps: {e}")
            return
        if not records:
            st.warning("The file holds no depth maps.")
            return
        position = st.slider("Frame", 0, len(records) - 1, 0) if len(records) > 1 else 0
        frame_index, depth_map = records[position]
        st.plotly_chart(create_depthmap_heatmap(depth_map, title=f"Block Depth, frame {frame_index}"),
                        use_container_width=True)
