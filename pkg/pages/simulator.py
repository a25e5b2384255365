"""
Simulator page: synthetic field presets and the bias-variance sweep
"""
import streamlit as st

from config.config import SIM_SEED
from models.simulation import load_presets, run_preset
from utils.errors import QtreeError
from utils.visualization import create_bias_sweep_chart


def show_simulator_page():
    """Display the simulator page"""

    st.markdown('<h1 class="main-header">Simulator</h1>', unsafe_allow_html=True)
    st.markdown("""
    A synthetic detail field drifts away from the reference block; each
    neighboring block splits with a probability given by a logistic link.
    Larger neighborhoods average more blocks but reach further from the
    reference, so the estimator trades variance for bias.
    """)

    presets = load_presets()
    col1, col2, col3 = st.columns(3)
    with col1:
        name = st.selectbox("Preset", sorted(presets), index=sorted(presets).index("bias-sweep"))
    with col2:
        replications = st.number_input("Replications", min_value=100, max_value=100000, value=2000, step=500)
    with col3:
        seed = st.number_input("Seed", value=SIM_SEED)

    with st.expander("Preset definition"):
        st.json(presets[name])

    if st.button("Run Simulation"):
        with st.spinner("Sampling..."):
            try:
                st.session_state.simulation = run_preset(name, int(replications), int(seed))
            except QtreeError as e:
                st.error(f"Simulation failed: {e}")

    run = st.session_state.get("simulation")
    if run is None:
        return

    st.markdown(f"### Results: {run.preset}")
    if run.preset == "bias-sweep":
        st.plotly_chart(create_bias_sweep_chart(run.table), use_container_width=True)
        st.metric("Best radius", run.summary["best_radius"])
    elif run.preset == "moments":
        report = run.summary["report"]
        col1, col2 = st.columns(2)
        col1.metric("Empirical mean", f"{report['empirical_mean']:.4f}",
                    f"predicted {report['predicted_mean']:.4f}", delta_color="off")
        col2.metric("Empirical sd", f"{report['empirical_sd']:.4f}",
                    f"predicted {report['predicted_sd']:.4f}", delta_color="off")
        st.json(run.summary)
    else:
        st.metric("Largest discrepancy", f"{run.summary['max_discrepancy']:.4f}")
    if run.table is not None:
        st.dataframe(run.table, use_container_width=True)
