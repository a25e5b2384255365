"""
Bjontegaard delta calculator page
"""
import pandas as pd
import streamlit as st

from services.metrics import RdPoint, bd_psnr, bd_rate
from utils.errors import QtreeError
from utils.visualization import create_bd_curves_chart

EXAMPLE_REFERENCE = pd.DataFrame({"rate": [1000.0, 1800.0, 3200.0, 5600.0],
                                  "psnr": [34.1, 36.4, 38.6, 40.5]})
EXAMPLE_TEST = pd.DataFrame({"rate": [1010.0, 1818.0, 3232.0, 5656.0],
                             "psnr": [34.1, 36.4, 38.6, 40.5]})


def _curve(df: pd.DataFrame):
    df = df.dropna()
    return [RdPoint(float(row.rate), float(row.psnr)) for row in df.itertuples(index=False)]


def show_bd_calculator_page():
    """Display the BD calculator page"""

    st.markdown('<h1 class="main-header">BD Calculator</h1>', unsafe_allow_html=True)
    st.markdown("Enter at least four (rate in kbit/s, PSNR in dB) points per curve.")

    col1, col2 = st.columns(2)
    with col1:
        st.markdown("#### Reference")
        reference_df = st.data_editor(EXAMPLE_REFERENCE, num_rows="dynamic", key="bd_reference")
    with col2:
        st.markdown("#### Test")
        test_df = st.data_editor(EXAMPLE_TEST, num_rows="dynamic", key="bd_test")

    try:
        reference, test = _curve(reference_df), _curve(test_df)
        psnr_delta = bd_psnr(reference, test)
    except QtreeError as e:
        st.error(str(e))
        return

    col1, col2 = st.columns(2)
    try:
        col1.metric("BD-rate", f"{bd_rate(reference, test):+.2f}%")
    except QtreeError as e:
        col1.metric("BD-rate", "n/a")
        col1.caption(str(e))
    col2.metric("BD-PSNR", f"{psnr_delta:+.3f} dB")
    st.plotly_chart(create_bd_curves_chart(reference, test), use_container_width=True)
