"""
Home page for the quadtree ladder dashboard
"""
import streamlit as st


def show_home_page():
    """Display the home page of the application"""

    st.markdown('<h1 class="main-header">Quadtree Ladder Toolkit</h1>', unsafe_allow_html=True)
    st.markdown('<p class="subheader">Fast block partitioning for multi-resolution encoding</p>',
                unsafe_allow_html=True)

    st.markdown("""
    Adaptive streaming encodes every title at several resolutions. The block
    partition chosen at a low resolution says a lot about where the
    high-resolution frame needs fine blocks; this toolkit uses it to skip
    4-way split searches that are unlikely to win.
    """)

    st.markdown("---")
    st.markdown("### What you can do here")

    col1, col2 = st.columns(2)

    with col1:
        st.markdown('<div class="card">', unsafe_allow_html=True)
        st.markdown("#### 🎞️ Ladder Run")
        st.markdown("""
        * Encode a Y4M sequence at two resolutions
        * Compare node counts against full search
        * Inspect calibrated margins and thresholds per group
        """)
        st.markdown('</div>', unsafe_allow_html=True)

        st.markdown('<div class="card">', unsafe_allow_html=True)
        st.markdown("#### 📈 BD Calculator")
        st.markdown("""
        * Paste two rate/PSNR curves
        * Get BD-rate and BD-PSNR
        """)
        st.markdown('</div>', unsafe_allow_html=True)

    with col2:
        st.markdown('<div class="card">', unsafe_allow_html=True)
        st.markdown("#### 🎲 Simulator")
        st.markdown("""
        * Sample a synthetic detail field and split indicators
        * Check the estimator's mean, spread and bias bound
        * See the best neighborhood size emerge
        """)
        st.markdown('</div>', unsafe_allow_html=True)

    report = st.session_state.get("run_report")
    if report is not None:
        st.markdown("---")
        st.markdown(f"### Last run: {report.sequence}")
        cols = st.columns(3)
        cols[0].metric("Frames", report.frame_count)
        cols[1].metric("QPs", ", ".join(str(q.qp) for q in report.qps))
        if report.node_reduction_pct is not None:
            cols[2].metric("Node reduction", f"{report.node_reduction_pct:.1f}%")

    st.markdown("---")
    col1, col2, col3 = st.columns([1, 2, 1])

    with col2:
        if st.button("Start a Ladder Run", use_container_width=True):
            st.session_state.page = 'Ladder Run'
            st.rerun()
