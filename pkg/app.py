"""
Main Streamlit application for the quadtree ladder toolkit
"""
import os
import sys

import streamlit as st

# Add project root to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from config.config import LOG_LEVEL
from pages.bd_calculator import show_bd_calculator_page
from pages.home import show_home_page
from pages.ladder_run import show_ladder_run_page
from pages.simulator import show_simulator_page
from utils.log_utils import setup_logging

PAGES = {
    "Home": show_home_page,
    "Ladder Run": show_ladder_run_page,
    "Simulator": show_simulator_page,
    "BD Calculator": show_bd_calculator_page,
}

# Page configuration
st.set_page_config(
    page_title="Quadtree Ladder Toolkit",
    page_icon="🧩",
    layout="wide",
    initial_sidebar_state="expanded"
)


# Custom CSS
def load_css():
    st.markdown("""
    <style>
        .main-header {
            font-size: 2.2em;
            font-weight: 700;
            color: #1E3A8A;
            border-bottom: 3px solid #F59E0B;
            padding-bottom: 0.2em;
            margin-bottom: 0.4em;
        }
        .subheader {
            font-size: 1.3em;
            color: #334155;
            margin-bottom: 0.8em;
        }
        .card {
            background-color: #F1F5F9;
            border-left: 4px solid #10B981;
            border-radius: 6px;
            padding: 16px 20px;
            margin-bottom: 16px;
        }
        .sidebar-header {
            font-size: 1.15em;
            font-weight: 600;
            letter-spacing: 0.02em;
        }
        [data-testid="stMetricValue"] {
            font-family: monospace;
        }
    </style>
    """, unsafe_allow_html=True)


def init_session_state():
    if 'page' not in st.session_state:
        st.session_state.page = 'Home'
    if 'run_report' not in st.session_state:
        st.session_state.run_report = None
    if 'simulation' not in st.session_state:
        st.session_state.simulation = None


def sidebar():
    with st.sidebar:
        st.markdown('<div class="sidebar-header">Quadtree Ladder Toolkit</div>', unsafe_allow_html=True)
        st.markdown("---")

        st.subheader("Navigation")
        icons = {"Home": "🏠", "Ladder Run": "🎞️", "Simulator": "🎲", "BD Calculator": "📈"}
        for name in PAGES:
            if st.button(f"{icons[name]} {name}", use_container_width=True):
                st.session_state.page = name
                st.rerun()

        st.sidebar.markdown("---")
        st.sidebar.info(
            "Encode a sequence at two resolutions and let the low-resolution "
            "partition decide where the high-resolution search can stop early."
        )


def main():
    setup_logging(LOG_LEVEL)
    load_css()
    init_session_state()
    sidebar()

    page = PAGES.get(st.session_state.page)
    if page is None:
        st.warning(f"Unknown page: {st.session_state.page}. Showing home page instead.")
        page = show_home_page
    page()


if __name__ == "__main__":
    main()
