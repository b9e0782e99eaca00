"""
Streamlit Dashboard for Synthetic Geography Releases
Generate a release on a simulated population and inspect its risk and utility.
"""

import streamlit as st
import plotly.graph_objects as go
import plotly.express as px
from plotly.subplots import make_subplots
import numpy as np
import pandas as pd
import sys
import os
from dataclasses import replace
from pathlib import Path

# Add parent directory to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))
os.chdir(project_root)

try:
    from src.scenarios.config_loader import CONFIG_DIR, get_config_info, load_run_config
    from src.risk.geography import assess_geo_risk, summarize_geo_risk
    from src.risk.identification import assess_identification_risk
    from src.risk.scenario import Knowledge
    from src.simulation.experiment import simulated_original
    from src.synthesis.synthesizer import generate_release
    from src.utility.comparisons import descriptive_comparison, scatter_frame
except ImportError as e:
    st.error(f"Import error: {e}")
    st.error(f"Current directory: {os.getcwd()}")
    st.stop()

# Page config
st.set_page_config(
    page_title="Synthetic Geography Explorer",
    layout="wide"
)

ORIGINAL_COLOR = "#004E89"
SYNTHETIC_COLOR = "#FF6B35"
RISK_TARGETS = 150

st.markdown("""
    <style>
    .main-header {
        font-size: 2.3rem;
        font-weight: bold;
        color: #004E89;
        margin-bottom: 0.5rem;
    }
    .sub-header {
        font-size: 1.1rem;
        color: #FF6B35;
        margin-bottom: 2rem;
    }
    </style>
""", unsafe_allow_html=True)

st.markdown('<div class="main-header">Synthetic Geography Explorer</div>', unsafe_allow_html=True)
st.markdown('<div class="sub-header">Partially synthetic locations: disclosure risk against analytic validity</div>', unsafe_allow_html=True)

st.markdown("---")

# Sidebar - Configuration
st.sidebar.header("Configuration")

presets = sorted(p.stem for p in CONFIG_DIR.glob("*.json"))
preset = st.sidebar.selectbox("Preset", presets)
preset_file = CONFIG_DIR / f"{preset}.json"
info = get_config_info(str(preset_file))

st.sidebar.success(f"**{info['name']}**")
st.sidebar.write(info["description"])
st.sidebar.write(f"Synthesized attributes: {', '.join(info['attributes']) or 'none'}")
st.sidebar.write(f"Metadata level: {info['metadata_level']}")

st.sidebar.subheader("Run")
n = st.sidebar.slider("Population size", 200, 3000, 1000, 100)
h = st.sidebar.select_slider("Geography bandwidth h", options=[0.0, 1.0, 2.0, 5.0, 10.0], value=float(info["h"]))
m = st.sidebar.slider("Synthetic datasets m", 2, 10, int(info["m"]))
seed = st.sidebar.number_input("Seed", min_value=0, value=1, step=1)

if st.sidebar.button("Run", type="primary"):
    with st.spinner("Simulating population and generating release..."):
        config = load_run_config(str(preset_file), {"n": n, "h": h, "m": m, "seed": int(seed)})
        original = simulated_original(
            config.population.n, config.seed, config.population.outcome, config.population.clusters
        )
        plan = config.plan.build(original.schema, config.seed)
        release = generate_release(original, plan, config.plan.metadata_level, workers=config.workers)

        rng = np.random.default_rng([config.seed, 11])
        targets = np.sort(rng.choice(original.record_ids, size=min(RISK_TARGETS, original.n), replace=False))
        geo_frames = []
        for knowledge in (Knowledge.LOW, Knowledge.HIGH):
            scenario = replace(config.scenario, knowledge=knowledge)
            geo_frames.append(assess_geo_risk(release, original, scenario, targets, workers=config.workers))
        geo = pd.concat(geo_frames, ignore_index=True)

        _, match = assess_identification_risk(
            release, original, config.scenario, mc_draws=config.experiment.mc_draws,
            seed=config.seed, workers=config.workers,
        )
        descriptive = descriptive_comparison(
            original, [release], config.regions.build(), list(config.experiment.estimands)
        )

        st.session_state["results"] = {
            "config": config,
            "geo": geo,
            "match": match,
            "descriptive": descriptive,
            "scatter": scatter_frame(original, release.datasets[0]),
        }
        st.success("Release generated")

if "results" in st.session_state:
    results = st.session_state["results"]
    geo = results["geo"]
    match = results["match"]
    scatter = results["scatter"]

    st.header("Summary Metrics")
    col1, col2, col3, col4 = st.columns(4)
    with col1:
        st.metric("Expected match risk", f"{match.expected:.3f}")
    with col2:
        st.metric("True match rate", f"{match.true_rate:.3f}")
    with col3:
        false_rate = "n/a" if match.false_rate is None else f"{match.false_rate:.3f}"
        st.metric("False match rate", false_rate)
    with col4:
        high = geo[geo["scenario"].str.startswith("high")]
        st.metric("Median R1 (high knowledge)", f"{high['r1'].median():.2f}")

    st.markdown("---")

    st.header("Synthetic Against Real Coordinates")
    fig = make_subplots(rows=1, cols=2, subplot_titles=("Longitude", "Latitude"))
    for col, axis in ((1, "lon"), (2, "lat")):
        fig.add_trace(
            go.Scattergl(
                x=scatter[axis], y=scatter[f"{axis}_synthetic"], mode="markers",
                marker=dict(size=4, color=SYNTHETIC_COLOR, opacity=0.5), name=axis, showlegend=False,
            ),
            row=1, col=col,
        )
        fig.add_trace(
            go.Scatter(x=[1, 100], y=[1, 100], mode="lines",
                       line=dict(color=ORIGINAL_COLOR, dash="dash"), showlegend=False),
            row=1, col=col,
        )
        fig.update_xaxes(title_text="original", row=1, col=col)
        fig.update_yaxes(title_text="synthetic (replicate 1)", row=1, col=col)
    fig.update_layout(height=450)
    st.plotly_chart(fig, use_container_width=True)

    st.header("Geography Recovery Risk")
    col1, col2 = st.columns([3, 2])
    with col1:
        fig_r1 = px.histogram(geo, x="r1", color="scenario", barmode="overlay", nbins=40,
                              labels={"r1": "R1 (recoded units)"})
        fig_r1.update_layout(height=350)
        st.plotly_chart(fig_r1, use_container_width=True)
    with col2:
        st.dataframe(summarize_geo_risk(geo), use_container_width=True)
        flagged = int(geo["degenerate"].sum())
        if flagged:
            st.warning(f"{flagged} targets had an all-zero likelihood (uniform posterior used)")

    st.header("Regional Descriptive Estimands")
    st.dataframe(results["descriptive"], use_container_width=True)

    st.header("Export Data")
    col1, col2, col3 = st.columns(3)
    with col1:
        st.download_button("Download R1/R2 (CSV)", geo.to_csv(index=False), "geo_risk.csv", "text/csv")
    with col2:
        st.download_button("Download estimands (CSV)", results["descriptive"].to_csv(index=False),
                           "descriptive.csv", "text/csv")
    with col3:
        st.download_button("Download scatter data (CSV)", scatter.to_csv(index=False), "scatter.csv", "text/csv")

else:
    st.info("Pick a preset in the sidebar and click **Run** to generate a release.")

    st.header("About")
    st.write("""
    Each record's longitude and latitude are replaced by draws from regression trees fit on
    the original data, optionally along with other attributes. Several synthetic datasets are
    released together so analysts can combine their estimates.

    **What the explorer shows:**
    - **Identification risk** - how often an intruder holding a record's quasi-identifiers picks the right synthetic row
    - **Geography risk** - R1, the root mean squared distance between an intruder's guess and the true location
    - **Utility** - regional means and shares computed from the release against the original
    - **Scatter** - synthetic against real coordinates for one replicate
    """)
