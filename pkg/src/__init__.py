"""Partially synthetic geography releases: synthesis, disclosure risk, and utility checks."""

__version__ = "0.1.0"
