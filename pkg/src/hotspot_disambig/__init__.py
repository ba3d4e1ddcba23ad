"""Wildfire vs non-wildfire disambiguation of satellite thermal-anomaly hotspots."""

__version__ = "0.1.0"
