"""Intrusion-detection pipeline: NDAE feature learning + random forest classification."""

__version__ = "0.1.0"
