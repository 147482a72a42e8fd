"""Stress monitoring assistant: single-modality Res-TCN pipelines for wearable signals."""

__version__ = "0.1.0"
