"""Cognitive IoT analytics toolkit: fusion, low-rank recovery, consensus ADMM,
spatial games, quality metrics and a smart-traffic scenario."""

__version__ = "0.1.0"
