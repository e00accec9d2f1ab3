"""Barycentre trajectory extraction from hand-held dive video."""

__version__ = "0.1.0"
