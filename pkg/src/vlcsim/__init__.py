"""Deterministic simulator of an indoor visible-light-communication network
with pre-scanned position-prediction link switching and a traditional
scan-based baseline."""

__version__ = "0.1.0"
