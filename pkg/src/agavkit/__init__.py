"""Toolkit for benchmarking and studying AI-generated audio-visual quality."""

__version__ = "0.1.0"
