"""Synthetic benchmarks, semi-supervised classification and tuning utilities."""
