"""Optimistic RL warm-started with offline data, plus exact coverage diagnostics."""

__version__ = "0.1.0"
