"""Desk-scale population-based multi-agent RL on a miniature football simulator."""

__version__ = "0.1.0"
