"""Trace-driven simulation and scheduling for a ReRAM PointNet++ accelerator."""

__version__ = "0.1.0"
