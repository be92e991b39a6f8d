"""Multi-UAV task allocation planner and deterministic fleet simulator."""

__version__ = "0.1.0"
