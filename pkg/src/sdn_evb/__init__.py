"""Executable guarded-event models of an SDN controller and switches, with
an explicit-state checker for safety, LTL, refinement and decomposition."""

__version__ = "0.1.0"
