"""Time-local master equation for the driven spin-boson qubit."""

__version__ = "0.1.0"
