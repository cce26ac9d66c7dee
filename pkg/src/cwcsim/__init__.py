"""Synchronous simulator for computing with a passive cloud node."""
__version__ = "0.1.0"
