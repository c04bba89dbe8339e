"""Pathfinding for quantum-repeater networks with non-isotonic secret-key rates."""

__version__ = "0.1.0"
