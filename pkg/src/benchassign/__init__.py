"""Classify X-in-the-loop test benches and assign test cases to the cheapest sufficiently valid configuration."""

from benchassign.errors import BenchAssignError

__all__ = ["BenchAssignError"]
__version__ = "0.1.0"
