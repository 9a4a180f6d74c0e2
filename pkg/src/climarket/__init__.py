"""Agent-based climate prediction market simulator."""

__version__ = "0.1.0"
