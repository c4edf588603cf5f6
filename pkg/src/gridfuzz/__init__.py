"""Search-based generation of collision scenarios for a rule-based driving agent."""

__version__ = "0.1.0"
