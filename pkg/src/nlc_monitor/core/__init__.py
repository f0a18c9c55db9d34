"""Core numerics for nlc-monitor."""

__all__: list[str] = []
