"""CLI command implementations."""

__all__: list[str] = []
