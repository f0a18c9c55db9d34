"""nlc-monitor package."""

__all__: list[str] = []
