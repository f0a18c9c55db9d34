"""Pseudo-spectral Navier-Stokes engine for nlc-monitor."""

__all__: list[str] = []
