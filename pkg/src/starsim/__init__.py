"""Simulation and beamforming optimisation for STAR (simultaneously
transmitting and reflecting) surfaces."""

__version__ = "0.1.0"

from . import channel, core, errors, optim, scenarios  # noqa: E402,F401

__all__ = ["channel", "core", "errors", "optim", "scenarios", "__version__"]
