"""Resistive crossbar simulator.

Modules: :mod:`oracle` (exact nodal analysis), :mod:`fcm` (reduced
non-ideal conductance model), :mod:`converters` (DAC/ADC, device mapping,
variation), :mod:`characterize` (error sweeps), :mod:`dnn` (tiled network
inference and retraining) and :mod:`cli`.
"""

__version__ = "0.1.0"

from .params import ConfigError, CrossbarParams  # noqa: E402

__all__ = ["ConfigError", "CrossbarParams", "__version__"]
