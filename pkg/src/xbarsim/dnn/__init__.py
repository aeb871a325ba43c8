"""Tiled DNN inference and retraining on crossbars."""

from .mapping import (EngineConfig, MappedNetwork, forward_ideal_quantized,  # noqa: F401
                      forward_nonideal, map_network)
from .network import LayerSpec, Network, parse_network  # noqa: F401
from .train import TrainState, train_step  # noqa: F401
