"""Reference network descriptions used by the experiments and the CLI."""

from .network import parse_network

LENET_DIGITS = """\
# LeNet-like net for 8x8 digits (use 'input 1 28 28' for MNIST)
input 1 8 8
conv out=8 kernel=3 pad=1
relu
maxpool kernel=2
conv out=16 kernel=3 pad=1
relu
maxpool kernel=2
flatten
fully_connected out=64
relu
fully_connected out=10
softmax_loss
"""

CONVNET_SHAPES = """\
# ConvNet-like net for 3-channel 16x16 images
input 3 16 16
conv out=16 kernel=3 pad=1
relu
conv out=16 kernel=3 pad=1
relu
maxpool kernel=2
conv out=32 kernel=3 pad=1
relu
maxpool kernel=2
conv out=64 kernel=3 pad=1
relu
maxpool kernel=2
flatten
fully_connected out=128
relu
fully_connected out=10
softmax_loss
"""

NETWORKS = {"lenet": LENET_DIGITS, "convnet": CONVNET_SHAPES}


def get(name: str):
    return parse_network(NETWORKS[name])
