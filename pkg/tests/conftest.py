import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest  # noqa: E402

from xbarsim.dnn import data, zoo  # noqa: E402
from xbarsim.dnn import mapping as mp  # noqa: E402
from xbarsim.dnn import train as tr  # noqa: E402


@pytest.fixture(scope="session")
def digits_train():
    return data.digits("train")


@pytest.fixture(scope="session")
def digits_test():
    return data.digits("test")


@pytest.fixture(scope="session")
def shapes_train():
    return data.shapes10(8000, seed=1)


@pytest.fixture(scope="session")
def shapes_test():
    return data.shapes10(4000, seed=2)


@pytest.fixture(scope="session")
def lenet(digits_train):
    net = zoo.get("lenet").init_weights(0)
    tr.train_fp(net, digits_train, epochs=30, lr=0.02, seed=0)
    return net


@pytest.fixture(scope="session")
def convnet(shapes_train):
    net = zoo.get("convnet").init_weights(0)
    tr.train_fp(net, shapes_train, epochs=20, lr=0.03, seed=0)
    return net


@pytest.fixture(scope="session")
def lenet_mapped(lenet, digits_train):
    return mp.map_network(lenet, mp.EngineConfig(), digits_train.x[:500])


@pytest.fixture(scope="session")
def convnet_mapped(convnet, shapes_train):
    return mp.map_network(convnet, mp.EngineConfig(), shapes_train.x[:1000])
