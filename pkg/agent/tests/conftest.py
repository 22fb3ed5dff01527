import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from veridl.adversary import LabConfig, build_instance  # noqa: E402
from veridl.codec import CodecParams  # noqa: E402
from veridl.datasets import synthetic_dataset  # noqa: E402
from veridl.dnn.network import NetworkConfig  # noqa: E402
from veridl.pairing import genkey, get_backend  # noqa: E402

ENV_VARS = (
    "VERIDL_CONFIG",
    "VERIDL_SEED",
    "VERIDL_BACKEND",
    "VERIDL_MODE",
    "VERIDL_LOG_DIR",
    "VERIDL_AGENT_TOKEN",
    "VERIDL_STRICT_PORT",
)


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch, tmp_path):
    for name in ENV_VARS:
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("VERIDL_HOME", str(tmp_path / "home"))


@pytest.fixture(scope="session")
def params():
    return CodecParams()


@pytest.fixture(scope="session")
def transparent():
    return get_backend("transparent")


@pytest.fixture(scope="session")
def keys(transparent):
    return genkey(seed="tests", backend=transparent)


@pytest.fixture(scope="session")
def small_network():
    return NetworkConfig(input_dim=2, hidden_sizes=(3,), learning_rate=0.5, convergence_threshold=1e-4)


@pytest.fixture(scope="session")
def small_dataset(params):
    return synthetic_dataset(16, 2, seed=7, params=params)


@pytest.fixture(scope="session")
def honest(small_dataset, small_network, params, transparent):
    return build_instance(small_dataset, small_network, params, seed=7, backend=transparent)


def lab(config_id, m, hidden, samples, seed, **kw):
    network = NetworkConfig(input_dim=m, hidden_sizes=hidden, learning_rate=0.5, convergence_threshold=1e-4, max_epochs=50_000)
    return LabConfig(config_id, network, samples=samples, seed=seed, **kw)


@pytest.fixture(scope="session")
def lab_configs():
    return [
        lab("c1", 2, (4,), 20, 1),
        lab("c2", 3, (4, 3), 24, 2),
        lab("c3", 4, (3, 3), 30, 3),
    ]
