import json
import logging
from logging.handlers import RotatingFileHandler

import pytest

from veridl.config import DEFAULTS, configure_logging, load_run_config, network_for, packaged_defaults_path, veridl_home
from veridl.errors import ConfigError
from veridl.protocol import ProofMode


def _write(tmp_path, payload, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


def test_packaged_defaults_match_builtins():
    data = json.loads(packaged_defaults_path().read_text())
    assert data == json.loads(json.dumps(DEFAULTS))


def test_defaults():
    cfg = load_run_config()
    assert cfg.backend == "bls12-381"
    assert cfg.mode is ProofMode.BASIC
    assert cfg.network.hidden_sizes == (8, 8)
    assert cfg.params.fractional_bits == 20


def test_layering_order(tmp_path, monkeypatch):
    path = _write(tmp_path, {"seed": 5, "backend": "transparent", "network": {"learning_rate": 0.3}})
    cfg = load_run_config(path)
    assert (cfg.seed, cfg.backend, cfg.network.learning_rate) == (5, "transparent", 0.3)
    assert cfg.network.hidden_sizes == (8, 8)

    monkeypatch.setenv("VERIDL_SEED", "9")
    monkeypatch.setenv("VERIDL_MODE", "unique")
    cfg = load_run_config(path)
    assert cfg.seed == 9 and cfg.mode is ProofMode.UNIQUE

    cfg = load_run_config(path, seed=12, learning_rate=0.7, fractional_bits=16, backend=None)
    assert cfg.seed == 12
    assert cfg.network.learning_rate == 0.7
    assert cfg.codec.fractional_bits == 16
    assert cfg.backend == "transparent"


def test_config_file_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("VERIDL_CONFIG", str(_write(tmp_path, {"output_dir": "elsewhere"})))
    assert load_run_config().output_dir == "elsewhere"


@pytest.mark.parametrize(
    "payload",
    [
        {"colour": "red"},
        {"network": {"depth": 3}},
        {"network": 5},
        {"backend": "ed25519"},
        {"mode": "fancy"},
        {"network": {"activation": "softmax"}},
        {"network": {"learning_rate": "fast"}},
        {"codec": {"fractional_bits": 60}},
        {"attack": "byzantine"},
    ],
)
def test_invalid_values_are_config_errors(tmp_path, payload):
    with pytest.raises(ConfigError):
        load_run_config(_write(tmp_path, payload))


def test_bad_files(tmp_path, monkeypatch):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{ nope")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_run_config(broken)
    monkeypatch.setenv("VERIDL_SEED", "abc")
    with pytest.raises(ConfigError):
        load_run_config()


def test_to_dict_roundtrips(tmp_path):
    cfg = load_run_config(seed=3, hidden_sizes=[4], attack={"kind": "case-3"})
    again = load_run_config(_write(tmp_path, cfg.to_dict()))
    assert again == cfg


def test_network_for():
    cfg = load_run_config(hidden_sizes=[5, 2], activation="tanh")
    net = network_for(cfg, 7)
    assert net.input_dim == 7 and net.hidden_sizes == (5, 2)
    assert net.activation.value == "tanh"


def test_file_logging(tmp_path, monkeypatch):
    monkeypatch.setenv("VERIDL_LOG_DIR", str(tmp_path / "logs"))
    root = logging.getLogger()
    before = list(root.handlers)
    try:
        configure_logging("DEBUG")
        configure_logging("DEBUG")
        added = [h for h in root.handlers if h not in before and isinstance(h, RotatingFileHandler)]
        assert len(added) == 1
        assert (tmp_path / "logs" / "veridl.log").exists()
    finally:
        for h in root.handlers[:]:
            if h not in before:
                root.removeHandler(h)
                h.close()


def test_home_folder(tmp_path):
    assert veridl_home() == tmp_path / "home"
    assert (tmp_path / "home").is_dir()
