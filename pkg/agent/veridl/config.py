"""Run configuration and process-wide logging.

Layering, lowest first: built-in defaults, config/defaults.json, the user's JSON
file (argument or VERIDL_CONFIG), VERIDL_SEED / VERIDL_BACKEND / VERIDL_MODE,
then keyword overrides from the command line.
"""
from __future__ import annotations

import copy
import json
import logging
import os
from dataclasses import dataclass, field
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from .codec import CodecParams
from .dnn.network import Activation, NetworkConfig
from .errors import ConfigError
from .protocol import ProofMode

_log = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"

DEFAULTS: Dict[str, Any] = {
    "backend": "bls12-381",
    "seed": 0,
    "mode": "basic",
    "dataset": None,
    "output_dir": "out",
    "ledger": None,
    "attack": None,
    "codec": {"fractional_bits": 20, "max_terms": 1 << 16, "magnitude_bits": 32},
    "network": {
        "hidden_sizes": [8, 8],
        "activation": "sigmoid",
        "learning_rate": 0.1,
        "convergence_threshold": 1e-4,
        "batch_size": 100,
        "max_epochs": 100_000,
    },
}

_SECTIONS = ("codec", "network")


def packaged_defaults_path() -> Path:
    # agent/veridl/config.py -> repo root
    return Path(__file__).resolve().parents[2] / "config" / "defaults.json"


@dataclass(frozen=True)
class CodecSettings:
    fractional_bits: int = 20
    max_terms: int = 1 << 16
    magnitude_bits: int = 32

    def params(self) -> CodecParams:
        return CodecParams(
            fractional_bits=self.fractional_bits, max_terms=self.max_terms, magnitude_bits=self.magnitude_bits
        )


@dataclass(frozen=True)
class NetworkSettings:
    hidden_sizes: Tuple[int, ...] = (8, 8)
    activation: str = "sigmoid"
    learning_rate: float = 0.1
    convergence_threshold: float = 1e-4
    batch_size: int = 100
    max_epochs: int = 100_000


@dataclass(frozen=True)
class RunConfig:
    backend: str = "bls12-381"
    seed: int = 0
    mode: ProofMode = ProofMode.BASIC
    dataset: Optional[str] = None
    output_dir: str = "out"
    ledger: Optional[str] = None
    attack: Optional[Dict[str, Any]] = None
    codec: CodecSettings = field(default_factory=CodecSettings)
    network: NetworkSettings = field(default_factory=NetworkSettings)

    @property
    def params(self) -> CodecParams:
        return self.codec.params()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "backend": self.backend,
            "seed": self.seed,
            "mode": self.mode.value,
            "dataset": self.dataset,
            "output_dir": self.output_dir,
            "ledger": self.ledger,
            "attack": copy.deepcopy(self.attack),
            "codec": dict(self.codec.__dict__),
            "network": {**self.network.__dict__, "hidden_sizes": list(self.network.hidden_sizes)},
        }


def _merge(base: Dict[str, Any], layer: Mapping[str, Any], source: str) -> None:
    for key, value in layer.items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r} in {source}", key=key)
        if key in _SECTIONS:
            if not isinstance(value, Mapping):
                raise ConfigError(f"{key!r} must be an object in {source}", key=key)
            for sub, v in value.items():
                if sub not in DEFAULTS[key]:
                    raise ConfigError(f"unknown config key '{key}.{sub}' in {source}", key=f"{key}.{sub}")
                base[key][sub] = v
        else:
            base[key] = value


def _read_json(path: Path) -> Dict[str, Any]:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def _env_layer() -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    seed = os.environ.get("VERIDL_SEED")
    if seed:
        try:
            out["seed"] = int(seed)
        except ValueError:
            raise ConfigError(f"VERIDL_SEED must be an integer, got {seed!r}", key="seed") from None
    if os.environ.get("VERIDL_BACKEND"):
        out["backend"] = os.environ["VERIDL_BACKEND"]
    if os.environ.get("VERIDL_MODE"):
        out["mode"] = os.environ["VERIDL_MODE"]
    return out


def _build(raw: Dict[str, Any]) -> RunConfig:
    try:
        net = raw["network"]
        codec = CodecSettings(**{k: int(v) for k, v in raw["codec"].items()})
        network = NetworkSettings(
            hidden_sizes=tuple(int(d) for d in net["hidden_sizes"]),
            activation=Activation(net["activation"]).value,
            learning_rate=float(net["learning_rate"]),
            convergence_threshold=float(net["convergence_threshold"]),
            batch_size=int(net["batch_size"]),
            max_epochs=int(net["max_epochs"]),
        )
        mode = ProofMode(raw["mode"])
        seed = int(raw["seed"])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid configuration value: {e}") from e
    if raw["backend"] not in ("bls12-381", "transparent"):
        raise ConfigError(f"unknown backend {raw['backend']!r}", key="backend")
    if raw["attack"] is not None and not isinstance(raw["attack"], Mapping):
        raise ConfigError("'attack' must be an object with at least a 'kind'", key="attack")
    try:
        codec.params()
    except ValueError as e:
        raise ConfigError(f"codec: {e}", key="codec") from e
    return RunConfig(
        backend=raw["backend"],
        seed=seed,
        mode=mode,
        dataset=raw["dataset"],
        output_dir=str(raw["output_dir"]),
        ledger=raw["ledger"],
        attack=dict(raw["attack"]) if raw["attack"] is not None else None,
        codec=codec,
        network=network,
    )


def load_run_config(path: Union[str, Path, None] = None, **overrides: Any) -> RunConfig:
    """Resolve a RunConfig; ``None`` overrides are ignored so argparse defaults pass through."""
    raw = copy.deepcopy(DEFAULTS)
    packaged = packaged_defaults_path()
    if packaged.is_file():
        _merge(raw, _read_json(packaged), str(packaged))
    path = path or os.environ.get("VERIDL_CONFIG")
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        _merge(raw, _read_json(p), str(p))
    _merge(raw, _env_layer(), "environment")
    explicit: Dict[str, Any] = {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key in DEFAULTS["network"]:
            explicit.setdefault("network", {})[key] = value
        elif key in DEFAULTS["codec"]:
            explicit.setdefault("codec", {})[key] = value
        else:
            explicit[key] = value
    _merge(raw, explicit, "overrides")
    cfg = _build(raw)
    _log.debug("run config: backend=%s mode=%s seed=%d", cfg.backend, cfg.mode.value, cfg.seed)
    return cfg


def network_for(cfg: RunConfig, input_dim: int) -> NetworkConfig:
    n = cfg.network
    return NetworkConfig(
        input_dim=input_dim,
        hidden_sizes=n.hidden_sizes,
        activation=Activation(n.activation),
        learning_rate=n.learning_rate,
        convergence_threshold=n.convergence_threshold,
        batch_size=n.batch_size,
        max_epochs=n.max_epochs,
    )


def configure_logging(level: Optional[str] = None) -> None:
    """basicConfig once, plus a rotating file under VERIDL_LOG_DIR when set."""
    name = (level or os.environ.get("VERIDL_LOG_LEVEL", "INFO")).upper()
    lvl = getattr(logging, name, logging.INFO)
    root = logging.getLogger()
    if not root.handlers:
        logging.basicConfig(level=lvl, format=LOG_FORMAT)
    log_dir = os.environ.get("VERIDL_LOG_DIR")
    if not log_dir:
        return
    target = Path(log_dir) / "veridl.log"
    if any(isinstance(h, RotatingFileHandler) and Path(h.baseFilename) == target.resolve() for h in root.handlers):
        return
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        fh = RotatingFileHandler(target, maxBytes=1_000_000, backupCount=5, encoding="utf-8")
        fh.setLevel(lvl)
        fh.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(fh)
    except OSError as e:
        _log.warning("file logging disabled: %s", e)


def veridl_home() -> Path:
    """Agent state folder: VERIDL_HOME, else ~/.veridl, else the working directory."""
    override = os.environ.get("VERIDL_HOME")
    if override:
        folder = Path(override)
    else:
        try:
            folder = Path.home() / ".veridl"
        except RuntimeError:
            folder = Path.cwd() / ".veridl"
    folder.mkdir(parents=True, exist_ok=True)
    return folder
