"""Plain floating-point fully-connected network: feedforward, MSE cost, backprop, update."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError


class Activation(str, Enum):
    SIGMOID = "sigmoid"
    RELU = "relu"
    TANH = "tanh"

    # scalar forms; the commitment pipeline depends on these staying libm-based
    def value_of(self, z: float) -> float:
        if self is Activation.SIGMOID:
            if z >= 0:
                return 1.0 / (1.0 + math.exp(-z))
            e = math.exp(z)
            return e / (1.0 + e)
        if self is Activation.TANH:
            return math.tanh(z)
        return z if z > 0 else 0.0

    def derivative_of(self, z: float) -> float:
        if self is Activation.SIGMOID:
            s = self.value_of(z)
            return s * (1.0 - s)
        if self is Activation.TANH:
            t = math.tanh(z)
            return 1.0 - t * t
        return 1.0 if z > 0 else 0.0

    # vectorized forms for plain training
    def apply(self, z: np.ndarray) -> np.ndarray:
        if self is Activation.SIGMOID:
            out = np.empty_like(z, dtype=np.float64)
            pos = z >= 0
            out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
            ez = np.exp(z[~pos])
            out[~pos] = ez / (1.0 + ez)
            return out
        if self is Activation.TANH:
            return np.tanh(z)
        return np.where(z > 0, z, 0.0)

    def derivative(self, z: np.ndarray) -> np.ndarray:
        if self is Activation.SIGMOID:
            s = self.apply(z)
            return s * (1.0 - s)
        if self is Activation.TANH:
            t = np.tanh(z)
            return 1.0 - t * t
        return (z > 0).astype(np.float64)


@dataclass(frozen=True)
class NetworkConfig:
    """Shape and hyperparameters of a scalar-output network.

    Attributes:
        input_dim: number of features m.
        hidden_sizes: neurons per hidden layer, d_1..d_L.
        activation: σ, shared by every layer including the output neuron.
        learning_rate: η.
        convergence_threshold: θ; ``math.inf`` stops after the first two epochs.
        batch_size: N cap; larger datasets are cut to their first N rows.
        max_epochs: guard against non-convergence.
    """

    input_dim: int
    hidden_sizes: Tuple[int, ...] = (8, 8)
    activation: Activation = Activation.SIGMOID
    learning_rate: float = 0.1
    convergence_threshold: float = 1e-4
    batch_size: int = 100
    max_epochs: int = 100_000

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_sizes", tuple(int(d) for d in self.hidden_sizes))
        object.__setattr__(self, "activation", Activation(self.activation))
        if self.input_dim < 1:
            raise ConfigError("input_dim must be >= 1")
        if not self.hidden_sizes or any(d < 1 for d in self.hidden_sizes):
            raise ConfigError("need at least one hidden layer and every layer needs >= 1 neuron")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if not self.convergence_threshold > 0:
            raise ConfigError("convergence_threshold must be > 0")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("batch_size and max_epochs must be >= 1")

    @property
    def depth(self) -> int:
        return len(self.hidden_sizes)

    @property
    def layer_sizes(self) -> Tuple[int, ...]:
        return (self.input_dim, *self.hidden_sizes)

    @property
    def parameter_count(self) -> int:
        sizes = self.layer_sizes
        return sum(a * b for a, b in zip(sizes, sizes[1:])) + sizes[-1]


@dataclass
class ModelState:
    """Weights only (the network carries no biases).

    ``hidden[l]`` has shape (d_{l-1}, d_l) with d_0 = m; ``output`` has shape (d_L,).
    """

    hidden: List[np.ndarray]
    output: np.ndarray

    @classmethod
    def random(cls, config: NetworkConfig, rng: np.random.Generator, scale: float = 0.5) -> "ModelState":
        sizes = config.layer_sizes
        hidden = [rng.uniform(-scale, scale, size=(a, b)) for a, b in zip(sizes, sizes[1:])]
        output = rng.uniform(-scale, scale, size=sizes[-1])
        return cls(hidden, output)

    @classmethod
    def zeros(cls, config: NetworkConfig) -> "ModelState":
        sizes = config.layer_sizes
        return cls([np.zeros((a, b)) for a, b in zip(sizes, sizes[1:])], np.zeros(sizes[-1]))

    def copy(self) -> "ModelState":
        return ModelState([w.copy() for w in self.hidden], self.output.copy())

    def arrays(self) -> List[np.ndarray]:
        return [*self.hidden, self.output]

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def unflatten(self, flat: np.ndarray) -> "ModelState":
        out, offset = [], 0
        for a in self.arrays():
            out.append(np.asarray(flat[offset : offset + a.size], dtype=np.float64).reshape(a.shape))
            offset += a.size
        if offset != flat.size:
            raise ValueError("flat vector does not match the model shape")
        return ModelState(out[:-1], out[-1])

    def map(self, fn) -> "ModelState":
        return ModelState([fn(w) for w in self.hidden], fn(self.output))

    def __add__(self, other: "ModelState") -> "ModelState":
        return ModelState([a + b for a, b in zip(self.hidden, other.hidden)], self.output + other.output)

    def __sub__(self, other: "ModelState") -> "ModelState":
        return ModelState([a - b for a, b in zip(self.hidden, other.hidden)], self.output - other.output)

    def scaled(self, factor: float) -> "ModelState":
        return self.map(lambda w: w * factor)

    def shape_matches(self, config: NetworkConfig) -> bool:
        sizes = config.layer_sizes
        expected = [(a, b) for a, b in zip(sizes, sizes[1:])]
        return [w.shape for w in self.hidden] == expected and self.output.shape == (sizes[-1],)

    def equals(self, other: "ModelState") -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))


@dataclass
class ForwardTrace:
    """Batch-shaped trace: ``z[l]`` and ``a[l]`` have shape (N, d_l)."""

    z: List[np.ndarray]
    a: List[np.ndarray]
    z_out: np.ndarray
    output: np.ndarray


@dataclass
class BackpropTrace:
    delta_out: np.ndarray
    deltas: List[np.ndarray]
    gradients: ModelState
    increments: ModelState


def feedforward(model: ModelState, config: NetworkConfig, sample: np.ndarray) -> ForwardTrace:
    x = np.atleast_2d(np.asarray(sample, dtype=np.float64))
    if x.shape[1] != config.input_dim:
        raise ValueError(f"sample has {x.shape[1]} features, network expects {config.input_dim}")
    act = config.activation
    zs, acts = [], []
    prev = x
    for w in model.hidden:
        z = prev @ w
        prev = act.apply(z)
        zs.append(z)
        acts.append(prev)
    z_out = prev @ model.output
    return ForwardTrace(zs, acts, z_out, act.apply(z_out))


def cost(o: float, y: float) -> float:
    return 0.5 * (y - o) ** 2


def dataset_error(model: ModelState, config: NetworkConfig, features: np.ndarray, labels: np.ndarray) -> float:
    labels = np.asarray(labels, dtype=np.float64)
    if labels.size == 0:
        raise ValueError("dataset is empty")
    trace = feedforward(model, config, features)
    return float(np.mean(0.5 * (labels - trace.output) ** 2))


def backprop(
    model: ModelState,
    config: NetworkConfig,
    trace: ForwardTrace,
    features: np.ndarray,
    labels: np.ndarray,
) -> BackpropTrace:
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    n = y.size
    act = config.activation
    delta_out = (trace.output - y) * act.derivative(trace.z_out)
    deltas: List[np.ndarray] = [np.empty(0)] * config.depth
    deltas[-1] = act.derivative(trace.z[-1]) * (delta_out[:, None] * model.output[None, :])
    for layer in range(config.depth - 2, -1, -1):
        deltas[layer] = act.derivative(trace.z[layer]) * (deltas[layer + 1] @ model.hidden[layer + 1].T)
    inputs = [x, *trace.a[:-1]]
    grads = ModelState(
        [inp.T @ d for inp, d in zip(inputs, deltas)],
        trace.a[-1].T @ delta_out,
    )
    increments = grads.scaled(-config.learning_rate / n)
    return BackpropTrace(delta_out, deltas, grads, increments)


def apply_update(model: ModelState, increments: ModelState) -> ModelState:
    return model + increments


def training_step(
    model: ModelState, config: NetworkConfig, features: np.ndarray, labels: np.ndarray
) -> Tuple[ModelState, BackpropTrace]:
    trace = feedforward(model, config, features)
    bp = backprop(model, config, trace, features, labels)
    return apply_update(model, bp.increments), bp


def flat_gradient(model: ModelState, config: NetworkConfig, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """dE/dw for every weight, in ``ModelState.flatten`` order."""
    trace = feedforward(model, config, features)
    bp = backprop(model, config, trace, features, labels)
    return bp.gradients.flatten() / np.asarray(labels).size


def layer_sizes_of(model: ModelState) -> Sequence[int]:
    return (model.hidden[0].shape[0], *(w.shape[1] for w in model.hidden))
