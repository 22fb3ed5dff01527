from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from ..codec import CodecParams
from ..datasets import QuantizedDataset
from ..errors import ConvergenceError
from .network import ModelState, NetworkConfig, dataset_error, training_step
from .pipeline import (
    CommitmentRounds,
    RoundFaults,
    commitment_rounds,
    converged_model,
    error_value,
    within_threshold,
)

_log = logging.getLogger(__name__)

ModelTransform = Callable[[ModelState], ModelState]


@dataclass
class TrainingResult:
    """What the server holds after training: W_0, ΔW and the two proved rounds."""

    initial: ModelState
    update: ModelState
    rounds: CommitmentRounds
    epochs: int
    plain_error: float
    params: CodecParams

    @property
    def converged(self) -> ModelState:
        return self.initial + self.update

    @property
    def n(self) -> int:
        return self.rounds.first.size

    @property
    def e1(self) -> Fraction:
        return error_value(self.rounds.s1, self.n, self.params)

    @property
    def e2(self) -> Fraction:
        return error_value(self.rounds.s2, self.n, self.params)


def train_epochs(
    model: ModelState,
    config: NetworkConfig,
    dataset: QuantizedDataset,
    epochs: int,
    transform: Optional[ModelTransform] = None,
) -> ModelState:
    """Plain full-batch gradient descent for a fixed number of epochs."""
    x, y = dataset.feature_matrix(), dataset.label_vector()
    for _ in range(epochs):
        model, _ = training_step(model, config, x, y)
        if transform is not None:
            model = transform(model)
    return model


def certified_rounds(
    initial: ModelState,
    update: ModelState,
    dataset: QuantizedDataset,
    config: NetworkConfig,
    params: CodecParams,
    faults: Optional[RoundFaults] = None,
) -> CommitmentRounds:
    return commitment_rounds(converged_model(initial, update, params), dataset, config, params, faults)


def train_to_convergence(
    initial: ModelState,
    config: NetworkConfig,
    dataset: QuantizedDataset,
    params: CodecParams,
    *,
    transform: Optional[ModelTransform] = None,
    max_epochs: Optional[int] = None,
) -> TrainingResult:
    """Train until two consecutive errors differ by at most θ.

    Plain training decides when to look; the decision that counts is taken on
    the commitment pipeline, so on return |E_1 - E_2| ≤ θ holds for exactly the
    integers the verifier recomputes.
    """
    if dataset.size == 0:
        raise ValueError("dataset is empty")
    if not initial.shape_matches(config):
        raise ValueError("initial model does not match the network shape")
    limit = max_epochs or config.max_epochs
    x, y = dataset.feature_matrix(), dataset.label_vector()
    model = initial.copy()
    previous = dataset_error(model, config, x, y)
    theta = config.convergence_threshold
    for epoch in range(1, limit + 1):
        model, _ = training_step(model, config, x, y)
        if transform is not None:
            model = transform(model)
        current = dataset_error(model, config, x, y)
        if not math.isfinite(current):
            raise ConvergenceError(f"training diverged at epoch {epoch}", epoch=epoch)
        if abs(previous - current) <= theta:
            update = model - initial
            rounds = certified_rounds(initial, update, dataset, config, params)
            if within_threshold(rounds.s1.value, rounds.s2.value, dataset.size, theta, params):
                _log.info("converged after %d epochs (E=%.6g)", epoch, current)
                return TrainingResult(initial, update, rounds, epoch, current, params)
            _log.debug("epoch %d converged in doubles but not on the commitment pipeline", epoch)
        previous = current
    raise ConvergenceError(f"no convergence within {limit} epochs", epochs=limit)


def initial_model(config: NetworkConfig, seed: int) -> ModelState:
    return ModelState.random(config, np.random.default_rng(seed))
