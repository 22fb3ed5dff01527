from .network import Activation, ModelState, NetworkConfig, backprop, cost, dataset_error, feedforward
from .pipeline import CommitmentRounds, QuantizedModel, RoundFaults, commitment_rounds, within_threshold
from .training import TrainingResult, initial_model, train_to_convergence

__all__ = [
    "Activation",
    "CommitmentRounds",
    "ModelState",
    "NetworkConfig",
    "QuantizedModel",
    "RoundFaults",
    "TrainingResult",
    "backprop",
    "commitment_rounds",
    "cost",
    "dataset_error",
    "feedforward",
    "initial_model",
    "train_to_convergence",
    "within_threshold",
]
