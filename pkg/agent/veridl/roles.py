"""The three parties, as plain functions over artifacts.

The CLI, the socket demo and the HTTP agent all go through these so the same
inputs produce the same bytes whichever transport carried them.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from .adversary import AttackSpec, HonestInstance, TamperedInstance, apply_attack
from .artifacts import (
    ArtifactType,
    decode_bundle,
    decode_dataset,
    decode_model,
    decode_proof,
    decode_public_key,
    encode_bundle,
    encode_dataset,
    encode_model,
    encode_proof,
    encode_public_key,
)
from .codec import CodecParams
from .config import RunConfig, network_for
from .datasets import QuantizedDataset
from .dnn.network import ModelState, NetworkConfig
from .dnn.training import TrainingResult, initial_model, train_to_convergence
from .errors import ArtifactFormatError
from .pairing import PublicKey, SecretKey
from .protocol import DatasetSignature, Proof, ProofMode, VerificationReport, certify, setup, verify

_log = logging.getLogger(__name__)


@dataclass
class ServerOutput:
    initial: ModelState
    update: ModelState
    proof: Proof
    training: TrainingResult
    tampered: Optional[TamperedInstance] = None


def prepare_dataset(dataset: QuantizedDataset, network: NetworkConfig) -> QuantizedDataset:
    return dataset.batch(network.batch_size)


def owner_setup(dataset: QuantizedDataset, secret: SecretKey, public: PublicKey, network: NetworkConfig) -> DatasetSignature:
    return setup(prepare_dataset(dataset, network), secret, public)


def train_and_certify(
    dataset: QuantizedDataset,
    network: NetworkConfig,
    params: CodecParams,
    public: PublicKey,
    *,
    initial: Optional[ModelState] = None,
    seed: int = 0,
    mode: ProofMode = ProofMode.BASIC,
    attack: Optional[AttackSpec] = None,
    signature: Optional[DatasetSignature] = None,
) -> ServerOutput:
    """Server side: train to convergence, build π, optionally misbehave."""
    data = prepare_dataset(dataset, network)
    start = initial if initial is not None else initial_model(network, seed)
    training = train_to_convergence(start, network, data, params)
    proof = certify(data, training.initial, training.update, training.rounds, public, params, mode)
    out = ServerOutput(training.initial, training.update, proof, training)
    if attack is None:
        return out
    inst = HonestInstance(data, network, params, public, signature, training, proof)
    tampered = apply_attack(attack, inst)
    _log.warning("server misbehaving: %s", attack.label)
    return ServerOutput(training.initial, tampered.update, tampered.proof, training, tampered)


def verify_submission(
    initial: ModelState,
    update: ModelState,
    proof: Proof,
    signature: DatasetSignature,
    public: PublicKey,
    cfg: RunConfig,
) -> VerificationReport:
    """Verifier side; input width comes from the proof header, hidden sizes and hyperparameters from ``cfg``."""
    network = network_for(cfg, proof.input_dim)
    return verify(initial, update, proof, signature, public, network, cfg.params)


# ---------------- bundles ----------------
def task_bundle(dataset: QuantizedDataset, public: PublicKey, initial: ModelState) -> bytes:
    return encode_bundle(
        ArtifactType.TASK,
        {"dataset": encode_dataset(dataset), "public_key": encode_public_key(public), "initial": encode_model(initial)},
    )


def read_task(data: bytes, params: CodecParams) -> Tuple[QuantizedDataset, PublicKey, ModelState]:
    parts = _require(decode_bundle(data, ArtifactType.TASK), "dataset", "public_key", "initial")
    return (
        decode_dataset(parts["dataset"], params),
        decode_public_key(parts["public_key"]),
        decode_model(parts["initial"]),
    )


def result_bundle(initial: ModelState, update: ModelState, proof: Proof) -> bytes:
    return encode_bundle(
        ArtifactType.RESULT,
        {"initial": encode_model(initial), "updates": encode_model(update), "proof": encode_proof(proof)},
    )


def read_result(data: bytes) -> Tuple[ModelState, ModelState, Proof]:
    parts = _require(decode_bundle(data, ArtifactType.RESULT), "initial", "updates", "proof")
    return decode_model(parts["initial"]), decode_model(parts["updates"]), decode_proof(parts["proof"])


def _require(parts: Dict[str, bytes], *names: str) -> Dict[str, bytes]:
    missing = [n for n in names if n not in parts]
    if missing:
        raise ArtifactFormatError(f"bundle lacks {', '.join(missing)}")
    return parts
