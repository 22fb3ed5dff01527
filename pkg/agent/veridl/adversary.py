"""Misbehaving servers.

Every transform takes an honest instance (trained, signed, certified) and
returns the update and proof a faulty or malicious server would submit. Two
families share one registry: the attack kinds (faults, compression, weight
tampering, poisoning) and the proof-case tampers that target one verification
equation each. All randomness comes from ``AttackSpec.seed``.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, TextIO

import numpy as np

from .artifacts import decode_proof, encode_proof
from .codec import CodecParams, ScaledInt, SplitSum
from .datasets import QuantizedDataset, synthetic_dataset
from .dnn.network import ModelState, NetworkConfig
from .dnn.pipeline import QuantizedModel, RoundFaults, error_value, run_round
from .dnn.training import TrainingResult, certified_rounds, initial_model, train_epochs, train_to_convergence
from .errors import ConfigError, UnknownAttackError
from .pairing import PairingBackend, PublicKey, SecretKey, genkey
from .protocol import (
    DatasetSignature,
    FailedStep,
    Proof,
    ProofMode,
    VerificationReport,
    certify,
    digest_dataset,
    setup,
    sign_digests,
    verify,
)

_log = logging.getLogger(__name__)

POISON_BOOST = 10.0
POISON_CLIP = 1.5
MAX_REDRAWS = 100


class AttackKind(str, Enum):
    BYZANTINE_NEURONS = "byzantine-neurons"
    WRONG_E1_KEEP_PROOF = "wrong-E1-keep-proof"
    WRONG_E1_REBUILD_PROOF = "wrong-E1-rebuild-proof"
    WRONG_E2 = "wrong-E2"
    COMPRESS_LOWPREC = "compress-lowprec"
    COMPRESS_PRUNE = "compress-prune"
    ARBITRARY_WEIGHTS = "arbitrary-weights"
    POISON_CRAFTED = "poison-crafted"


class TamperCase(str, Enum):
    WRONG_UPDATE = "case-1"
    FOREIGN_WITNESSES = "case-2"
    WRONG_ERROR = "case-3"
    WRONG_LAYER1_SUM = "case-4.1"
    IDENTITY_DELTA_OUT = "case-4.2"
    WRONG_DELTA_LAST = "case-4.3"
    NEGATED_INCREMENT = "case-4.4"
    GENERATOR_SCALED = "case-4.5"


EXPECTED_STEP: Dict[str, FailedStep] = {
    AttackKind.BYZANTINE_NEURONS.value: FailedStep.STEP2_E1,
    AttackKind.WRONG_E1_KEEP_PROOF.value: FailedStep.STEP2_E1,
    AttackKind.WRONG_E1_REBUILD_PROOF.value: FailedStep.STEP2_E1,
    AttackKind.WRONG_E2.value: FailedStep.STEP3_E2,
    AttackKind.COMPRESS_LOWPREC.value: FailedStep.STEP2_E1,
    AttackKind.COMPRESS_PRUNE.value: FailedStep.STEP2_E1,
    AttackKind.ARBITRARY_WEIGHTS.value: FailedStep.STEP2_Z,
    AttackKind.POISON_CRAFTED.value: FailedStep.STEP4_CONVERGENCE,
    TamperCase.WRONG_UPDATE.value: FailedStep.STEP2_Z,
    TamperCase.FOREIGN_WITNESSES.value: FailedStep.STEP2_Z,
    TamperCase.WRONG_ERROR.value: FailedStep.STEP2_E1,
    TamperCase.WRONG_LAYER1_SUM.value: FailedStep.STEP2_Z,
    TamperCase.IDENTITY_DELTA_OUT.value: FailedStep.STEP3_DELTA_O,
    TamperCase.WRONG_DELTA_LAST.value: FailedStep.STEP3_DELTA_L,
    TamperCase.NEGATED_INCREMENT.value: FailedStep.STEP3_DELTAW,
    # against the owner's real signature; re-signed it is accepted
    TamperCase.GENERATOR_SCALED.value: FailedStep.STEP1_SIGNATURE,
}

KNOWN_MISSES = frozenset({TamperCase.GENERATOR_SCALED.value})


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    bits: int = 8
    prune_fraction: float = 0.10
    neuron_fraction: float = 0.01
    weight_fraction: float = 0.10
    scale_factor: int = 2
    resign: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        kind = self.kind.value if isinstance(self.kind, Enum) else str(self.kind)
        if kind not in _HANDLERS:
            raise UnknownAttackError(f"unknown attack {kind!r}; choose one of {', '.join(attack_names())}")
        object.__setattr__(self, "kind", kind)
        if self.bits not in (8, 16):
            raise ConfigError("bits must be 8 or 16", key="bits")
        if not 0.10 <= self.prune_fraction <= 0.25:
            raise ConfigError("prune_fraction must lie in [0.10, 0.25]", key="prune_fraction")
        if not 0 < self.neuron_fraction <= 1 or not 0 < self.weight_fraction <= 1:
            raise ConfigError("fractions must lie in (0, 1]")
        if self.scale_factor < 2:
            raise ConfigError("scale_factor must be >= 2", key="scale_factor")

    @property
    def expected_step(self) -> FailedStep:
        if self.kind in KNOWN_MISSES and self.resign:
            return FailedStep.NONE
        return EXPECTED_STEP[self.kind]

    @property
    def label(self) -> str:
        if self.kind == AttackKind.COMPRESS_LOWPREC.value:
            return f"{self.kind}-{self.bits}"
        if self.kind == AttackKind.COMPRESS_PRUNE.value:
            return f"{self.kind}-{self.prune_fraction:.2f}"
        if self.kind in KNOWN_MISSES and self.resign:
            return f"{self.kind}-resigned"
        return self.kind

    def with_seed(self, seed: int) -> "AttackSpec":
        return dataclasses.replace(self, seed=seed)


@dataclass
class HonestInstance:
    """Everything an honest run produces.

    A server sees no signature and no secret; ``secret`` only serves re-signing.
    """

    dataset: QuantizedDataset
    config: NetworkConfig
    params: CodecParams
    public: PublicKey
    signature: Optional[DatasetSignature]
    training: TrainingResult
    proof: Proof
    secret: Optional[SecretKey] = None

    @property
    def initial(self) -> ModelState:
        return self.training.initial

    @property
    def update(self) -> ModelState:
        return self.training.update


@dataclass
class TamperedInstance:
    spec: AttackSpec
    update: ModelState
    proof: Proof
    signature: Optional[DatasetSignature]
    error_gap: Optional[Fraction] = None
    pre_retrain_gap: Optional[Fraction] = None
    notes: Dict[str, Any] = field(default_factory=dict)


def build_instance(
    dataset: QuantizedDataset,
    config: NetworkConfig,
    params: CodecParams,
    *,
    seed: int = 0,
    backend: Optional[PairingBackend] = None,
    mode: ProofMode = ProofMode.BASIC,
) -> HonestInstance:
    secret, public = genkey(seed=f"lab-{seed}", backend=backend)
    signature = setup(dataset, secret, public)
    training = train_to_convergence(initial_model(config, seed), config, dataset, params)
    proof = certify(dataset, training.initial, training.update, training.rounds, public, params, mode)
    return HonestInstance(dataset, config, params, public, signature, training, proof, secret)


def verify_instance(inst: HonestInstance, tampered: Optional[TamperedInstance] = None) -> VerificationReport:
    if tampered is None:
        return verify(inst.initial, inst.update, inst.proof, inst.signature, inst.public, inst.config, inst.params)
    return verify(
        inst.initial, tampered.update, tampered.proof, tampered.signature, inst.public, inst.config, inst.params
    )


# ---------------- helpers ----------------
def _rng(spec: AttackSpec) -> np.random.Generator:
    return np.random.default_rng(spec.seed)


def _gap(s1: int, honest: HonestInstance) -> Fraction:
    n = honest.dataset.size
    return abs(error_value(ScaledInt(s1, 2), n, honest.params) - honest.training.e1)


def _recertify(inst: HonestInstance, update: ModelState, faults: Optional[RoundFaults] = None) -> Proof:
    rounds = certified_rounds(inst.initial, update, inst.dataset, inst.config, inst.params, faults)
    return certify(
        inst.dataset, inst.initial, update, rounds, inst.public, inst.params, inst.proof.mode, digests=inst.proof.digests
    )


def truncate_mantissa(arr: np.ndarray, bits: int) -> np.ndarray:
    """Keep ``bits`` bits of every float's mantissa, rounding toward zero."""
    mantissa, exponent = np.frexp(arr)
    scale = float(2**bits)
    return np.ldexp(np.trunc(mantissa * scale) / scale, exponent)


def prune_masks(model: ModelState, fraction: float, rng: np.random.Generator) -> List[np.ndarray]:
    sizes = [a.size for a in model.arrays()]
    total = sum(sizes)
    drop = max(1, int(round(fraction * total)))
    flat = np.ones(total)
    flat[rng.choice(total, size=drop, replace=False)] = 0.0
    out, offset = [], 0
    for a in model.arrays():
        out.append(flat[offset : offset + a.size].reshape(a.shape))
        offset += a.size
    return out


def _apply_masks(model: ModelState, masks: Sequence[np.ndarray]) -> ModelState:
    arrays = [a * m for a, m in zip(model.arrays(), masks)]
    return ModelState(arrays[:-1], arrays[-1])


# ---------------- attack kinds ----------------
def _wrong_e1_keep(spec: AttackSpec, inst: HonestInstance) -> TamperedInstance:
    offset = int(_rng(spec).integers(1, inst.params.unit(2), endpoint=True))
    s1 = inst.proof.s1.value + offset
    proof = dataclasses.replace(inst.proof, s1=ScaledInt(s1, 2))
    return TamperedInstance(spec, inst.update, proof, inst.signature, _gap(s1, inst))


def _wrong_e2(spec: AttackSpec, inst: HonestInstance) -> TamperedInstance:
    offset = int(_rng(spec).integers(1, inst.params.unit(2), endpoint=True))
    proof = dataclasses.replace(inst.proof, s2=ScaledInt(inst.proof.s2.value + offset, 2))
    return TamperedInstance(spec, inst.update, proof, inst.signature, Fraction(0))


def _faulted(spec: AttackSpec, inst: HonestInstance, draw: Callable[[np.random.Generator], RoundFaults]) -> TamperedInstance:
    rng = _rng(spec)
    honest = inst.training.rounds.first
    for attempt in range(MAX_REDRAWS):
        faults = draw(rng)
        rounds = certified_rounds(inst.initial, inst.update, inst.dataset, inst.config, inst.params, faults)
        outputs_same = all(
            a.encoded_output == b.encoded_output for a, b in zip(rounds.first.samples, honest.samples)
        )
        if outputs_same or rounds.s1 == honest.error_sum:
            continue
        proof = certify(
            inst.dataset,
            inst.initial,
            inst.update,
            rounds,
            inst.public,
            inst.params,
            inst.proof.mode,
            digests=inst.proof.digests,
        )
        notes = {"faults": len(faults.activations) + len(faults.outputs), "redraws": attempt}
        return TamperedInstance(spec, inst.update, proof, inst.signature, _gap(rounds.s1.value, inst), notes=notes)
    raise RuntimeError(f"{spec.kind}: no fault changed the committed outputs after {MAX_REDRAWS} draws")


def _byzantine(spec: AttackSpec, inst: HonestInstance) -> TamperedInstance:
    sizes = inst.config.hidden_sizes
    n = inst.dataset.size
    slots = [(i, layer + 1, k) for i in range(n) for layer, d in enumerate(sizes) for k in range(d)]
    count = max(1, int(round(spec.neuron_fraction * len(slots))))

    def draw(rng: np.random.Generator) -> RoundFaults:
        picks = rng.choice(len(slots), size=count, replace=False)
        return RoundFaults(activations={slots[int(p)]: float(rng.uniform(-1.0, 1.0)) for p in sorted(picks)})

    return _faulted(spec, inst, draw)


def _wrong_e1_rebuild(spec: AttackSpec, inst: HonestInstance) -> TamperedInstance:
    samples = inst.training.rounds.first.samples

    def draw(rng: np.random.Generator) -> RoundFaults:
        i = int(rng.integers(0, len(samples)))
        shift = float(rng.uniform(0.05, 0.5)) * (1 if rng.random() < 0.5 else -1)
        return RoundFaults(outputs={i: float(np.clip(samples[i].output + shift, 0.0, 1.0))})

    return _faulted(spec, inst, draw)


def _compressed(
    spec: AttackSpec,
    inst: HonestInstance,
    compress: Callable[[ModelState], ModelState],
) -> TamperedInstance:
    params = inst.params
    pre_model = QuantizedModel.from_state(compress(inst.training.converged), params)
    pre = run_round(pre_model, inst.dataset, inst.config, params)
    start = compress(inst.initial)
    trained = train_epochs(start, inst.config, inst.dataset, inst.training.epochs, transform=compress)
    update = trained - inst.initial
    honest = _recertify(inst, update)
    # compressed model's own π_T/π_W, presented with the full model's errors
    proof = dataclasses.replace(honest, s1=inst.proof.s1, s2=inst.proof.s2)
    return TamperedInstance(
        spec,
        update,
        proof,
        inst.signature,
        error_gap=_gap(honest.s1.value, inst),
        pre_retrain_gap=_gap(pre.error_sum.value, inst),
        notes={"epochs": inst.training.epochs},
    )


def _lowprec(spec: AttackSpec, inst: HonestInstance) -> TamperedInstance:
    return _compressed(spec, inst, lambda m: m.map(lambda w: truncate_mantissa(w, spec.bits)))


def _prune(spec: AttackSpec, inst: HonestInstance) -> TamperedInstance:
    masks = prune_masks(inst.initial, spec.prune_fraction, _rng(spec))
    return _compressed(spec, inst, lambda m: _apply_masks(m, masks))


def _layer1_changes(a: ModelState, b: ModelState, params: CodecParams) -> bool:
    return QuantizedModel.from_state(a, params).hidden[0] != QuantizedModel.from_state(b, params).hidden[0]


def _informative_input(dataset: QuantizedDataset) -> int:
    counts = [sum(1 for row in dataset.features if row[j] != 0) for j in range(dataset.input_dim)]
    return int(np.argmax(counts))


def _arbitrary_weights(spec: AttackSpec, inst: HonestInstance) -> TamperedInstance:
    rng = _rng(spec)
    converged = inst.training.converged
    flat = converged.flatten()
    j = _informative_input(inst.dataset)
    d1 = inst.config.hidden_sizes[0]
    for _ in range(MAX_REDRAWS):
        count = max(1, int(round(spec.weight_fraction * flat.size)))
        picks = set(int(p) for p in rng.choice(flat.size, size=count, replace=False))
        picks.add(j * d1 + int(rng.integers(0, d1)))
        noise = np.zeros_like(flat)
        for p in sorted(picks):
            noise[p] = rng.uniform(-0.5, 0.5)
        tampered = converged.unflatten(flat + noise)
        if _layer1_changes(tampered, converged, inst.params):
            update = tampered - inst.initial
            return TamperedInstance(spec, update, inst.proof, inst.signature, notes={"weights": len(picks)})
    raise RuntimeError("arbitrary-weights: noise never changed a first-layer weight")


def _poison(spec: AttackSpec, inst: HonestInstance) -> TamperedInstance:
    poisoned = (inst.initial - inst.update.scaled(POISON_BOOST)).map(lambda w: np.clip(w, -POISON_CLIP, POISON_CLIP))
    update = poisoned - inst.initial
    proof = _recertify(inst, update)
    return TamperedInstance(spec, update, proof, inst.signature, _gap(proof.s1.value, inst))


# ---------------- proof-case tampers ----------------
def _replace_witness(proof: Proof, i: int, **changes: Any) -> Proof:
    witnesses = list(proof.witnesses)
    witnesses[i] = dataclasses.replace(witnesses[i], **changes)
    return dataclasses.replace(proof, witnesses=tuple(witnesses))


def _case_wrong_update(spec: AttackSpec, inst: HonestInstance) -> TamperedInstance:
    rng = _rng(spec)
    j = _informative_input(inst.dataset)
    k = int(rng.integers(0, inst.config.hidden_sizes[0]))
    hidden = [w.copy() for w in inst.update.hidden]
    hidden[0][j, k] += 0.125 if rng.random() < 0.5 else -0.125
    update = ModelState(hidden, inst.update.output.copy())
    return TamperedInstance(spec, update, inst.proof, inst.signature, notes={"weight": (j, k)})


def _case_foreign_witnesses(spec: AttackSpec, inst: HonestInstance) -> TamperedInstance:
    rng = _rng(spec)
    for _ in range(MAX_REDRAWS):
        other = inst.update.map(lambda w: w + rng.uniform(-0.1, 0.1, size=w.shape))
        if _layer1_changes(inst.initial + other, inst.training.converged, inst.params):
            break
    foreign = _recertify(inst, other)
    proof = dataclasses.replace(
        inst.proof,
        witnesses=foreign.witnesses,
        layer1_increments=foreign.layer1_increments,
        output_increments=foreign.output_increments,
    )
    return TamperedInstance(spec, inst.update, proof, inst.signature)


def _case_wrong_error(spec: AttackSpec, inst: HonestInstance) -> TamperedInstance:
    s1 = inst.proof.s1.value + 1
    return TamperedInstance(spec, inst.update, dataclasses.replace(inst.proof, s1=ScaledInt(s1, 2)), inst.signature, _gap(s1, inst))


def _case_wrong_layer1_sum(spec: AttackSpec, inst: HonestInstance) -> TamperedInstance:
    rng = _rng(spec)
    i = int(rng.integers(0, inst.proof.size))
    k = int(rng.integers(0, inst.config.hidden_sizes[0]))
    z = list(inst.proof.witnesses[i].z)
    s = z[k]
    z[k] = SplitSum(s.pos_sum.shifted(1), s.neg_sum, s.total.shifted(1), s.neg_count)
    return TamperedInstance(spec, inst.update, _replace_witness(inst.proof, i, z=tuple(z)), inst.signature)


def _case_identity_delta_out(spec: AttackSpec, inst: HonestInstance) -> TamperedInstance:
    live = [i for i, d in enumerate(inst.training.rounds.backprop.delta_out) if d != 0]
    if not live:
        raise ValueError("every output error signal is zero; nothing to tamper")
    i = live[int(_rng(spec).integers(0, len(live)))]
    proof = _replace_witness(inst.proof, i, delta_out=inst.public.backend.identity())
    return TamperedInstance(spec, inst.update, proof, inst.signature, notes={"sample": i})


def _case_wrong_delta_last(spec: AttackSpec, inst: HonestInstance) -> TamperedInstance:
    rng = _rng(spec)
    i = int(rng.integers(0, inst.proof.size))
    k = int(rng.integers(0, inst.config.hidden_sizes[-1]))
    dl = list(inst.proof.witnesses[i].delta_last)
    dl[k] = dl[k].shifted(1)
    return TamperedInstance(spec, inst.update, _replace_witness(inst.proof, i, delta_last=tuple(dl)), inst.signature)


def _case_negated_increment(spec: AttackSpec, inst: HonestInstance) -> TamperedInstance:
    cells = [
        (j, k) for j, row in enumerate(inst.proof.layer1_increments) for k, s in enumerate(row) if s.total.value != 0
    ]
    if not cells:
        raise ValueError("every first-layer increment is zero; nothing to negate")
    j, k = cells[int(_rng(spec).integers(0, len(cells)))]
    rows = [list(r) for r in inst.proof.layer1_increments]
    s = rows[j][k]
    pos_count = inst.dataset.size - s.neg_count
    rows[j][k] = SplitSum(-s.neg_sum, -s.pos_sum, -s.total, pos_count)
    proof = dataclasses.replace(inst.proof, layer1_increments=tuple(tuple(r) for r in rows))
    return TamperedInstance(spec, inst.update, proof, inst.signature, notes={"cell": (j, k)})


def _case_generator_scaled(spec: AttackSpec, inst: HonestInstance) -> TamperedInstance:
    scaled = inst.dataset.scaled(spec.scale_factor, labels=False)
    training = train_to_convergence(inst.initial, inst.config, scaled, inst.params)
    digests = digest_dataset(scaled, inst.public.backend)
    proof = certify(
        scaled, training.initial, training.update, training.rounds, inst.public, inst.params, inst.proof.mode, digests=digests
    )
    signature = inst.signature
    if spec.resign:
        if inst.secret is None:
            raise ValueError("re-signing the scaled data needs the owner's secret key")
        signature = sign_digests(digests, inst.secret)
    return TamperedInstance(spec, training.update, proof, signature, _gap(proof.s1.value, inst))


_HANDLERS: Dict[str, Callable[[AttackSpec, HonestInstance], TamperedInstance]] = {
    AttackKind.BYZANTINE_NEURONS.value: _byzantine,
    AttackKind.WRONG_E1_KEEP_PROOF.value: _wrong_e1_keep,
    AttackKind.WRONG_E1_REBUILD_PROOF.value: _wrong_e1_rebuild,
    AttackKind.WRONG_E2.value: _wrong_e2,
    AttackKind.COMPRESS_LOWPREC.value: _lowprec,
    AttackKind.COMPRESS_PRUNE.value: _prune,
    AttackKind.ARBITRARY_WEIGHTS.value: _arbitrary_weights,
    AttackKind.POISON_CRAFTED.value: _poison,
    TamperCase.WRONG_UPDATE.value: _case_wrong_update,
    TamperCase.FOREIGN_WITNESSES.value: _case_foreign_witnesses,
    TamperCase.WRONG_ERROR.value: _case_wrong_error,
    TamperCase.WRONG_LAYER1_SUM.value: _case_wrong_layer1_sum,
    TamperCase.IDENTITY_DELTA_OUT.value: _case_identity_delta_out,
    TamperCase.WRONG_DELTA_LAST.value: _case_wrong_delta_last,
    TamperCase.NEGATED_INCREMENT.value: _case_negated_increment,
    TamperCase.GENERATOR_SCALED.value: _case_generator_scaled,
}


def attack_names() -> List[str]:
    return list(_HANDLERS)


def parse_attack(name: str, **options: Any) -> AttackSpec:
    known = {f.name for f in dataclasses.fields(AttackSpec)} - {"kind"}
    unknown = sorted(set(options) - known)
    if unknown:
        raise ConfigError(f"unknown attack option(s): {', '.join(unknown)}", key=unknown[0])
    return AttackSpec(kind=name, **{k: v for k, v in options.items() if v is not None})


def apply_attack(spec: AttackSpec, inst: HonestInstance) -> TamperedInstance:
    """ΔW' and π' for one attack; deterministic given ``spec.seed``."""
    tampered = _HANDLERS[spec.kind](spec, inst)
    _log.debug("applied %s (seed %d)", spec.label, spec.seed)
    return tampered


# ---------------- soundness matrix ----------------
@dataclass(frozen=True)
class LabConfig:
    config_id: str
    network: NetworkConfig
    samples: int
    seed: int = 0
    distinct_values: Optional[int] = None

    def dataset(self, params: CodecParams) -> QuantizedDataset:
        return synthetic_dataset(
            self.samples, self.network.input_dim, seed=self.seed, params=params, distinct_values=self.distinct_values
        )


@dataclass
class SoundnessRow:
    kind: str
    config_id: str
    trial: int
    verdict: str
    failed_step: str
    expected_step: str
    error_gap: Optional[float] = None
    pre_retrain_gap: Optional[float] = None

    @property
    def as_expected(self) -> bool:
        return self.failed_step == self.expected_step


def default_specs() -> List[AttackSpec]:
    specs = [AttackSpec(k.value) for k in AttackKind if k not in (AttackKind.COMPRESS_LOWPREC, AttackKind.COMPRESS_PRUNE)]
    specs += [AttackSpec(AttackKind.COMPRESS_LOWPREC.value, bits=b) for b in (8, 16)]
    specs += [AttackSpec(AttackKind.COMPRESS_PRUNE.value, prune_fraction=f) for f in (0.10, 0.25)]
    specs += [AttackSpec(c.value) for c in TamperCase]
    specs.append(AttackSpec(TamperCase.GENERATOR_SCALED.value, resign=True))
    return specs


def _through_artifacts(proof: Proof, mode: ProofMode) -> Proof:
    return decode_proof(encode_proof(dataclasses.replace(proof, mode=mode)))


def run_soundness_matrix(
    configs: Sequence[LabConfig],
    trials: int,
    specs: Optional[Sequence[AttackSpec]] = None,
    *,
    params: Optional[CodecParams] = None,
    backend: Optional[PairingBackend] = None,
    mode: ProofMode = ProofMode.BASIC,
    serialize: bool = False,
    control: bool = True,
) -> List[SoundnessRow]:
    """Honest instance per config, then every spec for every trial.

    With ``serialize`` each proof goes through the artifact codec in ``mode``
    before verification. A ``control`` row verifies the untouched instance.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    params = params or CodecParams()
    specs = list(specs) if specs is not None else default_specs()
    rows: List[SoundnessRow] = []
    for cfg in configs:
        inst = build_instance(cfg.dataset(params), cfg.network, params, seed=cfg.seed, backend=backend, mode=mode)
        for trial in range(trials):
            if control:
                proof = _through_artifacts(inst.proof, mode) if serialize else inst.proof
                report = verify(inst.initial, inst.update, proof, inst.signature, inst.public, inst.config, params)
                rows.append(
                    SoundnessRow("honest", cfg.config_id, trial, report.verdict.value, report.failed_step.value, FailedStep.NONE.value, 0.0)
                )
            for spec in specs:
                tampered = apply_attack(spec.with_seed(cfg.seed * 1000 + trial), inst)
                if serialize:
                    tampered.proof = _through_artifacts(tampered.proof, mode)
                report = verify_instance(inst, tampered)
                rows.append(
                    SoundnessRow(
                        spec.label,
                        cfg.config_id,
                        trial,
                        report.verdict.value,
                        report.failed_step.value,
                        spec.expected_step.value,
                        float(tampered.error_gap) if tampered.error_gap is not None else None,
                        float(tampered.pre_retrain_gap) if tampered.pre_retrain_gap is not None else None,
                    )
                )
        _log.info("soundness matrix: config %s done", cfg.config_id)
    return rows


CSV_COLUMNS = ["kind", "config-id", "trial", "verdict", "failed_step", "|E1'-E1|", "expected_step", "pre_retrain_gap"]


def write_soundness_csv(rows: Iterable[SoundnessRow], out: Optional[TextIO] = None) -> str:
    buf = out or io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([
            r.kind, r.config_id, r.trial, r.verdict, r.failed_step,
            "" if r.error_gap is None else repr(r.error_gap),
            r.expected_step,
            "" if r.pre_retrain_gap is None else repr(r.pre_retrain_gap),
        ])
    return buf.getvalue() if out is None else ""
