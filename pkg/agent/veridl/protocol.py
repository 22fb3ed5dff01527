"""setup, certify and verify over a pairing backend.

The verifier never sees raw data. It holds W_0, ΔW, the proof, the dataset
signature and the owner's public key, and accepts iff four steps pass:

1. the aggregate signature authenticates every sample digest in the proof;
2. the layer-1 sums match the committed features, and the recomputed outputs
   reproduce the claimed error S_1;
3. the output error signal, the last-hidden signals and the weight increments
   match their commitments; the verifier applies the update itself and the
   post-update sums reproduce S_2;
4. |E_1 - E_2| ≤ θ, compared as exact rationals.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from .codec import CodecParams, ScaledInt, SignFlag, SplitSum, encode, in_signed_range, mod_repr
from .datasets import QuantizedDataset
from .dnn.network import ModelState, NetworkConfig
from .dnn.pipeline import (
    CommitmentRounds,
    QuantizedModel,
    SampleForward,
    WeightView,
    converged_model,
    error_value,
    forward_tail,
    hidden_deltas,
    last_layer_coefficients,
    scaled_signals,
    updated_model,
    within_threshold,
)
from .errors import MalformedProofError, RangeViolationError, ScaleLedgerError
from .pairing import GroupElement, PairingBackend, PublicKey, SecretKey, Term

_log = logging.getLogger(__name__)


class ProofMode(str, Enum):
    BASIC = "basic"
    UNIQUE = "unique"

    @property
    def code(self) -> int:
        return 0 if self is ProofMode.BASIC else 1

    @classmethod
    def from_code(cls, code: int) -> "ProofMode":
        if code not in (0, 1):
            raise MalformedProofError(f"unknown proof mode {code}")
        return cls.BASIC if code == 0 else cls.UNIQUE


class Verdict(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"


class FailedStep(str, Enum):
    NONE = "none"
    STEP1_SIGNATURE = "step1-signature"
    STEP2_Z = "step2-z"
    STEP2_E1 = "step2-E1"
    STEP3_DELTA_O = "step3-delta-o"
    STEP3_DELTA_L = "step3-delta-L"
    STEP3_DELTAW = "step3-deltaw"
    STEP3_ZHAT = "step3-zhat"
    STEP3_E2 = "step3-E2"
    STEP4_CONVERGENCE = "step4-convergence"


# ---------------- proof data ----------------
@dataclass(frozen=True)
class SampleDigest:
    feature_commitments: Tuple[GroupElement, ...]
    label_commitment: GroupElement
    sign_flags: Tuple[SignFlag, ...]

    @property
    def commitments(self) -> Tuple[GroupElement, ...]:
        return (*self.feature_commitments, self.label_commitment)

    def synopsis_input(self) -> bytes:
        body = b"".join(c.to_bytes() for c in self.commitments)
        return body + bytes(f.to_byte() for f in self.sign_flags)

    def synopsis(self, backend: PairingBackend) -> int:
        return backend.hash_to_scalar(self.synopsis_input())


@dataclass(frozen=True)
class DatasetSignature:
    gamma: GroupElement


@dataclass(frozen=True)
class SampleWitness:
    z: Tuple[SplitSum, ...]
    z_hat: Tuple[SplitSum, ...]
    delta_out: GroupElement
    delta_last: Tuple[ScaledInt, ...]


@dataclass(frozen=True)
class Proof:
    backend: PairingBackend
    mode: ProofMode
    fractional_bits: int
    input_dim: int
    hidden_sizes: Tuple[int, ...]
    s1: ScaledInt
    s2: ScaledInt
    digests: Tuple[SampleDigest, ...]
    witnesses: Tuple[SampleWitness, ...]
    layer1_increments: Tuple[Tuple[SplitSum, ...], ...]
    output_increments: Tuple[ScaledInt, ...]

    @property
    def size(self) -> int:
        return len(self.digests)


@dataclass
class VerificationReport:
    verdict: Verdict
    failed_step: FailedStep = FailedStep.NONE
    detail: Dict[str, Any] = field(default_factory=dict)
    e1: Optional[Fraction] = None
    e2: Optional[Fraction] = None
    duration_s: float = 0.0

    @property
    def accepted(self) -> bool:
        return self.verdict is Verdict.ACCEPT

    @property
    def error_gap(self) -> Optional[Fraction]:
        if self.e1 is None or self.e2 is None:
            return None
        return abs(self.e1 - self.e2)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "failedStep": self.failed_step.value,
            "detail": dict(self.detail),
            "e1": float(self.e1) if self.e1 is not None else None,
            "e2": float(self.e2) if self.e2 is not None else None,
            "durationMs": int(self.duration_s * 1000),
        }


@dataclass
class _StepResult:
    passed: bool
    step: FailedStep = FailedStep.NONE
    detail: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def ok(cls) -> "_StepResult":
        return cls(True)

    @classmethod
    def fail(cls, step: FailedStep, **detail: Any) -> "_StepResult":
        return cls(False, step, detail)


# ---------------- setup ----------------
def _commitment_cache(backend: PairingBackend, params: CodecParams):
    cache: Dict[Tuple[int, bool], GroupElement] = {}

    def commit(value: int, twin: bool) -> GroupElement:
        key = (value, twin)
        if key not in cache:
            cache[key] = backend.commit(mod_repr(value, params), twin=twin)
        return cache[key]

    return commit


def digest_dataset(dataset: QuantizedDataset, backend: PairingBackend) -> Tuple[SampleDigest, ...]:
    """g^{[f(x_i)]} per feature, g^{[f(y)]} in both source groups, and sign flags."""
    commit = _commitment_cache(backend, dataset.params)
    digests = []
    for i, (x, y) in enumerate(dataset.rows()):
        digests.append(
            SampleDigest(
                tuple(commit(v, False) for v in x),
                commit(y, True),
                dataset.sign_flags(i),
            )
        )
    return tuple(digests)


def sign_digests(digests: Sequence[SampleDigest], secret: SecretKey) -> DatasetSignature:
    backend = secret.backend
    taus = [backend.power(backend.exp_g(d.synopsis(backend)), secret.scalar) for d in digests]
    return DatasetSignature(backend.aggregate(taus))


def setup(dataset: QuantizedDataset, secret: SecretKey, public: PublicKey) -> DatasetSignature:
    """τ_i = (g^{d_i})^s and γ = Π τ_i."""
    if dataset.size == 0:
        raise ValueError("cannot sign an empty dataset")
    if secret.backend is not public.backend:
        raise ValueError("secret and public key come from different backends")
    signature = sign_digests(digest_dataset(dataset, public.backend), secret)
    _log.info("signed %d samples", dataset.size)
    return signature


# ---------------- certify ----------------
def _ranged(v: ScaledInt, params: CodecParams, label: str) -> ScaledInt:
    if not in_signed_range(v.value, params):
        raise RangeViolationError(f"{label} outside (-p/2, p/2)")
    return v


def certify(
    dataset: QuantizedDataset,
    initial: ModelState,
    update: ModelState,
    rounds: CommitmentRounds,
    public: PublicKey,
    params: CodecParams,
    mode: ProofMode = ProofMode.BASIC,
    *,
    digests: Optional[Sequence[SampleDigest]] = None,
) -> Proof:
    """Assemble π = {π_E, π_T, π_W} from the two commitment rounds."""
    backend = public.backend
    if rounds.first.model != converged_model(initial, update, params):
        raise ValueError("TRACE_MISMATCH: round-one model is not f(W_0 + ΔW)")
    if rounds.first.size != dataset.size:
        raise ValueError("TRACE_MISMATCH: round covers a different number of samples")
    digests = tuple(digests) if digests is not None else digest_dataset(dataset, backend)
    bp = rounds.backprop
    witnesses = []
    for i in range(dataset.size):
        first, second = rounds.first.samples[i], rounds.second.samples[i]
        for s in (*first.z, *second.z):
            if s.scale != 2:
                raise ScaleLedgerError("layer-1 sums must carry scale 2")
            _ranged(s.total, params, "z")
        witnesses.append(
            SampleWitness(
                z=first.z,
                z_hat=second.z,
                delta_out=backend.commit(mod_repr(bp.delta_out[i], params)),
                delta_last=tuple(_ranged(ScaledInt(v, 4), params, "delta_last") for v in bp.delta_last[i]),
            )
        )
    for row in bp.layer1_increments:
        for s in row:
            _ranged(s.total, params, "A")
    proof = Proof(
        backend=backend,
        mode=ProofMode(mode),
        fractional_bits=params.fractional_bits,
        input_dim=dataset.input_dim,
        hidden_sizes=tuple(len(w[0]) for w in rounds.first.model.hidden),
        s1=_ranged(rounds.s1, params, "S_1"),
        s2=_ranged(rounds.s2, params, "S_2"),
        digests=digests,
        witnesses=tuple(witnesses),
        layer1_increments=bp.layer1_increments,
        output_increments=tuple(_ranged(b, params, "B") for b in bp.output_increments),
    )
    _log.debug("certified %d samples in %s mode", proof.size, proof.mode.value)
    return proof


def unique_commitments(proof: Proof) -> List[Tuple[GroupElement, SignFlag]]:
    """Distinct (feature commitment, sign) pairs in first-seen order."""
    seen: Dict[Tuple[bytes, int], Tuple[GroupElement, SignFlag]] = {}
    for d in proof.digests:
        for c, flag in zip(d.feature_commitments, d.sign_flags):
            seen.setdefault((c.to_bytes(), flag.to_byte()), (c, flag))
    return list(seen.values())


# ---------------- verify ----------------
def check_structure(proof: Proof, public: PublicKey, config: NetworkConfig, params: CodecParams) -> None:
    """Counts, scales and ranges; anything off here is malformed, not a reject."""
    def bad(msg: str) -> MalformedProofError:
        return MalformedProofError(msg)

    if proof.backend is not public.backend:
        raise bad("proof and public key use different backends")
    if proof.fractional_bits != params.fractional_bits:
        raise bad(f"proof uses L={proof.fractional_bits}, verifier expects {params.fractional_bits}")
    if proof.input_dim != config.input_dim or tuple(proof.hidden_sizes) != config.hidden_sizes:
        raise bad("proof layer sizes differ from the network configuration")
    n, m = proof.size, proof.input_dim
    d1, dl = config.hidden_sizes[0], config.hidden_sizes[-1]
    if n < 1 or len(proof.witnesses) != n:
        raise bad("sample count mismatch between digests and witnesses")
    for name, v, scale in (("S_1", proof.s1, 2), ("S_2", proof.s2, 2)):
        if v.scale != scale:
            raise bad(f"{name} carries scale {v.scale}")
        if v.value < 0 or not in_signed_range(v.value, params):
            raise bad(f"{name} out of range")
    for i, (d, w) in enumerate(zip(proof.digests, proof.witnesses)):
        if len(d.feature_commitments) != m or len(d.sign_flags) != m + 1:
            raise bad(f"sample {i}: digest has the wrong width")
        if len(w.z) != d1 or len(w.z_hat) != d1 or len(w.delta_last) != dl:
            raise bad(f"sample {i}: witness has the wrong width")
        for s in (*w.z, *w.z_hat):
            _check_split_shape(s, 2, params, f"sample {i}")
        for v in w.delta_last:
            if v.scale != 4 or not in_signed_range(v.value, params):
                raise bad(f"sample {i}: delta_last scale or range")
    if len(proof.layer1_increments) != m or any(len(row) != d1 for row in proof.layer1_increments):
        raise bad("layer-1 increment table has the wrong shape")
    for row in proof.layer1_increments:
        for s in row:
            _check_split_shape(s, 2, params, "layer-1 increment")
    if len(proof.output_increments) != dl:
        raise bad("output increment count mismatch")
    for b in proof.output_increments:
        if b.scale != 3 or not in_signed_range(b.value, params):
            raise bad("output increment scale or range")


def _check_split_shape(s: SplitSum, scale: int, params: CodecParams, where: str) -> None:
    if s.scale != scale:
        raise MalformedProofError(f"{where}: split sum at scale {s.scale}, expected {scale}")
    for part in (s.pos_sum, s.neg_sum, s.total):
        if not in_signed_range(part.value, params):
            raise MalformedProofError(f"{where}: split sum outside (-p/2, p/2)")


def verify_step1(digests: Sequence[SampleDigest], signature: DatasetSignature, public: PublicKey) -> bool:
    """Π e(g^{d_i}, v) = e(γ, g), with the left side aggregated to e(g^{Σ d_i}, v)."""
    backend = public.backend
    total = sum(d.synopsis(backend) for d in digests) % backend.order
    return backend.pairing_check([(backend.exp_g(total), public.v)], [(signature.gamma, public.g)])


def _split_holds(
    backend: PairingBackend,
    commitments: Iterable[GroupElement],
    flags: Iterable[SignFlag],
    weights: Iterable[int],
    claim: SplitSum,
) -> bool:
    """Π_pos e(C, g^w) = e(g,g)^pos, Π_neg e(C, g^w) = e(g,g)^neg, pos + neg = total."""
    pos_terms: List[Term] = []
    neg_terms: List[Term] = []
    for c, flag, w in zip(commitments, flags, weights):
        term = (c, backend.exp_g(w))
        (neg_terms if flag.negative != (w < 0) else pos_terms).append(term)
    if not backend.equation(pos_terms, claim.pos_sum.value):
        return False
    if not backend.equation(neg_terms, claim.neg_sum.value):
        return False
    return claim.is_consistent()


def _residual_commitment(backend: PairingBackend, digest: SampleDigest, encoded_output: int) -> GroupElement:
    """g^{[q]} = g^{[f(y)]} * g^{p - [f(o)]}."""
    return backend.mul(digest.label_commitment, backend.exp_g(-encoded_output))


def _forward_from(
    proof: Proof, sums: Sequence[Sequence[SplitSum]], view: WeightView, config: NetworkConfig, params: CodecParams
) -> List[SampleForward]:
    out = []
    for s in sums:
        zs, acts, z_out, o = forward_tail([x.total.value for x in s], view, config.activation, params)
        out.append(SampleForward(tuple(s), zs, acts, z_out, o, encode(o, params).value))
    return out


def _check_layer1(
    proof: Proof, sums: Sequence[Sequence[SplitSum]], view: WeightView, step: FailedStep
) -> _StepResult:
    backend = proof.backend
    for i, (digest, per_neuron) in enumerate(zip(proof.digests, sums)):
        flags = digest.sign_flags[:-1]
        for k, claim in enumerate(per_neuron):
            weights = [w.value for w in view.first_columns[k]]
            if not _split_holds(backend, digest.feature_commitments, flags, weights, claim):
                return _StepResult.fail(step, sample=i, neuron=k)
    return _StepResult.ok()


def _check_error(proof: Proof, forwards: Sequence[SampleForward], claim: ScaledInt) -> bool:
    backend = proof.backend
    terms = []
    for digest, f in zip(proof.digests, forwards):
        q = _residual_commitment(backend, digest, f.encoded_output)
        terms.append((q, q))
    return backend.equation(terms, claim.value)


@dataclass
class ForwardState:
    model: QuantizedModel
    view: WeightView
    samples: List[SampleForward]


def verify_step2(
    proof: Proof, model: QuantizedModel, config: NetworkConfig, params: CodecParams
) -> Tuple[_StepResult, Optional[ForwardState]]:
    view = WeightView(model, params)
    sums = [w.z for w in proof.witnesses]
    res = _check_layer1(proof, sums, view, FailedStep.STEP2_Z)
    if not res.passed:
        return res, None
    forwards = _forward_from(proof, sums, view, config, params)
    if not _check_error(proof, forwards, proof.s1):
        return _StepResult.fail(FailedStep.STEP2_E1), None
    return _StepResult.ok(), ForwardState(model, view, forwards)


def verify_step3(
    proof: Proof, state: ForwardState, config: NetworkConfig, params: CodecParams
) -> _StepResult:
    backend = proof.backend
    act = config.activation
    g = backend.generator()
    deltas = []
    first_scaled = []
    last_scaled = []
    for i, (digest, witness, f) in enumerate(zip(proof.digests, proof.witnesses, state.samples)):
        fsp = encode(act.derivative_of(f.z_out), params).value
        q = _residual_commitment(backend, digest, f.encoded_output)
        if not backend.pairing_check([(q, backend.exp_g(-fsp))], [(g, witness.delta_out)]):
            return _StepResult.fail(FailedStep.STEP3_DELTA_O, sample=i)
        coeffs = last_layer_coefficients(state.model, f, act, params)
        for k, (c, dl) in enumerate(zip(coeffs, witness.delta_last)):
            if not backend.equation([(backend.exp_g(c), witness.delta_out)], dl.value):
                return _StepResult.fail(FailedStep.STEP3_DELTA_L, sample=i, neuron=k)
        ds = hidden_deltas([v.value for v in witness.delta_last], f, state.view, act, params)
        deltas.append(ds)
        first_scaled.append(scaled_signals(ds[0], config.learning_rate, params))
        last_scaled.append(scaled_signals(f.last_activations, config.learning_rate, params))

    for j, row in enumerate(proof.layer1_increments):
        commitments = [d.feature_commitments[j] for d in proof.digests]
        flags = [d.sign_flags[j] for d in proof.digests]
        for k, claim in enumerate(row):
            if not _split_holds(backend, commitments, flags, [fd[k] for fd in first_scaled], claim):
                return _StepResult.fail(FailedStep.STEP3_DELTAW, layer=1, input=j, neuron=k)
    for j, claim in enumerate(proof.output_increments):
        terms = [(w.delta_out, backend.exp_g(fa[j])) for w, fa in zip(proof.witnesses, last_scaled)]
        if not backend.equation(terms, claim.value):
            return _StepResult.fail(FailedStep.STEP3_DELTAW, layer="output", neuron=j)

    updated = updated_model(
        state.model,
        state.view,
        [[s.total.value for s in row] for row in proof.layer1_increments],
        [b.value for b in proof.output_increments],
        state.samples,
        deltas,
        config,
        params,
    )
    view = WeightView(updated, params)
    sums = [w.z_hat for w in proof.witnesses]
    res = _check_layer1(proof, sums, view, FailedStep.STEP3_ZHAT)
    if not res.passed:
        return res
    if not _check_error(proof, _forward_from(proof, sums, view, config, params), proof.s2):
        return _StepResult.fail(FailedStep.STEP3_E2)
    return _StepResult.ok()


def verify(
    initial: ModelState,
    update: ModelState,
    proof: Proof,
    signature: DatasetSignature,
    public: PublicKey,
    config: NetworkConfig,
    params: CodecParams,
) -> VerificationReport:
    started = time.perf_counter()
    check_structure(proof, public, config, params)
    if not (initial.shape_matches(config) and update.shape_matches(config)):
        raise MalformedProofError("W_0 or ΔW does not match the network configuration")
    n = proof.size
    e1, e2 = error_value(proof.s1, n, params), error_value(proof.s2, n, params)

    def done(result: _StepResult) -> VerificationReport:
        elapsed = time.perf_counter() - started
        if result.passed:
            _log.info("verify: accept (%d samples, %.3fs)", n, elapsed)
            return VerificationReport(Verdict.ACCEPT, FailedStep.NONE, {}, e1, e2, elapsed)
        _log.warning("verify: reject at %s %s", result.step.value, result.detail)
        return VerificationReport(Verdict.REJECT, result.step, result.detail, e1, e2, elapsed)

    if not verify_step1(proof.digests, signature, public):
        return done(_StepResult.fail(FailedStep.STEP1_SIGNATURE))
    _log.debug("step 1 passed")
    try:
        model = converged_model(initial, update, params)
    except (ValueError, OverflowError) as exc:
        raise MalformedProofError(f"W_0 + ΔW cannot be quantized: {exc}") from exc
    res, state = verify_step2(proof, model, config, params)
    if not res.passed:
        return done(res)
    _log.debug("step 2 passed")
    res = verify_step3(proof, state, config, params)
    if not res.passed:
        return done(res)
    _log.debug("step 3 passed")
    if not within_threshold(proof.s1.value, proof.s2.value, n, config.convergence_threshold, params):
        return done(_StepResult.fail(FailedStep.STEP4_CONVERGENCE, gap=float(abs(e1 - e2))))
    return done(_StepResult.ok())
