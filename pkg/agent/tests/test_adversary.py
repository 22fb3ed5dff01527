import io

import numpy as np
import pytest

from veridl.adversary import (
    CSV_COLUMNS,
    KNOWN_MISSES,
    AttackKind,
    AttackSpec,
    TamperCase,
    apply_attack,
    attack_names,
    default_specs,
    parse_attack,
    prune_masks,
    run_soundness_matrix,
    truncate_mantissa,
    verify_instance,
    write_soundness_csv,
)
from veridl.artifacts import encode_proof
from veridl.errors import ConfigError, UnknownAttackError
from veridl.protocol import FailedStep, ProofMode, Verdict

EXACT = [c.value for c in TamperCase if c.value not in KNOWN_MISSES] + [k.value for k in AttackKind]

# |E1' - E1| must exceed 2^-2L for every compressed model
COMPRESSION_BOUND = 2.0 ** -40


def test_honest_instance_is_accepted(honest):
    assert verify_instance(honest).verdict is Verdict.ACCEPT


@pytest.mark.parametrize("kind", EXACT)
def test_attack_fails_at_its_step(honest, kind):
    spec = AttackSpec(kind, seed=3)
    report = verify_instance(honest, apply_attack(spec, honest))
    assert report.verdict is Verdict.REJECT
    assert report.failed_step is spec.expected_step, report.detail


def test_poisoned_model_passes_the_cryptographic_steps(honest):
    tampered = apply_attack(AttackSpec("poison-crafted"), honest)
    report = verify_instance(honest, tampered)
    assert report.failed_step is FailedStep.STEP4_CONVERGENCE
    assert abs(report.e1 - report.e2) > honest.config.convergence_threshold


def test_generator_scaling_needs_the_owners_signature(honest):
    plain = verify_instance(honest, apply_attack(AttackSpec("case-4.5"), honest))
    assert plain.failed_step is FailedStep.STEP1_SIGNATURE
    resigned_spec = AttackSpec("case-4.5", resign=True)
    resigned = verify_instance(honest, apply_attack(resigned_spec, honest))
    assert resigned.verdict is Verdict.ACCEPT
    assert resigned_spec.expected_step is FailedStep.NONE


@pytest.mark.parametrize(
    "spec",
    [AttackSpec("compress-lowprec", bits=8), AttackSpec("compress-lowprec", bits=16),
     AttackSpec("compress-prune", prune_fraction=0.10), AttackSpec("compress-prune", prune_fraction=0.25)],
    ids=lambda s: s.label,
)
def test_compression_records_both_gaps(honest, spec):
    tampered = apply_attack(spec, honest)
    assert tampered.error_gap is not None and tampered.error_gap > COMPRESSION_BOUND
    assert tampered.pre_retrain_gap is not None
    assert tampered.proof.s1 == honest.proof.s1


def test_attacks_are_deterministic(honest):
    for kind in ("byzantine-neurons", "arbitrary-weights", "compress-prune", "case-4.1"):
        spec = AttackSpec(kind, seed=11)
        a, b = apply_attack(spec, honest), apply_attack(spec, honest)
        assert encode_proof(a.proof) == encode_proof(b.proof)
        assert a.update.equals(b.update)


def test_truncate_mantissa_keeps_leading_bits():
    x = np.array([1.0, 0.7, -0.3333, 0.0])
    out = truncate_mantissa(x, 8)
    assert out[0] == 1.0 and out[3] == 0.0
    assert np.all(np.abs(out) <= np.abs(x))
    assert np.all(np.abs(out - x) <= np.abs(x) * 2.0 ** -7)
    mantissa, _ = np.frexp(out)
    assert np.all(mantissa * 256 == np.trunc(mantissa * 256))


def test_prune_masks_drop_the_requested_share(honest):
    masks = prune_masks(honest.initial, 0.25, np.random.default_rng(0))
    total = sum(m.size for m in masks)
    zeros = sum(int((m == 0).sum()) for m in masks)
    assert zeros == max(1, round(0.25 * total))


def test_spec_validation():
    with pytest.raises(UnknownAttackError):
        AttackSpec("flip-labels")
    with pytest.raises(ConfigError):
        AttackSpec("compress-lowprec", bits=12)
    with pytest.raises(ConfigError):
        AttackSpec("compress-prune", prune_fraction=0.5)
    with pytest.raises(ConfigError):
        parse_attack("case-1", colour="red")
    assert parse_attack("compress-prune", prune_fraction=None).prune_fraction == 0.10
    assert AttackSpec(AttackKind.WRONG_E2).kind == "wrong-E2"


def test_registry_covers_every_kind_and_case():
    names = set(attack_names())
    assert {k.value for k in AttackKind} <= names
    assert {c.value for c in TamperCase} <= names
    labels = [s.label for s in default_specs()]
    assert "compress-lowprec-16" in labels and "compress-prune-0.25" in labels
    assert "case-4.5-resigned" in labels


def test_soundness_matrix(lab_configs, params, transparent):
    rows = run_soundness_matrix(lab_configs, 10, params=params, backend=transparent)
    specs = default_specs()
    assert len(rows) == len(lab_configs) * 10 * (len(specs) + 1)
    assert all(row.as_expected for row in rows), [r for r in rows if not r.as_expected]
    compressed = [r for r in rows if r.kind.startswith("compress-")]
    assert len(compressed) == len(lab_configs) * 10 * 4
    assert all(r.error_gap > COMPRESSION_BOUND for r in compressed), compressed
    text = write_soundness_csv(rows)
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert len(text.splitlines()) == len(rows) + 1


@pytest.mark.parametrize("spec", default_specs(), ids=lambda s: s.label)
def test_basic_and_unique_proofs_agree(lab_configs, params, transparent, spec):
    outcomes = {}
    for mode in ProofMode:
        rows = run_soundness_matrix(
            lab_configs[:1], 10, [spec], params=params, backend=transparent, mode=mode, serialize=True
        )
        assert len(rows) == 20
        outcomes[mode] = [(r.kind, r.config_id, r.trial, r.verdict, r.failed_step) for r in rows]
        assert all(r.as_expected for r in rows)
    assert outcomes[ProofMode.BASIC] == outcomes[ProofMode.UNIQUE]


def test_soundness_csv_to_stream():
    from veridl.adversary import SoundnessRow

    buf = io.StringIO()
    rows = [SoundnessRow("case-3", "c1", 0, "reject", "step2-E1", "step2-E1", 1e-12)]
    assert write_soundness_csv(rows, buf) == ""
    assert buf.getvalue().splitlines()[1] == "case-3,c1,0,reject,step2-E1,1e-12,step2-E1,"
