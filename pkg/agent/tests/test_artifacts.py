import dataclasses

import numpy as np
import pytest

from veridl import artifacts as art
from veridl.errors import ArtifactFormatError, MalformedProofError
from veridl.protocol import ProofMode


def test_keys_roundtrip(keys):
    secret, public = keys
    pk = art.decode_public_key(art.encode_public_key(public))
    assert pk.backend is public.backend
    assert pk.v == public.v and pk.v.g2 is not None
    assert pk.security_parameter == 128
    assert art.decode_secret_key(art.encode_secret_key(secret)).scalar == secret.scalar


def test_signature_roundtrip(honest):
    sig = art.decode_signature(art.encode_signature(honest.signature))
    assert sig.gamma == honest.signature.gamma


def test_model_roundtrip_is_bit_exact(honest):
    model = art.decode_model(art.encode_model(honest.update))
    assert model.equals(honest.update)
    assert all(a.dtype == np.float64 for a in model.arrays())


def test_model_rejects_non_finite(honest):
    bad = honest.update.copy()
    bad.output[0] = np.nan
    with pytest.raises(ArtifactFormatError):
        art.decode_model(art.encode_model(bad))


def test_dataset_roundtrip(small_dataset, params):
    back = art.decode_dataset(art.encode_dataset(small_dataset), params)
    assert back.features == small_dataset.features and back.labels == small_dataset.labels


def test_proof_roundtrip_keeps_every_field(honest):
    for mode in ProofMode:
        proof = dataclasses.replace(honest.proof, mode=mode)
        back = art.decode_proof(art.encode_proof(proof))
        assert back.backend is proof.backend
        assert (back.s1, back.s2, back.hidden_sizes, back.input_dim) == (proof.s1, proof.s2, proof.hidden_sizes, proof.input_dim)
        assert back.digests == proof.digests
        assert back.witnesses == proof.witnesses
        assert back.layer1_increments == proof.layer1_increments
        assert back.output_increments == proof.output_increments
        assert art.encode_proof(back) == art.encode_proof(proof)


def test_truncated_proofs_are_malformed(honest):
    data = art.encode_proof(honest.proof)
    for cut in (0, 5, 6, 20, len(data) // 2, len(data) - 1):
        with pytest.raises(MalformedProofError):
            art.decode_proof(data[:cut])
    with pytest.raises(ArtifactFormatError):
        art.decode_proof(data + b"\x00")


def test_header_checks(honest):
    data = bytearray(art.encode_proof(honest.proof))
    with pytest.raises(ArtifactFormatError, match="magic"):
        art.decode_proof(b"XXXX" + bytes(data[4:]))
    wrong_version = bytes(data[:4]) + b"\x09" + bytes(data[5:])
    with pytest.raises(ArtifactFormatError, match="version"):
        art.decode_proof(wrong_version)
    with pytest.raises(ArtifactFormatError, match="expected a MODEL"):
        art.decode_model(bytes(data))
    data[6] = 0x7E
    with pytest.raises(ArtifactFormatError, match="backend"):
        art.decode_proof(bytes(data))


def test_bundles_and_json():
    parts = {"a": b"\x01\x02", "dataset": b""}
    assert art.decode_bundle(art.encode_bundle(art.ArtifactType.TASK, parts), art.ArtifactType.TASK) == parts
    payload = {"verdict": "reject", "failedStep": "step2-z"}
    assert art.decode_json(art.encode_json(art.ArtifactType.REPORT, payload), art.ArtifactType.REPORT) == payload


def test_files_are_type_checked(tmp_path, honest):
    path = art.write_artifact(tmp_path / "sub" / "updates.bin", art.encode_model(honest.update))
    assert art.read_artifact(path, art.ArtifactType.MODEL)
    with pytest.raises(ArtifactFormatError):
        art.read_artifact(path, art.ArtifactType.PROOF)
    with pytest.raises(ArtifactFormatError):
        art.write_artifact(tmp_path / "junk.bin", b"not an artifact")
