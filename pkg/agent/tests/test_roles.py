import pytest

from veridl.adversary import AttackSpec
from veridl.artifacts import ArtifactType, encode_bundle
from veridl.config import load_run_config, network_for
from veridl.errors import ArtifactFormatError, MalformedProofError
from veridl.roles import (
    owner_setup,
    read_result,
    read_task,
    result_bundle,
    task_bundle,
    train_and_certify,
    verify_submission,
)


@pytest.fixture
def run_cfg():
    return load_run_config(backend="transparent", hidden_sizes=[3], learning_rate=0.5)


def test_task_bundle(honest, params):
    dataset, public, initial = read_task(task_bundle(honest.dataset, honest.public, honest.initial), params)
    assert dataset.features == honest.dataset.features
    assert public.v == honest.public.v
    assert initial.equals(honest.initial)


def test_result_bundle(honest):
    initial, update, proof = read_result(result_bundle(honest.initial, honest.update, honest.proof))
    assert initial.equals(honest.initial) and update.equals(honest.update)
    assert proof.s1 == honest.proof.s1


def test_bundles_must_be_complete(params):
    with pytest.raises(ArtifactFormatError, match="initial"):
        read_task(encode_bundle(ArtifactType.TASK, {"dataset": b"", "public_key": b""}), params)


def test_roles_end_to_end(run_cfg, keys, small_dataset):
    secret, public = keys
    network = network_for(run_cfg, small_dataset.input_dim)
    signature = owner_setup(small_dataset, secret, public, network)
    out = train_and_certify(small_dataset, network, run_cfg.params, public, seed=2)
    assert out.tampered is None
    assert verify_submission(out.initial, out.update, out.proof, signature, public, run_cfg).accepted

    bad = train_and_certify(
        small_dataset, network, run_cfg.params, public, seed=2, attack=AttackSpec("wrong-E2"), signature=signature
    )
    assert bad.tampered is not None
    report = verify_submission(bad.initial, bad.update, bad.proof, signature, public, run_cfg)
    assert report.failed_step.value == "step3-E2"


def test_hidden_sizes_come_from_the_run_config(honest):
    cfg = load_run_config(backend="transparent", hidden_sizes=[5], learning_rate=0.5)
    with pytest.raises(MalformedProofError):
        verify_submission(honest.initial, honest.update, honest.proof, honest.signature, honest.public, cfg)
