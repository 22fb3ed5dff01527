"""``veridl`` command line.

Exit codes: 0 accept/success, 2 reject, 1 malformed proof or artifact, 3 I/O,
4 parse/config/overflow, 5 no convergence, 6 wire protocol, 7 unknown attack.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, List, Optional, Sequence

from . import artifacts as art
from .adversary import LabConfig, parse_attack, run_soundness_matrix, write_soundness_csv
from .bench import bench, fit_r2, write_bench_csv
from .config import RunConfig, configure_logging, load_run_config, network_for
from .datasets import load_csv, synthetic_dataset
from .dnn.network import NetworkConfig
from .dnn.training import initial_model
from .errors import ConfigError, VeriDLError
from .pairing import genkey, get_backend
from .protocol import ProofMode, Verdict
from .roles import owner_setup, train_and_certify, verify_submission

_log = logging.getLogger("veridl.cli")

EXIT_OK = 0
EXIT_REJECT = 2
EXIT_IO = 3


def _config(args: argparse.Namespace, **extra: Any) -> RunConfig:
    return load_run_config(
        args.config,
        backend=getattr(args, "backend", None),
        seed=getattr(args, "seed", None),
        mode=getattr(args, "mode", None),
        **extra,
    )


def _dataset(path: Optional[str], cfg: RunConfig):
    source = path or cfg.dataset
    if not source:
        raise ConfigError("no dataset: pass --data or set 'dataset' in the config", key="dataset")
    return load_csv(source, cfg.params)


def _attack_from(args: argparse.Namespace, cfg: RunConfig):
    if args.attack:
        return parse_attack(
            args.attack,
            bits=args.attack_bits,
            prune_fraction=args.attack_fraction,
            seed=args.attack_seed if args.attack_seed is not None else cfg.seed,
        )
    if cfg.attack:
        options = dict(cfg.attack)
        kind = options.pop("kind", None)
        if not kind:
            raise ConfigError("'attack' needs a 'kind'", key="attack.kind")
        options.setdefault("seed", cfg.seed)
        return parse_attack(kind, **options)
    return None


# ---------------- subcommands ----------------
def cmd_genkey(args: argparse.Namespace) -> int:
    cfg = _config(args)
    secret, public = genkey(args.security, seed=args.key_seed, backend=get_backend(cfg.backend))
    out = Path(args.out)
    pk = art.write_artifact(out / "public.key", art.encode_public_key(public))
    sk = art.write_artifact(out / "secret.key", art.encode_secret_key(secret))
    print(f"public key: {pk}")
    print(f"secret key: {sk}")
    return EXIT_OK


def cmd_setup(args: argparse.Namespace) -> int:
    cfg = _config(args)
    dataset = _dataset(args.data, cfg)
    secret = art.decode_secret_key(art.read_artifact(args.secret_key, art.ArtifactType.SECRET_KEY))
    public = art.decode_public_key(art.read_artifact(args.public_key, art.ArtifactType.PUBLIC_KEY))
    signature = owner_setup(dataset, secret, public, network_for(cfg, dataset.input_dim))
    path = art.write_artifact(args.out, art.encode_signature(signature))
    print(f"signature: {path}")
    return EXIT_OK


def cmd_train_certify(args: argparse.Namespace) -> int:
    cfg = _config(args, output_dir=args.out)
    dataset = _dataset(args.data, cfg)
    public = art.decode_public_key(art.read_artifact(args.public_key, art.ArtifactType.PUBLIC_KEY))
    network = network_for(cfg, dataset.input_dim)
    initial = None
    if args.initial:
        initial = art.decode_model(art.read_artifact(args.initial, art.ArtifactType.MODEL))
    result = train_and_certify(
        dataset,
        network,
        cfg.params,
        public,
        initial=initial,
        seed=cfg.seed,
        mode=cfg.mode,
        attack=_attack_from(args, cfg),
    )
    out = Path(cfg.output_dir)
    art.write_artifact(out / "initial.bin", art.encode_model(result.initial))
    art.write_artifact(out / "updates.bin", art.encode_model(result.update))
    proof_path = art.write_artifact(out / "proof.bin", art.encode_proof(result.proof))
    print(f"epochs: {result.training.epochs}")
    print(f"proof: {proof_path} ({proof_path.stat().st_size} bytes, {cfg.mode.value})")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = _config(args)
    initial = art.decode_model(art.read_artifact(args.initial, art.ArtifactType.MODEL))
    update = art.decode_model(art.read_artifact(args.updates, art.ArtifactType.MODEL))
    proof = art.decode_proof(art.read_artifact(args.proof, art.ArtifactType.PROOF))
    signature = art.decode_signature(art.read_artifact(args.signature, art.ArtifactType.SIGNATURE))
    public = art.decode_public_key(art.read_artifact(args.public_key, art.ArtifactType.PUBLIC_KEY))
    report = verify_submission(initial, update, proof, signature, public, cfg)
    if args.report:
        art.write_artifact(args.report, art.encode_json(art.ArtifactType.REPORT, report.to_dict()))
    if report.verdict is Verdict.ACCEPT:
        print("accept")
        return EXIT_OK
    print(f"reject {report.failed_step.value}")
    return EXIT_REJECT


def lab_configs(cfg: RunConfig) -> List[LabConfig]:
    n = cfg.network

    def net(m: int, hidden: Sequence[int]) -> NetworkConfig:
        return NetworkConfig(
            input_dim=m,
            hidden_sizes=tuple(hidden),
            activation=n.activation,
            learning_rate=n.learning_rate,
            convergence_threshold=n.convergence_threshold,
            batch_size=n.batch_size,
            max_epochs=n.max_epochs,
        )

    return [
        LabConfig("c1", net(2, (4,)), samples=20, seed=cfg.seed + 1),
        LabConfig("c2", net(3, (4, 3)), samples=24, seed=cfg.seed + 2),
        LabConfig("c3", net(4, (3, 3)), samples=30, seed=cfg.seed + 3),
    ]


def cmd_attack(args: argparse.Namespace) -> int:
    cfg = _config(args)
    specs = None
    if args.kinds:
        specs = [parse_attack(k.strip()) for k in args.kinds.split(",") if k.strip()]
    rows = run_soundness_matrix(
        lab_configs(cfg),
        args.trials,
        specs,
        params=cfg.params,
        backend=get_backend(cfg.backend),
        mode=cfg.mode,
        serialize=args.serialize,
    )
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_soundness_csv(rows, fh)
    else:
        sys.stdout.write(write_soundness_csv(rows))
    if cfg.ledger:
        from .api.store import Ledger

        Ledger.configure(cfg.ledger).record_soundness(rows)
    missed = [r for r in rows if not r.as_expected]
    for r in missed:
        _log.warning("%s on %s trial %d: got %s, expected %s", r.kind, r.config_id, r.trial, r.failed_step, r.expected_step)
    print(f"{len(rows) - len(missed)}/{len(rows)} rows as expected", file=sys.stderr)
    return EXIT_OK if not missed else EXIT_REJECT


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _config(args)
    if args.data or cfg.dataset:
        dataset = _dataset(args.data, cfg)
    else:
        dataset = synthetic_dataset(args.samples, args.input_dim, seed=cfg.seed, params=cfg.params)
    widths = [int(w) for w in args.widths.split(",") if w.strip()]
    secret, public = genkey(seed=f"bench-{cfg.seed}", backend=get_backend(cfg.backend))
    rows = bench(widths, dataset, secret, public, network_for(cfg, dataset.input_dim), cfg.params, seed=cfg.seed)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_bench_csv(rows, fh)
    else:
        sys.stdout.write(write_bench_csv(rows))
    if len(rows) >= 2:
        r2 = fit_r2([r.size_driver for r in rows], [r.proof_bytes_basic for r in rows])
        print(f"proof size vs N(m+d1)+m*d1: R^2 = {r2:.6f}", file=sys.stderr)
    return EXIT_OK


def _endpoint(text: str):
    from .wire import Endpoint

    host, _, port = text.rpartition(":")
    try:
        return Endpoint(host or "127.0.0.1", int(port))
    except ValueError:
        raise ConfigError(f"expected HOST:PORT, got {text!r}") from None


def cmd_demo_serve(args: argparse.Namespace) -> int:
    from .wire import ArtifactServer, ServerRole, VerifierRole

    cfg = _config(args)
    if args.role == "verifier":
        if not args.public_key:
            raise ConfigError("the verifier needs --public-key")
        public = art.decode_public_key(art.read_artifact(args.public_key, art.ArtifactType.PUBLIC_KEY))
        role = VerifierRole(public, cfg)
    else:
        role = ServerRole(cfg, _attack_from(args, cfg))
    with ArtifactServer((args.host, args.port), role) as srv:
        print(f"{role.name} listening on {args.host}:{srv.port}", flush=True)
        try:
            srv.serve(args.max_requests)
        except KeyboardInterrupt:
            pass
    return EXIT_OK


def cmd_demo_run(args: argparse.Namespace) -> int:
    from .wire import run_owner

    cfg = _config(args)
    dataset = _dataset(args.data, cfg)
    secret = art.decode_secret_key(art.read_artifact(args.secret_key, art.ArtifactType.SECRET_KEY))
    public = art.decode_public_key(art.read_artifact(args.public_key, art.ArtifactType.PUBLIC_KEY))
    initial = initial_model(network_for(cfg, dataset.input_dim), cfg.seed)
    report = run_owner(dataset, secret, public, initial, cfg, _endpoint(args.verifier), _endpoint(args.server))
    if report.get("verdict") == Verdict.ACCEPT.value:
        print("accept")
        return EXIT_OK
    print(f"reject {report.get('failedStep')}")
    return EXIT_REJECT


def cmd_agent(args: argparse.Namespace) -> int:
    from .api.server import launch

    launch(host=args.host, port=args.port)
    return EXIT_OK


# ---------------- parser ----------------
def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config (default: VERIDL_CONFIG)")
    p.add_argument("--backend", choices=["bls12-381", "transparent"])
    p.add_argument("--seed", type=int)


def _add_attack(p: argparse.ArgumentParser) -> None:
    p.add_argument("--attack", help="misbehave before writing (attack kind or case name)")
    p.add_argument("--attack-bits", type=int, choices=[8, 16])
    p.add_argument("--attack-fraction", type=float, help="prune fraction in [0.10, 0.25]")
    p.add_argument("--attack-seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="veridl", description="Verifiable training for outsourced deep learning")
    parser.add_argument("--log-level", help="overrides VERIDL_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("genkey", help="generate the owner's key pair")
    _add_common(p)
    p.add_argument("--security", type=int, default=128)
    p.add_argument("--key-seed", help="derive the secret deterministically")
    p.add_argument("--out", default="keys")
    p.set_defaults(func=cmd_genkey)

    p = sub.add_parser("setup", help="sign the dataset")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--secret-key", required=True)
    p.add_argument("--public-key", required=True)
    p.add_argument("--out", default="signature.bin")
    p.set_defaults(func=cmd_setup)

    p = sub.add_parser("train-certify", help="train to convergence and build the proof")
    _add_common(p)
    p.add_argument("--mode", choices=[m.value for m in ProofMode])
    p.add_argument("--data")
    p.add_argument("--public-key", required=True)
    p.add_argument("--initial", help="W_0 artifact (default: seeded random)")
    p.add_argument("--out")
    _add_attack(p)
    p.set_defaults(func=cmd_train_certify)

    p = sub.add_parser("verify", help="check updates and proof")
    _add_common(p)
    p.add_argument("--initial", required=True)
    p.add_argument("--updates", required=True)
    p.add_argument("--proof", required=True)
    p.add_argument("--signature", required=True)
    p.add_argument("--public-key", required=True)
    p.add_argument("--report", help="also write the report artifact")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("attack", help="run the soundness matrix")
    _add_common(p)
    p.add_argument("--mode", choices=[m.value for m in ProofMode])
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--kinds", help="comma-separated subset (default: all)")
    p.add_argument("--serialize", action="store_true", help="round-trip proofs through the artifact codec")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bench", help="proof size and timing per first-layer width")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--input-dim", type=int, default=4)
    p.add_argument("--widths", default="4,8,16,32")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("demo-serve", help="run the verifier or server role over TCP")
    _add_common(p)
    p.add_argument("--mode", choices=[m.value for m in ProofMode])
    p.add_argument("--role", choices=["verifier", "server"], required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--public-key")
    p.add_argument("--max-requests", type=int)
    _add_attack(p)
    p.set_defaults(func=cmd_demo_serve)

    p = sub.add_parser("demo-run", help="play the data owner against running demo roles")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--secret-key", required=True)
    p.add_argument("--public-key", required=True)
    p.add_argument("--verifier", required=True, help="HOST:PORT")
    p.add_argument("--server", required=True, help="HOST:PORT")
    p.set_defaults(func=cmd_demo_run)

    p = sub.add_parser("agent", help="start the HTTP verifier agent")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_agent)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    func: Callable[[argparse.Namespace], int] = args.func
    try:
        return func(args)
    except VeriDLError as e:
        print(f"error: {e.code}: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error: IO: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
