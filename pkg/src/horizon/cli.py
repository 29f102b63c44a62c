"""Command-line entry point: ``horizon {run,prove,verify,bench,vectors}``.

Exit status is 0 on success, 1 when a run or check fails, 2 on bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .bench import build_chain, format_table, mint_cost_table, proof_size_table, synced_contract
from .contract import BridgeContract, MintTx, StatelessMintTx, decode_calldata, encode_calldata
from .encoding import DecodeError
from .fullnode import build_pob, build_stateless_proof
from .sim import ScenarioError, bundled_scenarios, load_scenario, run, write_outputs
from .vectors import FORMAT as VECTOR_FORMAT
from .vectors import check_vectors, write_vectors

PROOF_FORMAT = "horizon-proof/1"


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("values must be positive integers")
    return values


def _resolve_scenario(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    for candidate in bundled_scenarios():
        if candidate.stem == name or candidate.name == name or candidate.stem == path.stem:
            return candidate
    raise ScenarioError(name, "no such file or bundled scenario")


def cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(_resolve_scenario(args.scenario))
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.variant is not None:
        overrides["variant"] = args.variant
    if args.sync_rule is not None:
        overrides["sync_rule"] = args.sync_rule
    if args.delta is not None:
        overrides["delta"] = args.delta
    if args.epochs is not None:
        overrides["max_ticks"] = args.epochs * scenario.epoch_length
    if overrides:
        scenario = replace(scenario, **overrides)
        scenario.validate()
    result = run(scenario)
    write_outputs(result, args.out)
    sys.stdout.write(result.summary())
    return 1 if result.violations else 0


def cmd_prove(args: argparse.Namespace) -> int:
    chain, burn = build_chain(args.delta, args.epochs, seed=args.seed)
    if args.variant == "stateless":
        tx = StatelessMintTx("alice", burn.amount, burn, build_stateless_proof(chain, burn.id))
    else:
        tx = MintTx("alice", burn.amount, burn, build_pob(chain, burn.id))
    doc = {
        "format": PROOF_FORMAT,
        "seed": args.seed,
        "delta": args.delta,
        "epochs": args.epochs,
        "variant": args.variant,
        "calldata": encode_calldata(tx).hex(),
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "proof.json"
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {path} ({len(doc['calldata']) // 2} calldata bytes)")
    return 0


def _verify_proof(doc: dict) -> tuple[bool, str]:
    chain, _ = build_chain(doc["delta"], doc["epochs"], seed=doc["seed"])
    if doc["variant"] == "stateless":
        contract = BridgeContract(
            delta=chain.params.delta, epoch_length=chain.params.epoch_length, genesis_committee=chain.headers[0].pks
        )
    else:
        contract = synced_contract(chain)
    data = bytes.fromhex(doc["calldata"])
    try:
        decode_calldata(data)
    except DecodeError as exc:
        return False, f"malformed calldata: {exc}"
    receipt = contract.apply_calldata(data, "alice")
    if receipt.accepted:
        return True, f"accepted (gas {float(receipt.gas.weighted()):.1f})"
    return False, f"rejected: {receipt.reason.value}"


def cmd_verify(args: argparse.Namespace) -> int:
    path = Path(args.path)
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    if not files:
        print(f"{path}: nothing to verify", file=sys.stderr)
        return 2
    failed = False
    for f in files:
        try:
            doc = json.loads(f.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"{f.name}: unreadable: {exc}")
            failed = True
            continue
        kind = doc.get("format") if isinstance(doc, dict) else None
        if kind == VECTOR_FORMAT:
            errors = check_vectors(doc)
            ok, detail = not errors, "; ".join(errors) or "ok"
        elif kind == PROOF_FORMAT:
            ok, detail = _verify_proof(doc)
        else:
            ok, detail = False, f"unknown format {kind!r}"
        print(f"{f.name}: {'PASS' if ok else 'FAIL'} {detail}")
        failed |= not ok
    return 1 if failed else 0


def cmd_bench(args: argparse.Namespace) -> int:
    deltas = args.delta or [16]
    epochs = args.epochs or ([1, 4, 16] if args.variant == "stateful" else [1, 2, 4])
    text = format_table(mint_cost_table(deltas, epochs, args.variant, args.block_size))
    text += "\n" + format_table(proof_size_table())
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "bench.tsv").write_text(text, encoding="utf-8")
    return 0


def cmd_vectors(args: argparse.Namespace) -> int:
    for path in write_vectors(args.out):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="horizon", description="Bridge protocol simulator and tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and write trace, metrics and summary")
    p.add_argument("--scenario", required=True, help="scenario file, or the name of a bundled scenario")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="out")
    p.add_argument("--variant", choices=("stateful", "stateless"))
    p.add_argument("--sync-rule", choices=("strict", "monotonic"))
    p.add_argument("--delta", type=int)
    p.add_argument("--epochs", type=int, help="cap the run at this many epochs of ticks")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("prove", help="build a mint proof on a synthetic chain")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.add_argument("--variant", choices=("stateful", "stateless"), default="stateful")
    p.add_argument("--delta", type=int, default=16)
    p.add_argument("--epochs", type=int, default=2)
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("verify", help="check a proof file or a directory of vectors")
    p.add_argument("path")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="mint cost and proof size tables")
    p.add_argument("--delta", type=_int_list, help="comma-separated checkpoint intervals")
    p.add_argument("--epochs", type=_int_list, help="comma-separated chain lengths in epochs")
    p.add_argument("--variant", choices=("stateful", "stateless"), default="stateful")
    p.add_argument("--block-size", type=int, default=4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("vectors", help="write golden conformance vectors")
    p.add_argument("--out", default="vectors")
    p.set_defaults(func=cmd_vectors)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
