"""helo command line: keygen, simulate, accuracy, bench, prove, verify.

Exit codes: 0 success, 1 a verification or threshold failed, 2 bad usage or
unreadable input.  Settings resolve as flag, then HELO_* environment
variable, then the --config JSON file, then the built-in default.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from helo import elo, zkrp
from helo import primitives as P
from helo.ckks import scheme as S
from helo.ckks.params import LABELS, ParamsError, params_for

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("helo")


class UsageError(Exception):
    pass


DEFAULTS = {
    "params": None,
    "ladder": None,
    "seed": 0,
    "out": "helo-out",
    "label": "toy",
    "k": 32.0,
    "matches": 3,
    "users": None,
    "updates": None,
}
CASTS = {"seed": int, "k": float, "matches": int, "users": int, "updates": int}


@dataclass(frozen=True)
class CliConfig:
    params: str | None
    ladder: str | None
    seed: int
    out: Path
    label: str
    k: float
    matches: int
    users: int | None
    updates: int | None

    def check(self) -> "CliConfig":
        if self.label not in LABELS:
            raise UsageError(f"--label must be one of {', '.join(LABELS)}")
        if self.matches < 3:
            raise UsageError("matches per update (N) must be at least 3")
        if self.k <= 0:
            raise UsageError("K must be positive")
        for name in ("params", "ladder"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise UsageError(f"{name} file {path} is not readable")
        return self

    def ladder_obj(self) -> elo.RankLadder:
        return elo.RankLadder.load(self.ladder)


def resolve(args: argparse.Namespace, env=os.environ) -> CliConfig:
    """Flags beat HELO_* variables, which beat the config file."""
    file_cfg: dict = {}
    cfg_path = args.config or env.get("HELO_CONFIG")
    if cfg_path:
        try:
            file_cfg = json.loads(Path(cfg_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {cfg_path}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must hold a JSON object")
    values = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        if flag is not None:
            v = flag
        elif f"HELO_{key.upper()}" in env:
            v = env[f"HELO_{key.upper()}"]
        elif key in file_cfg:
            v = file_cfg[key]
        else:
            v = default
        if v is not None and key in CASTS:
            try:
                v = CASTS[key](v)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"bad value for {key}: {v!r}") from exc
        values[key] = v
    values["out"] = Path(values["out"])
    return CliConfig(**values).check()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_keygen(cfg: CliConfig, args) -> int:
    """SP gets public material only; secret keys land in the KC directory."""
    from helo.protocol.roles import derive_seed
    params = params_for(cfg.label, cfg.params)
    users = cfg.users if cfg.users is not None else 2
    kc_dir, sp_dir = cfg.out / "kc", cfg.out / "sp"
    kc_dir.mkdir(parents=True, exist_ok=True)
    sp_dir.mkdir(parents=True, exist_ok=True)
    tag = derive_seed(cfg.seed, "setup").to_bytes(32, "little")
    kc_seed = derive_seed(cfg.seed, "kc-sign").to_bytes(32, "little")
    signing = P.SignatureKeys.generate(kc_seed)
    ppc = P.CommitParams.setup(b"helo-commitments/" + tag)
    pk_sp, vk_sp = zkrp.setup("rccc", b"helo-nizk/" + tag)
    (kc_dir / "kc_signing.key").write_bytes(kc_seed)
    for d in (kc_dir, sp_dir):
        (d / "kc_verify.key").write_bytes(signing.verify_key)
        (d / "commit_params.bin").write_bytes(ppc.to_bytes())
        (d / "proof_key.bin").write_bytes(pk_sp.to_bytes())
    (sp_dir / "verify_key.bin").write_bytes(vk_sp.to_bytes())
    sizes = {}
    for k in range(users):
        uid = f"u{k:04d}"
        kb = S.keygen(params, derive_seed(cfg.seed, "he-key", uid))
        blobs = {
            sp_dir / f"{uid}.pk": S.serialize_public_key(kb.pk),
            sp_dir / f"{uid}.rlk": S.serialize_switch_key(params, kb.rlk),
            kc_dir / f"{uid}.pk": S.serialize_public_key(kb.pk),
            kc_dir / f"{uid}.sk": S.serialize_secret_key(kb.sk),
        }
        for path, blob in blobs.items():
            path.write_bytes(blob)
            sizes[path.suffix[1:]] = len(blob)
    predicted = S.key_sizes(params)
    print(f"wrote keys for {users} users under {cfg.out}")
    for name, key in (("public key", "pk"), ("secret key", "sk"), ("relinearization key", "rlk")):
        pred = predicted[{"pk": "public_key", "sk": "secret_key", "rlk": "relin_key"}[key]]
        print(f"  {name:22s} {sizes[key]:>10d} bytes (predicted {pred})")
    return EXIT_OK


def cmd_simulate(cfg: CliConfig, args) -> int:
    from helo.harness import report
    from helo.harness.simulate import SimConfig, Simulation
    script, start, noise = None, None, 50
    if args.script:
        # Either a bare list of matches, or {"ratings": [...], "noise": A, "matches": [...]}.
        try:
            doc = json.loads(Path(args.script).read_text())
            if isinstance(doc, dict):
                start = tuple(float(r) for r in doc.get("ratings", ())) or None
                noise = int(doc.get("noise", noise))
                doc = doc["matches"]
            script = tuple((str(a), str(b), float(s)) for a, b, s in doc)
        except (OSError, ValueError, TypeError, KeyError) as exc:
            raise UsageError(f"bad script file: {exc}") from exc
    rounds = args.rounds if args.rounds is not None else 1
    users = cfg.users if cfg.users is not None else 10
    if users < 2 or rounds < 0:
        raise UsageError("need at least two users and a non-negative round count")
    sim_cfg = SimConfig(users=users, cycles=rounds, seed=cfg.seed, label=cfg.label, k_factor=cfg.k,
                        matches=cfg.matches, mode=args.mode, params_path=cfg.params, ladder_path=cfg.ladder,
                        script=script, start_ratings=start, noise_amplitude=noise)
    sim = Simulation(sim_cfg)
    rep = sim.run()
    tag = report.config_tag(rep.config)
    doc = rep.to_dict()
    report.write_json(doc, cfg.out / f"simulation_{tag}.json", "simulation")
    trace = sim.system.net.trace
    report.write_json(trace, cfg.out / f"trace_{tag}.json", "trace")
    report.write_csv(rep.standings, cfg.out / f"standings_{tag}.csv")
    print(f"{rep.matches} matches, {rep.verified} verifications, {rep.fairness_violations} fairness violations"
          f" ({rep.seconds:.1f} s)")
    for row in rep.standings[:10]:
        print(f"  {row['user']}  {row['rank']:12s} {row['rating']:9.2f}  cycles={row['cycles']}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_accuracy(cfg: CliConfig, args) -> int:
    from helo.harness import plotting, report
    from helo.harness.accuracy import MAX_LIMIT, MEAN_LIMIT, ExperimentConfig, run_accuracy
    exp = ExperimentConfig(label=cfg.label, updates=cfg.updates or 1000, seed=cfg.seed, k_factor=cfg.k,
                           opponents=cfg.matches, params_path=cfg.params, symmetric=args.symmetric)
    rep = run_accuracy(exp)
    tag = report.config_tag(rep.config)
    report.write_json(rep.to_dict(), cfg.out / f"accuracy_{tag}.json", "accuracy")
    report.write_csv(rep.rows(), cfg.out / f"accuracy_{tag}.csv")
    plotting.precision_series(rep.precision_bits, cfg.out / f"precision_{tag}.png", bound_bits=rep.noise_bound_bits)
    plotting.diff_histogram(rep.diffs, cfg.out / f"diffs_{tag}.png")
    print(f"updates {exp.updates}: mean {rep.mean_diff:.3e}  std {rep.std_dev:.3e}  "
          f"min {rep.min_diff:.3e}  max {rep.max_diff:.3e}  ({rep.seconds:.1f} s)")
    print(f"limits: mean <= {MEAN_LIMIT:g}, max <= {MAX_LIMIT:g}; "
          f"published 128-bit figures: mean {rep.reference_mean_diff:.3e}, max {rep.reference_max_diff:.3e}")
    print(f"precision >= 20 bits on {100 * rep.precision_share:.1f}% of updates")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_bench(cfg: CliConfig, args) -> int:
    from helo.harness import plotting, report
    from helo.harness.bench import BenchConfig, run_bench
    labels = tuple(args.labels) if args.labels else (cfg.label,)
    for lab in labels:
        if lab not in LABELS:
            raise UsageError(f"unknown label {lab}")
    bc = BenchConfig(labels=labels, reps=args.reps, seed=cfg.seed, params_path=cfg.params)
    rep = run_bench(bc)
    tag = report.config_tag(rep.config)
    report.write_json(rep.to_dict(), cfg.out / f"bench_{tag}.json", "bench")
    report.write_csv(rep.rows, cfg.out / f"bench_{tag}.csv")
    report.write_csv(rep.sizes, cfg.out / f"sizes_{tag}.csv")
    plotting.bench_bars(rep.rows, cfg.out / f"bench_{tag}.png")
    for r in rep.rows:
        print(f"  {r['label']:4s} {r['operation']:13s} {r['mean_ms']:10.3f} ms")
    return EXIT_OK


def _statement(doc: dict, pp: P.CommitParams, commitment: bytes) -> zkrp.RangeStatement:
    return zkrp.RangeStatement(pp, P.Commitment(commitment), int(doc["low"]), int(doc["high"]))


def _setup(doc: dict) -> tuple[P.CommitParams, zkrp.ProofKey]:
    seed = str(doc.get("setup", "helo-cli")).encode()
    return P.CommitParams.setup(b"helo-commitments/" + seed), zkrp.setup("range", b"helo-nizk/" + seed)[0]


def _read_json(path: str, what: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {what} file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"{what} file must hold a JSON object")
    return doc


def cmd_prove(cfg: CliConfig, args) -> int:
    """Statement {low, high, setup, commitment?}; witness {value, blind}.  Fills in the commitment if absent."""
    stmt_doc = _read_json(args.statement, "statement")
    wit = _read_json(args.witness, "witness")
    try:
        value, blind = int(wit["value"]), int(wit["blind"])
        pp, key = _setup(stmt_doc)
        commitment = bytes.fromhex(stmt_doc["commitment"]) if "commitment" in stmt_doc else \
            P.commit(pp, value, blind).point
        stmt = _statement(stmt_doc, pp, commitment)
    except (KeyError, ValueError, P.PrimitiveError) as exc:
        raise UsageError(f"bad statement or witness: {exc}") from exc
    try:
        proof = zkrp.prove(key, stmt, zkrp.Witness(value, blind))
    except zkrp.ProofError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = Path(args.proof_out) if args.proof_out else cfg.out / "proof.bin"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(zkrp.serialize_proof(proof))
    stmt_doc = {**stmt_doc, "commitment": commitment.hex()}
    Path(str(out) + ".statement.json").write_text(json.dumps(stmt_doc, indent=2) + "\n")
    print(f"wrote {out} ({out.stat().st_size} bytes)")
    return EXIT_OK


def cmd_verify(cfg: CliConfig, args) -> int:
    stmt_doc = _read_json(args.statement, "statement")
    try:
        pp, key = _setup(stmt_doc)
        stmt = _statement(stmt_doc, pp, bytes.fromhex(stmt_doc["commitment"]))
        data = Path(args.proof).read_bytes()
    except (KeyError, ValueError, OSError) as exc:
        raise UsageError(f"bad statement or proof: {exc}") from exc
    ok = zkrp.verify(key, stmt, data)
    print(1 if ok else 0)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default settings")
    common.add_argument("--params", help="parameter-set file")
    common.add_argument("--ladder", help="rank ladder file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--label", help="security label: toy, mid or std")
    common.add_argument("-K", "--k", type=float, dest="k", help="K-factor")
    common.add_argument("-N", "--matches", type=int, help="matches per update")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="helo", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    k = sub.add_parser("keygen", parents=[common], help="write KC, SP and per-user key files")
    k.add_argument("--users", type=int)
    s = sub.add_parser("simulate", parents=[common], help="run users through update cycles")
    s.add_argument("--users", type=int)
    s.add_argument("--rounds", "--cycles", type=int, dest="rounds", help="update cycles per user")
    s.add_argument("--mode", choices=("incremental", "batched"), default="incremental")
    s.add_argument("--script", help="JSON list of [user_a, user_b, score_a] matches")
    a = sub.add_parser("accuracy", parents=[common], help="encrypted vs plaintext update chain")
    a.add_argument("--updates", type=int)
    a.add_argument("--symmetric", action="store_true", help="use the win/draw/loss vs -100/0/+100 pattern")
    b = sub.add_parser("bench", parents=[common], help="per-operation timings and sizes")
    b.add_argument("--labels", nargs="+", help="benchmark several labels")
    b.add_argument("--reps", type=int, default=10)
    pr = sub.add_parser("prove", parents=[common], help="range proof for a committed value")
    pr.add_argument("statement")
    pr.add_argument("witness")
    pr.add_argument("-o", "--proof-out")
    v = sub.add_parser("verify", parents=[common], help="check a range proof; prints 1 or 0")
    v.add_argument("statement")
    v.add_argument("proof")
    return p


COMMANDS = {"keygen": cmd_keygen, "simulate": cmd_simulate, "accuracy": cmd_accuracy, "bench": cmd_bench,
            "prove": cmd_prove, "verify": cmd_verify}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg, args)
    except (UsageError, ParamsError, elo.EloError) as exc:
        print(f"helo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"helo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
