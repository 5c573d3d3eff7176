"""Per-operation timings and serialized sizes."""
from __future__ import annotations

import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from helo import circuit, elo, zkrp
from helo import primitives as P
from helo.ckks import scheme as S
from helo.ckks.params import params_for

OPERATIONS = ("keygen", "enc", "dec", "evalAdd", "evalSub", "evalMulConst", "evalMul", "evalPoly", "refresh",
              "fullUpdate")


@dataclass(frozen=True)
class BenchConfig:
    labels: tuple[str, ...] = ("toy",)
    reps: int = 10
    keygen_reps: int = 2
    update_reps: int = 3
    opponents: int = 3
    seed: int = 0
    degree: int | None = None
    params_path: str | None = None


@dataclass
class BenchReport:
    config: dict
    rows: list[dict] = field(default_factory=list)
    sizes: list[dict] = field(default_factory=list)
    decomposition: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _time(fn: Callable[[], object], reps: int) -> list[float]:
    out = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        out.append((time.perf_counter() - t0) * 1e3)
    return out


def _row(label: str, op: str, ms: list[float]) -> dict:
    return {"label": label, "operation": op, "mean_ms": statistics.fmean(ms),
            "std_ms": statistics.pstdev(ms) if len(ms) > 1 else 0.0, "reps": len(ms)}


def bench_label(label: str, cfg: BenchConfig) -> tuple[list[dict], list[dict], dict]:
    params = params_for(label, cfg.params_path, cfg.degree)
    rng = np.random.default_rng([cfg.seed, 0xBE])
    timings: dict[str, list[float]] = {}
    keys = None

    def keygen():
        nonlocal keys
        keys = S.keygen(params, rng)

    S.keygen(params, 0)  # warm the jit and basis caches
    timings["keygen"] = _time(keygen, cfg.keygen_reps)
    a = S.encrypt(keys.pk, [1500.0], rng)
    b = S.encrypt(keys.pk, [1400.0], rng)
    small = S.encrypt(keys.pk, [0.7], rng, bound=1.0)
    kernel = circuit.Kernel.default()
    gap = S.eval_sub(circuit.scaled(b), circuit.scaled(a))
    opps = [S.encrypt(keys.pk, [1400.0 + 50 * i], rng) for i in range(cfg.opponents)]
    outs = [1.0, 0.5, 0.0][: cfg.opponents] + [0.5] * max(0, cfg.opponents - 3)

    def refresh(ct):
        return S.refresh(ct, keys, rng)

    ops: dict[str, Callable[[], object]] = {
        "enc": lambda: S.encrypt(keys.pk, [1500.0], rng),
        "dec": lambda: S.decrypt(keys.sk, a),
        "evalAdd": lambda: S.eval_add(a, b),
        "evalSub": lambda: S.eval_sub(a, b),
        "evalMulConst": lambda: S.eval_mul_const(a, 0.0025),
        "evalMul": lambda: S.eval_mul(small, small, keys.rlk),
        "evalPoly": lambda: circuit.expected_term(circuit.scaled(a), circuit.scaled(b), kernel, keys.rlk),
        "refresh": lambda: refresh(gap),
    }
    for op, fn in ops.items():
        fn()
        timings[op] = _time(fn, cfg.reps if op != "evalPoly" else max(2, cfg.reps // 2))
    timings["fullUpdate"] = _time(lambda: circuit.update(a, opps, outs, 32.0, kernel, keys.rlk, refresh),
                                  cfg.update_reps)
    rows = [_row(label, op, timings[op]) for op in OPERATIONS]

    mean = {r["operation"]: r["mean_ms"] for r in rows}
    predicted = cfg.opponents * mean["evalPoly"] + mean["refresh"] + 2 * mean["evalMulConst"] + mean["evalAdd"]
    decomposition = {"predicted_ms": predicted, "measured_ms": mean["fullUpdate"],
                     "ratio": mean["fullUpdate"] / predicted}

    pp = P.CommitParams.setup()
    key, _ = zkrp.setup()
    band = elo.RankLadder.load().band(1500.0)
    r = P.random_scalar(rng)
    stmt = zkrp.RangeStatement(pp, P.commit(pp, 1500, r), band.low, band.high)
    proof = zkrp.serialize_proof(zkrp.prove(key, stmt, zkrp.Witness(1500, r), rng=rng, check=True))
    sizes = [{"label": label, "object": "predicted_" + name, "bytes": n} for name, n in S.key_sizes(params).items()]
    sizes += [
        {"label": label, "object": "public_key", "bytes": len(S.serialize_public_key(keys.pk))},
        {"label": label, "object": "secret_key", "bytes": len(S.serialize_secret_key(keys.sk))},
        {"label": label, "object": "relin_key", "bytes": len(S.serialize_switch_key(params, keys.rlk))},
        {"label": label, "object": "ciphertext_fresh", "bytes": len(S.serialize_ciphertext(a))},
        {"label": label, "object": "ciphertext_level0", "bytes": len(S.serialize_ciphertext(S.mod_drop(a, 0)))},
        {"label": label, "object": "range_proof", "bytes": len(proof)},
        {"label": label, "object": "commitment", "bytes": P.POINT_BYTES},
        {"label": label, "object": "signature", "bytes": 64},
    ]
    return rows, sizes, decomposition


def run_bench(cfg: BenchConfig) -> BenchReport:
    report = BenchReport(config=asdict(cfg))
    for label in cfg.labels:
        rows, sizes, decomp = bench_label(label, cfg)
        report.rows += rows
        report.sizes += sizes
        report.decomposition[label] = decomp
    return report
