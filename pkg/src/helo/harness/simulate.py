"""Many users playing through full update cycles, with the fairness invariant checked throughout."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from helo import elo
from helo.protocol import HElo, ProtocolConfig, user_ids


@dataclass(frozen=True)
class SimConfig:
    users: int = 100
    cycles: int = 20
    seed: int = 0
    label: str = "toy"
    k_factor: float = 32.0
    matches: int = 3
    mode: str = "incremental"
    degree: int | None = None
    params_path: str | None = None
    ladder_path: str | None = None
    initial_range: tuple[float, float] = (1100.0, 1900.0)
    draw_rate: float = 0.1
    script: tuple[tuple[str, str, float], ...] | None = None
    start_ratings: tuple[float, ...] | None = None
    noise_amplitude: int = 50

    def protocol(self) -> ProtocolConfig:
        return ProtocolConfig(label=self.label, k_factor=self.k_factor, matches=self.matches, mode=self.mode,
                              noise_amplitude=self.noise_amplitude)


@dataclass
class SimReport:
    config: dict
    matches: int = 0
    verified: int = 0
    fairness_checks: int = 0
    fairness_violations: int = 0
    refused: list[str] = field(default_factory=list)
    stalled: list[str] = field(default_factory=list)
    max_oracle_diff: float = 0.0
    standings: list[dict] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.fairness_violations == 0 and not self.refused

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


class Simulation:
    """Drives an HElo instance and keeps a plaintext shadow of every user's rating."""

    def __init__(self, cfg: SimConfig, system: HElo | None = None):
        self.cfg = cfg
        ladder = elo.RankLadder.load(cfg.ladder_path)
        self.system = system or HElo(cfg.protocol(), ladder, cfg.seed, degree=cfg.degree,
                                     params=None if cfg.params_path is None else _params(cfg))
        if self.system.public is None:
            self.system.init()
        self.rng = np.random.default_rng([cfg.seed, 0x5151])
        self.ids = user_ids(cfg.users)
        self.skill: dict[str, float] = {}
        self.cycle_start: dict[str, float] = {}
        self.history: dict[str, list[tuple[float, float]]] = {}
        self.cycles: dict[str, int] = {}
        self.report = SimReport(config=_plain(asdict(cfg)))

    def register_all(self) -> None:
        lo, hi = self.cfg.initial_range
        for k, uid in enumerate(self.ids):
            if self.cfg.start_ratings is not None and k < len(self.cfg.start_ratings):
                initial = float(self.cfg.start_ratings[k])
            else:
                initial = float(self.rng.integers(int(lo), int(hi)))
            if not self.system.register(uid, initial):
                self.report.refused.append(f"register {uid}")
                continue
            self.skill[uid] = initial
            self.cycle_start[uid] = self.system.users[uid].rating
            self.history[uid] = []
            self.cycles[uid] = 0

    def _outcome(self, a: str, b: str) -> float:
        if self.rng.random() < self.cfg.draw_rate:
            return 0.5
        return 1.0 if self.rng.random() < elo.expected_score(self.skill[a], self.skill[b]) else 0.0

    def play(self, a: str, b: str, score: float) -> None:
        ra, rb = self.system.users[a].rating, self.system.users[b].rating
        if not self.system.report(a, b, score):
            self.report.refused.append(f"match {a} {b}")
            return
        self.report.matches += 1
        self.history[a].append((rb, score))
        self.history[b].append((ra, 1.0 - score))

    def settle(self) -> None:
        """Attest and verify every user whose cycle is complete, comparing against the plaintext shadow."""
        for uid in self.system.awaiting():
            hist = self.history[uid]
            want = elo.update_rating(self.cycle_start[uid], [h[0] for h in hist], [h[1] for h in hist],
                                     elo.EloConfig(self.cfg.k_factor, self.cfg.matches))
            got = self.system.kc.record[uid]
            self.report.max_oracle_diff = max(self.report.max_oracle_diff, abs(got - want))
            if not self.system.complete_cycle(uid):
                self.report.refused.append(f"verify {uid}")
                continue
            self.report.verified += 1
            self.report.fairness_checks += 1
            if self.system.sp.records[uid].rank != self.system.ladder.rank(got):
                self.report.fairness_violations += 1
            self.cycles[uid] += 1
            self.cycle_start[uid] = self.system.users[uid].rating
            self.history[uid] = []

    def run_rounds(self) -> None:
        target = self.cfg.cycles
        while True:
            needy = [u for u in self.cycles if self.cycles[u] < target]
            if not needy:
                break
            progressed = False
            for uid in self.rng.permutation(needy):
                uid = str(uid)
                if not self.system.sp.available(uid):
                    continue
                opp = self.system.matchmake(uid, self.rng)
                if opp is None:
                    continue
                self.play(uid, opp, self._outcome(uid, opp))
                progressed = True
            self.settle()
            if not progressed:
                self.report.stalled = sorted(u for u in needy if self.cycles[u] < target)
                break

    def run_script(self) -> None:
        for a, b, s in self.cfg.script:
            self.play(a, b, float(s))
            self.settle()

    def run(self) -> SimReport:
        t0 = time.perf_counter()
        self.register_all()
        if self.cfg.script is not None:
            self.run_script()
        elif self.cfg.cycles > 0:
            self.run_rounds()
        self.report.standings = self.standings()
        self.report.seconds = time.perf_counter() - t0
        return self.report

    def standings(self) -> list[dict]:
        """User-side view: each user's own rating next to the rank SP holds."""
        rows = []
        for uid in self.ids:
            user = self.system.users.get(uid)
            if user is None or uid not in self.system.sp.records:
                continue
            rows.append({"user": uid, "rank": self.system.sp.records[uid].rank, "rating": user.rating,
                         "cycles": self.cycles.get(uid, 0)})
        rows.sort(key=lambda r: (-r["rating"], r["user"]))
        return rows


def _params(cfg: SimConfig):
    from helo.ckks.params import params_for
    return params_for(cfg.label, cfg.params_path, cfg.degree)


def _plain(d: dict) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}


def run_simulation(cfg: SimConfig) -> tuple[SimReport, HElo]:
    sim = Simulation(cfg)
    return sim.run(), sim.system
