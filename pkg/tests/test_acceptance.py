"""Acceptance criteria 1-8.  Each test prints one PASS/FAIL line; the long runs carry the slow marker.

Run only these with:  pytest tests/test_acceptance.py -v -s
"""
import time

import numpy as np
import pytest

from helo import elo
from helo.harness import (ExperimentConfig, FairnessConfig, HiddenRatingConfig, SimConfig, run_accuracy,
                          run_engine_trials, run_fairness_game, run_hidden_rating_game, run_range_battery,
                          run_simulation)
from helo.harness.accuracy import MAX_LIMIT, MEAN_LIMIT, PRECISION_FLOOR_BITS, PRECISION_SHARE

slow = pytest.mark.slow


@pytest.fixture
def verdict(capsys):
    def emit(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


@pytest.fixture(scope="module")
def accuracy_report():
    return run_accuracy(ExperimentConfig(label="toy", updates=1000))


def test_criterion_1_plaintext_elo(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    pairs = rng.uniform(0, 4000, (100_000, 2))
    worst = max(abs(elo.expected_score(a, b) + elo.expected_score(b, a) - 1.0) for a, b in pairs)
    triple = elo.update_rating(1500.0, [1400.0, 1500.0, 1600.0], [1.0, 0.5, 0.0])
    wins = elo.update_rating(1500.0, [1500.0] * 3, [1.0] * 3)
    seconds = time.perf_counter() - t0
    ok = worst <= 1e-12 and triple == 1500.0 and wins == 1548.0 and seconds < 1.0
    verdict(1, ok, f"sum error {worst:.1e}, triple {triple}, three wins {wins}, {seconds:.2f} s")


def test_criterion_2_kernel(verdict):
    t0 = time.perf_counter()
    err = elo.max_grid_error(elo.chebyshev_coeffs(50))
    seconds = time.perf_counter() - t0
    verdict(2, err <= 5e-6 and seconds < 1.0, f"max grid error {err:.3e} over 10001 points, {seconds:.2f} s")


@slow
def test_criterion_3_engine(verdict):
    rep = run_engine_trials()
    worst = ", ".join(f"{k} {v.violations}/{v.trials} ({v.worst_ratio:.2f})" for k, v in rep.ops.items())
    verdict(3, rep.passed and rep.seconds < 120,
            f"{worst}; ring {rep.ring_mismatches}/{rep.ring_products} mismatches, {rep.seconds:.0f} s")


@slow
def test_criterion_4_accuracy(verdict, accuracy_report):
    rep = accuracy_report
    ok = rep.mean_diff <= MEAN_LIMIT and rep.max_diff <= MAX_LIMIT and rep.seconds <= 600
    verdict(4, ok, f"mean {rep.mean_diff:.3e}, max {rep.max_diff:.3e}, std {rep.std_dev:.3e} "
                   f"(published: mean {rep.reference_mean_diff:.3e}, max {rep.reference_max_diff:.3e}), "
                   f"{rep.seconds:.0f} s")


@slow
def test_criterion_5_precision(verdict, accuracy_report):
    bits = accuracy_report.precision_bits
    share = accuracy_report.precision_share
    ok = len(bits) == 1000 and share >= PRECISION_SHARE
    verdict(5, ok, f"{100 * share:.1f}% of {len(bits)} updates at >= {PRECISION_FLOOR_BITS:g} bits, "
                   f"min {min(bits):.1f} bits")


@slow
def test_criterion_6_range_proofs(verdict):
    rep = run_range_battery()
    ok = rep.passed and rep.seconds < 60
    verdict(6, ok, f"completeness {rep.accepted_honest}/{rep.honest}, boundary rejected {rep.boundary_rejected}, "
                   f"adversarial {rep.adversarial_accepted}/{rep.adversarial_total} accepted, "
                   f"size {rep.size_elements} vs {rep.size_predicted} elements, {rep.seconds:.0f} s")


@slow
def test_criterion_7_fairness(verdict):
    t0 = time.perf_counter()
    sim, _ = run_simulation(SimConfig(users=100, cycles=20))
    game = run_fairness_game(FairnessConfig())
    seconds = time.perf_counter() - t0
    failed = [a.name for a in game.attacks if not a.ok]
    ok = sim.passed and sim.fairness_violations == 0 and sim.verified > 0 and game.passed and seconds <= 900
    verdict(7, ok, f"{sim.verified} verifications, {sim.fairness_violations} rank mismatches, "
                   f"{len(game.attacks) - len(failed)}/{len(game.attacks)} attacks rejected"
                   f"{' (failed: ' + ', '.join(failed) + ')' if failed else ''}, "
                   f"stalled users {len(sim.stalled)}, {seconds:.0f} s")


@slow
def test_criterion_8_hidden_rating(verdict):
    rep = run_hidden_rating_game(HiddenRatingConfig(trials=10_000))
    worst = max(rep.distinguishers, key=lambda d: d.advantage / d.sigma)
    verdict(8, rep.passed, f"guards {'hold' if rep.guards_hold else 'BROKEN'}, worst distinguisher "
                           f"'{worst.name}' {worst.advantage:.4f} (3 sigma = {3 * worst.sigma:.4f}), "
                           f"{len(rep.leaks)} plaintext hits in {rep.scan_messages} SP messages")
