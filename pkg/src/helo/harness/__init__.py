"""Experiments: engine and proof batteries, accuracy drift, benchmarks, simulations and the two security games."""
from helo.harness.accuracy import AccuracyReport, ExperimentConfig, run_accuracy
from helo.harness.bench import BenchConfig, BenchReport, run_bench
from helo.harness.engine import EngineConfig, EngineReport, run_engine_trials
from helo.harness.fairness import FairnessConfig, FairnessReport, run_fairness_game
from helo.harness.leakage import HiddenRatingConfig, HiddenRatingReport, LeakScanner, run_hidden_rating_game
from helo.harness.simulate import SimConfig, SimReport, Simulation, run_simulation
from helo.harness.soundness import SoundnessConfig, SoundnessReport, run_range_battery

__all__ = ["AccuracyReport", "ExperimentConfig", "run_accuracy", "BenchConfig", "BenchReport", "run_bench",
           "EngineConfig", "EngineReport", "run_engine_trials",
           "FairnessConfig", "FairnessReport", "run_fairness_game", "HiddenRatingConfig", "HiddenRatingReport",
           "LeakScanner", "run_hidden_rating_game", "SimConfig", "SimReport", "Simulation", "run_simulation",
           "SoundnessConfig", "SoundnessReport", "run_range_battery"]
