"""Mounting spoofing attacks against a trained authenticator.

Three attack kinds are measured as the fraction of spoofed bursts the
defender's classifier labels as the legitimate transmitter:

- random: structureless uniform-phase bursts at full power,
- replay: amplify-and-forward copies of fresh legitimate transmissions,
- gan: bursts from a trained generator, sent through a fresh fading draw
  from the adversary's current (possibly moved) position.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .authenticator import FROM_T, ClassifierMetrics, classify, network_of
from .gan import generate_spoof_burst, train_gan
from .nn import DenseNetwork
from .scenario import ScenarioConfig
from .waveform import (SYMBOLS_PER_BURST, IQBurst, apply_channel, features,
                       random_symbol_phases, sample_replay_burst,
                       sample_waveform_burst)


@dataclass
class AttackReport:
    """Outcome of one attack evaluation run."""

    attack_kind: str
    n_trials: int
    n_success: int
    success_prob: float
    scenario: ScenarioConfig
    classifier_metrics: ClassifierMetrics | None = None
    gan_trace_summary: dict | None = None

    def __post_init__(self):
        if self.n_trials < 1 or not (0 <= self.n_success <= self.n_trials):
            raise ValueError("success count must lie in [0, n_trials]")
        if self.success_prob != self.n_success / self.n_trials:
            raise ValueError("success_prob must equal n_success / n_trials exactly")

    def to_dict(self) -> dict:
        out = {
            "attack_kind": self.attack_kind,
            "n_trials": self.n_trials,
            "n_success": self.n_success,
            "success_prob": self.success_prob,
            "scenario": {
                "t_pos": list(self.scenario.t_pos),
                "r_pos": list(self.scenario.r_pos),
                "at_pos": list(self.scenario.at_pos),
                "ar_pos": list(self.scenario.ar_pos),
                "attack_time_at_pos": (list(self.scenario.attack_time_at_pos)
                                       if self.scenario.attack_time_at_pos else None),
                "n_t": self.scenario.n_t,
                "n_r": self.scenario.n_r,
                "n_a": self.scenario.n_a,
                "power": self.scenario.power,
                "samples_per_symbol": self.scenario.samples_per_symbol,
                "seed": self.scenario.seed,
            },
            "classifier_metrics": None,
            "gan_trace_summary": self.gan_trace_summary,
        }
        if self.classifier_metrics is not None:
            m = self.classifier_metrics
            out["classifier_metrics"] = {"n": m.n, "n_from_t": m.n_from_t,
                                         "n_md": m.n_md, "n_fa": m.n_fa,
                                         "e_md": m.e_md, "e_fa": m.e_fa}
        return out

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text


def success_probability(decisions) -> float:
    """Fraction of classifier decisions equal to the legitimate label."""
    arr = np.asarray(decisions)
    if arr.size == 0:
        raise ValueError("no decisions given")
    return float(np.mean(arr == FROM_T))


def _report(kind, classifier, x_rows, scenario, metrics, gan_summary=None) -> AttackReport:
    decisions = classify(classifier, x_rows)
    n_success = int((decisions == FROM_T).sum())
    return AttackReport(kind, len(decisions), n_success, n_success / len(decisions),
                        scenario, metrics, gan_summary)


def _check_feature_width(classifier, scenario: ScenarioConfig):
    width = network_of(classifier).layer_sizes[0]
    if width != scenario.feature_length:
        raise ValueError(
            f"classifier expects {width} features, scenario "
            f"delivers {scenario.feature_length}")


def run_random_attack(classifier, scenario, n_trials=500, rng=None,
                      classifier_metrics=None) -> AttackReport:
    """Transmit structureless random-phase bursts at full power."""
    _check_feature_width(classifier, scenario)
    if rng is None:
        rng = np.random.default_rng()
    sc = scenario
    at_phases = sc.at_device_phases()
    x = np.empty((n_trials, sc.feature_length))
    for i in range(n_trials):
        phases = random_symbol_phases(SYMBOLS_PER_BURST, rng)
        ch = sc.draw_link("at", "r", rng, at_position=sc.attack_position)
        burst = sample_waveform_burst(phases, at_phases, ch, sc.power,
                                      sc.samples_per_symbol, noise=True, rng=rng,
                                      carrier_jitter=sc.carrier_jitter)
        x[i] = features(burst)
    return _report("random", classifier, x, sc, classifier_metrics)


def run_replay_attack(classifier, scenario, n_trials=500, rng=None,
                      classifier_metrics=None) -> AttackReport:
    """Record a fresh legitimate burst each trial, amplify, and forward it."""
    _check_feature_width(classifier, scenario)
    if rng is None:
        rng = np.random.default_rng()
    sc = scenario
    t_phases = sc.t_device_phases()
    at_phases = sc.at_device_phases()
    x = np.empty((n_trials, sc.feature_length))
    for i in range(n_trials):
        bits = rng.integers(0, 2, size=8)
        ch_hop1 = sc.draw_link("t", "at", rng, at_position=sc.attack_position)
        ch_hop2 = sc.draw_link("at", "r", rng, at_position=sc.attack_position)
        burst = sample_replay_burst(bits, t_phases, at_phases, ch_hop1, ch_hop2,
                                    sc.power, sc.samples_per_symbol, noise=True, rng=rng,
                                    carrier_jitter=sc.carrier_jitter)
        x[i] = features(burst)
    return _report("replay", classifier, x, sc, classifier_metrics)


def run_gan_attack(classifier, generator, scenario, n_trials=500, rng=None,
                   classifier_metrics=None, gan_trace_summary=None,
                   power_budget=None) -> AttackReport:
    """Spoof with a trained generator from the attack-time position."""
    _check_feature_width(classifier, scenario)
    sc = scenario
    expected_out = 2 * sc.n_points * sc.n_a
    if generator.layer_sizes[-1] != expected_out:
        raise ValueError(
            f"generator emits {generator.layer_sizes[-1]} values, scenario needs "
            f"{expected_out} for {sc.n_a} transmit streams")
    if rng is None:
        rng = np.random.default_rng()
    budget = float(power_budget) if power_budget is not None else sc.power
    noise_dim = generator.layer_sizes[0]
    at_phases = sc.at_device_phases()
    x = np.empty((n_trials, sc.feature_length))
    for i in range(n_trials):
        z = rng.standard_normal(noise_dim)
        tx = generate_spoof_burst(generator, z, sc.n_a, budget)
        if sc.carrier_jitter > 0.0:
            tx = IQBurst(tx.streams * np.exp(1j * sc.carrier_jitter * rng.standard_normal()))
        ch = sc.draw_link("at", "r", rng, at_position=sc.attack_position)
        rx = apply_channel(tx, at_phases, ch, noise=True, rng=rng)
        x[i] = features(rx)
    return _report("gan", classifier, x, sc, classifier_metrics, gan_trace_summary)


def train_spoofer(scenario, gan_config=None, rng=None, retries=3):
    """Train the adversarial generator, retrying on non-convergence.

    Runs up to 1 + `retries` trainings with fresh randomness; the first
    converged run wins, otherwise the last run is returned as-is.
    """
    if retries < 0:
        raise ValueError("retries must be >= 0")
    if rng is None:
        rng = np.random.default_rng()
    result = None
    for _ in range(1 + retries):
        result = train_gan(scenario, gan_config, rng)
        if result[2].converged:
            break
    return result


REPORT_CSV_COLUMNS = [
    "attack", "n_t", "n_r", "n_a", "t_pos", "r_pos", "at_pos", "ar_pos",
    "attack_at_pos", "power", "samples_per_symbol", "seed", "n_trials",
    "n_success", "success_prob",
]


def append_report_csv(report: AttackReport, path) -> None:
    """Append one result row; writes the header when the file is new."""
    path = Path(path)
    fresh = not path.exists()
    sc = report.scenario
    row = [report.attack_kind, sc.n_t, sc.n_r, sc.n_a,
           f"{sc.t_pos[0]};{sc.t_pos[1]}", f"{sc.r_pos[0]};{sc.r_pos[1]}",
           f"{sc.at_pos[0]};{sc.at_pos[1]}", f"{sc.ar_pos[0]};{sc.ar_pos[1]}",
           f"{sc.attack_position[0]};{sc.attack_position[1]}",
           sc.power, sc.samples_per_symbol, sc.seed,
           report.n_trials, report.n_success, report.success_prob]
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(REPORT_CSV_COLUMNS)
        writer.writerow(row)
