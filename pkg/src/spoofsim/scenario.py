"""Scenario geometry, antenna counts, powers, and derived random streams.

The scenario fixes the slowly-varying part of the radio environment that a
physical-layer fingerprint is built on: per-antenna device phase shifts
and per-antenna-pair link phase shifts are drawn once from the scenario
seed and then held for the scenario's lifetime, while link power gains
fade independently burst by burst (exponential, mean d**-2). The
surrogate receiver is modelled as a faithful stand-in for the defender
receiver: links into it reuse the defender-side phase tables, so what the
adversary pair observes during training matches what the defender sees,
up to the (slightly different) link distances and fresh fading.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .channel import TWO_PI, ChannelRealization, link_mean_gain

Position = tuple[float, float]

_MASK = (1 << 63) - 1
_KEY_T_PHASES = 0x54
_KEY_AT_PHASES = 0x41
_KEY_LINK = 0x4C
_LINK_IDS = {("t", "r"): 0, ("t", "at"): 1, ("at", "r"): 2}

TX_ROLES = ("t", "at")
RX_ROLES = ("r", "ar", "at")


def substream(seed, *key) -> np.random.Generator:
    """Deterministic child generator for (seed, key...) word sequences.

    Different key tuples give statistically independent streams, so
    scenario-derived randomness (device phases, link tables, datasets,
    attacks) stays reproducible and order-insensitive.
    """
    words = [int(seed) & _MASK] + [int(k) & _MASK for k in key]
    return np.random.default_rng(np.random.SeedSequence(words))


def _check_position(name, pos) -> Position:
    x, y = float(pos[0]), float(pos[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError(f"{name} position must be finite, got {pos}")
    return (x, y)


@dataclass(frozen=True)
class ScenarioConfig:
    """One experiment topology.

    Nodes: legitimate transmitter T and its receiver R, plus the adversary
    pair of transmitter A_T and surrogate receiver A_R. A_R always carries
    the same antenna count as R. Powers are noise-normalised; the transmit
    power default is 1000. carrier_jitter is the burst-to-burst carrier
    phase wander (radians, std dev) of any live transmit chain.
    """

    t_pos: Position = (0.0, 0.0)
    r_pos: Position = (10.0, 0.0)
    at_pos: Position = (0.0, 10.0)
    ar_pos: Position = (10.0, 0.1)
    n_t: int = 1
    n_r: int = 1
    n_a: int = 1
    power: float = 1000.0
    samples_per_symbol: int = 100
    carrier_jitter: float = 0.15
    seed: int = 0
    attack_time_at_pos: Position | None = None

    def __post_init__(self):
        object.__setattr__(self, "t_pos", _check_position("T", self.t_pos))
        object.__setattr__(self, "r_pos", _check_position("R", self.r_pos))
        object.__setattr__(self, "at_pos", _check_position("A_T", self.at_pos))
        object.__setattr__(self, "ar_pos", _check_position("A_R", self.ar_pos))
        if self.attack_time_at_pos is not None:
            object.__setattr__(self, "attack_time_at_pos",
                               _check_position("attack-time A_T", self.attack_time_at_pos))
        if min(self.n_t, self.n_r, self.n_a) < 1:
            raise ValueError("antenna counts must be >= 1")
        if self.power <= 0:
            raise ValueError("power must be positive")
        if self.samples_per_symbol < 1:
            raise ValueError("samples_per_symbol must be >= 1")
        if self.carrier_jitter < 0:
            raise ValueError("carrier_jitter must be >= 0")

    @property
    def n_points(self) -> int:
        return 4 * self.samples_per_symbol

    @property
    def feature_length(self) -> int:
        """Real feature width of a burst received on R's (or A_R's) antennas."""
        return 2 * self.n_points * self.n_r

    @property
    def attack_position(self) -> Position:
        """Where A_T transmits from at attack time (mobility override aware)."""
        return self.attack_time_at_pos if self.attack_time_at_pos is not None else self.at_pos

    def t_device_phases(self) -> np.ndarray:
        """Fixed per-antenna hardware phase offsets of T, derived from the seed."""
        return substream(self.seed, _KEY_T_PHASES).uniform(0.0, TWO_PI, self.n_t)

    def at_device_phases(self) -> np.ndarray:
        """Fixed per-antenna hardware phase offsets of A_T."""
        return substream(self.seed, _KEY_AT_PHASES).uniform(0.0, TWO_PI, self.n_a)

    def _antennas(self, role) -> int:
        return {"t": self.n_t, "at": self.n_a, "r": self.n_r, "ar": self.n_r}[role]

    def _position(self, role, at_position=None) -> Position:
        if role == "at" and at_position is not None:
            return _check_position("A_T override", at_position)
        return {"t": self.t_pos, "at": self.at_pos,
                "r": self.r_pos, "ar": self.ar_pos}[role]

    def link_phases(self, tx_role, rx_role) -> np.ndarray:
        """Static per-antenna-pair phase table of a link, uniform on [0, 2*pi).

        The surrogate receiver reuses the defender receiver's tables
        (rx role "ar" maps onto "r"), which is what makes training against
        the surrogate transfer to the defender.
        """
        if tx_role not in TX_ROLES or rx_role not in RX_ROLES or tx_role == rx_role:
            raise ValueError(f"no such link: {tx_role} -> {rx_role}")
        key = (tx_role, "r" if rx_role == "ar" else rx_role)
        table = _link_phase_table(self.seed, key, self._antennas(tx_role),
                                  self._antennas(rx_role))
        return table.copy()

    def link_mean(self, tx_role, rx_role, at_position=None) -> float:
        """Mean link power gain d**-2 at the current node positions."""
        return link_mean_gain(self._position(tx_role, at_position),
                              self._position(rx_role, at_position))

    def draw_link(self, tx_role, rx_role, rng, at_position=None) -> ChannelRealization:
        """One burst's channel: fresh per-pair exponential gains over the
        scenario's static phase table.

        `at_position` overrides where A_T currently stands (attack-time
        mobility); it moves the fading distance, not the phase fingerprint.
        """
        phases = self.link_phases(tx_role, rx_role)
        mean = self.link_mean(tx_role, rx_role, at_position)
        gains = rng.exponential(mean, size=phases.shape)
        return ChannelRealization(gains, phases)


@functools.lru_cache(maxsize=512)
def _link_phase_table(seed, key, n_tx, n_rx) -> np.ndarray:
    rng = substream(seed, _KEY_LINK, _LINK_IDS[key])
    table = rng.uniform(0.0, TWO_PI, size=(n_tx, n_rx))
    table.setflags(write=False)
    return table
