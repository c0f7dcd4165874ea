"""Rayleigh block-fading links between node positions.

A link realization carries one power gain and one phase shift per
(tx antenna, rx antenna) pair. Gains are i.i.d. exponential with mean
d**-2 for node distance d, i.e. the power gain of Rayleigh amplitude
fading with inverse-square mean path loss; phases are i.i.d. uniform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass
class ChannelRealization:
    """One block-fading draw for a link.

    Attributes
    ----------
    gains : np.ndarray
        Nonnegative power gains, shape (n_tx, n_rx). A scalar is accepted
        and broadcast over every antenna pair.
    phases : np.ndarray
        Per-pair phase shifts in radians, shape (n_tx, n_rx).
    """

    gains: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        self.phases = np.asarray(self.phases, dtype=np.float64)
        if self.phases.ndim != 2 or self.phases.size == 0:
            raise ValueError("pair phases must be a non-empty (n_tx, n_rx) array")
        gains = np.asarray(self.gains, dtype=np.float64)
        if gains.ndim == 0:
            gains = np.full(self.phases.shape, float(gains))
        if gains.shape != self.phases.shape:
            raise ValueError(f"gain shape {gains.shape} != phase shape {self.phases.shape}")
        self.gains = gains
        if not np.all(np.isfinite(self.gains)) or np.any(self.gains < 0.0):
            raise ValueError("channel gains must be finite and >= 0")
        if not np.all(np.isfinite(self.phases)):
            raise ValueError("pair phases must be finite")

    @property
    def n_tx(self) -> int:
        return self.phases.shape[0]

    @property
    def n_rx(self) -> int:
        return self.phases.shape[1]


def link_mean_gain(tx_pos, rx_pos) -> float:
    """Mean power gain d**-2 of a link; rejects zero-distance geometry."""
    dx = float(tx_pos[0]) - float(rx_pos[0])
    dy = float(tx_pos[1]) - float(rx_pos[1])
    d_sq = dx * dx + dy * dy
    if d_sq == 0.0:
        raise ValueError(f"coincident positions {tuple(tx_pos)}: link distance must be > 0")
    return 1.0 / d_sq


def draw_channel(tx_pos, rx_pos, n_tx, n_rx, rng) -> ChannelRealization:
    """Draw one fading realization for the tx_pos -> rx_pos link.

    Parameters
    ----------
    tx_pos, rx_pos : (x, y) pairs
        Node positions; must be distinct.
    n_tx, n_rx : int
        Antenna counts at each end, both >= 1.
    rng : np.random.Generator

    Returns
    -------
    ChannelRealization
        gains i.i.d. Exponential(mean = d**-2), phases i.i.d. uniform
        on [0, 2*pi), one of each per antenna pair.
    """
    if n_tx < 1 or n_rx < 1:
        raise ValueError("antenna counts must be >= 1")
    mean_gain = link_mean_gain(tx_pos, rx_pos)
    gains = rng.exponential(mean_gain, size=(n_tx, n_rx))
    phases = rng.uniform(0.0, TWO_PI, size=(n_tx, n_rx))
    return ChannelRealization(gains, phases)
