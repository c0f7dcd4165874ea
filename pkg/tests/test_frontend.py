import numpy as np
import numpy.testing as npt
import pytest

from spoofsim import ChannelRealization, condition_rows, condition_rows_vjp
from spoofsim import features, sample_intended_burst, symbol_phasors
from spoofsim.frontend import GRID_POWER, PHASOR_LIMIT


def test_matched_filter_recovers_clean_symbol_phasors():
    ch = ChannelRealization(1.0, np.zeros((1, 1)))
    burst = sample_intended_burst([0] * 8, [0.0], ch, 1000.0, 100, noise=False)
    u = symbol_phasors(features(burst), 1, 100)
    npt.assert_allclose(u, np.full((1, 4), 1000 * np.exp(1j * np.pi / 4)),
                        rtol=1e-12)


def test_conditioning_preserves_width_and_is_phase_only_when_strong():
    ch = ChannelRealization(1.0, np.zeros((1, 1)))
    burst = sample_intended_burst([0] * 8, [0.0], ch, 1000.0, 100, noise=False)
    rows = features(burst)
    out = condition_rows(rows, 1, 100)
    assert out.shape == rows.shape
    z = out.reshape(-1, 2)
    npt.assert_allclose(np.hypot(z[:, 0], z[:, 1]), 1.0, rtol=1e-12)


def test_weak_symbols_stay_proportionally_short():
    rows = features_of_constant_phasor(0.1 * PHASOR_LIMIT)
    out = condition_rows(rows, 1, 10)
    z = out.reshape(-1, 2)
    npt.assert_allclose(np.hypot(z[:, 0], z[:, 1]), 0.1 ** GRID_POWER, rtol=1e-9)


def features_of_constant_phasor(amp):
    # burst whose de-rotated samples all equal amp * exp(j*0.3)
    s = 10
    rot = np.exp(1j * np.arange(s) * (np.pi / (s / 2)))
    stream = amp * np.exp(1j * 0.3) * np.tile(rot, 4)
    return np.stack([stream.real, stream.imag], -1).reshape(-1)


def test_grid_power_collapses_constellation():
    # two symbols a quarter turn apart map to the same conditioned point
    # once squared twice (GRID_POWER applied on top of the square grid)
    a = condition_rows(features_of_constant_phasor(5.0), 1, 10)
    s = 10
    rot = np.exp(1j * np.arange(s) * (np.pi / (s / 2)))
    stream = 5.0 * np.exp(1j * (0.3 + np.pi)) * np.tile(rot, 4)
    rows_shifted = np.stack([stream.real, stream.imag], -1).reshape(-1)
    b = condition_rows(rows_shifted, 1, 10)
    npt.assert_allclose(a, b, atol=1e-9)


def test_vjp_matches_finite_differences():
    rng = np.random.default_rng(7)
    rows = rng.standard_normal((3, 2 * 2 * 20)) * 2.0
    g = rng.standard_normal(rows.shape)

    def f(r):
        return float((condition_rows(r, 2, 5) * g).sum())

    analytic = condition_rows_vjp(g, rows, 2, 5)
    h = 1e-6
    numeric = np.zeros_like(rows)
    for i in range(rows.shape[0]):
        for j in range(rows.shape[1]):
            up, down = rows.copy(), rows.copy()
            up[i, j] += h
            down[i, j] -= h
            numeric[i, j] = (f(up) - f(down)) / (2 * h)
    npt.assert_allclose(analytic, numeric, atol=1e-6 * np.abs(numeric).max())


def test_single_row_round_trips_shape():
    rng = np.random.default_rng(1)
    row = rng.standard_normal(2 * 1 * 40)
    out = condition_rows(row, 1, 10)
    assert out.shape == row.shape


def test_bad_geometry_rejected():
    with pytest.raises(ValueError):
        condition_rows(np.zeros(10), 3, 5)
    with pytest.raises(ValueError):
        condition_rows(np.zeros(2 * 2 * 10), 2, 3)
