import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isac6d.errors import AllNoise, SingularBlock
from isac6d.estimation import esprit_space_values, mdl_order, mdl_scores


def _snapshots(kappas, p, q, rng, noise_std=0.0):
    a = np.exp(1j * np.outer(np.arange(p), kappas))
    x = rng.standard_normal((len(kappas), q)) + 1j * rng.standard_normal((len(kappas), q))
    y = a @ x
    if noise_std:
        y = y + noise_std * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)) / np.sqrt(2)
    return y


def test_mdl_one_dominant():
    assert mdl_order([100.0] + [1e-6] * 7, 1000) == 1


def test_mdl_two_dominant():
    assert mdl_order([100.0, 50.0] + [1e-6] * 6, 1000) == 2


def test_mdl_white_noise():
    with pytest.raises(AllNoise):
        mdl_order([1.0] * 8, 1000)


def test_mdl_score_at_zero_is_zero_for_white():
    scores = mdl_scores([2.0] * 6, 50)
    assert scores[0] == pytest.approx(0.0, abs=1e-9)
    assert len(scores) == 5  # orders 0..p-2


def test_mdl_rejects_bad_input():
    with pytest.raises(ValueError):
        mdl_order([1.0, 2.0, 0.5], 10)
    with pytest.raises(ValueError):
        mdl_order([1.0], 10)
    with pytest.raises(ValueError):
        mdl_order([2.0, 1.0], 0)


def test_esprit_single_steering_vector():
    kappa = 1.074465
    a = np.exp(1j * kappa * np.arange(16))
    rng = np.random.default_rng(0)
    y = np.outer(a, rng.standard_normal(512) + 1j * rng.standard_normal(512))
    res = esprit_space_values(y)
    assert res.order == 1
    assert res.kappas[0] == pytest.approx(kappa, abs=1e-9)


def test_esprit_all_ones():
    res = esprit_space_values(np.ones((8, 20)), forced_order=1)
    assert res.kappas == pytest.approx((0.0,), abs=1e-12)


def test_esprit_two_sources_against_periodogram():
    rng = np.random.default_rng(7)
    truth = np.array([0.5, -0.8])
    y = _snapshots(truth, 16, 256, rng)
    res = esprit_space_values(y)
    assert res.order == 2
    got = np.sort(res.kappas)
    assert np.max(np.abs(got - np.sort(truth))) < 1e-6

    # brute-force oracle: the two strongest peaks of a 2^16-point spatial periodogram
    n_fft = 2**16
    power = np.sum(np.abs(np.fft.fft(y, n_fft, axis=0)) ** 2, axis=1)
    grid = 2 * np.pi * np.fft.fftfreq(n_fft)
    peaks = np.where((power > np.roll(power, 1)) & (power > np.roll(power, -1)))[0]
    top = np.sort(grid[peaks[np.argsort(-power[peaks])[:2]]])
    # a 16-element aperture leaks a few mrad between the two lobes
    assert np.max(np.abs(got - top)) < 5e-3


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-3.0, 3.0), min_size=1, max_size=4).filter(
        lambda ks: all(abs(a - b) > 0.3 for i, a in enumerate(ks) for b in ks[i + 1 :])
    ),
    st.integers(0, 2**31),
)
def test_esprit_exact_on_noiseless_data(kappas, seed):
    p = 12
    y = _snapshots(np.array(kappas), p, 64, np.random.default_rng(seed))
    res = esprit_space_values(y, forced_order=len(kappas))
    assert np.max(np.abs(np.sort(res.kappas) - np.sort(kappas))) < 1e-8


@settings(max_examples=40, deadline=None)
@given(
    st.floats(0.01, 1e4),
    st.floats(-np.pi, np.pi),
    st.integers(0, 2**31),
)
def test_esprit_scale_invariance(mag, phase, seed):
    rng = np.random.default_rng(seed)
    y = _snapshots(np.array([0.7, -1.9]), 10, 40, rng, noise_std=0.3)
    a = esprit_space_values(y, forced_order=2)
    b = esprit_space_values(mag * np.exp(1j * phase) * y, forced_order=2)
    assert np.max(np.abs(np.subtract(a.kappas, b.kappas))) < 1e-10


def test_mdl_consistency_in_snapshots():
    rng = np.random.default_rng(2024)
    truth = np.array([0.4, 0.9])
    noise_std = 1 / np.sqrt(10.0)  # unit-power sources at 10 dB
    rates = []
    for q in (32, 256, 2048):
        hits = 0
        for _ in range(200):
            y = _snapshots(truth, 8, q, rng, noise_std) / np.sqrt(2)
            try:
                hits += esprit_space_values(y).detected_order == 2
            except AllNoise:
                pass
        rates.append(hits / 200)
    assert rates[0] <= rates[1] <= rates[2]
    assert rates[2] == 1.0


def test_singular_block():
    y = np.zeros((6, 10), dtype=complex)
    y[-1] = 1.0
    with pytest.raises(SingularBlock):
        esprit_space_values(y, forced_order=1)


def test_forced_order_bounds():
    y = np.ones((4, 10))
    with pytest.raises(ValueError):
        esprit_space_values(y, forced_order=4)
    with pytest.raises(ValueError):
        esprit_space_values(np.ones((1, 10)))
