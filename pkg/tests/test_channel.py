import numpy as np
import pytest

from blindem import (
    QPSK,
    ChannelTaps,
    NoiseSpec,
    apply_channel,
    build_isi_trellis,
    channel_from_phases,
    draw_channel,
    draw_preamble,
    means_from_taps,
    perturb_init,
    sigma_from_snr,
)


def test_noiseless_cancellation():
    h = ChannelTaps([1, -1])
    y = apply_channel([1, 1], h, preamble=[1], noise=None)
    assert np.allclose(y, 0.0)


def test_identity_channel():
    h = ChannelTaps([1.0])
    x = np.exp(1j * np.linspace(0, 3, 8))
    y = apply_channel(x, h, preamble=[], noise=None)
    assert np.allclose(y, x)


def test_three_tap_convolution():
    h = ChannelTaps([0.5, 0.7, 0.5])
    y = apply_channel([1, 1, 1], h, preamble=[1, 1], noise=None)
    assert np.allclose(y, 1.7)


def test_preamble_length_checked():
    h = ChannelTaps([1, -1])
    with pytest.raises(ValueError):
        apply_channel([1, 1], h, preamble=[], noise=None)


def test_sigma_from_snr_frozen_values():
    h2 = channel_from_phases(2, [0.0, 0.0])
    assert sigma_from_snr(h2, 6.0) == pytest.approx(0.5023772863019159, rel=1e-12)
    h3 = channel_from_phases(3, [0.0, 0.0, 0.0])
    assert sigma_from_snr(h3, 6.0) == pytest.approx(0.24867675671944835, rel=1e-12)
    assert sigma_from_snr(ChannelTaps([1.0]), 0.0) == pytest.approx(1.0, rel=1e-12)


def test_profiles_at_zero_phase():
    assert np.allclose(channel_from_phases(2, [0, 0]).taps, [1, -1])
    assert np.allclose(channel_from_phases(3, [0, 0, 0]).taps, [0.5, 0.7, 0.5])
    assert np.allclose(channel_from_phases(4, [0, 0, 0, 0]).taps, [0.38, 0.6, 0.6, 0.38])
    with pytest.raises(ValueError):
        channel_from_phases(5, np.zeros(5))


def test_draw_channel_deterministic_per_seed():
    a = draw_channel(3, np.random.default_rng(42))
    b = draw_channel(3, np.random.default_rng(42))
    assert np.array_equal(a.taps, b.taps)
    assert np.allclose(np.abs(a.taps), [0.5, 0.7, 0.5])


def test_perturb_zero_variance_is_identity():
    h = draw_channel(3, np.random.default_rng(0))
    out = perturb_init(h, 0.0, np.random.default_rng(1))
    assert np.array_equal(out.taps, h.taps)


def test_perturb_deterministic_per_seed():
    h = draw_channel(2, np.random.default_rng(0))
    a = perturb_init(h, 0.5, np.random.default_rng(9))
    b = perturb_init(h, 0.5, np.random.default_rng(9))
    assert np.array_equal(a.taps, b.taps)


def test_perturb_empirical_variance():
    h = ChannelTaps(np.zeros(1, dtype=complex))
    rng = np.random.default_rng(5)
    draws = np.array([perturb_init(h, 0.8, rng).taps[0] for _ in range(100_000)])
    assert np.mean(np.abs(draws) ** 2) == pytest.approx(0.8, rel=0.02)


def test_empirical_snr_matches_configuration():
    rng = np.random.default_rng(8)
    h = draw_channel(3, rng)
    sigma2 = sigma_from_snr(h, 6.0)
    idx = rng.integers(0, 4, size=20_000)
    x = QPSK.points[idx]
    pre = draw_preamble(4, 3, rng)
    z = apply_channel(x, h, pre, noise=None)
    y = apply_channel(x, h, pre, noise=NoiseSpec(sigma2), rng=rng)
    snr_emp = 10 * np.log10(np.mean(np.abs(z) ** 2) / np.mean(np.abs(y - z) ** 2))
    assert abs(snr_emp - 6.0) < 0.1
    assert NoiseSpec(sigma2).snr_db(h) == pytest.approx(6.0, abs=1e-12)


def test_noiseless_outputs_live_in_mean_set():
    rng = np.random.default_rng(3)
    h = draw_channel(2, rng)
    tr = build_isi_trellis(QPSK, 2)
    means = means_from_taps(tr, h)
    x = QPSK.points[rng.integers(0, 4, size=50)]
    pre = draw_preamble(4, 2, rng)
    z = apply_channel(x, h, pre, noise=None)
    dist = np.min(np.abs(z[:, None] - means[None, :]), axis=1)
    assert np.max(dist) < 1e-12


def test_seed_determinism_full_frame():
    rng_a = np.random.default_rng(123)
    rng_b = np.random.default_rng(123)
    h = draw_channel(3, np.random.default_rng(1))
    x = QPSK.points[np.random.default_rng(2).integers(0, 4, size=64)]
    pre = draw_preamble(4, 3, np.random.default_rng(3))
    ya = apply_channel(x, h, pre, NoiseSpec(0.3), rng_a)
    yb = apply_channel(x, h, pre, NoiseSpec(0.3), rng_b)
    assert np.array_equal(ya, yb)


def test_invalid_specs():
    with pytest.raises(ValueError):
        NoiseSpec(0.0)
    with pytest.raises(ValueError):
        sigma_from_snr(ChannelTaps([1.0]), np.inf)
    with pytest.raises(ValueError):
        perturb_init(ChannelTaps([1.0]), -1.0, np.random.default_rng(0))
