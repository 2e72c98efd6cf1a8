"""Front-end stages against naive loop oracles, plus pipeline invariants."""

import numpy as np
import pytest

from digitspeech.audio_io import AudioSignal
from digitspeech.errors import DegenerateFilter, TooShort
from digitspeech.frontend import (
    FrontendConfig,
    dct_matrix,
    delta_features,
    frame_signal,
    hamming_window,
    mel_filterbank,
    mel_of_hz,
    mfcc,
    power_spectrum,
    pre_emphasize,
)

import oracles


class TestPreEmphasis:
    def test_small_example(self):
        out = pre_emphasize(np.array([1.0, 1.0, 1.0]), 0.97)
        np.testing.assert_allclose(out, [1.0, 0.03, 0.03], atol=1e-15)

    def test_zero_coefficient_is_identity(self):
        x = np.arange(10.0)
        np.testing.assert_array_equal(pre_emphasize(x, 0.0), x)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(1)
        x = rng.normal(0, 1, 100)
        np.testing.assert_allclose(pre_emphasize(x, 0.97),
                                   oracles.naive_pre_emphasis(x, 0.97), atol=1e-12)


class TestFraming:
    def test_one_second_at_defaults(self):
        frames = frame_signal(np.zeros(16000), 400, 160)
        assert frames.shape == (98, 400)

    def test_too_short_gives_zero_frames(self):
        assert len(frame_signal(np.zeros(399), 400, 160)) == 0

    def test_exactly_one_frame(self):
        assert len(frame_signal(np.zeros(400), 400, 160)) == 1

    def test_frames_cover_expected_samples(self):
        x = np.arange(1000.0)
        frames = frame_signal(x, 400, 160)
        for k, frame in enumerate(frames):
            np.testing.assert_array_equal(frame, x[k * 160:k * 160 + 400])


class TestHammingWindow:
    def test_endpoint_weight(self):
        out = hamming_window(np.ones(400))
        assert out[0] == pytest.approx(0.54 - 0.46)

    def test_center_weight_is_one_for_odd_length(self):
        out = hamming_window(np.ones(401))
        assert out[200] == pytest.approx(1.0)

    def test_matches_loop_oracle(self):
        out = hamming_window(np.ones(400))
        np.testing.assert_allclose(out, oracles.naive_hamming([1.0] * 400), atol=1e-12)


class TestPowerSpectrum:
    def test_pure_bin_frequency_concentrates(self):
        fft_size = 256
        k0 = 16
        n = np.arange(fft_size)
        frame = np.cos(2 * np.pi * k0 * n / fft_size)
        power = power_spectrum(frame, fft_size)
        peak = power[k0]
        others = np.delete(power, k0)
        assert np.all(others < 1e-9 * peak)

    def test_zero_frame_gives_zero_spectrum(self):
        np.testing.assert_array_equal(power_spectrum(np.zeros(100), 256), np.zeros(129))

    def test_matches_naive_dft(self):
        rng = np.random.default_rng(2)
        frame = rng.normal(0, 1, 512)
        ours = power_spectrum(frame, 512)
        naive = oracles.naive_dft_power(frame, 512)
        np.testing.assert_allclose(ours, naive, rtol=1e-6, atol=1e-9)


class TestMelScale:
    def test_zero(self):
        assert mel_of_hz(0.0) == 0.0

    def test_700_hz(self):
        assert mel_of_hz(700.0) == pytest.approx(2595.0 * np.log10(2.0))

    def test_8000_hz(self):
        assert mel_of_hz(8000.0) == pytest.approx(2840.0, abs=0.1)

    def test_strictly_monotonic(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            a, b = sorted(rng.uniform(0, 8000, 2))
            if a < b:
                assert mel_of_hz(a) < mel_of_hz(b)


class TestMelFilterbank:
    def test_default_shape_and_coverage(self):
        bank = mel_filterbank(FrontendConfig(), 16000)
        assert bank.shape == (26, 257)
        assert np.all(bank >= 0.0)
        assert np.all(bank.sum(axis=1) > 0.0)

    def test_centers_increase_in_hz(self):
        bank = mel_filterbank(FrontendConfig(), 16000)
        centers = bank.argmax(axis=1)
        assert np.all(np.diff(centers) > 0)

    def test_too_small_fft_degenerates(self):
        config = FrontendConfig(fft_size=32, frame_length_ms=1.0, frame_shift_ms=1.0)
        with pytest.raises(DegenerateFilter):
            mel_filterbank(config, 16000)

    def test_matches_triangle_oracle(self):
        bank = mel_filterbank(FrontendConfig(), 16000)
        naive = np.array(oracles.naive_triangles(26, 512, 16000, 0.0, 8000.0))
        np.testing.assert_allclose(bank, naive, atol=1e-10)


class TestDct:
    def test_square_matrix_is_orthonormal(self):
        m = dct_matrix(26, 26)
        np.testing.assert_allclose(m @ m.T, np.eye(26), atol=1e-10)

    def test_truncated_rows_are_orthonormal(self):
        m = dct_matrix(13, 26)
        np.testing.assert_allclose(m @ m.T, np.eye(13), atol=1e-10)


class TestDeltas:
    def test_constant_input_gives_zero(self):
        values = np.tile([1.0, -2.0, 3.0], (10, 1))
        np.testing.assert_allclose(delta_features(values), 0.0, atol=1e-12)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(4)
        values = rng.normal(0, 1, (20, 5))
        np.testing.assert_allclose(delta_features(values),
                                   oracles.naive_deltas(values.tolist()), atol=1e-12)


def _tone_signal(seconds=1.0, rate=16000, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(int(seconds * rate)) / rate
    samples = 0.3 * np.sin(2 * np.pi * 440 * t) + 0.01 * rng.normal(0, 1, len(t))
    return AudioSignal(np.clip(samples, -1, 1), rate, "tone")


class TestMfccPipeline:
    def test_one_second_shape(self):
        features = mfcc(_tone_signal())
        assert len(features) == 98
        assert features.dim == 39

    def test_stationary_tone_has_tiny_deltas(self):
        rate = 16000
        t = np.arange(rate) / rate
        samples = 0.3 * np.sin(2 * np.pi * 500 * t)  # exactly periodic per 10 ms shift
        features = mfcc(AudioSignal(samples, rate, "steady"))
        deltas = features.vectors[3:-3, 13:]  # skip edge-replicated frames
        assert np.max(np.abs(deltas)) < 1e-9

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(5)
        samples = np.clip(rng.normal(0, 0.2, 16000), -1, 1)
        ours = mfcc(AudioSignal(samples, 16000, "noise")).vectors
        naive = oracles.naive_mfcc(samples, 16000)
        assert ours.shape == naive.shape
        np.testing.assert_allclose(ours, naive, atol=1e-6)

    def test_single_frame_matches_oracle_without_deltas(self):
        rng = np.random.default_rng(6)
        samples = rng.normal(0, 0.2, 400)
        config = FrontendConfig(append_deltas=False)
        ours = mfcc(AudioSignal(samples, 16000, "one_frame"), config).vectors
        naive = oracles.naive_mfcc(samples, 16000, append_deltas=False)
        assert ours.shape == (1, 13)
        np.testing.assert_allclose(ours, naive, atol=1e-6)

    def test_too_short_raises(self):
        with pytest.raises(TooShort):
            mfcc(AudioSignal(np.zeros(300), 16000, "tiny"))
        with pytest.raises(TooShort):  # 2 frames < 3 needed for deltas
            mfcc(AudioSignal(np.zeros(600), 16000, "two_frames"))
        # without deltas, 2 frames are fine
        assert len(mfcc(AudioSignal(np.random.default_rng(0).normal(0, 0.1, 600),
                                    16000, "ok"),
                        FrontendConfig(append_deltas=False))) == 2

    def test_silence_stays_finite(self):
        features = mfcc(AudioSignal(np.zeros(16000), 16000, "digital_silence"))
        assert np.all(np.isfinite(features.vectors))

    def test_amplitude_scaling_shifts_only_c0(self):
        signal = _tone_signal(seed=7)
        scaled = AudioSignal(signal.samples * 0.5, 16000, "scaled")
        base = mfcc(signal).vectors
        half = mfcc(scaled).vectors
        difference = base - half
        # energies scale by alpha^2, so every log filter energy shifts by
        # 2*ln(alpha) and only the DC cepstral row picks it up:
        # c0 shift = 2*ln(2)*sqrt(num_mel_filters) for alpha = 1/2
        expected_shift = 2.0 * np.log(2.0) * np.sqrt(26)
        np.testing.assert_allclose(difference[:, 0], expected_shift, atol=1e-6)
        np.testing.assert_allclose(difference[:, 1:], 0.0, atol=1e-6)
