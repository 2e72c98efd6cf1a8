"""Waveform-to-feature pipeline: framing, mel filterbank, cepstra, deltas.

Each frame passes through pre-emphasis, a Hamming window, a power
spectrum, triangular mel filters, a floored log, and an orthonormal
DCT-II. First- and second-order regression deltas are appended by
default, giving 13 * 3 = 39 dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioSignal
from .errors import DegenerateFilter, TooShort

LOG_ENERGY_FLOOR = 1e-10
DELTA_WINDOW = 2


@dataclass(frozen=True)
class FrontendConfig:
    frame_length_ms: float = 25.0
    frame_shift_ms: float = 10.0
    pre_emphasis: float = 0.97
    num_mel_filters: int = 26
    num_cepstra: int = 13
    fft_size: int = 512
    low_freq_hz: float = 0.0
    high_freq_hz: float | None = None  # None means Nyquist
    append_deltas: bool = True
    cepstral_mean_norm: bool = False  # reserved hook, not applied yet

    @property
    def feature_dim(self) -> int:
        return self.num_cepstra * (3 if self.append_deltas else 1)

    def frame_length_samples(self, sample_rate_hz: int) -> int:
        return int(round(self.frame_length_ms * sample_rate_hz / 1000.0))

    def frame_shift_samples(self, sample_rate_hz: int) -> int:
        return int(round(self.frame_shift_ms * sample_rate_hz / 1000.0))

    def effective_high_freq(self, sample_rate_hz: int) -> float:
        return sample_rate_hz / 2.0 if self.high_freq_hz is None else self.high_freq_hz

    def validate(self, sample_rate_hz: int) -> None:
        if not 0.0 <= self.pre_emphasis < 1.0:
            raise ValueError(f"pre_emphasis must be in [0, 1), got {self.pre_emphasis}")
        if self.frame_shift_ms > self.frame_length_ms:
            raise ValueError("frame_shift_ms must not exceed frame_length_ms")
        if self.num_mel_filters < 2:
            raise ValueError("num_mel_filters must be at least 2")
        if not 1 <= self.num_cepstra <= self.num_mel_filters:
            raise ValueError("num_cepstra must be in [1, num_mel_filters]")
        if self.fft_size < 2 or self.fft_size & (self.fft_size - 1):
            raise ValueError(f"fft_size must be a power of two, got {self.fft_size}")
        if self.fft_size < self.frame_length_samples(sample_rate_hz):
            raise ValueError("fft_size smaller than the frame length in samples")
        high = self.effective_high_freq(sample_rate_hz)
        if not 0.0 <= self.low_freq_hz < high <= sample_rate_hz / 2.0:
            raise ValueError(
                f"need 0 <= low_freq_hz < high_freq_hz <= Nyquist, "
                f"got {self.low_freq_hz}..{high} at {sample_rate_hz} Hz"
            )


@dataclass(frozen=True)
class FeatureSequence:
    """Time-ordered feature vectors for one utterance, shape (frames, dim)."""

    vectors: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise ValueError(f"vectors must be 2-D (frames, dim), got shape {vectors.shape}")
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def pre_emphasize(samples: np.ndarray, coeff: float) -> np.ndarray:
    """Apply the high-pass filter y[n] = x[n] - coeff * x[n-1], y[0] = x[0]."""
    samples = np.asarray(samples, dtype=np.float64)
    if len(samples) == 0:
        return samples.copy()
    return np.concatenate(([samples[0]], samples[1:] - coeff * samples[:-1]))


def frame_signal(samples: np.ndarray, frame_len_samples: int, shift_samples: int) -> np.ndarray:
    """Slice a signal into overlapping frames, shape (num_frames, frame_len).

    A trailing stretch shorter than one frame is dropped, never padded.
    """
    if not frame_len_samples >= shift_samples >= 1:
        raise ValueError("need frame_len_samples >= shift_samples >= 1")
    samples = np.asarray(samples, dtype=np.float64)
    if len(samples) < frame_len_samples:
        return np.empty((0, frame_len_samples), dtype=np.float64)
    num_frames = (len(samples) - frame_len_samples) // shift_samples + 1
    starts = np.arange(num_frames) * shift_samples
    return samples[starts[:, None] + np.arange(frame_len_samples)]


def hamming_window(frame: np.ndarray) -> np.ndarray:
    """Multiply a frame by 0.54 - 0.46*cos(2*pi*n/(N-1))."""
    frame = np.asarray(frame, dtype=np.float64)
    return frame * _hamming_weights(frame.shape[-1])


def _hamming_weights(n: int) -> np.ndarray:
    if n < 2:
        raise ValueError("window needs at least 2 points")
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(n) / (n - 1))


def power_spectrum(frame: np.ndarray, fft_size: int) -> np.ndarray:
    """Squared-magnitude DFT of a zero-padded frame, bins 0..fft_size/2."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape[-1] > fft_size:
        raise ValueError("frame longer than fft_size")
    spectrum = np.fft.rfft(frame, n=fft_size)
    return spectrum.real**2 + spectrum.imag**2


def mel_of_hz(freq_hz):
    """Map frequency in Hz to the mel scale."""
    return 2595.0 * np.log10(1.0 + np.asarray(freq_hz, dtype=np.float64) / 700.0)


def hz_of_mel(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(config: FrontendConfig, sample_rate_hz: int) -> np.ndarray:
    """Triangular filters, shape (num_mel_filters, fft_size/2 + 1).

    Filter centers are equally spaced in mel between low_freq_hz and the
    effective high frequency. Raises DegenerateFilter when the FFT grid
    is too coarse to keep adjacent centers on distinct bins.
    """
    config.validate(sample_rate_hz)
    high_hz = config.effective_high_freq(sample_rate_hz)
    num_filters = config.num_mel_filters
    edges_mel = np.linspace(mel_of_hz(config.low_freq_hz), mel_of_hz(high_hz), num_filters + 2)
    edges_hz = hz_of_mel(edges_mel)

    bin_width_hz = sample_rate_hz / config.fft_size
    center_bins = np.rint(edges_hz[1:-1] / bin_width_hz).astype(int)
    if np.any(np.diff(center_bins) < 1):
        raise DegenerateFilter(
            f"{num_filters} filters collapse onto shared FFT bins at "
            f"fft_size={config.fft_size}; increase fft_size or reduce the filter count"
        )

    bin_freqs = np.arange(config.fft_size // 2 + 1) * bin_width_hz
    left = edges_hz[:-2, None]
    center = edges_hz[1:-1, None]
    right = edges_hz[2:, None]
    rising = (bin_freqs - left) / (center - left)
    falling = (right - bin_freqs) / (right - center)
    weights = np.clip(np.minimum(rising, falling), 0.0, None)

    if np.any(weights.sum(axis=1) <= 0.0):
        raise DegenerateFilter("a mel filter covers no FFT bin; increase fft_size")
    return weights


def dct_matrix(num_rows: int, size: int) -> np.ndarray:
    """First num_rows rows of the orthonormal DCT-II matrix of given size."""
    if not 1 <= num_rows <= size:
        raise ValueError("need 1 <= num_rows <= size")
    k = np.arange(size)
    rows = np.arange(num_rows)[:, None]
    matrix = np.sqrt(2.0 / size) * np.cos(np.pi * rows * (2 * k + 1) / (2.0 * size))
    matrix[0] /= np.sqrt(2.0)
    return matrix


def delta_features(values: np.ndarray, window: int = DELTA_WINDOW) -> np.ndarray:
    """Regression slope over +/-window frames with edge replication."""
    values = np.asarray(values, dtype=np.float64)
    padded = np.concatenate(
        [np.repeat(values[:1], window, axis=0), values, np.repeat(values[-1:], window, axis=0)]
    )
    num = np.zeros_like(values)
    for lag in range(1, window + 1):
        num += lag * (padded[window + lag:len(padded) - window + lag]
                      - padded[window - lag:len(padded) - window - lag])
    denom = 2.0 * sum(lag * lag for lag in range(1, window + 1))
    return num / denom


def mfcc(signal: AudioSignal, config: FrontendConfig | None = None) -> FeatureSequence:
    """Full front end: AudioSignal in, mel-cepstral FeatureSequence out.

    Raises TooShort when the signal yields no frame, or fewer than three
    frames while deltas are enabled.
    """
    config = config or FrontendConfig()
    config.validate(signal.sample_rate_hz)
    frame_len = config.frame_length_samples(signal.sample_rate_hz)
    shift = config.frame_shift_samples(signal.sample_rate_hz)

    frames = frame_signal(signal.samples, frame_len, shift)
    if len(frames) == 0:
        raise TooShort(f"{signal.source_id or 'signal'}: no complete frame "
                       f"({len(signal.samples)} samples, frame length {frame_len})")
    if config.append_deltas and len(frames) < 3:
        raise TooShort(f"{signal.source_id or 'signal'}: {len(frames)} frames, "
                       "deltas need at least 3")

    emphasized = np.empty_like(frames)
    emphasized[:, 0] = frames[:, 0]
    emphasized[:, 1:] = frames[:, 1:] - config.pre_emphasis * frames[:, :-1]
    windowed = emphasized * _hamming_weights(frame_len)

    spectra = np.fft.rfft(windowed, n=config.fft_size, axis=1)
    power = spectra.real**2 + spectra.imag**2

    filterbank = mel_filterbank(config, signal.sample_rate_hz)
    energies = np.maximum(power @ filterbank.T, LOG_ENERGY_FLOOR)
    cepstra = np.log(energies) @ dct_matrix(config.num_cepstra, config.num_mel_filters).T

    if config.append_deltas:
        deltas = delta_features(cepstra)
        accels = delta_features(deltas)
        vectors = np.concatenate([cepstra, deltas, accels], axis=1)
    else:
        vectors = cepstra

    if not np.all(np.isfinite(vectors)):
        raise ValueError("front end produced non-finite features")  # floored log prevents this
    return FeatureSequence(vectors, signal.source_id)
