"""Reading and writing 16-bit mono PCM WAV files."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyAudio, MalformedWav, SampleRateMismatch, UnsupportedFormat

PCM_FORMAT_CODE = 1
INT16_SCALE = 32768.0


@dataclass(frozen=True)
class AudioSignal:
    """Mono waveform with samples normalized into [-1.0, 1.0]."""

    samples: np.ndarray
    sample_rate_hz: int
    source_id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / self.sample_rate_hz


def load_wav(path: str | Path, source_id: str | None = None) -> AudioSignal:
    """Parse a RIFF/WAVE file holding 16-bit mono integer PCM audio.

    Samples are scaled by 1/32768 so the int16 range maps into
    [-1.0, 0.99997]. Chunks other than fmt and data (LIST, INFO, fact,
    ...) are skipped. The source_id defaults to the file stem.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise MalformedWav(f"{path}: not a RIFF/WAVE file")

    fmt_fields = None
    data_bytes = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos:pos + 4]
        (chunk_size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8:pos + 8 + chunk_size]
        if len(body) < chunk_size:
            raise MalformedWav(f"{path}: truncated {chunk_id!r} chunk")
        if chunk_id == b"fmt " and fmt_fields is None:
            if chunk_size < 16:
                raise MalformedWav(f"{path}: fmt chunk too small ({chunk_size} bytes)")
            fmt_fields = struct.unpack_from("<HHIIHH", body)
        elif chunk_id == b"data" and data_bytes is None:
            if fmt_fields is None:
                raise MalformedWav(f"{path}: data chunk precedes fmt chunk")
            data_bytes = body
        # chunks are word-aligned; odd sizes carry a pad byte
        pos += 8 + chunk_size + (chunk_size & 1)

    if fmt_fields is None:
        raise MalformedWav(f"{path}: no fmt chunk")
    if data_bytes is None:
        raise MalformedWav(f"{path}: no data chunk")

    format_code, channels, sample_rate, _byte_rate, _block_align, bits = fmt_fields
    if format_code != PCM_FORMAT_CODE:
        raise UnsupportedFormat(f"{path}: format code {format_code}, only PCM (1) is supported")
    if channels != 1:
        raise UnsupportedFormat(f"{path}: {channels} channels, only mono is supported")
    if bits != 16:
        raise UnsupportedFormat(f"{path}: {bits}-bit samples, only 16-bit is supported")
    if sample_rate <= 0:
        raise MalformedWav(f"{path}: nonpositive sample rate {sample_rate}")
    if len(data_bytes) % 2 != 0:
        raise MalformedWav(f"{path}: data chunk size is not a multiple of the sample size")

    ints = np.frombuffer(data_bytes, dtype="<i2")
    if len(ints) == 0:
        raise EmptyAudio(f"{path}: data chunk holds zero samples")
    samples = ints.astype(np.float64) / INT16_SCALE
    return AudioSignal(samples, int(sample_rate), source_id if source_id is not None else path.stem)


def write_wav(signal: AudioSignal, path: str | Path) -> None:
    """Write an AudioSignal as a 16-bit mono PCM WAV file.

    Samples are quantized with round-to-nearest and clamped to the int16
    range, so a signal produced by load_wav round-trips bit-exactly.
    """
    ints = np.clip(np.rint(signal.samples * INT16_SCALE), -32768, 32767).astype("<i2")
    data = ints.tobytes()
    fmt = struct.pack(
        "<HHIIHH",
        PCM_FORMAT_CODE,
        1,
        signal.sample_rate_hz,
        signal.sample_rate_hz * 2,
        2,
        16,
    )
    out = bytearray()
    out += b"RIFF"
    out += struct.pack("<I", 4 + 8 + len(fmt) + 8 + len(data))
    out += b"WAVE"
    out += b"fmt " + struct.pack("<I", len(fmt)) + fmt
    out += b"data" + struct.pack("<I", len(data)) + data
    Path(path).write_bytes(bytes(out))


def validate_rate(signal: AudioSignal, required_hz: int) -> None:
    """Raise SampleRateMismatch unless the signal is at required_hz."""
    if signal.sample_rate_hz != required_hz:
        raise SampleRateMismatch(signal.sample_rate_hz, required_hz)
