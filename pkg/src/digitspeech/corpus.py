"""Corpus manifests (fileids + transcription) and a synthetic test corpus.

A manifest joins two text files: a fileids file listing one relative
wav path per line (no extension) and a transcription file with lines
`<s> WORDS </s> (utterance_id)`. Utterance ids follow
`<speaker>_d<digit>_t<trial>`; the speaker token's first letter (m/w)
marks the speaker group, which is how per-group rates get their rows.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import AudioSignal, write_wav
from .errors import BadTranscriptLine, DuplicateUtterance, OrphanFileid, OrphanTranscript
from .lexicon import SILENCE_PHONE, builtin_lexicon, builtin_phone_set

_TRANSCRIPT_RE = re.compile(r"^<s>\s*(?P<words>.*?)\s*</s>\s*\((?P<utt>[^()\s]+)\)$")


@dataclass(frozen=True)
class ManifestEntry:
    utterance_id: str
    wav_path: Path
    transcript: tuple[str, ...]
    speaker_id: str
    speaker_sex: str  # 'M' or 'W'


@dataclass(frozen=True)
class CorpusManifest:
    entries: tuple[ManifestEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def speakers(self) -> tuple[str, ...]:
        return tuple(sorted({e.speaker_id for e in self.entries}))

    def by_id(self, utterance_id: str) -> ManifestEntry:
        for entry in self.entries:
            if entry.utterance_id == utterance_id:
                return entry
        raise KeyError(utterance_id)

    def filter_speakers(self, keep) -> "CorpusManifest":
        keep = set(keep)
        return CorpusManifest(tuple(e for e in self.entries if e.speaker_id in keep))


def speaker_of(utterance_id: str) -> tuple[str, str]:
    """Derive (speaker_id, sex) from an utterance id.

    The speaker is the leading underscore-separated token; a token
    starting with w/W is grouped as 'W', anything else as 'M'.
    """
    speaker = utterance_id.split("_", 1)[0]
    sex = "W" if speaker[:1].lower() == "w" else "M"
    return speaker, sex


def trial_of(utterance_id: str) -> int:
    """Trial number from a `..._t<k>` suffix; 1 when the id has none."""
    match = re.search(r"_t(\d+)$", utterance_id)
    return int(match.group(1)) if match else 1


def parse_manifest(fileids_text: str, transcription_text: str,
                   wav_root: str | Path = ".", wav_extension: str = ".wav") -> CorpusManifest:
    """Join a fileids file and a transcription file into a manifest.

    Utterance ids are the basename of each fileids path. Every fileid
    must have exactly one transcript and vice versa.
    """
    wav_root = Path(wav_root)
    fileids: dict[str, Path] = {}
    for line_number, raw in enumerate(fileids_text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        utterance_id = line.rsplit("/", 1)[-1]
        if utterance_id in fileids:
            raise DuplicateUtterance(f"fileids line {line_number}: {utterance_id!r} repeated")
        fileids[utterance_id] = wav_root / (line + wav_extension)

    transcripts: dict[str, tuple[str, ...]] = {}
    for line_number, raw in enumerate(transcription_text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        match = _TRANSCRIPT_RE.match(line)
        if not match:
            raise BadTranscriptLine(line_number, raw)
        utterance_id = match.group("utt")
        if utterance_id in transcripts:
            raise DuplicateUtterance(
                f"transcription line {line_number}: {utterance_id!r} repeated")
        transcripts[utterance_id] = tuple(match.group("words").split())

    for utterance_id in transcripts:
        if utterance_id not in fileids:
            raise OrphanTranscript(f"transcript {utterance_id!r} has no fileids entry")

    entries = []
    for utterance_id, wav_path in fileids.items():
        if utterance_id not in transcripts:
            raise OrphanFileid(f"fileid {utterance_id!r} has no transcript")
        speaker, sex = speaker_of(utterance_id)
        entries.append(ManifestEntry(utterance_id, wav_path, transcripts[utterance_id],
                                     speaker, sex))
    entries.sort(key=lambda e: e.utterance_id)
    return CorpusManifest(tuple(entries))


def write_manifest_files(manifest: CorpusManifest, fileids_path: str | Path,
                         transcription_path: str | Path, wav_root: str | Path) -> None:
    """Write the two manifest text files for a set of entries."""
    wav_root = Path(wav_root)
    fileid_lines = []
    transcript_lines = []
    for entry in manifest.entries:
        relative = entry.wav_path.relative_to(wav_root)
        fileid_lines.append(str(relative.with_suffix("")))
        transcript_lines.append(f"<s> {' '.join(entry.transcript)} </s> ({entry.utterance_id})")
    Path(fileids_path).write_text("\n".join(fileid_lines) + "\n", encoding="utf-8")
    Path(transcription_path).write_text("\n".join(transcript_lines) + "\n", encoding="utf-8")


# synthetic corpus: each phone gets a fixed set of sinusoids so digits are
# acoustically separable without any human recordings

SYNTH_SAMPLE_RATE = 16000
PHONE_MS = 120
SILENCE_MS = 60
_NOISE_AMPLITUDE = 0.01
_SILENCE_AMPLITUDE = 0.002
_RAMP_MS = 5


def phone_frequency_table() -> dict[str, tuple[float, ...]]:
    """Three sinusoid frequencies per non-silence phone, all below Nyquist."""
    table = {}
    tone_phones = [p for p in builtin_phone_set() if p != SILENCE_PHONE]
    for index, phone in enumerate(tone_phones):
        base = 300.0 + 150.0 * index
        table[phone] = (base, 7900.0 - 160.0 * index, 1000.0 + 97.0 * index)
    return table


def render_utterance(phones, sample_rate_hz: int, rng: np.random.Generator,
                     freq_scale: float = 1.0) -> np.ndarray:
    """Render a phone sequence as tones with silence padding on both ends."""
    table = phone_frequency_table()
    phone_len = int(sample_rate_hz * PHONE_MS / 1000)
    silence_len = int(sample_rate_hz * SILENCE_MS / 1000)
    ramp_len = int(sample_rate_hz * _RAMP_MS / 1000)
    ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp_len) / ramp_len)

    pieces = [rng.normal(0.0, _SILENCE_AMPLITUDE, silence_len)]
    for phone in phones:
        t = np.arange(phone_len) / sample_rate_hz
        tone = np.zeros(phone_len)
        for amplitude, freq in zip((0.25, 0.15, 0.10), table[phone]):
            tone += amplitude * np.sin(2.0 * np.pi * freq * freq_scale * t)
        tone[:ramp_len] *= ramp
        tone[-ramp_len:] *= ramp[::-1]
        tone += rng.normal(0.0, _NOISE_AMPLITUDE, phone_len)
        pieces.append(tone)
    pieces.append(rng.normal(0.0, _SILENCE_AMPLITUDE, silence_len))
    return np.clip(np.concatenate(pieces), -1.0, 1.0)


def synth_corpus(seed: int, out_dir: str | Path, num_digits: int = 10,
                 num_speakers: int = 6, num_repetitions: int = 5):
    """Generate a deterministic synthetic digit corpus.

    Writes `wav/<utterance_id>.wav` files plus `corpus.fileids` and
    `corpus.transcription` under out_dir and returns
    (manifest, fileids_path, transcription_path). Speakers split into
    the m and w groups and differ by a small frequency scaling.
    """
    if not 1 <= num_digits <= 10:
        raise ValueError("num_digits must be in 1..10")
    out_dir = Path(out_dir)
    wav_dir = out_dir / "wav"
    wav_dir.mkdir(parents=True, exist_ok=True)
    lexicon = builtin_lexicon()

    half = (num_speakers + 1) // 2
    speakers = [f"m{k + 1}" for k in range(half)]
    speakers += [f"w{k + 1}" for k in range(num_speakers - half)]

    rng = np.random.default_rng(seed)
    entries = []
    for speaker_index, speaker in enumerate(speakers):
        freq_scale = 1.0 + 0.004 * (speaker_index - (num_speakers - 1) / 2.0)
        for digit in range(num_digits):
            word = str(digit)
            phones = lexicon.lookup(word)
            for trial in range(1, num_repetitions + 1):
                utterance_id = f"{speaker}_d{digit}_t{trial}"
                samples = render_utterance(phones, SYNTH_SAMPLE_RATE, rng, freq_scale)
                wav_path = wav_dir / f"{utterance_id}.wav"
                write_wav(AudioSignal(samples, SYNTH_SAMPLE_RATE, utterance_id), wav_path)
                speaker_id, sex = speaker_of(utterance_id)
                entries.append(ManifestEntry(utterance_id, wav_path, (word,),
                                             speaker_id, sex))

    entries.sort(key=lambda e: e.utterance_id)
    manifest = CorpusManifest(tuple(entries))
    fileids_path = out_dir / "corpus.fileids"
    transcription_path = out_dir / "corpus.transcription"
    write_manifest_files(manifest, fileids_path, transcription_path, out_dir)
    return manifest, fileids_path, transcription_path
