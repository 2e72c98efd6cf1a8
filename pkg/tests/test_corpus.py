"""Manifest parsing and the synthetic corpus generator."""

import numpy as np
import pytest

from digitspeech.audio_io import load_wav
from digitspeech.corpus import (
    parse_manifest,
    speaker_of,
    synth_corpus,
    trial_of,
)
from digitspeech.errors import (
    BadTranscriptLine,
    DuplicateUtterance,
    OrphanFileid,
    OrphanTranscript,
)
from digitspeech.corpus import phone_frequency_table, render_utterance


FILEIDS = """\
wav/m1_d4_t1
wav/m1_d4_t2
wav/w1_d0_t1
"""

TRANSCRIPTION = """\
<s> 4 </s> (m1_d4_t1)
<s> 4 </s> (m1_d4_t2)
<s> 0 </s> (w1_d0_t1)
"""


class TestParseManifest:
    def test_joins_on_utterance_id(self, tmp_path):
        manifest = parse_manifest(FILEIDS, TRANSCRIPTION, tmp_path)
        assert len(manifest) == 3
        entry = manifest.by_id("m1_d4_t2")
        assert entry.transcript == ("4",)
        assert entry.wav_path == tmp_path / "wav/m1_d4_t2.wav"
        assert entry.speaker_id == "m1"
        assert entry.speaker_sex == "M"

    def test_speaker_group_from_leading_letter(self):
        assert speaker_of("m1_d4_t2") == ("m1", "M")
        assert speaker_of("w3_d0_t5") == ("w3", "W")
        assert trial_of("m1_d4_t2") == 2
        assert trial_of("no_trial_suffix") == 1

    def test_orphan_fileid_rejected(self):
        with pytest.raises(OrphanFileid):
            parse_manifest(FILEIDS, "\n".join(TRANSCRIPTION.splitlines()[:2]))

    def test_orphan_transcript_rejected(self):
        with pytest.raises(OrphanTranscript):
            parse_manifest("\n".join(FILEIDS.splitlines()[:2]), TRANSCRIPTION)

    def test_bad_transcript_line_reports_number(self):
        bad = TRANSCRIPTION.replace("<s> 0 </s> (w1_d0_t1)", "0 w1_d0_t1")
        with pytest.raises(BadTranscriptLine) as info:
            parse_manifest(FILEIDS, bad)
        assert info.value.line_number == 3

    def test_duplicate_ids_rejected(self):
        with pytest.raises(DuplicateUtterance):
            parse_manifest(FILEIDS + "wav/m1_d4_t1\n",
                           TRANSCRIPTION + "<s> 4 </s> (m1_d4_t1)\n")

    def test_empty_transcript_allowed(self):
        manifest = parse_manifest("wav/m1_d0_t1\n", "<s> </s> (m1_d0_t1)\n")
        assert manifest.entries[0].transcript == ()


class TestSynthCorpus:
    def test_small_corpus_shape(self, small_synth_corpus):
        manifest, fileids, transcription, out_dir = small_synth_corpus
        assert len(manifest) == 3 * 2 * 2
        assert sorted({e.speaker_id for e in manifest}) == ["m1", "w1"]
        for entry in manifest:
            assert entry.wav_path.exists()

    def test_manifest_files_parse_back(self, small_synth_corpus):
        manifest, fileids, transcription, out_dir = small_synth_corpus
        reparsed = parse_manifest(fileids.read_text(), transcription.read_text(), out_dir)
        assert reparsed == manifest

    def test_wavs_are_16khz_mono(self, small_synth_corpus):
        manifest, _, _, _ = small_synth_corpus
        signal = load_wav(manifest.entries[0].wav_path)
        assert signal.sample_rate_hz == 16000

    def test_same_seed_is_bit_identical(self, tmp_path):
        first = tmp_path / "first"
        second = tmp_path / "second"
        synth_corpus(123, first, num_digits=1, num_speakers=1, num_repetitions=1)
        synth_corpus(123, second, num_digits=1, num_speakers=1, num_repetitions=1)
        wav_a = (first / "wav" / "m1_d0_t1.wav").read_bytes()
        wav_b = (second / "wav" / "m1_d0_t1.wav").read_bytes()
        assert wav_a == wav_b

    def test_full_shape_is_300_tokens(self, tmp_path):
        manifest, _, _ = synth_corpus(7, tmp_path / "full")
        assert len(manifest) == 300
        assert len(manifest.speakers) == 6
        sexes = {e.speaker_sex for e in manifest}
        assert sexes == {"M", "W"}

    def test_phones_have_distinct_dominant_frequencies(self):
        """Generator table entries resolve to distinct spectral peaks."""
        import oracles

        rng = np.random.default_rng(0)
        table = phone_frequency_table()
        dominant = {}
        for phone in list(table)[:8]:
            samples = render_utterance([phone], 16000, rng)
            start = int(0.06 * 16000) + 400  # inside the tone segment
            frame = samples[start:start + 1024]
            power = oracles.naive_dft_power(frame, 1024)
            peak_bin = int(np.argmax(power[1:])) + 1
            dominant[phone] = peak_bin
        assert len(set(dominant.values())) == len(dominant)
        for phone, peak_bin in dominant.items():
            peak_hz = peak_bin * 16000 / 1024
            assert min(abs(peak_hz - f) for f in table[phone]) < 40.0
