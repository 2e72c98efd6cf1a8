"""Shared fixtures and model-building helpers."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # makes `oracles` importable

from digitspeech.acoustic_model import (
    AcousticModel,
    GaussianComponent,
    HmmState,
    PhoneHmm,
)
from digitspeech.frontend import FrontendConfig
from digitspeech.lexicon import Lexicon, PhoneSet, builtin_lexicon


def random_phone_hmm(phone, num_states, dim, rng, num_components=1):
    """Valid random left-to-right phone HMM for tests."""
    states = []
    for _ in range(num_states):
        weights = rng.uniform(0.2, 1.0, num_components)
        weights /= weights.sum()
        states.append(HmmState([
            GaussianComponent(weights[m], rng.normal(0.0, 1.0, dim),
                              rng.uniform(0.5, 2.0, dim))
            for m in range(num_components)
        ]))
    size = num_states + 1
    transitions = np.zeros((size, size))
    transitions[-1, -1] = 1.0
    for i in range(num_states):
        stay = rng.uniform(0.2, 0.8)
        transitions[i, i] = stay
        transitions[i, i + 1] = 1.0 - stay
    return PhoneHmm(phone, states, transitions)


def random_task(rng, num_words=2, max_phones=2, max_states=2, dim=2, num_components=1):
    """Random (lexicon, model) pair over made-up phones."""
    entries = {}
    phones = []
    for w in range(num_words):
        pronunciation = [f"P{w}{k}" for k in range(int(rng.integers(1, max_phones + 1)))]
        entries[f"w{w}"] = tuple(pronunciation)
        phones.extend(pronunciation)
    phone_set = PhoneSet(tuple(phones))
    models = {p: random_phone_hmm(p, int(rng.integers(1, max_states + 1)), dim, rng,
                                  num_components)
              for p in phones}
    models["SIL"] = random_phone_hmm("SIL", 1, dim, rng, num_components)
    model = AcousticModel(models, dim, FrontendConfig())
    return Lexicon(entries, phone_set), model


@pytest.fixture(scope="session")
def digit_lexicon():
    return builtin_lexicon()


@pytest.fixture(scope="session")
def small_synth_corpus(tmp_path_factory):
    """2 speakers x 3 digits x 2 repetitions; enough for plumbing tests."""
    from digitspeech.corpus import synth_corpus

    out_dir = tmp_path_factory.mktemp("small_corpus")
    manifest, fileids, transcription = synth_corpus(11, out_dir, num_digits=3,
                                                    num_speakers=2, num_repetitions=2)
    return manifest, fileids, transcription, out_dir
