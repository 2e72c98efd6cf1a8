"""Acceptance suite: one numbered criterion per test, with a PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
lines as they complete. Criteria 6-8 share two full training runs over
the seed-7 synthetic corpus, so the module takes a couple of minutes.
"""

import re
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from digitspeech.acoustic_model import save_model
from digitspeech.audio_io import load_wav
from digitspeech.corpus import synth_corpus
from digitspeech.decoder import DecoderConfig, build_search_graph, viterbi_decode
from digitspeech.errors import NoSurvivingPath
from digitspeech.evaluate import evaluate
from digitspeech.frontend import FeatureSequence, FrontendConfig, mfcc
from digitspeech.grammar import accepts, builtin_grammar_text, compile_fsa, parse_jsgf
from digitspeech.lexicon import builtin_lexicon
from digitspeech.trainer import (
    TrainingConfig,
    UtteranceExample,
    compose_utterance_hmm,
    forward_backward,
    train_model,
    viterbi_align,
)

from conftest import random_task
from test_evaluate import REFERENCE_COUNTS, make_manifest
from test_lexicon import EXPECTED_PRONUNCIATIONS

import oracles

HELD_OUT_SPEAKER = "w3"
SEED = 7


@contextmanager
def criterion(number: int, description: str, budget_seconds: float):
    started = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"\n[criterion {number}] FAIL: {description}")
        raise
    elapsed = time.perf_counter() - started
    print(f"\n[criterion {number}] PASS: {description} ({elapsed:.1f}s)")
    assert elapsed < budget_seconds, (
        f"criterion {number} took {elapsed:.1f}s, budget {budget_seconds}s")


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("acceptance_corpus")
    manifest, fileids, transcription = synth_corpus(SEED, out_dir)
    return manifest, out_dir


def run_training_pipeline(manifest, tag, tmp_root):
    """Train on everyone except the held-out speaker; evaluate on them.

    Returns a dict with the model file bytes, LL trace, per-iteration
    invariant check results, and the held-out EvalReport.
    """
    frontend = FrontendConfig()
    corpus = []
    for entry in manifest:
        if entry.speaker_id == HELD_OUT_SPEAKER:
            continue
        signal = load_wav(entry.wav_path, entry.utterance_id)
        corpus.append(UtteranceExample(mfcc(signal, frontend), entry.transcript))

    lexicon = builtin_lexicon()
    config = TrainingConfig()
    invariant_failures = []

    def check_invariants(iteration, loglik, used, skipped, model):
        for phone, hmm in model.phone_models.items():
            rows = hmm.transitions.sum(axis=1)
            if not np.allclose(rows, 1.0, atol=1e-9):
                invariant_failures.append((iteration, phone, "transition rows"))
            for state in hmm.states:
                if abs(sum(c.weight for c in state.components) - 1.0) > 1e-9:
                    invariant_failures.append((iteration, phone, "mixture weights"))
                for component in state.components:
                    if np.any(component.variance < config.variance_floor):
                        invariant_failures.append((iteration, phone, "variance floor"))

    model, trace = train_model(corpus, lexicon, config, frontend, check_invariants)

    model_path = Path(tmp_root) / f"model_{tag}.am"
    save_model(model, model_path)

    fsa = compile_fsa(parse_jsgf(builtin_grammar_text()))
    graph = build_search_graph(fsa, lexicon, model, True)
    held_out = manifest.filter_speakers([HELD_OUT_SPEAKER])
    hypotheses = {}
    for entry in held_out:
        signal = load_wav(entry.wav_path, entry.utterance_id)
        try:
            hyp = viterbi_decode(graph, mfcc(signal, frontend))
            hypotheses[entry.utterance_id] = hyp.words
        except NoSurvivingPath:
            hypotheses[entry.utterance_id] = ()
    report = evaluate(held_out, hypotheses)

    return {
        "model": model,
        "model_bytes": model_path.read_bytes(),
        "trace": trace,
        "invariant_failures": invariant_failures,
        "report": report,
        "graph": graph,
        "held_out": held_out,
        "frontend": frontend,
    }


@pytest.fixture(scope="module")
def first_run(synth_dir, tmp_path_factory):
    manifest, _ = synth_dir
    return run_training_pipeline(manifest, "first", tmp_path_factory.mktemp("run_first"))


@pytest.fixture(scope="module")
def second_run(synth_dir, tmp_path_factory):
    manifest, _ = synth_dir
    return run_training_pipeline(manifest, "second", tmp_path_factory.mktemp("run_second"))


def test_criterion_1_evaluation_arithmetic():
    with criterion(1, "evaluation arithmetic reproduces the reference tables", 1.0):
        manifest, hypotheses = make_manifest(REFERENCE_COUNTS)
        report = evaluate(manifest, hypotheses)
        expected = {"m1": 86.66, "m2": 86.66, "m3": 83.33,
                    "w1": 83.33, "w2": 80.00, "w3": 86.66}
        for speaker, rate in expected.items():
            assert report.per_speaker[speaker].rate_percent == pytest.approx(
                rate, abs=0.005), speaker
        assert 85.55 <= report.per_group["M"] <= 85.56
        assert 83.33 <= report.per_group["W"] <= 83.34


def test_criterion_2_grammar_conformance():
    with criterion(2, "digit grammar matches the regex oracle on 1000 strings", 1.0):
        fsa = compile_fsa(parse_jsgf(builtin_grammar_text()))
        assert accepts(fsa, [])
        pattern = re.compile(r"^(?:(?:0|1|2|3|4|5|6|7|8|9) )*$")
        rng = np.random.default_rng(100)
        alphabet = [str(d) for d in range(10)] + ["x", "10", "q", "00x"]
        for _ in range(1000):
            length = int(rng.integers(0, 9))
            words = tuple(rng.choice(alphabet, size=length))
            expected = bool(pattern.match("".join(w + " " for w in words)))
            assert accepts(fsa, words) == expected, words


def test_criterion_3_dictionary_conformance():
    with criterion(3, "shipped dictionary parses and all 10 lookups match", 1.0):
        lexicon = builtin_lexicon()
        assert set(lexicon.words) == {str(d) for d in range(10)}
        for word, phones in EXPECTED_PRONUNCIATIONS.items():
            assert lexicon.lookup(word) == phones, word


def test_criterion_4_mfcc_oracle_equivalence():
    with criterion(4, "front end equals the naive oracle on 50 random signals", 30.0):
        rng = np.random.default_rng(101)
        config = FrontendConfig()
        for index in range(50):
            samples = np.clip(rng.normal(0.0, 0.2, 16000), -1.0, 1.0)
            from digitspeech.audio_io import AudioSignal
            ours = mfcc(AudioSignal(samples, 16000, f"sig{index}"), config).vectors
            reference = oracles.naive_mfcc(samples, 16000)
            assert ours.shape == reference.shape
            worst = np.max(np.abs(ours - reference))
            assert worst < 1e-6, f"signal {index}: max deviation {worst}"


def test_criterion_5_hmm_math_oracles():
    with criterion(5, "forward and Viterbi match brute force on 100 random HMMs", 10.0):
        rng = np.random.default_rng(102)
        for trial in range(100):
            lexicon, model = random_task(
                rng, num_words=1, max_phones=2, max_states=2, dim=2,
                num_components=int(rng.integers(1, 3)))
            composite = compose_utterance_hmm(("w0",), lexicon, model,
                                              bool(rng.integers(0, 2)))
            assert composite.num_states <= 5 + 3  # word states plus small silences
            num_frames = int(rng.integers(composite.min_frames,
                                          min(composite.min_frames + 4, 9)))
            observations = rng.normal(0, 1, (num_frames, 2))
            feats = FeatureSequence(observations, f"t{trial}")
            fb = forward_backward(composite, feats)
            expected_ll, expected_best = oracles.enumerate_composite_paths(
                composite, observations)
            assert fb.log_likelihood == pytest.approx(expected_ll, abs=1e-9)
            best, _ = viterbi_align(composite, feats)
            assert best == pytest.approx(expected_best, abs=1e-9)


def test_criterion_6_em_monotonicity(first_run):
    with criterion(6, "training log-likelihood never decreases; invariants hold", 300.0):
        trace = first_run["trace"]
        assert len(trace) >= 2
        for earlier, later in zip(trace, trace[1:]):
            assert later >= earlier - 1e-6, (earlier, later)
        assert first_run["invariant_failures"] == []


def test_criterion_7_end_to_end_synthetic_recognition(first_run):
    with criterion(7, "held-out speaker recognition rate is at least 95%", 600.0):
        report = first_run["report"]
        speaker_score = report.per_speaker[HELD_OUT_SPEAKER]
        assert speaker_score.total == 50
        assert speaker_score.rate_percent >= 95.0, report.per_speaker


def test_criterion_8_determinism(first_run, second_run):
    with criterion(8, "repeated runs give bit-identical models and reports", 600.0):
        assert first_run["model_bytes"] == second_run["model_bytes"]
        assert first_run["trace"] == second_run["trace"]
        assert first_run["report"] == second_run["report"]


def test_criterion_9_beam_properties(first_run):
    with criterion(9, "unlimited beam equals the oracle; wider beams never score lower",
                   60.0):
        rng = np.random.default_rng(103)
        unlimited = DecoderConfig(beam_width_log=None, max_active=None)

        # part 1: oracle equivalence on random small search graphs
        for trial in range(20):
            lexicon, model = random_task(rng, num_words=2, max_phones=2, max_states=2)
            body = "(w0 | w1)*" if rng.integers(0, 2) else "(w0 | w1)"
            fsa = compile_fsa(parse_jsgf(f"grammar g; public <r> = {body};"))
            graph = build_search_graph(fsa, lexicon, model, bool(rng.integers(0, 2)))
            assert graph.num_emitting <= 30
            num_frames = int(rng.integers(3, 9))
            observations = rng.normal(0, 1, (num_frames, 2))
            feats = FeatureSequence(observations, f"g{trial}")
            expected_score, expected_words = oracles.enumerate_graph_paths(
                graph, observations)
            try:
                hyp = viterbi_decode(graph, feats, unlimited)
                assert hyp.log_score == pytest.approx(expected_score, abs=1e-9)
                assert hyp.words == expected_words
            except NoSurvivingPath:
                assert not np.isfinite(expected_score)

        # part 2: beam sweep on 20 synthetic utterances from the trained system
        graph = first_run["graph"]
        frontend = first_run["frontend"]
        held_out = list(first_run["held_out"])[:20]
        sweep = [10.0, 50.0, 200.0, None]
        scores = {beam: [] for beam in sweep}
        for entry in held_out:
            signal = load_wav(entry.wav_path, entry.utterance_id)
            feats = mfcc(signal, frontend)
            for beam in sweep:
                try:
                    hyp = viterbi_decode(graph, feats,
                                         DecoderConfig(beam_width_log=beam,
                                                       max_active=None))
                    scores[beam].append(hyp.log_score)
                except NoSurvivingPath:
                    scores[beam].append(-np.inf)
        for narrow, wide in zip(sweep, sweep[1:]):
            for a, b in zip(scores[narrow], scores[wide]):
                assert b >= a - 1e-9
