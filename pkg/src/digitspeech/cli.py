"""Batch command-line interface.

Subcommands: validate, features, train, decode, eval, graph, synth.
Exit codes: 0 success, 1 user error (bad arguments, bad files),
2 internal error.
"""

from __future__ import annotations

import argparse
import sys
import traceback
import warnings
from pathlib import Path

import numpy as np

from . import figures
from .acoustic_model import (
    NUM_EMITTING_STATES,
    AcousticModel,
    GaussianComponent,
    HmmState,
    PhoneHmm,
    load_model,
    save_model,
)
from .audio_io import load_wav, validate_rate
from .config import SystemConfig, load_config
from .corpus import CorpusManifest, parse_manifest, synth_corpus
from .decoder import DecoderConfig, build_search_graph, decode_file
from .errors import DigitSpeechError, NoSurvivingPath, TooShort
from .evaluate import evaluate, format_report_table, per_utterance_tsv, report_tsv
from .frontend import mfcc
from .grammar import builtin_grammar_text, compile_fsa, parse_jsgf
from .lexicon import builtin_lexicon, builtin_phone_set, parse_dictionary
from .trainer import TrainingConfig, UtteranceExample, train_model

DEFAULT_SAMPLE_RATE = 16000


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="system configuration file")
    parser.add_argument("--dict", help="pronunciation dictionary (default: shipped digits)")
    parser.add_argument("--grammar", help="grammar file (default: shipped digit loop)")
    parser.add_argument("--model", help="acoustic model file")
    parser.add_argument("--manifest-fileids", help="corpus fileids file")
    parser.add_argument("--manifest-trans", help="corpus transcription file")
    parser.add_argument("--wav-root", help="directory wav paths are relative to "
                                           "(default: the fileids file's directory)")
    parser.add_argument("--beam", help="beam width in log domain, or `unlimited`")
    parser.add_argument("--iters", type=int, help="training iteration cap")


def build_parser() -> _Parser:
    parser = _Parser(prog="digitspeech",
                     description="Small-vocabulary HMM speech recognition toolkit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("validate", help="check corpus, dictionary, grammar, and wav files")
    _add_common_options(p)
    p.add_argument("--rate", type=int, default=DEFAULT_SAMPLE_RATE,
                   help="required sample rate in Hz")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("features", help="dump MFCC vectors for one wav file")
    _add_common_options(p)
    p.add_argument("wav", help="input wav file")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="flat start + Baum-Welch over a manifest")
    _add_common_options(p)
    p.add_argument("--model-out", help="where to write the trained model "
                                       "(default: paths.model from the config)")
    p.add_argument("--report-dir", help="write train_log.txt and loglik.png here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode", help="decode wav files or a whole manifest")
    _add_common_options(p)
    p.add_argument("wavs", nargs="*", help="wav files (omit when using --manifest-fileids)")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="decode a manifest and print recognition rates")
    _add_common_options(p)
    p.add_argument("--report-dir", help="write report.txt/.tsv, per_utterance.tsv, rates.png")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("graph", help="inspect the compiled search graph")
    _add_common_options(p)
    p.add_argument("--stats", action="store_true", help="print node/arc counts")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("synth", help="generate the deterministic synthetic corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--digits", type=int, default=10)
    p.add_argument("--speakers", type=int, default=6)
    p.add_argument("--repetitions", type=int, default=5)
    p.set_defaults(func=cmd_synth)
    return parser


def run_cli(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"digitspeech: error: {exc}", file=sys.stderr)
        return 1
    if getattr(args, "command", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"digitspeech: error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        # downstream consumer (head, less, ...) closed the pipe; not our error
        import os
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except (DigitSpeechError, OSError, ValueError) as exc:
        print(f"digitspeech: error: {exc}", file=sys.stderr)
        return 1
    except Exception:  # internal error
        traceback.print_exc()
        return 2


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


# shared plumbing

def _system_config(args) -> SystemConfig:
    config = load_config(args.config) if args.config else SystemConfig()
    decoder = config.decoder
    trainer = config.trainer
    if getattr(args, "beam", None):
        beam = None if args.beam.lower() == "unlimited" else float(args.beam)
        decoder = DecoderConfig(beam, decoder.word_insertion_penalty_log, decoder.max_active)
    if getattr(args, "iters", None):
        trainer = TrainingConfig(args.iters, trainer.convergence_rel_tol,
                                 trainer.variance_floor, trainer.target_mixtures,
                                 trainer.add_optional_silence)
    return SystemConfig(config.frontend, trainer, decoder, config.paths)


def _load_lexicon(args, config: SystemConfig):
    path = args.dict or config.paths.dictionary
    if path is None:
        return builtin_lexicon()
    return parse_dictionary(Path(path).read_text(encoding="utf-8"), builtin_phone_set())


def _load_fsa(args, config: SystemConfig):
    path = args.grammar or config.paths.grammar
    text = Path(path).read_text(encoding="utf-8") if path else builtin_grammar_text()
    return compile_fsa(parse_jsgf(text))


def _load_manifest(args, config: SystemConfig) -> CorpusManifest:
    fileids = args.manifest_fileids or config.paths.manifest_fileids
    trans = args.manifest_trans or config.paths.manifest_trans
    if not fileids or not trans:
        raise _UsageError("need --manifest-fileids and --manifest-trans "
                          "(or paths.* in the config)")
    wav_root = args.wav_root or config.paths.wav_root or Path(fileids).parent
    return parse_manifest(Path(fileids).read_text(encoding="utf-8"),
                          Path(trans).read_text(encoding="utf-8"), wav_root)


def _load_model(args, config: SystemConfig) -> AcousticModel:
    path = args.model or config.paths.model
    if not path:
        raise _UsageError("need --model (or paths.model in the config)")
    return load_model(path)


def _structural_model(lexicon, config: SystemConfig) -> AcousticModel:
    """Untrained placeholder model, good enough for graph statistics."""
    dim = config.frontend.feature_dim
    size = NUM_EMITTING_STATES + 1
    transitions = np.zeros((size, size))
    transitions[-1, -1] = 1.0
    for i in range(NUM_EMITTING_STATES):
        transitions[i, i] = 0.5
        transitions[i, i + 1] = 0.5
    models = {}
    for phone in lexicon.phone_set:
        states = [HmmState([GaussianComponent(1.0, np.zeros(dim), np.ones(dim))])
                  for _ in range(NUM_EMITTING_STATES)]
        models[phone] = PhoneHmm(phone, states, transitions)
    return AcousticModel(models, dim, config.frontend)


def _decode_manifest(manifest, model, graph, config: SystemConfig):
    hypotheses = {}
    scores = {}
    for entry in manifest:
        try:
            hyp = decode_file(entry.wav_path, model, graph,
                              model.frontend_config, config.decoder)
            hypotheses[entry.utterance_id] = hyp.words
            scores[entry.utterance_id] = hyp.log_score
        except NoSurvivingPath:
            hypotheses[entry.utterance_id] = ()
            scores[entry.utterance_id] = float("-inf")
    return hypotheses, scores


# subcommands

def cmd_validate(args) -> int:
    config = _system_config(args)
    failures = 0

    def check(label, fn):
        nonlocal failures
        try:
            detail = fn()
        except (DigitSpeechError, OSError, ValueError) as exc:
            print(f"FAIL {label}: {exc}")
            failures += 1
            return None
        print(f"OK   {label}" + (f" ({detail})" if detail else ""))
        return detail

    lexicon_box = {}

    def load_lex():
        lexicon_box["lexicon"] = _load_lexicon(args, config)
        return f"{len(lexicon_box['lexicon'].words)} words"

    check("dictionary", load_lex)

    def load_gram():
        fsa = _load_fsa(args, config)
        lexicon = lexicon_box.get("lexicon")
        if lexicon is not None:
            for word in fsa.terminals:
                lexicon.lookup(word)
        return f"{fsa.num_states} states, {len(fsa.edges)} edges"

    check("grammar", load_gram)

    if args.manifest_fileids or config.paths.manifest_fileids:
        manifest_box = {}

        def load_mani():
            manifest = _load_manifest(args, config)
            lexicon = lexicon_box.get("lexicon")
            if lexicon is not None:
                for entry in manifest:
                    for word in entry.transcript:
                        lexicon.lookup(word)
            manifest_box["manifest"] = manifest
            return f"{len(manifest)} utterances"

        check("manifest", load_mani)
        for entry in manifest_box.get("manifest", CorpusManifest(())):
            check(f"wav {entry.utterance_id}",
                  lambda e=entry: validate_rate(load_wav(e.wav_path), args.rate))

    return 1 if failures else 0


def cmd_features(args) -> int:
    config = _system_config(args)
    features = mfcc(load_wav(args.wav), config.frontend)
    print(f"frames {len(features)} dim {features.dim}")
    for row in features.vectors:
        print(" ".join(format(v, ".8g") for v in row))
    return 0


def cmd_train(args) -> int:
    config = _system_config(args)
    lexicon = _load_lexicon(args, config)
    manifest = _load_manifest(args, config)
    model_out = args.model_out or config.paths.model
    if not model_out:
        raise _UsageError("need --model-out (or paths.model in the config)")

    corpus = []
    for entry in manifest:
        try:
            features = mfcc(load_wav(entry.wav_path, entry.utterance_id), config.frontend)
        except TooShort as exc:
            warnings.warn(f"skipping {entry.utterance_id}: {exc}")
            continue
        corpus.append(UtteranceExample(features, entry.transcript))

    log_lines = []

    def on_iteration(iteration, loglik, used, skipped, _model):
        line = f"iter {iteration} loglik {loglik:.6f} utts_used {used} utts_skipped {skipped}"
        log_lines.append(line)
        print(line)

    model, trace = train_model(corpus, lexicon, config.trainer, config.frontend, on_iteration)
    save_model(model, model_out)
    print(f"model written to {model_out}")

    if args.report_dir:
        report_dir = Path(args.report_dir)
        report_dir.mkdir(parents=True, exist_ok=True)
        (report_dir / "train_log.txt").write_text("\n".join(log_lines) + "\n", encoding="utf-8")
        figures.save_loglik_curve(trace, report_dir / "loglik.png")
        print(f"training report written to {report_dir}")
    return 0


def cmd_decode(args) -> int:
    config = _system_config(args)
    lexicon = _load_lexicon(args, config)
    model = _load_model(args, config)
    graph = build_search_graph(_load_fsa(args, config), lexicon, model,
                               config.trainer.add_optional_silence)

    if args.wavs:
        jobs = [(Path(w).stem, Path(w)) for w in args.wavs]
    else:
        manifest = _load_manifest(args, config)
        jobs = [(e.utterance_id, e.wav_path) for e in manifest]
    if not jobs:
        raise _UsageError("nothing to decode: give wav files or a manifest")

    for utterance_id, wav_path in jobs:
        try:
            hyp = decode_file(wav_path, model, graph, model.frontend_config, config.decoder)
            print(" ".join([utterance_id, *hyp.words, f"{hyp.log_score:.6f}"]))
        except NoSurvivingPath as exc:
            print(f"{utterance_id} ** no surviving path: {exc}", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    config = _system_config(args)
    lexicon = _load_lexicon(args, config)
    model = _load_model(args, config)
    manifest = _load_manifest(args, config)
    graph = build_search_graph(_load_fsa(args, config), lexicon, model,
                               config.trainer.add_optional_silence)

    hypotheses, scores = _decode_manifest(manifest, model, graph, config)
    report = evaluate(manifest, hypotheses)
    table = format_report_table(report)
    print(table)

    if args.report_dir:
        report_dir = Path(args.report_dir)
        report_dir.mkdir(parents=True, exist_ok=True)
        (report_dir / "report.txt").write_text(table + "\n", encoding="utf-8")
        (report_dir / "report.tsv").write_text(report_tsv(report), encoding="utf-8")
        (report_dir / "per_utterance.tsv").write_text(
            per_utterance_tsv(manifest, hypotheses, scores), encoding="utf-8")
        figures.save_rate_chart(report, report_dir / "rates.png")
        print(f"evaluation report written to {report_dir}")
    return 0


def cmd_graph(args) -> int:
    config = _system_config(args)
    lexicon = _load_lexicon(args, config)
    model_path = args.model or config.paths.model
    model = load_model(model_path) if model_path else _structural_model(lexicon, config)
    graph = build_search_graph(_load_fsa(args, config), lexicon, model,
                               config.trainer.add_optional_silence)
    stats = graph.stats()
    for key in ("nodes", "arcs", "emitting_nodes", "word_end_nodes",
                "grammar_nodes", "closure_arcs"):
        print(f"{key} {stats[key]}")
    return 0


def cmd_synth(args) -> int:
    manifest, fileids_path, trans_path = synth_corpus(
        args.seed, args.out_dir, args.digits, args.speakers, args.repetitions)
    print(f"wrote {len(manifest)} utterances under {args.out_dir}")
    print(f"fileids: {fileids_path}")
    print(f"transcription: {trans_path}")
    return 0
