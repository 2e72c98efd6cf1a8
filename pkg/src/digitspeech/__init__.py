"""Small-vocabulary speaker-independent speech recognition toolkit.

Pipeline: WAV audio -> MFCC features -> phone-HMM acoustic model
(trained with embedded Baum-Welch) -> grammar-constrained Viterbi beam
decoding, plus a corpus evaluation harness.
"""

from .audio_io import AudioSignal, load_wav, validate_rate, write_wav
from .acoustic_model import (
    AcousticModel,
    GaussianComponent,
    HmmState,
    PhoneHmm,
    load_model,
    log_emission,
    save_model,
)
from .config import PathsConfig, SystemConfig, load_config, parse_config
from .corpus import CorpusManifest, ManifestEntry, parse_manifest, synth_corpus
from .decoder import (
    DecoderConfig,
    Hypothesis,
    SearchGraph,
    build_search_graph,
    decode_file,
    viterbi_decode,
)
from .evaluate import EvalReport, evaluate, format_report_table
from .frontend import FeatureSequence, FrontendConfig, mfcc
from .grammar import GrammarAst, WordFsa, accepts, compile_fsa, parse_jsgf
from .lexicon import Lexicon, PhoneSet, builtin_lexicon, builtin_phone_set, parse_dictionary
from .trainer import (
    TrainingConfig,
    UtteranceExample,
    baum_welch,
    compose_utterance_hmm,
    flat_start,
    forward_backward,
    split_mixtures,
    train_model,
)

__version__ = "0.1.0"
