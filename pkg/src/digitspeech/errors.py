"""Exception types shared across the toolkit."""


class DigitSpeechError(Exception):
    """Base class for all toolkit errors."""


# audio files

class MalformedWav(DigitSpeechError):
    """RIFF/WAVE container is structurally broken."""


class UnsupportedFormat(DigitSpeechError):
    """WAV file is valid but not mono 16-bit integer PCM."""


class EmptyAudio(DigitSpeechError):
    """WAV data chunk holds zero samples."""


class SampleRateMismatch(DigitSpeechError):
    def __init__(self, found_hz: int, required_hz: int):
        super().__init__(f"sample rate is {found_hz} Hz, required {required_hz} Hz")
        self.found_hz = found_hz
        self.required_hz = required_hz


# feature extraction

class TooShort(DigitSpeechError):
    """Signal yields fewer frames than the feature pipeline needs."""


class DegenerateFilter(DigitSpeechError):
    """Mel filterbank resolution exceeds what the FFT size supports."""


# lexicon

class UnknownPhone(DigitSpeechError):
    def __init__(self, line_number: int, token: str):
        super().__init__(f"line {line_number}: phone {token!r} is not in the phone set")
        self.line_number = line_number
        self.token = token


class DuplicateWord(DigitSpeechError):
    """Same word defined twice in a pronunciation dictionary."""


class EmptyPronunciation(DigitSpeechError):
    """Dictionary entry with a word but no phones."""


class OutOfVocabulary(DigitSpeechError):
    """Word has no entry in the lexicon."""


# grammar

class GrammarSyntaxError(DigitSpeechError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UndefinedRule(DigitSpeechError):
    """Rule referenced but never defined."""


class UnsupportedFeature(DigitSpeechError):
    """Grammar uses a construct outside the supported subset."""


# acoustic model

class DimensionMismatch(DigitSpeechError):
    """Feature vector dimension differs from the model's."""


class SchemaError(DigitSpeechError):
    """Model file has the wrong version, shape, or structure."""


class MissingPhoneModel(DigitSpeechError):
    """Acoustic model has no HMM for a required phone."""


# training

class EmptyCorpus(DigitSpeechError):
    """No training utterances supplied."""


class InfeasibleAlignment(DigitSpeechError):
    """Utterance has fewer frames than its composite HMM requires."""


class AllUtterancesInfeasible(DigitSpeechError):
    """Every training utterance was skipped as infeasible."""


# decoding

class NoSurvivingPath(DigitSpeechError):
    """Beam search ended with no token on a final state."""


# corpus manifests and evaluation

class OrphanFileid(DigitSpeechError):
    """Fileids entry with no matching transcription line."""


class OrphanTranscript(DigitSpeechError):
    """Transcription line with no matching fileids entry."""


class BadTranscriptLine(DigitSpeechError):
    def __init__(self, line_number: int, line: str):
        super().__init__(f"line {line_number}: cannot parse transcript {line!r}")
        self.line_number = line_number
        self.line = line


class DuplicateUtterance(DigitSpeechError):
    """Utterance id appears more than once in a manifest."""


class MissingHypothesis(DigitSpeechError):
    """Evaluation requested for an utterance with no hypothesis."""


class ConfigError(DigitSpeechError):
    """System configuration file cannot be parsed."""
