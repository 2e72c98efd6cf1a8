"""Phone inventory and word-to-phones pronunciation dictionary."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .errors import DuplicateWord, EmptyPronunciation, OutOfVocabulary, UnknownPhone

SILENCE_PHONE = "SIL"


@dataclass(frozen=True)
class PhoneSet:
    """Ordered set of phone symbols; always contains the silence phone."""

    phones: tuple[str, ...]

    def __post_init__(self):
        phones = tuple(self.phones)
        seen = set()
        for phone in phones:
            if not phone or any(ch.isspace() for ch in phone):
                raise ValueError(f"invalid phone symbol {phone!r}")
            if phone in seen:
                raise ValueError(f"duplicate phone symbol {phone!r}")
            seen.add(phone)
        if SILENCE_PHONE not in seen:
            phones = phones + (SILENCE_PHONE,)
        object.__setattr__(self, "phones", phones)

    def __contains__(self, phone: str) -> bool:
        return phone in self.phones

    def __iter__(self):
        return iter(self.phones)

    def __len__(self) -> int:
        return len(self.phones)


@dataclass(frozen=True)
class Lexicon:
    """Immutable word-to-pronunciation map over a fixed phone set."""

    entries: dict[str, tuple[str, ...]]
    phone_set: PhoneSet

    def lookup(self, word: str) -> tuple[str, ...]:
        try:
            return self.entries[word]
        except KeyError:
            raise OutOfVocabulary(f"word {word!r} is not in the dictionary") from None

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(self.entries)


def parse_dictionary(text: str, phone_set: PhoneSet) -> Lexicon:
    """Parse dictionary text: one `WORD PHONE PHONE ...` entry per line.

    Blank lines are skipped and `#` starts a comment. Every phone must be
    a member of phone_set.
    """
    entries: dict[str, tuple[str, ...]] = {}
    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        word, phones = tokens[0], tuple(tokens[1:])
        if word in entries:
            raise DuplicateWord(f"line {line_number}: word {word!r} already defined")
        if not phones:
            raise EmptyPronunciation(f"line {line_number}: word {word!r} has no phones")
        for phone in phones:
            if phone not in phone_set:
                raise UnknownPhone(line_number, phone)
        entries[word] = phones
    return Lexicon(entries, phone_set)


def serialize_dictionary(lexicon: Lexicon) -> str:
    """Render a Lexicon back into dictionary text parse_dictionary accepts."""
    lines = [f"{word} {' '.join(phones)}" for word, phones in lexicon.entries.items()]
    return "\n".join(lines) + "\n"


def _asset_text(name: str) -> str:
    return resources.files("digitspeech.assets").joinpath(name).read_text(encoding="utf-8")


def builtin_phone_set() -> PhoneSet:
    """Phone inventory shipped for the Arabic digits task."""
    tokens = []
    for line in _asset_text("arabic_digits.phones").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.append(line)
    return PhoneSet(tuple(tokens))


def builtin_lexicon() -> Lexicon:
    """Pronunciation dictionary shipped for the Arabic digits 0-9."""
    return parse_dictionary(_asset_text("arabic_digits.dict"), builtin_phone_set())
