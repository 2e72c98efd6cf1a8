"""Line-oriented system configuration: `section.key = value` pairs.

Sections: frontend, trainer, decoder, paths. Unknown keys are errors so
typos fail loudly. The words `nyquist` and `unlimited` name the two
"no limit" sentinels; booleans are `true`/`false`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .decoder import DecoderConfig
from .errors import ConfigError
from .frontend import FrontendConfig
from .trainer import TrainingConfig


@dataclass(frozen=True)
class PathsConfig:
    dictionary: str | None = None
    grammar: str | None = None
    model: str | None = None
    manifest_fileids: str | None = None
    manifest_trans: str | None = None
    wav_root: str | None = None


@dataclass(frozen=True)
class SystemConfig:
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    trainer: TrainingConfig = field(default_factory=TrainingConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)


_SECTIONS = {
    "frontend": FrontendConfig,
    "trainer": TrainingConfig,
    "decoder": DecoderConfig,
    "paths": PathsConfig,
}

_SENTINELS = {"high_freq_hz": "nyquist", "beam_width_log": "unlimited",
              "max_active": "unlimited"}


def _coerce(section: str, key: str, raw: str, line_number: int):
    config_cls = _SECTIONS[section]
    by_name = {f.name: f for f in fields(config_cls)}
    if key not in by_name:
        raise ConfigError(f"line {line_number}: unknown key {section}.{key}")
    if _SENTINELS.get(key) == raw.lower():
        return None
    declared = by_name[key].type
    try:
        if "bool" in declared:
            if raw.lower() not in ("true", "false"):
                raise ValueError(f"expected true/false, got {raw!r}")
            return raw.lower() == "true"
        if "int" in declared:
            return int(raw)
        if "float" in declared:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"line {line_number}: bad value for {section}.{key}: {exc}") from None


def parse_config(text: str) -> SystemConfig:
    """Parse configuration text into a SystemConfig."""
    values: dict[str, dict[str, object]] = {name: {} for name in _SECTIONS}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_number}: expected `section.key = value`")
        lhs, rhs = line.split("=", 1)
        lhs, rhs = lhs.strip(), rhs.strip()
        if "." not in lhs:
            raise ConfigError(f"line {line_number}: key {lhs!r} is missing its section")
        section, key = lhs.split(".", 1)
        if section not in _SECTIONS:
            raise ConfigError(f"line {line_number}: unknown section {section!r}")
        values[section][key] = _coerce(section, key, rhs, line_number)

    try:
        return SystemConfig(
            frontend=FrontendConfig(**values["frontend"]),
            trainer=TrainingConfig(**values["trainer"]),
            decoder=DecoderConfig(**values["decoder"]),
            paths=PathsConfig(**values["paths"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> SystemConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))
