"""Phone HMM and Gaussian-mixture parameter structures with text serialization.

Each phone is a left-to-right HMM of emitting states (3 by default, no
skips) whose emission densities are diagonal-covariance Gaussian
mixtures. The transition matrix has one extra index for the exit, so a
phone with S emitting states carries an (S+1)x(S+1) row-stochastic
matrix where row i may only reach columns i and i+1.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, SchemaError
from .frontend import FrontendConfig

NUM_EMITTING_STATES = 3
MODEL_FILE_HEADER = "DIGITSPEECH-AM v1"
LOG_PROB_FLOOR = -1.0e10  # saturation value instead of -inf for emissions
_ROW_SUM_TOL = 1e-9
_LOG_TWO_PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True, eq=False)
class GaussianComponent:
    """One weighted diagonal-covariance Gaussian."""

    weight: float
    mean: np.ndarray
    variance: np.ndarray

    def __eq__(self, other):
        return (isinstance(other, GaussianComponent)
                and self.weight == other.weight
                and np.array_equal(self.mean, other.mean)
                and np.array_equal(self.variance, other.variance))

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        variance = np.asarray(self.variance, dtype=np.float64)
        if mean.ndim != 1 or variance.shape != mean.shape:
            raise ValueError("mean and variance must be 1-D vectors of equal length")
        if not self.weight > 0.0:
            raise ValueError(f"component weight must be positive, got {self.weight}")
        if not np.all(variance > 0.0):
            raise ValueError("all variances must be strictly positive")
        mean.setflags(write=False)
        variance.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", variance)

    @property
    def dim(self) -> int:
        return len(self.mean)


class HmmState:
    """Emitting state: a Gaussian mixture with cached log-density terms."""

    def __init__(self, components):
        components = tuple(components)
        if not components:
            raise ValueError("state needs at least one mixture component")
        dim = components[0].dim
        if any(c.dim != dim for c in components):
            raise ValueError("mixture components disagree on dimension")
        total = sum(c.weight for c in components)
        if abs(total - 1.0) > _ROW_SUM_TOL:
            raise ValueError(f"mixture weights sum to {total!r}, expected 1")
        self.components = components
        self.dim = dim
        self._means = np.stack([c.mean for c in components])
        self._variances = np.stack([c.variance for c in components])
        # log w - 0.5*(D*log(2*pi) + sum log var), the observation-free part
        self._log_offsets = (
            np.log([c.weight for c in components])
            - 0.5 * (dim * _LOG_TWO_PI + np.sum(np.log(self._variances), axis=1))
        )

    def __eq__(self, other):
        return isinstance(other, HmmState) and self.components == other.components

    def component_log_densities(self, observations: np.ndarray) -> np.ndarray:
        """Per-component log(weight * gaussian), shape (frames, num_components)."""
        observations = np.asarray(observations, dtype=np.float64)
        squeeze = observations.ndim == 1
        if squeeze:
            observations = observations[None, :]
        if observations.shape[1] != self.dim:
            raise DimensionMismatch(
                f"observation dim {observations.shape[1]}, state dim {self.dim}")
        diff = observations[:, None, :] - self._means[None, :, :]
        exponents = -0.5 * np.sum(diff * diff / self._variances[None, :, :], axis=2)
        result = self._log_offsets[None, :] + exponents
        return result[0] if squeeze else result

    def log_emission(self, observation: np.ndarray) -> float:
        densities = self.component_log_densities(observation)
        value = float(np.logaddexp.reduce(densities))
        if not np.isfinite(value):
            return LOG_PROB_FLOOR
        return max(value, LOG_PROB_FLOOR)


def log_emission(state: HmmState, observation) -> float:
    """Log mixture density of one observation under one state."""
    return state.log_emission(np.asarray(observation, dtype=np.float64))


class PhoneHmm:
    """Left-to-right HMM for one phone."""

    def __init__(self, phone: str, states, transitions: np.ndarray):
        states = tuple(states)
        transitions = np.asarray(transitions, dtype=np.float64)
        num_states = len(states)
        if transitions.shape != (num_states + 1, num_states + 1):
            raise ValueError(
                f"phone {phone!r}: transition matrix shape {transitions.shape}, "
                f"expected {(num_states + 1, num_states + 1)}")
        for i in range(num_states + 1):
            row_sum = transitions[i].sum()
            if abs(row_sum - 1.0) > _ROW_SUM_TOL:
                raise ValueError(f"phone {phone!r}: transition row {i} sums to {row_sum!r}")
            for j in range(num_states + 1):
                if j not in (i, i + 1) and transitions[i, j] != 0.0:
                    raise ValueError(
                        f"phone {phone!r}: transition {i}->{j} breaks left-to-right topology")
        transitions.setflags(write=False)
        self.phone = phone
        self.states = states
        self.transitions = transitions
        with np.errstate(divide="ignore"):
            self.log_transitions = np.log(transitions)
        self.log_transitions.setflags(write=False)

    @property
    def num_states(self) -> int:
        return len(self.states)

    def __eq__(self, other):
        return (isinstance(other, PhoneHmm)
                and self.phone == other.phone
                and self.states == other.states
                and np.array_equal(self.transitions, other.transitions))


class AcousticModel:
    """All trained phone HMMs plus the front-end settings they assume."""

    def __init__(self, phone_models: dict[str, PhoneHmm], feature_dim: int,
                 frontend_config: FrontendConfig):
        for phone, hmm in phone_models.items():
            if hmm.phone != phone:
                raise ValueError(f"model for {phone!r} labeled {hmm.phone!r}")
            for state in hmm.states:
                if state.dim != feature_dim:
                    raise DimensionMismatch(
                        f"phone {phone!r} state dim {state.dim}, model dim {feature_dim}")
        self.phone_models = dict(phone_models)
        self.feature_dim = feature_dim
        self.frontend_config = frontend_config

    @property
    def phones(self) -> tuple[str, ...]:
        return tuple(self.phone_models)

    def __eq__(self, other):
        return (isinstance(other, AcousticModel)
                and self.feature_dim == other.feature_dim
                and self.frontend_config == other.frontend_config
                and self.phone_models == other.phone_models)


# serialization: versioned line-oriented text, reals at 17 significant digits

def _format_real(value: float) -> str:
    return format(float(value), ".17g")


def _format_vector(values: np.ndarray) -> str:
    return " ".join(_format_real(v) for v in values)


_FRONTEND_FIELDS = (
    ("frame_length_ms", float),
    ("frame_shift_ms", float),
    ("pre_emphasis", float),
    ("num_mel_filters", int),
    ("num_cepstra", int),
    ("fft_size", int),
    ("low_freq_hz", float),
    ("high_freq_hz", "optional_float"),
    ("append_deltas", bool),
    ("cepstral_mean_norm", bool),
)


def save_model(model: AcousticModel, path: str | Path) -> None:
    """Write the model as versioned UTF-8 text; round-trips bit-exactly."""
    out = io.StringIO()
    out.write(MODEL_FILE_HEADER + "\n")
    out.write(f"feature_dim {model.feature_dim}\n")
    for name, kind in _FRONTEND_FIELDS:
        value = getattr(model.frontend_config, name)
        if kind is bool:
            text = "true" if value else "false"
        elif kind == "optional_float":
            text = "nyquist" if value is None else _format_real(value)
        elif kind is int:
            text = str(value)
        else:
            text = _format_real(value)
        out.write(f"frontend {name} {text}\n")
    out.write(f"phones {len(model.phone_models)}\n")
    for phone in model.phone_models:
        hmm = model.phone_models[phone]
        out.write(f"PHONE {phone} states {hmm.num_states}\n")
        for row in hmm.transitions:
            out.write("TRANS " + _format_vector(row) + "\n")
        for state_index, state in enumerate(hmm.states):
            out.write(f"STATE {state_index} components {len(state.components)}\n")
            for component in state.components:
                out.write(f"COMPONENT weight {_format_real(component.weight)}\n")
                out.write("MEAN " + _format_vector(component.mean) + "\n")
                out.write("VAR " + _format_vector(component.variance) + "\n")
    Path(path).write_text(out.getvalue(), encoding="utf-8")


class _LineReader:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self, expected_tag: str | None = None) -> list[str]:
        while self.pos < len(self.lines) and not self.lines[self.pos].strip():
            self.pos += 1
        if self.pos >= len(self.lines):
            raise SchemaError(f"unexpected end of model file (wanted {expected_tag or 'a line'})")
        self.pos += 1
        fields = self.lines[self.pos - 1].split()
        if expected_tag is not None and fields[0] != expected_tag:
            raise SchemaError(
                f"line {self.pos}: expected {expected_tag!r}, found {fields[0]!r}")
        return fields


def _parse_reals(fields: list[str], count: int, line_kind: str) -> np.ndarray:
    if len(fields) != count:
        raise SchemaError(f"{line_kind}: expected {count} values, found {len(fields)}")
    try:
        return np.array([float(f) for f in fields], dtype=np.float64)
    except ValueError as exc:
        raise SchemaError(f"{line_kind}: {exc}") from None


def load_model(path: str | Path) -> AcousticModel:
    """Read a model written by save_model."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        return _parse_model(text)
    except (ValueError, IndexError) as exc:
        raise SchemaError(f"malformed model file: {exc}") from None


def _parse_model(text: str) -> AcousticModel:
    reader = _LineReader(text)
    header = " ".join(reader.next())
    if header != MODEL_FILE_HEADER:
        raise SchemaError(f"bad header {header!r}, expected {MODEL_FILE_HEADER!r}")

    fields = reader.next("feature_dim")
    feature_dim = int(fields[1])

    frontend_values: dict[str, object] = {}
    for name, kind in _FRONTEND_FIELDS:
        fields = reader.next("frontend")
        if fields[1] != name:
            raise SchemaError(f"expected frontend field {name!r}, found {fields[1]!r}")
        raw = fields[2]
        if kind is bool:
            frontend_values[name] = raw == "true"
        elif kind == "optional_float":
            frontend_values[name] = None if raw == "nyquist" else float(raw)
        elif kind is int:
            frontend_values[name] = int(raw)
        else:
            frontend_values[name] = float(raw)
    frontend_config = FrontendConfig(**frontend_values)

    num_phones = int(reader.next("phones")[1])
    phone_models: dict[str, PhoneHmm] = {}
    for _ in range(num_phones):
        fields = reader.next("PHONE")
        if len(fields) != 4 or fields[2] != "states":
            raise SchemaError(f"malformed PHONE line: {' '.join(fields)!r}")
        phone, num_states = fields[1], int(fields[3])
        transitions = np.stack([
            _parse_reals(reader.next("TRANS")[1:], num_states + 1, f"{phone} TRANS row")
            for _ in range(num_states + 1)
        ])
        states = []
        for state_index in range(num_states):
            fields = reader.next("STATE")
            if int(fields[1]) != state_index or fields[2] != "components":
                raise SchemaError(f"malformed STATE line for phone {phone!r}")
            num_components = int(fields[3])
            components = []
            for _ in range(num_components):
                weight = float(reader.next("COMPONENT")[2])
                mean = _parse_reals(reader.next("MEAN")[1:], feature_dim, f"{phone} MEAN")
                var = _parse_reals(reader.next("VAR")[1:], feature_dim, f"{phone} VAR")
                components.append(GaussianComponent(weight, mean, var))
            states.append(HmmState(components))
        try:
            phone_models[phone] = PhoneHmm(phone, states, transitions)
        except ValueError as exc:
            raise SchemaError(str(exc)) from None
    return AcousticModel(phone_models, feature_dim, frontend_config)
