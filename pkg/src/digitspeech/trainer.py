"""Acoustic model estimation: flat start plus embedded Baum-Welch.

Whole utterances are aligned against a composite HMM built from their
word transcript (no phone-level time labels needed). The E-step runs
log-domain forward-backward per utterance; accumulators are merged in
sorted utterance order so repeated runs are bit-identical.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .acoustic_model import (
    NUM_EMITTING_STATES,
    AcousticModel,
    GaussianComponent,
    HmmState,
    PhoneHmm,
)
from .errors import (
    AllUtterancesInfeasible,
    DimensionMismatch,
    EmptyCorpus,
    InfeasibleAlignment,
    MissingPhoneModel,
)
from .frontend import FeatureSequence, FrontendConfig
from .lexicon import SILENCE_PHONE, Lexicon

_NEG_INF = -np.inf
_OCCUPANCY_EPS = 1e-12

# edge kinds, relative to the source state's phone instance
_SELF, _ADVANCE, _CROSS = 0, 1, 2


@dataclass(frozen=True)
class TrainingConfig:
    max_iterations: int = 40
    convergence_rel_tol: float = 1e-4
    variance_floor: float = 1e-3
    target_mixtures: int = 1
    add_optional_silence: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.convergence_rel_tol > 0.0:
            raise ValueError("convergence_rel_tol must be positive")
        if not self.variance_floor > 0.0:
            raise ValueError("variance_floor must be positive")
        m = self.target_mixtures
        if m < 1 or m & (m - 1):
            raise ValueError(f"target_mixtures must be a power of two, got {m}")


@dataclass(frozen=True)
class UtteranceExample:
    features: FeatureSequence
    transcript: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "transcript", tuple(self.transcript))
        if not self.transcript:
            raise ValueError("transcript must not be empty")


class CompositeHmm:
    """Utterance-level HMM: phone instances chained with optional silences.

    Emitting states are indexed 0..N-1. entry_logp/exit_logp give the
    (log) probability of starting in or finishing from each state; edges
    carry the combined HMM-transition and branch probability.
    """

    def __init__(self, state_labels, pdf_ids, distinct_keys, distinct_states,
                 entry_logp, exit_logp, edges, min_frames):
        self.state_labels = state_labels          # (phone, state_index, instance)
        self.pdf_ids = np.asarray(pdf_ids)        # composite state -> distinct pdf
        self.distinct_keys = distinct_keys        # distinct pdf -> (phone, state_index)
        self.distinct_states = distinct_states    # distinct pdf -> HmmState
        self.entry_logp = np.asarray(entry_logp, dtype=np.float64)
        self.exit_logp = np.asarray(exit_logp, dtype=np.float64)
        # edges as parallel arrays: src, dst, logp, kind
        self.edge_src = np.array([e[0] for e in edges], dtype=np.intp)
        self.edge_dst = np.array([e[1] for e in edges], dtype=np.intp)
        self.edge_logp = np.array([e[2] for e in edges], dtype=np.float64)
        self.edge_kind = np.array([e[3] for e in edges], dtype=np.intp)
        self.min_frames = min_frames

        order = np.argsort(self.edge_dst, kind="stable")
        self._by_dst = order
        self._dst_unique, self._dst_starts = np.unique(self.edge_dst[order], return_index=True)
        order = np.argsort(self.edge_src, kind="stable")
        self._by_src = order
        self._src_unique, self._src_starts = np.unique(self.edge_src[order], return_index=True)

    @property
    def num_states(self) -> int:
        return len(self.state_labels)

    @property
    def num_edges(self) -> int:
        return len(self.edge_src)


def compose_utterance_hmm(transcript, lexicon: Lexicon, model: AcousticModel,
                          optional_silence: bool = True) -> CompositeHmm:
    """Expand a word transcript into a single composite HMM.

    Words become phone chains via the lexicon; a skippable silence model
    is inserted at the start, end, and between words when requested.
    Branch points (enter an optional silence or skip it) split their
    probability uniformly, so every state's outgoing mass stays 1.
    """
    transcript = tuple(transcript)
    if not transcript:
        raise ValueError("transcript must not be empty")

    items: list[tuple[str, bool]] = []  # (phone, optional)
    if optional_silence:
        items.append((SILENCE_PHONE, True))
    for word in transcript:
        for phone in lexicon.lookup(word):
            items.append((phone, False))
        if optional_silence:
            items.append((SILENCE_PHONE, True))

    hmms = []
    for phone, _ in items:
        hmm = model.phone_models.get(phone)
        if hmm is None:
            raise MissingPhoneModel(f"no acoustic model for phone {phone!r}")
        hmms.append(hmm)

    # assign composite state ids, instance by instance
    state_labels = []
    first_state = []
    for instance, ((phone, _), hmm) in enumerate(zip(items, hmms)):
        first_state.append(len(state_labels))
        for i in range(hmm.num_states):
            state_labels.append((phone, i, instance))
    num_states = len(state_labels)

    pdf_index: dict[tuple[str, int], int] = {}
    distinct_keys: list[tuple[str, int]] = []
    distinct_states: list[HmmState] = []
    pdf_ids = []
    for phone, i, instance in state_labels:
        key = (phone, i)
        if key not in pdf_index:
            pdf_index[key] = len(distinct_keys)
            distinct_keys.append(key)
            distinct_states.append(model.phone_models[phone].states[i])
        pdf_ids.append(pdf_index[key])

    def scan_targets(start_item: int):
        """Items reachable next: any run of optionals plus the first required."""
        targets = []
        j = start_item
        while j < len(items) and items[j][1]:
            targets.append(j)
            j += 1
        if j < len(items):
            targets.append(j)
            return targets, False
        return targets, True  # the utterance end is also reachable

    entry_logp = np.full(num_states, _NEG_INF)
    targets, to_end = scan_targets(0)
    assert not to_end, "transcript guarantees at least one required item"
    branch = -np.log(len(targets))
    for j in targets:
        entry_logp[first_state[j]] = branch

    exit_logp = np.full(num_states, _NEG_INF)
    edges: list[tuple[int, int, float, int]] = []
    for instance, hmm in enumerate(hmms):
        base = first_state[instance]
        log_a = hmm.log_transitions
        last = hmm.num_states - 1
        for i in range(hmm.num_states):
            edges.append((base + i, base + i, log_a[i, i], _SELF))
            if i < last:
                edges.append((base + i, base + i + 1, log_a[i, i + 1], _ADVANCE))
        leave = log_a[last, last + 1]
        targets, to_end = scan_targets(instance + 1)
        branch = -np.log(len(targets) + (1 if to_end else 0))
        for j in targets:
            edges.append((base + last, first_state[j], leave + branch, _CROSS))
        if to_end:
            exit_logp[base + last] = leave + branch

    min_frames = sum(hmm.num_states for (_, optional), hmm in zip(items, hmms) if not optional)
    return CompositeHmm(state_labels, pdf_ids, distinct_keys, distinct_states,
                        entry_logp, exit_logp, edges, min_frames)


@dataclass
class ForwardBackwardResult:
    log_likelihood: float
    gamma: np.ndarray                  # (frames, states) occupancy posteriors
    edge_counts: np.ndarray            # expected transition counts per edge
    end_counts: np.ndarray             # expected exit-at-last-frame mass per state
    component_log_densities: list      # per distinct pdf: (frames, num_components)


def _segment_logsumexp(values, starts, unique_ids, size):
    out = np.full(size, _NEG_INF)
    out[unique_ids] = np.logaddexp.reduceat(values, starts)
    return out


def forward_backward(composite: CompositeHmm, features: FeatureSequence) -> ForwardBackwardResult:
    """Log-domain forward-backward over one composite HMM.

    Returns the total log-likelihood, per-frame state occupancies, and
    expected transition counts. Raises InfeasibleAlignment when the
    utterance has fewer frames than the composite's shortest path.
    """
    observations = features.vectors
    num_frames = len(observations)
    num_states = composite.num_states
    if observations.shape[1] != composite.distinct_states[0].dim:
        raise DimensionMismatch(
            f"features dim {observations.shape[1]}, model dim "
            f"{composite.distinct_states[0].dim}")
    if num_frames < composite.min_frames:
        raise InfeasibleAlignment(
            f"{features.source_id or 'utterance'}: {num_frames} frames, composite "
            f"needs at least {composite.min_frames}")

    comp_logdens = [state.component_log_densities(observations)
                    for state in composite.distinct_states]
    b_distinct = np.stack([np.logaddexp.reduce(cd, axis=1) for cd in comp_logdens], axis=1)
    log_b = b_distinct[:, composite.pdf_ids]  # (frames, states)

    src_by_dst = composite.edge_src[composite._by_dst]
    logp_by_dst = composite.edge_logp[composite._by_dst]
    dst_by_src = composite.edge_dst[composite._by_src]
    logp_by_src = composite.edge_logp[composite._by_src]

    alpha = np.full((num_frames, num_states), _NEG_INF)
    alpha[0] = composite.entry_logp + log_b[0]
    for t in range(1, num_frames):
        incoming = _segment_logsumexp(alpha[t - 1, src_by_dst] + logp_by_dst,
                                      composite._dst_starts, composite._dst_unique,
                                      num_states)
        alpha[t] = incoming + log_b[t]

    log_likelihood = float(np.logaddexp.reduce(alpha[-1] + composite.exit_logp))
    if not np.isfinite(log_likelihood):
        raise InfeasibleAlignment(
            f"{features.source_id or 'utterance'}: no complete path has nonzero probability")

    beta = np.full((num_frames, num_states), _NEG_INF)
    beta[-1] = composite.exit_logp
    for t in range(num_frames - 2, -1, -1):
        outgoing = logp_by_src + log_b[t + 1, dst_by_src] + beta[t + 1, dst_by_src]
        beta[t] = _segment_logsumexp(outgoing, composite._src_starts,
                                     composite._src_unique, num_states)

    gamma = np.exp(alpha + beta - log_likelihood)

    if num_frames > 1:
        scores = (alpha[:-1, composite.edge_src] + composite.edge_logp[None, :]
                  + log_b[1:, composite.edge_dst] + beta[1:, composite.edge_dst]
                  - log_likelihood)
        edge_counts = np.exp(scores).sum(axis=0)
    else:
        edge_counts = np.zeros(composite.num_edges)
    end_counts = gamma[-1].copy()

    return ForwardBackwardResult(log_likelihood, gamma, edge_counts, end_counts, comp_logdens)


def viterbi_align(composite: CompositeHmm, features: FeatureSequence):
    """Best state path and its log score (max-product counterpart)."""
    observations = features.vectors
    num_frames = len(observations)
    num_states = composite.num_states
    if num_frames < composite.min_frames:
        raise InfeasibleAlignment("utterance shorter than the composite's shortest path")
    b_distinct = np.stack(
        [np.logaddexp.reduce(state.component_log_densities(observations), axis=1)
         for state in composite.distinct_states], axis=1)
    log_b = b_distinct[:, composite.pdf_ids]

    score = composite.entry_logp + log_b[0]
    back = np.full((num_frames, num_states), -1, dtype=np.intp)
    for t in range(1, num_frames):
        best = np.full(num_states, _NEG_INF)
        choice = np.full(num_states, -1, dtype=np.intp)
        for src, dst, logp in zip(composite.edge_src, composite.edge_dst, composite.edge_logp):
            candidate = score[src] + logp
            if candidate > best[dst]:
                best[dst] = candidate
                choice[dst] = src
        score = best + log_b[t]
        back[t] = choice

    final = score + composite.exit_logp
    last = int(np.argmax(final))
    best_score = float(final[last])
    if not np.isfinite(best_score):
        raise InfeasibleAlignment("no feasible state path")
    path = [last]
    for t in range(num_frames - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    return best_score, path


class _Accumulator:
    """Per-phone sufficient statistics, summed over utterances."""

    def __init__(self, model: AcousticModel):
        self.phones = sorted(model.phone_models)
        self.phone_index = {p: k for k, p in enumerate(self.phones)}
        self.trans_self = {}
        self.trans_adv = {}
        self.occupancy = {}
        self.sum_obs = {}
        self.sum_sq = {}
        for phone in self.phones:
            hmm = model.phone_models[phone]
            self.trans_self[phone] = np.zeros(hmm.num_states)
            self.trans_adv[phone] = np.zeros(hmm.num_states)
            for i, state in enumerate(hmm.states):
                m = len(state.components)
                self.occupancy[(phone, i)] = np.zeros(m)
                self.sum_obs[(phone, i)] = np.zeros((m, state.dim))
                self.sum_sq[(phone, i)] = np.zeros((m, state.dim))

    def add(self, composite: CompositeHmm, fb: ForwardBackwardResult,
            observations: np.ndarray) -> None:
        # transition statistics
        for e in range(composite.num_edges):
            phone, state_index, _ = composite.state_labels[composite.edge_src[e]]
            if composite.edge_kind[e] == _SELF:
                self.trans_self[phone][state_index] += fb.edge_counts[e]
            else:  # advancing within the phone or leaving it both exercise row i -> i+1
                self.trans_adv[phone][state_index] += fb.edge_counts[e]
        for s in range(composite.num_states):
            if fb.end_counts[s] > 0.0:
                phone, state_index, _ = composite.state_labels[s]
                self.trans_adv[phone][state_index] += fb.end_counts[s]

        # mixture statistics, pooled over instances of the same (phone, state)
        squared = observations * observations
        for d, key in enumerate(composite.distinct_keys):
            columns = np.flatnonzero(composite.pdf_ids == d)
            state_gamma = fb.gamma[:, columns].sum(axis=1)  # (frames,)
            logdens = fb.component_log_densities[d]
            shifted = np.exp(logdens - logdens.max(axis=1, keepdims=True))
            responsibilities = shifted / shifted.sum(axis=1, keepdims=True)
            weighted = responsibilities * state_gamma[:, None]  # (frames, components)
            self.occupancy[key] += weighted.sum(axis=0)
            self.sum_obs[key] += weighted.T @ observations
            self.sum_sq[key] += weighted.T @ squared


def _reestimate(acc: _Accumulator, model: AcousticModel,
                config: TrainingConfig) -> AcousticModel:
    new_models = {}
    for phone in model.phone_models:
        hmm = model.phone_models[phone]
        size = hmm.num_states + 1
        transitions = np.zeros((size, size))
        transitions[-1, -1] = 1.0
        for i in range(hmm.num_states):
            stay = acc.trans_self[phone][i]
            leave = acc.trans_adv[phone][i]
            total = stay + leave
            if total < _OCCUPANCY_EPS:
                transitions[i] = hmm.transitions[i]
            else:
                transitions[i, i] = stay / total
                transitions[i, i + 1] = leave / total

        states = []
        for i, state in enumerate(hmm.states):
            occ = acc.occupancy[(phone, i)]
            total = occ.sum()
            if total < _OCCUPANCY_EPS or np.any(occ < _OCCUPANCY_EPS):
                states.append(state)  # unseen state: keep previous parameters
                continue
            means = acc.sum_obs[(phone, i)] / occ[:, None]
            variances = acc.sum_sq[(phone, i)] / occ[:, None] - means * means
            variances = np.maximum(variances, config.variance_floor)
            weights = occ / total
            weights = weights / weights.sum()
            states.append(HmmState([
                GaussianComponent(weights[m], means[m], variances[m])
                for m in range(len(occ))
            ]))
        new_models[phone] = PhoneHmm(phone, states, transitions)
    return AcousticModel(new_models, model.feature_dim, model.frontend_config)


def flat_start(corpus, lexicon: Lexicon, config: TrainingConfig,
               frontend_config: FrontendConfig | None = None) -> AcousticModel:
    """Initialize every phone HMM from global corpus statistics.

    All states start with one Gaussian at the global frame mean and
    (floored) variance; transitions start at 0.5 self-loop / 0.5 advance.
    Phones modeled are those reachable from the transcripts, plus silence.
    """
    corpus = list(corpus)
    if not corpus:
        raise EmptyCorpus("flat start needs at least one utterance")
    dim = corpus[0].features.dim
    for utterance in corpus:
        if utterance.features.dim != dim:
            raise DimensionMismatch("corpus mixes feature dimensions")

    total = np.zeros(dim)
    total_sq = np.zeros(dim)
    count = 0
    for utterance in corpus:
        vectors = utterance.features.vectors
        total += vectors.sum(axis=0)
        total_sq += (vectors * vectors).sum(axis=0)
        count += len(vectors)
    mean = total / count
    variance = np.maximum(total_sq / count - mean * mean, config.variance_floor)

    phones = {SILENCE_PHONE}
    for utterance in corpus:
        for word in utterance.transcript:
            phones.update(lexicon.lookup(word))

    size = NUM_EMITTING_STATES + 1
    transitions = np.zeros((size, size))
    transitions[-1, -1] = 1.0
    for i in range(NUM_EMITTING_STATES):
        transitions[i, i] = 0.5
        transitions[i, i + 1] = 0.5

    phone_models = {}
    for phone in sorted(phones):
        states = [HmmState([GaussianComponent(1.0, mean.copy(), variance.copy())])
                  for _ in range(NUM_EMITTING_STATES)]
        phone_models[phone] = PhoneHmm(phone, states, transitions)
    return AcousticModel(phone_models, dim,
                         frontend_config if frontend_config is not None else FrontendConfig())


def baum_welch(corpus, lexicon: Lexicon, config: TrainingConfig,
               initial: AcousticModel, on_iteration=None):
    """Embedded EM re-estimation until convergence or max_iterations.

    Returns (model, log-likelihood trace). Utterances whose frame count
    cannot cover their composite are skipped with a warning. The
    optional on_iteration callback receives
    (iteration, log_likelihood, utts_used, utts_skipped, model) after
    each M-step.
    """
    corpus = sorted(corpus, key=lambda u: u.features.source_id)
    if not corpus:
        raise EmptyCorpus("training needs at least one utterance")

    model = initial
    trace: list[float] = []
    warned: set[str] = set()
    for iteration in range(1, config.max_iterations + 1):
        accumulator = _Accumulator(model)
        total_ll = 0.0
        used = 0
        skipped = 0
        for utterance in corpus:
            composite = compose_utterance_hmm(
                utterance.transcript, lexicon, model, config.add_optional_silence)
            try:
                fb = forward_backward(composite, utterance.features)
            except InfeasibleAlignment as exc:
                skipped += 1
                name = utterance.features.source_id or "<unnamed>"
                if name not in warned:
                    warnings.warn(f"skipping infeasible utterance {name}: {exc}")
                    warned.add(name)
                continue
            total_ll += fb.log_likelihood
            used += 1
            accumulator.add(composite, fb, utterance.features.vectors)

        if used == 0:
            raise AllUtterancesInfeasible("every utterance was skipped as infeasible")
        trace.append(total_ll)
        model = _reestimate(accumulator, model, config)
        if on_iteration is not None:
            on_iteration(iteration, total_ll, used, skipped, model)
        if len(trace) >= 2:
            previous = trace[-2]
            improvement = (trace[-1] - previous) / abs(previous)
            if improvement < config.convergence_rel_tol:
                break
    return model, trace


def split_mixtures(model: AcousticModel) -> AcousticModel:
    """Double every mixture: each component splits into a +/- 0.2 sigma pair."""
    new_models = {}
    for phone, hmm in model.phone_models.items():
        states = []
        for state in hmm.states:
            components = []
            for component in state.components:
                offset = 0.2 * np.sqrt(component.variance)
                half = component.weight / 2.0
                components.append(GaussianComponent(half, component.mean + offset,
                                                    component.variance))
                components.append(GaussianComponent(half, component.mean - offset,
                                                    component.variance))
            states.append(HmmState(components))
        new_models[phone] = PhoneHmm(phone, states, hmm.transitions.copy())
    return AcousticModel(new_models, model.feature_dim, model.frontend_config)


def train_model(corpus, lexicon: Lexicon, config: TrainingConfig,
                frontend_config: FrontendConfig | None = None, on_iteration=None):
    """Flat start, then Baum-Welch, doubling mixtures up to target_mixtures.

    Returns (model, log-likelihood trace over all EM passes).
    """
    model = flat_start(corpus, lexicon, config, frontend_config)
    model, trace = baum_welch(corpus, lexicon, config, model, on_iteration)
    mixtures = 1
    while mixtures * 2 <= config.target_mixtures:
        model = split_mixtures(model)
        mixtures *= 2
        model, extra = baum_welch(corpus, lexicon, config, model, on_iteration)
        trace.extend(extra)
    return model, trace
