"""Search-graph compilation and time-synchronous Viterbi beam decoding.

The word automaton is expanded through the lexicon into phone HMM
states. Word-boundary bookkeeping nodes record word identity for the
traceback; grammar nodes split their outgoing probability uniformly
over the available alternatives (words, silence, or finishing).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .acoustic_model import AcousticModel
from .audio_io import load_wav
from .errors import (
    DimensionMismatch,
    MissingPhoneModel,
    NoSurvivingPath,
    OutOfVocabulary,
)
from .frontend import FeatureSequence, FrontendConfig, mfcc
from .grammar import WordFsa
from .lexicon import SILENCE_PHONE, Lexicon

_NEG_INF = -np.inf

START, FINAL, GRAMMAR, WORD_END, EMIT = "start", "final", "grammar", "word_end", "emit"


@dataclass(frozen=True)
class DecoderConfig:
    beam_width_log: float | None = 200.0      # None disables relative-beam pruning
    word_insertion_penalty_log: float = 0.0
    max_active: int | None = 20000             # None disables the active-token cap

    def __post_init__(self):
        if self.beam_width_log is not None and not self.beam_width_log > 0.0:
            raise ValueError("beam_width_log must be positive when finite")
        if self.max_active is not None and self.max_active < 1:
            raise ValueError("max_active must be at least 1 when finite")


@dataclass(frozen=True)
class Hypothesis:
    words: tuple[str, ...]
    log_score: float
    frame_alignment: tuple[tuple[str, int, int], ...] | None = None  # (word, start, end)


@dataclass(frozen=True)
class Node:
    kind: str
    phone: str | None = None
    state_index: int | None = None
    word: str | None = None
    word_position: int | None = None
    fsa_state: int | None = None


class SearchGraph:
    """Flattened HMM-state graph with precomputed emitting-to-emitting arcs."""

    def __init__(self, nodes, arcs, model: AcousticModel):
        self.nodes = nodes
        self.arcs = arcs  # (src, dst, logp) over all node kinds
        self.model = model

        self.emit_ids = [i for i, n in enumerate(nodes) if n.kind == EMIT]
        self.dense = {node_id: k for k, node_id in enumerate(self.emit_ids)}

        # distinct emission pdfs shared across instances of the same phone state
        pdf_index: dict[tuple[str, int], int] = {}
        self.distinct_states = []
        self.pdf_ids = np.empty(len(self.emit_ids), dtype=np.intp)
        for k, node_id in enumerate(self.emit_ids):
            node = nodes[node_id]
            key = (node.phone, node.state_index)
            if key not in pdf_index:
                pdf_index[key] = len(self.distinct_states)
                self.distinct_states.append(model.phone_models[node.phone].states[node.state_index])
            self.pdf_ids[k] = pdf_index[key]

        self._raw_out: dict[int, list[tuple[int, float]]] = {}
        for src, dst, logp in arcs:
            self._raw_out.setdefault(src, []).append((dst, logp))
        for out in self._raw_out.values():
            out.sort(key=lambda arc: arc[0])

        start_id = next(i for i, n in enumerate(nodes) if n.kind == START)
        self.final_id = next(i for i, n in enumerate(nodes) if n.kind == FINAL)

        # closure arcs: emitting (or start) -> emitting (or final), words crossed
        self.start_arcs = []            # (dense_dst, logp, words)
        self.out_arcs = [[] for _ in self.emit_ids]   # per dense src
        self.final_arcs = [[] for _ in self.emit_ids]  # (logp, words)
        for dense_dst, logp, words in self._closure_from(start_id):
            if dense_dst == -1:
                continue  # zero-emission path; decoding always consumes frames
            self.start_arcs.append((dense_dst, logp, words))
        if not self.start_arcs:
            raise ValueError("grammar accepts only the empty sequence; nothing to decode")
        for k, node_id in enumerate(self.emit_ids):
            for dense_dst, logp, words in self._closure_from(node_id):
                if dense_dst == -1:
                    self.final_arcs[k].append((logp, words))
                else:
                    self.out_arcs[k].append((dense_dst, logp, words))
        self.start_arcs.sort(key=lambda a: a[0])
        for arcs_list in self.out_arcs:
            arcs_list.sort(key=lambda a: a[0])

    def _closure_from(self, source: int):
        """Paths from source through non-emitting nodes to the next emission.

        Yields (dense_emit_id, logp, words) or (-1, logp, words) for the
        final node. Non-emitting stretches are acyclic by construction.
        """
        results = []

        def walk(node_id, logp, words):
            for dst, arc_logp in self._raw_out.get(node_id, []):
                node = self.nodes[dst]
                if node.kind == EMIT:
                    results.append((self.dense[dst], logp + arc_logp, words))
                elif node.kind == FINAL:
                    results.append((-1, logp + arc_logp, words))
                elif node.kind == WORD_END:
                    walk(dst, logp + arc_logp, words + (node.word,))
                else:
                    walk(dst, logp + arc_logp, words)

        walk(source, 0.0, ())
        return results

    @property
    def num_emitting(self) -> int:
        return len(self.emit_ids)

    def stats(self) -> dict[str, int]:
        kinds = {}
        for node in self.nodes:
            kinds[node.kind] = kinds.get(node.kind, 0) + 1
        closure = len(self.start_arcs) + sum(len(a) for a in self.out_arcs)
        closure += sum(len(a) for a in self.final_arcs)
        return {
            "nodes": len(self.nodes),
            "arcs": len(self.arcs),
            "emitting_nodes": kinds.get(EMIT, 0),
            "word_end_nodes": kinds.get(WORD_END, 0),
            "grammar_nodes": kinds.get(GRAMMAR, 0),
            "closure_arcs": closure,
        }


def build_search_graph(fsa: WordFsa, lexicon: Lexicon, model: AcousticModel,
                       optional_silence: bool = True) -> SearchGraph:
    """Expand a word automaton into an HMM-state search graph.

    Every word edge becomes its phone chain; a silence loop is attached
    to each grammar state when optional_silence is set. Outgoing
    probability at a grammar state is uniform over its alternatives.
    """
    for word in fsa.terminals:
        for phone in lexicon.lookup(word):
            if phone not in model.phone_models:
                raise MissingPhoneModel(f"no acoustic model for phone {phone!r} (word {word!r})")
    if optional_silence and SILENCE_PHONE not in model.phone_models:
        raise MissingPhoneModel(f"no acoustic model for {SILENCE_PHONE!r}")

    nodes: list[Node] = [Node(START), Node(FINAL)]
    arcs: list[tuple[int, int, float]] = []
    start_id, final_id = 0, 1

    grammar_node = {}
    for state in range(fsa.num_states):
        grammar_node[state] = len(nodes)
        nodes.append(Node(GRAMMAR, fsa_state=state))
    arcs.append((start_id, grammar_node[fsa.start], 0.0))

    def expand_phone(phone: str, word: str | None, position: int) -> tuple[int, int, float]:
        """Add one phone instance; returns (first_id, last_id, exit_logp)."""
        hmm = model.phone_models[phone]
        log_a = hmm.log_transitions
        first = len(nodes)
        for i in range(hmm.num_states):
            nodes.append(Node(EMIT, phone=phone, state_index=i, word=word, word_position=position))
        for i in range(hmm.num_states):
            arcs.append((first + i, first + i, log_a[i, i]))
            if i < hmm.num_states - 1:
                arcs.append((first + i, first + i + 1, log_a[i, i + 1]))
        last = first + hmm.num_states - 1
        return first, last, float(log_a[hmm.num_states - 1, hmm.num_states])

    edges_by_state: dict[int, list[tuple[int, str, int]]] = {s: [] for s in range(fsa.num_states)}
    for edge in fsa.edges:
        edges_by_state[edge[0]].append(edge)

    for state in range(fsa.num_states):
        word_edges = edges_by_state[state]
        is_final = state in fsa.finals
        if not word_edges and not is_final:
            continue  # dead-end grammar state; tokens there could never finish
        options = len(word_edges) + (1 if is_final else 0) + (1 if optional_silence else 0)
        branch_logp = -float(np.log(options))

        if is_final:
            arcs.append((grammar_node[state], final_id, branch_logp))
        if optional_silence:
            first, last, exit_logp = expand_phone(SILENCE_PHONE, None, 0)
            arcs.append((grammar_node[state], first, branch_logp))
            arcs.append((last, grammar_node[state], exit_logp))
        for _, word, dst_state in word_edges:
            phones = lexicon.lookup(word)
            prev_last = None
            prev_exit = branch_logp
            for position, phone in enumerate(phones):
                first, last, exit_logp = expand_phone(phone, word, position)
                if prev_last is None:
                    arcs.append((grammar_node[state], first, prev_exit))
                else:
                    arcs.append((prev_last, first, prev_exit))
                prev_last, prev_exit = last, exit_logp
            word_end = len(nodes)
            nodes.append(Node(WORD_END, word=word))
            arcs.append((prev_last, word_end, prev_exit))
            arcs.append((word_end, grammar_node[dst_state], 0.0))

    graph = SearchGraph(nodes, arcs, model)
    _check_final_reachable(graph, start_id)
    return graph


def _check_final_reachable(graph: SearchGraph, start_id: int) -> None:
    seen = {start_id}
    stack = [start_id]
    while stack:
        node = stack.pop()
        for dst, _ in graph._raw_out.get(node, []):
            if dst not in seen:
                seen.add(dst)
                stack.append(dst)
    if graph.final_id not in seen:
        raise ValueError("search graph: final node unreachable from start")


def viterbi_decode(graph: SearchGraph, features: FeatureSequence,
                   config: DecoderConfig | None = None) -> Hypothesis:
    """Best-path beam search over the search graph.

    Per frame, tokens outside beam_width_log of the frame-best are
    dropped and at most max_active survive (ties keep the lower node
    index). Raises NoSurvivingPath when no token can finish.
    """
    hypothesis, _ = viterbi_decode_with_path(graph, features, config)
    return hypothesis


def viterbi_decode_with_path(graph: SearchGraph, features: FeatureSequence,
                             config: DecoderConfig | None = None):
    """viterbi_decode variant that also returns the dense emitting-state path."""
    config = config or DecoderConfig()
    observations = features.vectors
    num_frames = len(observations)
    if num_frames == 0:
        raise NoSurvivingPath("cannot decode an empty feature sequence")
    model_dim = graph.distinct_states[0].dim
    if observations.shape[1] != model_dim:
        raise DimensionMismatch(f"features dim {observations.shape[1]}, model dim {model_dim}")

    num_nodes = graph.num_emitting
    log_b = np.stack([np.logaddexp.reduce(state.component_log_densities(observations), axis=1)
                      for state in graph.distinct_states], axis=1)[:, graph.pdf_ids]
    penalty = config.word_insertion_penalty_log

    score = np.full(num_nodes, _NEG_INF)
    for dst, logp, words in graph.start_arcs:
        candidate = logp + penalty * len(words)
        if candidate > score[dst]:
            score[dst] = candidate
    score += log_b[0]

    back = np.full((num_frames, num_nodes), -1, dtype=np.intp)
    # words crossed by the winning arc into (frame, node); start arcs cross none
    word_events: list[dict[int, tuple[str, ...]]] = [dict() for _ in range(num_frames)]
    active = _prune(score, config)

    for t in range(1, num_frames):
        new_score = np.full(num_nodes, _NEG_INF)
        for src in active:
            source_score = score[src]
            for dst, logp, words in graph.out_arcs[src]:
                candidate = source_score + logp + penalty * len(words)
                if candidate > new_score[dst]:
                    new_score[dst] = candidate
                    back[t, dst] = src
                    if words:
                        word_events[t][dst] = words
                    elif dst in word_events[t]:
                        del word_events[t][dst]
        score = new_score + log_b[t]
        active = _prune(score, config)
        if len(active) == 0:
            raise NoSurvivingPath(f"no active token at frame {t}")

    best_score = _NEG_INF
    best_node = -1
    best_final_words: tuple[str, ...] = ()
    for src in active:
        for logp, words in graph.final_arcs[src]:
            candidate = score[src] + logp + penalty * len(words)
            if candidate > best_score:
                best_score = candidate
                best_node = src
                best_final_words = words
    if best_node < 0 or not np.isfinite(best_score):
        raise NoSurvivingPath("no surviving token reaches the final node")

    # traceback: words attached to the arc entering frame t ended at frame t-1
    path = [best_node]
    events: list[tuple[int, tuple[str, ...]]] = []  # (end_frame, words)
    if best_final_words:
        events.append((num_frames - 1, best_final_words))
    node = best_node
    for t in range(num_frames - 1, 0, -1):
        if node in word_events[t]:
            events.append((t - 1, word_events[t][node]))
        node = int(back[t, node])
        path.append(node)
    path.reverse()
    events.reverse()

    words: list[str] = []
    alignment: list[tuple[str, int, int]] = []
    previous_end = -1
    for end_frame, crossed in events:
        for word in crossed:
            words.append(word)
            alignment.append((word, previous_end + 1, end_frame))
        previous_end = end_frame

    hypothesis = Hypothesis(tuple(words), float(best_score), tuple(alignment))
    return hypothesis, path


def _prune(score: np.ndarray, config: DecoderConfig) -> np.ndarray:
    """Indices surviving the relative beam and the active-token cap."""
    finite = score > _NEG_INF
    if not finite.any():
        return np.empty(0, dtype=np.intp)
    best = score.max()
    if config.beam_width_log is not None:
        finite &= score >= best - config.beam_width_log
    survivors = np.flatnonzero(finite)
    if config.max_active is not None and len(survivors) > config.max_active:
        # ties broken toward the lower node index
        order = np.lexsort((survivors, -score[survivors]))
        survivors = np.sort(survivors[order[:config.max_active]])
    return survivors


def decode_file(wav_path, model: AcousticModel, graph: SearchGraph,
                frontend_config: FrontendConfig | None = None,
                decoder_config: DecoderConfig | None = None) -> Hypothesis:
    """Load a WAV file, extract features, and decode it."""
    signal = load_wav(Path(wav_path))
    features = mfcc(signal, frontend_config or model.frontend_config)
    return viterbi_decode(graph, features, decoder_config)
