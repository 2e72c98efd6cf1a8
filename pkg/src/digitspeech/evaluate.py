"""Recognition-rate computation and report formatting.

An utterance counts as correct only when the hypothesis matches the
reference word-for-word. Count-based rates (per speaker, overall) are
reported at two decimals truncated toward zero, which is how 26/30
becomes 86.66%; group rows average their member speakers' reported
rates with half-up rounding on the ambiguous third decimal.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import CorpusManifest, trial_of
from .errors import MissingHypothesis


@dataclass(frozen=True)
class SpeakerScore:
    correct: int
    total: int
    rate_percent: float


@dataclass(frozen=True)
class EvalReport:
    per_speaker: dict[str, SpeakerScore]
    per_group: dict[str, float]         # 'M'/'W' -> mean rate percent
    overall: float                      # rate percent over all utterances
    per_speaker_trials: dict[str, dict[int, tuple[int, int]]]  # trial -> (correct, total)
    speaker_groups: dict[str, str]


def _truncated_rate_centi(correct: int, total: int) -> int:
    """100 * correct/total in hundredths of a percent, truncated toward zero."""
    return (10000 * correct) // total


def _mean_centi_half_up(values) -> int:
    values = list(values)
    total = sum(values)
    n = len(values)
    return (2 * total + n) // (2 * n)  # floor(total/n + 1/2) in exact integer math


def evaluate(manifest: CorpusManifest, hypotheses) -> EvalReport:
    """Score a hypothesis set (utterance_id -> word sequence) against a manifest.

    Raises MissingHypothesis when any manifest utterance has no entry.
    The result is independent of manifest order.
    """
    if not manifest.entries:
        raise ValueError("cannot evaluate an empty manifest")
    counts: dict[str, list[int]] = {}
    trials: dict[str, dict[int, list[int]]] = {}
    groups: dict[str, str] = {}
    total_correct = 0
    for entry in manifest:
        if entry.utterance_id not in hypotheses:
            raise MissingHypothesis(f"no hypothesis for {entry.utterance_id!r}")
        correct = tuple(hypotheses[entry.utterance_id]) == tuple(entry.transcript)
        total_correct += correct
        counted = counts.setdefault(entry.speaker_id, [0, 0])
        counted[0] += correct
        counted[1] += 1
        trial = trial_of(entry.utterance_id)
        trial_counted = trials.setdefault(entry.speaker_id, {}).setdefault(trial, [0, 0])
        trial_counted[0] += correct
        trial_counted[1] += 1
        groups[entry.speaker_id] = entry.speaker_sex

    per_speaker = {}
    rate_centi = {}
    for speaker in sorted(counts):
        correct, total = counts[speaker]
        centi = _truncated_rate_centi(correct, total)
        rate_centi[speaker] = centi
        per_speaker[speaker] = SpeakerScore(correct, total, centi / 100.0)

    per_group = {}
    for sex in sorted(set(groups.values())):
        members = [rate_centi[s] for s in sorted(groups) if groups[s] == sex]
        per_group[sex] = _mean_centi_half_up(members) / 100.0

    overall = _truncated_rate_centi(total_correct, len(manifest.entries)) / 100.0
    per_speaker_trials = {
        speaker: {trial: tuple(c) for trial, c in sorted(trials[speaker].items())}
        for speaker in sorted(trials)
    }
    return EvalReport(per_speaker, per_group, overall, per_speaker_trials, groups)


def format_report_table(report: EvalReport) -> str:
    """Fixed-width text table: speakers with per-trial counts, then groups."""
    all_trials = sorted({t for trials in report.per_speaker_trials.values() for t in trials})
    header = ["Speaker"] + [f"Trial {t}" for t in all_trials] + ["Correct/Total", "Rate%"]

    rows = []
    for speaker, score in report.per_speaker.items():
        trial_cells = []
        for trial in all_trials:
            counted = report.per_speaker_trials.get(speaker, {}).get(trial)
            trial_cells.append(str(counted[0]) if counted else "-")
        rows.append([speaker] + trial_cells
                    + [f"{score.correct}/{score.total}", f"{score.rate_percent:.2f}"])

    group_sizes = {}
    for speaker, sex in report.speaker_groups.items():
        group_sizes[sex] = group_sizes.get(sex, 0) + 1
    for sex in sorted(report.per_group):
        rows.append([f"Group {sex}"] + ["-"] * len(all_trials)
                    + [f"{group_sizes[sex]} speakers", f"{report.per_group[sex]:.2f}"])
    total_correct = sum(s.correct for s in report.per_speaker.values())
    total = sum(s.total for s in report.per_speaker.values())
    rows.append(["Overall"] + ["-"] * len(all_trials)
                + [f"{total_correct}/{total}", f"{report.overall:.2f}"])

    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) for i in range(len(header))]
    lines = [" | ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("-+-".join("-" * w for w in widths))
    for row in rows:
        lines.append(" | ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    return "\n".join(lines)


def report_tsv(report: EvalReport) -> str:
    """Delimited form of the speaker/group/overall rates."""
    lines = ["row\tname\tcorrect\ttotal\trate_percent"]
    for speaker, score in report.per_speaker.items():
        lines.append(f"speaker\t{speaker}\t{score.correct}\t{score.total}"
                     f"\t{score.rate_percent:.2f}")
    for sex, rate in sorted(report.per_group.items()):
        lines.append(f"group\t{sex}\t\t\t{rate:.2f}")
    lines.append(f"overall\t\t\t\t{report.overall:.2f}")
    return "\n".join(lines) + "\n"


def per_utterance_tsv(manifest: CorpusManifest, hypotheses, scores=None) -> str:
    """One row per utterance: reference, hypothesis, and match flag."""
    lines = ["utterance_id\treference\thypothesis\tcorrect" + ("\tlog_score" if scores else "")]
    for entry in manifest:
        hyp = tuple(hypotheses[entry.utterance_id])
        correct = int(hyp == tuple(entry.transcript))
        row = (f"{entry.utterance_id}\t{' '.join(entry.transcript)}"
               f"\t{' '.join(hyp)}\t{correct}")
        if scores:
            row += f"\t{scores[entry.utterance_id]:.6f}"
        lines.append(row)
    return "\n".join(lines) + "\n"
