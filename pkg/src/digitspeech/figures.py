"""Matplotlib renderings of evaluation and training reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluate import EvalReport


def save_rate_chart(report: EvalReport, path: str | Path) -> None:
    """Bar chart of per-speaker recognition rates with group mean lines."""
    speakers = list(report.per_speaker)
    rates = [report.per_speaker[s].rate_percent for s in speakers]
    colors = ["#4878b0" if report.speaker_groups.get(s) == "M" else "#b06048"
              for s in speakers]

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(speakers, rates, color=colors)
    for sex, style in (("M", "--"), ("W", ":")):
        if sex in report.per_group:
            ax.axhline(report.per_group[sex], linestyle=style, color="gray", linewidth=1,
                       label=f"group {sex} mean {report.per_group[sex]:.2f}%")
    ax.axhline(report.overall, color="black", linewidth=1,
               label=f"overall {report.overall:.2f}%")
    ax.set_ylabel("recognition rate (%)")
    ax.set_ylim(0, 105)
    ax.legend(loc="lower right", fontsize=8)
    ax.set_title("Recognition rate by speaker")
    fig.tight_layout()
    fig.savefig(Path(path), dpi=150)
    plt.close(fig)


def save_loglik_curve(loglik_values, path: str | Path) -> None:
    """Training log-likelihood per EM iteration."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    iterations = range(1, len(loglik_values) + 1)
    ax.plot(iterations, loglik_values, marker="o", markersize=3)
    ax.set_xlabel("iteration")
    ax.set_ylabel("total log-likelihood")
    ax.set_title("Training log-likelihood")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=150)
    plt.close(fig)
