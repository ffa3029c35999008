"""Tournament-study statistics: quality-control filtering, Mann-Whitney U
with exact small-sample p-values, pairwise preference tallies, and bracket
rendering.

The exact path enumerates every assignment of pooled midranks to the first
sample and reports the two-sided tail P(|U - nm/2| >= |u_obs - nm/2|). All
quantities involved are multiples of one half, so the enumeration probability
is computed without rounding error. Larger samples use the normal
approximation with tie-corrected variance and a 0.5 continuity correction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

__all__ = [
    "LikertResponse",
    "PreferenceResponse",
    "ParticipantRecord",
    "MannWhitneyResult",
    "ExperimentReport",
    "EvalError",
    "EXACT_ENUMERATION_LIMIT",
    "qc_filter",
    "mann_whitney_u",
    "analyze_experiment",
    "tournament_report",
    "load_likert",
    "load_preferences",
    "load_participants",
]

EXACT_ENUMERATION_LIMIT = 12
QC_REQUIRED_CORRECT = 3


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class LikertResponse:
    participant_id: str
    experiment_id: str
    method_id: str
    source_label: str
    rating: int

    def __post_init__(self):
        if self.rating not in (1, 2, 3, 4):
            raise EvalError(f"rating must be in 1..4, got {self.rating}")


@dataclass(frozen=True)
class PreferenceResponse:
    participant_id: str
    experiment_id: str
    method_id: str
    chosen_source: str
    alternative_source: str

    def __post_init__(self):
        if self.chosen_source == self.alternative_source:
            raise EvalError("chosen and alternative sources must differ")


@dataclass(frozen=True)
class ParticipantRecord:
    participant_id: str
    qc_correct: int

    def __post_init__(self):
        if not 0 <= self.qc_correct <= 3:
            raise EvalError(f"qc_correct must be in 0..3, got {self.qc_correct}")


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p_two_sided: float
    method: str                      # "exact" | "normal_approx"


@dataclass
class ExperimentReport:
    experiment_id: str
    sources: dict[str, dict] = field(default_factory=dict)  # label -> {mean, n}
    u: float = 0.0
    p_two_sided: float = 1.0
    method: str = "exact"
    alpha: float = 0.05
    significant: bool = False
    preference_counts: dict[str, int] = field(default_factory=dict)
    winner: str = "tie"

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "sources": self.sources,
            "u": self.u,
            "p_two_sided": self.p_two_sided,
            "method": self.method,
            "alpha": self.alpha,
            "significant": self.significant,
            "preference_counts": self.preference_counts,
            "winner": self.winner,
        }


# ---------------------------------------------------------------------------
# Quality control


def qc_filter(responses: list, participants: list[ParticipantRecord]):
    """Drop every response from participants who did not answer all three
    quality-control questions correctly. Returns (kept, removal_report)."""
    by_id = {p.participant_id: p for p in participants}
    failing = {
        pid for pid, p in by_id.items() if p.qc_correct < QC_REQUIRED_CORRECT
    }
    kept = []
    removed = 0
    for response in responses:
        pid = response.participant_id
        if pid not in by_id:
            raise EvalError(f"response from unknown participant {pid!r}")
        if pid in failing:
            removed += 1
        else:
            kept.append(response)
    report = {
        "participants_total": len(by_id),
        "participants_removed": sorted(failing),
        "participants_retained": len(by_id) - len(failing),
        "responses_removed": removed,
        "responses_retained": len(kept),
    }
    return kept, report


# ---------------------------------------------------------------------------
# Mann-Whitney U


def _midranks(values: list[float]) -> list[float]:
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        midrank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = midrank
        i = j + 1
    return ranks


def _u_from_ranks(rank_sum: float, n: int) -> float:
    return rank_sum - n * (n + 1) / 2.0


def _normal_sf(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def _exact_tail_probability(double_ranks: list[int], n: int, u_obs: float) -> float:
    """P(|U - nm/2| >= |u_obs - nm/2|) over every assignment of n of the
    pooled ranks to the first sample.

    The full enumeration is evaluated by subset-sum counting over doubled
    midranks, which keeps everything in exact integer arithmetic: with S2
    the doubled rank sum of a subset, 2U = S2 - n(n+1) and 2*center = nm.
    """
    big_n = len(double_ranks)
    m = big_n - n
    # ways[k][s2] = number of k-subsets with doubled rank sum s2
    ways = [dict() for _ in range(n + 1)]
    ways[0][0] = 1
    for r in double_ranks:
        for k in range(min(n, big_n) - 1, -1, -1):
            if not ways[k]:
                continue
            target = ways[k + 1]
            for s2, count in ways[k].items():
                target[s2 + r] = target.get(s2 + r, 0) + count
    observed2 = round(abs(2 * u_obs - n * m))
    hits = 0
    total = 0
    for s2, count in ways[n].items():
        total += count
        if abs(s2 - n * (n + 1) - n * m) >= observed2:
            hits += count
    return hits / total


def mann_whitney_u(a: list[float], b: list[float]) -> MannWhitneyResult:
    """Two-sided Mann-Whitney U over midranks; U is reported for sample a.

    The p-value covers the full enumeration of all C(n+m, n) rank
    assignments when n+m is at most EXACT_ENUMERATION_LIMIT, otherwise the
    tie-corrected normal approximation with a 0.5 continuity correction.
    """
    if not a or not b:
        raise EvalError("both samples must be non-empty")
    n, m = len(a), len(b)
    pooled = list(a) + list(b)
    ranks = _midranks(pooled)
    u_obs = _u_from_ranks(sum(ranks[:n]), n)
    center = n * m / 2.0

    if n + m <= EXACT_ENUMERATION_LIMIT:
        double_ranks = [round(2 * r) for r in ranks]
        p = _exact_tail_probability(double_ranks, n, u_obs)
        return MannWhitneyResult(u_obs, p, "exact")

    big_n = n + m
    tie_term = 0.0
    seen: dict[float, int] = {}
    for value in pooled:
        seen[value] = seen.get(value, 0) + 1
    for count in seen.values():
        tie_term += count**3 - count
    variance = (n * m / 12.0) * ((big_n + 1) - tie_term / (big_n * (big_n - 1)))
    if variance <= 0:
        return MannWhitneyResult(u_obs, 1.0, "normal_approx")
    diff = u_obs - center
    if diff > 0:
        z = (diff - 0.5) / math.sqrt(variance)
    elif diff < 0:
        z = (diff + 0.5) / math.sqrt(variance)
    else:
        z = 0.0
    p = min(1.0, 2.0 * _normal_sf(abs(z)))
    return MannWhitneyResult(u_obs, p, "normal_approx")


# ---------------------------------------------------------------------------
# Experiment analysis


def analyze_experiment(
    likert: list[LikertResponse],
    prefs: list[PreferenceResponse],
    alpha: float = 0.05,
) -> ExperimentReport:
    """Per-source Likert means, U/p over the two rating samples, preference
    counts, and the majority winner."""
    experiment_ids = {r.experiment_id for r in likert} | {
        r.experiment_id for r in prefs
    }
    if len(experiment_ids) != 1:
        raise EvalError(
            f"responses must share one experiment_id, got {sorted(experiment_ids)}"
        )
    experiment_id = experiment_ids.pop()
    labels = {r.source_label for r in likert}
    for r in prefs:
        labels.add(r.chosen_source)
        labels.add(r.alternative_source)
    if len(labels) != 2:
        raise EvalError(f"exactly two source labels required, got {sorted(labels)}")
    first, second = sorted(labels)

    ratings = {first: [], second: []}
    for r in likert:
        ratings[r.source_label].append(float(r.rating))
    sources = {
        label: {
            "mean": (sum(vals) / len(vals)) if vals else None,
            "n": len(vals),
        }
        for label, vals in ratings.items()
    }
    if ratings[first] and ratings[second]:
        stat = mann_whitney_u(ratings[first], ratings[second])
    else:
        stat = MannWhitneyResult(0.0, 1.0, "exact")

    counts = {first: 0, second: 0}
    for r in prefs:
        counts[r.chosen_source] += 1
    if counts[first] > counts[second]:
        winner = first
    elif counts[second] > counts[first]:
        winner = second
    else:
        winner = "tie"

    return ExperimentReport(
        experiment_id=experiment_id,
        sources=sources,
        u=stat.u,
        p_two_sided=stat.p_two_sided,
        method=stat.method,
        alpha=alpha,
        significant=stat.p_two_sided < alpha,
        preference_counts=counts,
        winner=winner,
    )


# ---------------------------------------------------------------------------
# Tournament bracket

BEST_OF_PREFIX = "best-of:"


def tournament_report(reports: list[ExperimentReport], pairings: list[tuple]) -> str:
    """Render the bracket. Each pairing is (experiment_id, side_a, side_b);
    a side of the form 'best-of:<experiment_id>' resolves to that
    experiment's winner. Pure formatting, no statistics."""
    by_id = {r.experiment_id: r for r in reports}
    lines = []
    for experiment_id, side_a, side_b in pairings:
        report = by_id.get(experiment_id)
        if report is None:
            raise EvalError(f"pairing references unknown experiment {experiment_id!r}")
        resolved = []
        for side in (side_a, side_b):
            if isinstance(side, str) and side.startswith(BEST_OF_PREFIX):
                ref = side[len(BEST_OF_PREFIX):]
                upstream = by_id.get(ref)
                if upstream is None:
                    raise EvalError(f"pairing references unknown experiment {ref!r}")
                if upstream.winner == "tie":
                    raise EvalError(
                        f"experiment {ref!r} ended in a tie and cannot advance"
                    )
                resolved.append(upstream.winner)
            else:
                resolved.append(side)
        if set(resolved) != set(report.preference_counts):
            raise EvalError(
                f"experiment {experiment_id!r} compares "
                f"{sorted(report.preference_counts)} but the pairing resolved to "
                f"{sorted(resolved)}"
            )
        a, b = resolved
        counts = report.preference_counts
        lines.append(
            f"experiment {experiment_id}: {a} ({counts[a]}) vs. {b} ({counts[b]})"
            f" -> winner: {report.winner}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# JSONL loaders


def _read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            rows.append(json.loads(line))
    return rows


def load_likert(path: str | Path) -> list[LikertResponse]:
    return [
        LikertResponse(
            participant_id=row["participant_id"],
            experiment_id=row["experiment_id"],
            method_id=row["method_id"],
            source_label=row["source_label"],
            rating=int(row["rating"]),
        )
        for row in _read_jsonl(path)
    ]


def load_preferences(path: str | Path) -> list[PreferenceResponse]:
    return [
        PreferenceResponse(
            participant_id=row["participant_id"],
            experiment_id=row["experiment_id"],
            method_id=row["method_id"],
            chosen_source=row["chosen_source"],
            alternative_source=row["alternative_source"],
        )
        for row in _read_jsonl(path)
    ]


def load_participants(path: str | Path) -> list[ParticipantRecord]:
    return [
        ParticipantRecord(
            participant_id=row["participant_id"],
            qc_correct=int(row["qc_correct"]),
        )
        for row in _read_jsonl(path)
    ]
