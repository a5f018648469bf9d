"""Ranking simulated segmentations and the statistics used to judge a metric.

A metric ranks a set well when its ranking agrees with the true error counts,
measured by Kendall's tau-b.  Two metrics are compared set-by-set with a
two-sided Wilcoxon signed-rank test on the paired taus.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np


class DegenerateRankingError(ValueError):
    pass


@dataclass(frozen=True)
class RankRow:
    member: str
    error_count: int
    value: float
    rank: float


@dataclass(frozen=True)
class RankingTable:
    metric_name: str
    rows: tuple[RankRow, ...]
    tau: float

    @property
    def perfect(self) -> bool:
        return self.tau == 1.0

    @property
    def ranks(self) -> list[float]:
        return [r.rank for r in self.rows]

    def to_dict(self) -> dict:
        return {
            "metric": self.metric_name,
            "tau": self.tau,
            "perfect": self.perfect,
            "rows": [{"member": r.member, "error_count": r.error_count,
                      "value": r.value, "rank": r.rank} for r in self.rows],
        }


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks, ascending; exact ties share the mean of their ranks."""
    x = np.asarray(values, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def kendall_tau_b(a: Sequence[float], b: Sequence[float]) -> float:
    """Kendall's tau-b with tie correction.

    ``(C - D) / sqrt((C + D + Ta) * (C + D + Tb))`` where ``Ta`` counts pairs
    tied only in ``a`` and ``Tb`` pairs tied only in ``b``.
    """
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if len(a) < 2:
        raise ValueError("need at least two observations")
    conc = disc = tie_a = tie_b = 0
    for i, j in combinations(range(len(a)), 2):
        da = a[i] - a[j]
        db = b[i] - b[j]
        if da == 0 and db == 0:
            continue
        if da == 0:
            tie_a += 1
        elif db == 0:
            tie_b += 1
        elif (da > 0) == (db > 0):
            conc += 1
        else:
            disc += 1
    denom = (conc + disc + tie_a) * (conc + disc + tie_b)
    if denom == 0:
        raise DegenerateRankingError("degenerate ranking")
    return (conc - disc) / math.sqrt(denom)


def rank_segmentations(values, metric_name: str = "metric") -> RankingTable:
    """Rank ``(member id, error_count, metric value)`` entries; lowest value gets rank 1."""
    entries = list(values)
    if len(entries) < 2:
        raise ValueError("need at least two segmentations to rank")
    metric = [float(v) for _, _, v in entries]
    if not all(math.isfinite(v) for v in metric):
        raise ValueError(f"non-finite metric value in {metric_name}")
    ranks = average_ranks(metric)
    rows = [RankRow(str(m), int(k), v, float(r))
            for (m, k, _), v, r in zip(entries, metric, ranks)]
    rows.sort(key=lambda r: r.error_count)
    tau = kendall_tau_b([r.rank for r in rows], [r.error_count for r in rows])
    return RankingTable(metric_name, tuple(rows), tau)


def count_imperfect(tables) -> int:
    """Number of rankings whose tau differs from 1 (at least one misranked member)."""
    return sum(1 for t in tables if t.tau != 1.0)


# ------------------------------------------------------------------ Wilcoxon

EXACT_LIMIT = 25


def _signed_rank_null_counts(doubled_ranks: Sequence[int]) -> np.ndarray:
    # counts[s] = number of sign assignments whose positive (doubled) rank sum is s
    counts = np.zeros(sum(doubled_ranks) + 1, dtype=object)
    counts[0] = 1
    top = 0
    for r in doubled_ranks:
        nxt = counts.copy()
        nxt[r:top + r + 1] += counts[:top + 1]
        counts = nxt
        top += r
    return counts


def wilcoxon_signed_rank(pairs) -> tuple[float, float]:
    """Two-sided Wilcoxon signed-rank test on ``(x, y)`` pairs, testing ``y - x``.

    Zero differences are dropped and tied magnitudes get average ranks.  The
    statistic is the smaller of the positive and negative rank sums.  The
    p-value is exact (over all sign assignments of the observed ranks) for up
    to 25 nonzero differences and a tie-corrected normal approximation with
    continuity correction above that.  Returns ``(W, p)``.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty input")
    d = np.array([float(y) - float(x) for x, y in pairs])
    # differences of taus are rationals; rounding stops float noise splitting ties
    d = np.round(d, 12)
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return 0.0, 1.0
    ranks = average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    if n <= EXACT_LIMIT:
        doubled = [int(round(2 * r)) for r in ranks]
        counts = _signed_rank_null_counts(doubled)
        below = int(sum(counts[:int(round(2 * w)) + 1]))
        p = 2 * below / 2 ** n
    else:
        _, tie_sizes = np.unique(np.abs(d), return_counts=True)
        mean = n * (n + 1) / 4
        var = n * (n + 1) * (2 * n + 1) / 24 - float(np.sum(tie_sizes ** 3 - tie_sizes)) / 48
        z = max(abs(w - mean) - 0.5, 0.0) / math.sqrt(var)
        p = math.erfc(z / math.sqrt(2))
    return w, min(1.0, p)


# ------------------------------------------------------------------- summary

@dataclass(frozen=True)
class SetResult:
    """The AVD and bAVD rankings of one simulation set."""
    phantom: str
    set_index: int
    avd: RankingTable
    bavd: RankingTable


@dataclass(frozen=True)
class GroupSummary:
    name: str
    n_sets: int
    mean_tau_avd: float
    mean_tau_bavd: float
    imperfect_avd: int
    imperfect_bavd: int
    wilcoxon_w: float
    p_value: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class ExperimentSummary:
    phantoms: tuple[GroupSummary, ...]
    pooled: GroupSummary
    sets: tuple[SetResult, ...] = field(repr=False, default=())

    def to_dict(self) -> dict:
        return {"phantoms": [g.to_dict() for g in self.phantoms],
                "pooled": self.pooled.to_dict()}


def _summarize_group(name: str, results: Sequence[SetResult]) -> GroupSummary:
    tau_a = [r.avd.tau for r in results]
    tau_b = [r.bavd.tau for r in results]
    w, p = wilcoxon_signed_rank(zip(tau_a, tau_b))
    return GroupSummary(
        name=name,
        n_sets=len(results),
        mean_tau_avd=float(np.mean(tau_a)),
        mean_tau_bavd=float(np.mean(tau_b)),
        imperfect_avd=count_imperfect(r.avd for r in results),
        imperfect_bavd=count_imperfect(r.bavd for r in results),
        wilcoxon_w=w,
        p_value=p,
    )


def summarize_experiment(per_set_reports: Sequence[SetResult]) -> ExperimentSummary:
    """Per-phantom and pooled tau means, imperfect counts and Wilcoxon p-values."""
    results = list(per_set_reports)
    if not results:
        raise ValueError("no simulation sets to summarize")
    groups: dict[str, list[SetResult]] = {}
    for r in results:
        if len(r.avd.rows) != len(r.bavd.rows):
            raise ValueError(f"set {r.phantom}/{r.set_index}: AVD and bAVD tables differ in size")
        groups.setdefault(r.phantom, []).append(r)
    phantoms = tuple(_summarize_group(name, groups[name]) for name in sorted(groups))
    return ExperimentSummary(phantoms, _summarize_group("pooled", results), tuple(results))


# ----------------------------------------------------------------- CSV output

def _num(x) -> str:
    if isinstance(x, float):
        return str(int(x)) if x.is_integer() and abs(x) < 2 ** 53 else repr(x)
    return str(x)


def to_csv(header, rows) -> str:
    """CSV text with LF line endings; floats keep full round-trip precision."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_num(v) for v in row])
    return buf.getvalue()


def set_table_csv(avd_table: RankingTable, bavd_table: RankingTable) -> str:
    """Per-set ranking table: member, error_count, avd, avd_rank, bavd, bavd_rank."""
    rows = []
    for ra, rb in zip(avd_table.rows, bavd_table.rows):
        if ra.member != rb.member:
            raise ValueError(f"row mismatch: {ra.member} vs {rb.member}")
        rows.append([ra.member, ra.error_count, ra.value, ra.rank, rb.value, rb.rank])
    return to_csv(["member", "error_count", "avd", "avd_rank", "bavd", "bavd_rank"], rows)


def summary_csv(group: GroupSummary) -> str:
    """Per-phantom summary: metric, mean_tau, imperfect_count, p_value."""
    return to_csv(["metric", "mean_tau", "imperfect_count", "p_value"], [
        ["bAVD", group.mean_tau_bavd, group.imperfect_bavd, group.p_value],
        ["AVD", group.mean_tau_avd, group.imperfect_avd, group.p_value],
    ])
