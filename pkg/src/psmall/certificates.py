"""Shared delta-small certificate containers for both process pipelines.

A delta-small certificate witnesses a large-supremum event: a list of
entries, each an observable (encoded by a descriptor), a firing threshold
``u``, and an exact rational bound on the firing probability.  The entry
bounds are grouped into construction stages with fixed budgets; the grand
total never exceeds 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import StageBudgetError

# Rational bounds on Euler's number: the upper one where a bound must
# dominate a Poisson/Chernoff tail, the lower one where a smaller cover
# probability keeps the cover-existence guarantee.
E_UPPER = Fraction(2718281828459045236, 10**18)
E_LOWER = Fraction(2718281828459045235, 10**18)

STAGE_BUDGETS = {
    "small-values": Fraction(1, 16),
    "tail": Fraction(1, 16),
    "remainder": Fraction(1, 16),
    "double-hit": Fraction(1, 16),
    "cover": Fraction(1, 4),
}


@dataclass(frozen=True)
class CertEntry:
    """One certificate entry: an observable, a threshold, an exact bound.

    ``count`` > 1 compresses a group of identical entries (the per-slice
    double-hit entries of one cell); ``bound`` is always per entry.
    """

    stage: str
    descriptor: tuple
    u: Fraction
    bound: Fraction
    count: int = 1

    @property
    def total_bound(self) -> Fraction:
        return self.count * self.bound


@dataclass(frozen=True)
class DeltaSmallCertificate:
    """Explicit witness family for a large-supremum event.

    Entries are grouped in construction-stage order; ``total_bound`` is the
    exact sum of all entry bounds and is at most 1/2 for every certificate
    this package emits.
    """

    kind: str
    K: Fraction
    s_hat: Fraction
    N: int
    M: Fraction
    p: Fraction
    d: int  # sample count for empirical certificates; 0 otherwise
    entries: tuple
    stage_totals: dict = field(compare=False)
    total_bound: Fraction = Fraction(0)

    @property
    def threshold(self) -> Fraction:
        return self.K * self.s_hat

    def entries_for_stage(self, stage: str) -> list:
        return [e for e in self.entries if e.stage == stage]


def finalize_certificate(kind, K, s_hat, N, M, p, d, entries) -> DeltaSmallCertificate:
    """Check every stage budget exactly and freeze the certificate."""
    stage_totals = {stage: Fraction(0) for stage in STAGE_BUDGETS}
    for entry in entries:
        stage_totals[entry.stage] += entry.total_bound
    for stage, total in stage_totals.items():
        if total > STAGE_BUDGETS[stage]:
            raise StageBudgetError(
                stage, f"bound total {total} exceeds budget {STAGE_BUDGETS[stage]}"
            )
    total = sum(stage_totals.values(), Fraction(0))
    assert total <= Fraction(1, 2)
    return DeltaSmallCertificate(
        kind=kind,
        K=Fraction(K),
        s_hat=Fraction(s_hat),
        N=N,
        M=Fraction(M),
        p=Fraction(p),
        d=d,
        entries=tuple(entries),
        stage_totals=stage_totals,
        total_bound=total,
    )


@dataclass
class EntryStat:
    """Firing statistics for one entry (or one group of identical entries).

    For grouped entries the bound applies to each member separately, so the
    frequency compared against the bound is the worst member's.
    """

    entry: CertEntry
    fired: int = 0  # trials where at least one member fired
    member_fires: dict = field(default_factory=dict)

    def frequency(self, trials: int) -> float:
        if self.entry.count == 1:
            return self.fired / trials
        worst = max(self.member_fires.values(), default=0)
        return worst / trials

    def stderr(self, trials: int) -> float:
        f = self.frequency(trials)
        return math.sqrt(f * (1 - f) / trials)

    def within_bound(self, trials: int, sigmas: float = 4.0) -> bool:
        return self.frequency(trials) <= float(self.entry.bound) + sigmas * self.stderr(
            trials
        )


def descriptor_str(descriptor: tuple) -> str:
    kind = descriptor[0]
    if kind == "cover":
        return "cover:" + ",".join(map(str, descriptor[1]))
    return f"{kind}:{descriptor[1]}"


@dataclass
class VerifyReport:
    """Monte Carlo containment check of a delta-small certificate."""

    kind: str
    trials: int
    seed: int
    threshold: float
    event_count: int
    violation_count: int
    entry_stats: list
    markov_bound: float

    @property
    def event_frequency(self) -> float:
        return self.event_count / self.trials

    def all_entries_within_bounds(self, sigmas: float = 4.0) -> bool:
        return all(s.within_bound(self.trials, sigmas) for s in self.entry_stats)

    def summary_rows(self):
        rows = []
        for stat in self.entry_stats:
            entry = stat.entry
            rows.append(
                {
                    "stage": entry.stage,
                    "descriptor": descriptor_str(entry.descriptor),
                    "count": entry.count,
                    "u": str(entry.u),
                    "bound": str(entry.bound),
                    "fired": stat.fired,
                    "frequency": stat.frequency(self.trials),
                    "within_bound": stat.within_bound(self.trials),
                }
            )
        return rows
