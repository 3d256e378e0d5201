"""Positive empirical processes over an atomless law on the unit interval,
their grid discretization, and delta-small certificates.

The sample space is [0, 1) with the uniform law (any atomless law reduces
to this by the quantile map) and the function class is a finite set of
nonnegative step functions with rational breakpoints, so every mass used
in a bound is an exact rational.  For ``d`` independent samples the large-
supremum event ``sup_t sum_i t(X_i) >= K * s_hat`` is covered by entries of
four kinds: per-function tail sets, per-cell remainders, per-slice double
hits, and counting sets from a cover of the d-subset threshold family of
slices.  Thresholds are stated in the normalized form: an entry with
threshold u fires when the sample average of its indicator reaches u.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from math import comb

from .certificates import (
    E_LOWER,
    CertEntry,
    DeltaSmallCertificate,
    EntryStat,
    VerifyReport,
    finalize_certificate,
)
from .errors import GuardLimitError, PreconditionError, StageBudgetError
from .rng import CounterRNG
from .selector import Estimate

# The cover stage needs its threshold to reach (90 * 4e + 1) times the
# uniform d-subset expectation of the slice sums; the occupied-vs-uniform
# bridge costs 8/7 and the grid bridge a factor 2, so any K of at least
# 2 * (8/7) * (360 e + 1) = 2239.4 closes the margin chain.  Rounded up:
MIN_K = Fraction(16, 7) * (360 * E_LOWER + 1)
DEFAULT_K = Fraction(2240)
COVER_CONSTANT_TIMES_E = 4  # the cover stage is (4 e d / n)-small

DEFAULT_MAX_CELLS = 4096
DEFAULT_MAX_COVER_SETS = 20_000


@dataclass(frozen=True)
class StepFn:
    """Nonnegative step function on [0, 1): value ``values[i]`` holds on
    ``[breaks[i], breaks[i+1])`` with an implicit final breakpoint at 1."""

    breaks: tuple
    values: tuple

    def __post_init__(self):
        if not self.breaks or self.breaks[0] != 0:
            raise ValueError("breakpoints must start at 0")
        if len(self.breaks) != len(self.values):
            raise ValueError("one value per piece required")
        for a, b in zip(self.breaks, self.breaks[1:]):
            if b <= a:
                raise ValueError("breakpoints must increase strictly")
        if self.breaks[-1] >= 1:
            raise ValueError("breakpoints must stay below 1")
        if any(v < 0 for v in self.values):
            raise ValueError("step values must be nonnegative")

    @classmethod
    def build(cls, pairs) -> "StepFn":
        pairs = [(Fraction(b), Fraction(v)) for b, v in pairs]
        return cls(tuple(b for b, _ in pairs), tuple(v for _, v in pairs))

    def value_at(self, x) -> Fraction:
        idx = bisect.bisect_right(self.breaks, Fraction(x)) - 1
        return self.values[idx]

    def mean(self) -> Fraction:
        """Exact integral over [0, 1)."""
        edges = list(self.breaks) + [Fraction(1)]
        return sum(
            (v * (b - a) for v, a, b in zip(self.values, edges, edges[1:])),
            Fraction(0),
        )


@dataclass(frozen=True)
class EmpiricalInstance:
    """Finite class of step functions plus the sample count."""

    fns: tuple
    d: int

    def __post_init__(self):
        if not self.fns:
            raise ValueError("need at least one step function")
        if self.d < 0:
            raise ValueError("sample count must be nonnegative")

    @classmethod
    def build(cls, fn_pairs, d: int) -> "EmpiricalInstance":
        return cls(tuple(StepFn.build(pairs) for pairs in fn_pairs), d)

    def refinement(self) -> list:
        """Atomic intervals on which every function is constant.

        Returns ``[(a, b, values)]`` with exact endpoints and the per-
        function value tuple.
        """
        cuts = {Fraction(0), Fraction(1)}
        for fn in self.fns:
            cuts.update(fn.breaks)
        edges = sorted(cuts)
        pieces = []
        for a, b in zip(edges, edges[1:]):
            values = tuple(fn.value_at(a) for fn in self.fns)
            pieces.append((a, b, values))
        return pieces

    def expected_sum(self) -> Fraction:
        """Exact expected supremum for a single-function class, where the
        supremum is the plain sample sum and expectation is linear."""
        if len(self.fns) != 1:
            raise ValueError("exact linear expectation requires a single function")
        return self.d * self.fns[0].mean()


@dataclass(frozen=True)
class EmpiricalCell:
    index: int
    levels: tuple
    coeffs: tuple
    intervals: tuple  # (a, b, sweep_offset) with exact Fractions
    mass: Fraction
    slice_count: int
    slice_start: int
    remainder_mass: Fraction


@dataclass(frozen=True)
class EmpiricalPartition:
    """Level-band cells over [0, 1) with exact mass-p slices."""

    inst: EmpiricalInstance
    N: int
    M: Fraction
    p: Fraction
    cells: tuple
    n_slices: int
    tail_masses: tuple  # per function, exact mass where it reaches M

    def cell_by_levels(self) -> dict:
        return {cell.levels: cell for cell in self.cells}

    def top_d_sum(self) -> Fraction:
        """Largest slice sum achievable by d distinct slices."""
        d = self.inst.d
        best = Fraction(0)
        for fn_idx in range(len(self.inst.fns)):
            values = []
            for cell in self.cells:
                values.append((cell.coeffs[fn_idx], cell.slice_count))
            values.sort(reverse=True)
            remaining = d
            total = Fraction(0)
            for coeff, count in values:
                take = min(remaining, count)
                total += take * coeff
                remaining -= take
                if remaining == 0:
                    break
            if remaining == 0:
                best = max(best, total)
        return best


def discretize_emp(
    inst: EmpiricalInstance,
    N: int,
    M,
    p,
    *,
    max_cells: int = DEFAULT_MAX_CELLS,
    enforce_p_bounds: bool = True,
) -> EmpiricalPartition:
    """Cut [0, 1) into value-band cells and mass-``p`` slices.

    Atomic intervals where some function reaches ``M`` form the tails and
    join no cell.  The remaining intervals group by the vector of value
    bands ``[k/4^N, (k+1)/4^N)``; each cell's intervals are swept left to
    right and cut at multiples of p.  Preconditions enforced exactly: the
    tail masses sum to at most ``1/(16 d)``, every cell yields at least
    ``16 d`` slices, and ``n p^2 d^2 <= 1/16`` for the total slice count n.
    The two p-driven bounds are skippable via ``enforce_p_bounds`` for tiny
    analysis partitions whose budgets are checked directly.
    """
    M = Fraction(M)
    p = Fraction(p)
    d = inst.d
    if d < 1:
        raise ValueError("need at least one sample")
    if p <= 0:
        raise ValueError("slice mass must be positive")
    band = Fraction(1, 4**N)

    pieces = inst.refinement()
    n_fns = len(inst.fns)
    tail_masses = [Fraction(0)] * n_fns
    cell_intervals: dict = {}
    for a, b, values in pieces:
        tail_fns = [i for i, v in enumerate(values) if v >= M]
        if tail_fns:
            for i in tail_fns:
                tail_masses[i] += b - a
            continue
        levels = tuple(math.floor(v / band) for v in values)
        cell_intervals.setdefault(levels, []).append((a, b))
        if len(cell_intervals) > max_cells:
            raise GuardLimitError(f"more than {max_cells} cells at N={N}")

    tail_total = sum(tail_masses, Fraction(0))
    if tail_total > Fraction(1, 16 * d):
        raise PreconditionError(
            f"tail mass {tail_total} exceeds 1/(16 d) = {Fraction(1, 16 * d)}; "
            "raise the cutoff M"
        )

    cells = []
    slice_start = 0
    for levels in sorted(cell_intervals):
        intervals = sorted(cell_intervals[levels])
        offset = Fraction(0)
        with_offsets = []
        for a, b in intervals:
            with_offsets.append((a, b, offset))
            offset += b - a
        mass = offset
        slice_count = math.floor(mass / p)
        if enforce_p_bounds and slice_count < 16 * d:
            raise ValueError(
                f"cell {levels} yields {slice_count} slices, below 16 d = {16 * d}; "
                "decrease p"
            )
        cells.append(
            EmpiricalCell(
                index=len(cells),
                levels=levels,
                coeffs=tuple((k + 1) * band for k in levels),
                intervals=tuple(with_offsets),
                mass=mass,
                slice_count=slice_count,
                slice_start=slice_start,
                remainder_mass=mass - slice_count * p,
            )
        )
        slice_start += slice_count

    part = EmpiricalPartition(
        inst, N, M, p, tuple(cells), slice_start, tuple(tail_masses)
    )
    if enforce_p_bounds and part.n_slices * p * p * d * d > Fraction(1, 16):
        raise PreconditionError(
            f"n p^2 d^2 = {part.n_slices * p * p * d * d} exceeds 1/16; decrease p"
        )
    return part


def auto_tune_emp(inst: EmpiricalInstance, s_hat, K=DEFAULT_K, *, max_cells=DEFAULT_MAX_CELLS):
    """Smallest cutoff and grid, then the largest slice mass; ``(N, M, p)``."""
    s_hat = Fraction(s_hat)
    d = inst.d
    if s_hat <= 0:
        raise ValueError("need a positive expected-supremum estimate")
    pieces = inst.refinement()

    M = Fraction(1)
    for _ in range(60):
        tail_total = Fraction(0)
        for a, b, values in pieces:
            tail_total += sum((b - a for v in values if v >= M), Fraction(0))
        if tail_total <= Fraction(1, 16 * d):
            break
        M *= 2
    else:
        raise PreconditionError("no cutoff under 2^60 meets the tail budget")

    # grid bridge: each sample costs at most 4^-N against the cell edge
    N = 1
    while d * Fraction(1, 4**N) > s_hat:
        N += 1
        if N > 30:
            raise PreconditionError("no grid exponent under 31 meets the bridge margin")

    # largest p: rebuild cells at a probe p to learn the cell masses
    band = Fraction(1, 4**N)
    masses: dict = {}
    for a, b, values in pieces:
        if any(v >= M for v in values):
            continue
        levels = tuple(math.floor(v / band) for v in values)
        masses[levels] = masses.get(levels, Fraction(0)) + (b - a)
    if not masses:
        raise PreconditionError("no mass below the cutoff")
    min_mass = min(masses.values())
    p = min_mass / (16 * d)
    for _ in range(80):
        try:
            part = discretize_emp(inst, N, M, p, max_cells=max_cells)
        except ValueError:
            p = p / 2
            continue
        remainder_total = sum((c.remainder_mass for c in part.cells), Fraction(0))
        if d * remainder_total <= Fraction(1, 16):
            return N, M, p
        p = p / 2
    raise PreconditionError("no slice mass met the stage budgets after 80 halvings")


def estimate_S_emp(
    inst: EmpiricalInstance,
    trials: int = 100_000,
    seed: int = 0,
    mode: str = "mc",
    *,
    max_exact_terms: int = 300_000,
) -> Estimate:
    """Expected supremum ``E sup_t sum_i t(X_i)`` for d uniform samples.

    Exact mode enumerates sample-to-piece assignments (feasible only when
    ``pieces ** d`` is tiny); Monte Carlo is the default.
    """
    d = inst.d
    if d == 0:
        return Estimate.exact_value(Fraction(0))
    pieces = inst.refinement()
    if mode == "exact":
        if len(pieces) ** d > max_exact_terms:
            raise GuardLimitError(
                f"{len(pieces)}^{d} assignment terms exceed {max_exact_terms}"
            )
        n_fns = len(inst.fns)
        total = Fraction(0)
        lengths = [b - a for a, b, _ in pieces]
        for assignment in product(range(len(pieces)), repeat=d):
            prob = Fraction(1)
            sums = [Fraction(0)] * n_fns
            for piece_idx in assignment:
                prob *= lengths[piece_idx]
                values = pieces[piece_idx][2]
                for i in range(n_fns):
                    sums[i] += values[i]
            total += prob * max(sums)
        return Estimate.exact_value(total)
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    edges = [float(a) for a, _, _ in pieces]
    value_rows = [[float(v) for v in values] for _, _, values in pieces]
    n_fns = len(inst.fns)
    mean = 0.0
    m2 = 0.0
    for trial in range(trials):
        rng = CounterRNG(seed, "emp-sup", trial)
        sums = [0.0] * n_fns
        for _ in range(d):
            x = rng.uniform()
            row = value_rows[bisect.bisect_right(edges, x) - 1]
            for i in range(n_fns):
                sums[i] += row[i]
        value = max(sums)
        delta = value - mean
        mean += delta / (trial + 1)
        m2 += delta * (value - mean)
    stderr = math.sqrt(m2 / (trials - 1) / trials) if trials > 1 else float("inf")
    return Estimate(mean, stderr, False, trials)


def estimate_slice_sup_emp(
    part: EmpiricalPartition, trials: int, seed: int
) -> Estimate:
    """Monte Carlo estimate of ``E sup_t sum_A t(A) X(A)`` over the slices,
    the grid side of the discretization bridge (at most twice the process
    expectation once the grid is fine enough)."""
    runtime = _EmpiricalRuntime(part)
    d = part.inst.d
    coeff_of_cell = {
        cell.index: [float(c) for c in cell.coeffs] for cell in part.cells
    }
    cell_of_slice = {}
    for cell in part.cells:
        for local in range(cell.slice_count):
            cell_of_slice[cell.slice_start + local] = cell.index
    mean = 0.0
    m2 = 0.0
    for trial in range(trials):
        rng = CounterRNG(seed, "emp-slice-sup", trial)
        sums = [0.0] * runtime.n_fns
        for _ in range(d):
            region = runtime.classify(rng.uniform())
            if region[0] != "slice":
                continue
            coeffs = coeff_of_cell[cell_of_slice[region[1]]]
            for i in range(runtime.n_fns):
                sums[i] += coeffs[i]
        value = max(sums)
        delta = value - mean
        mean += delta / (trial + 1)
        m2 += delta * (value - mean)
    stderr = math.sqrt(m2 / (trials - 1) / trials) if trials > 1 else float("inf")
    return Estimate(mean, stderr, False, trials)


def _qualifying_d_subsets(part: EmpiricalPartition, threshold: Fraction, cap: int):
    """Slice-id tuples of every d-subset whose best coefficient sum reaches
    the threshold, enumerated by per-cell occupancy compositions."""
    d = part.inst.d
    n_fns = len(part.inst.fns)
    cells = part.cells
    counts = [c.slice_count for c in cells]

    subsets = []

    def extend(cell_idx: int, remaining: int, sums, chosen_counts):
        if remaining == 0:
            if max(sums) >= threshold:
                per_cell = []
                for idx, k in enumerate(chosen_counts):
                    if k:
                        start = cells[idx].slice_start
                        per_cell.append(
                            [
                                tuple(start + i for i in pick)
                                for pick in combinations(range(counts[idx]), k)
                            ]
                        )
                for combo in product(*per_cell):
                    flat = tuple(sorted(i for grp in combo for i in grp))
                    subsets.append(flat)
                    if len(subsets) > cap:
                        raise GuardLimitError(
                            f"cover stage needs more than {cap} subsets"
                        )
            return
        if cell_idx == len(cells):
            return
        # prune: even taking the best remaining coefficients cannot recover
        best_possible = [s for s in sums]
        tail_best = [Fraction(0)] * n_fns
        for idx in range(cell_idx, len(cells)):
            for i in range(n_fns):
                tail_best[i] = max(tail_best[i], cells[idx].coeffs[i])
        if all(
            best_possible[i] + remaining * tail_best[i] < threshold
            for i in range(n_fns)
        ):
            return
        for k in range(min(remaining, counts[cell_idx]), -1, -1):
            new_sums = [
                sums[i] + k * cells[cell_idx].coeffs[i] for i in range(n_fns)
            ]
            extend(
                cell_idx + 1,
                remaining - k,
                new_sums,
                chosen_counts + [k],
            )

    extend(0, d, [Fraction(0)] * n_fns, [])
    return subsets


def build_emp_certificate(
    part: EmpiricalPartition,
    K=DEFAULT_K,
    s_hat=None,
    *,
    max_cover_sets: int = DEFAULT_MAX_COVER_SETS,
    enforce_min_k: bool = True,
) -> DeltaSmallCertificate:
    """Assemble the delta-small certificate for the event that the sample
    supremum reaches ``K * s_hat``.

    Entries in construction order: per-function tail sets (threshold one
    sample in d, bound ``d * tail mass``), per-cell remainders (same
    shape), per-slice double hits (threshold two samples, exact binomial
    bound, at most ``d^2 p^2`` each), and one counting entry per qualifying
    d-subset of slices, bounded by ``binom(d, g) (p g)^g / (1 - p)`` and
    verified to sit below half the cover probability ``(4 e d / n)^g``.
    """
    if s_hat is None:
        raise ValueError("an expected-supremum estimate s_hat is required")
    inst = part.inst
    d = inst.d
    p = part.p
    K = Fraction(K)
    if enforce_min_k and K < MIN_K:
        raise PreconditionError(
            f"K={K} below the derived minimum {MIN_K}; the cover-stage margin "
            "chain does not close"
        )
    s_hat = Fraction(s_hat)
    if s_hat <= 0:
        raise ValueError("s_hat must be positive")
    threshold = K * s_hat
    u_one = Fraction(1, d)
    entries = []

    for fn_idx, tail in enumerate(part.tail_masses):
        if tail > 0:
            entries.append(
                CertEntry(
                    stage="tail",
                    descriptor=("tail", fn_idx),
                    u=u_one,
                    bound=d * tail,
                )
            )

    for cell in part.cells:
        if cell.remainder_mass > 0:
            entries.append(
                CertEntry(
                    stage="remainder",
                    descriptor=("remainder", cell.index),
                    u=u_one,
                    bound=d * cell.remainder_mass,
                )
            )

    # P(slice holds >= 2 of d samples) exactly, then the d^2 p^2 cushion
    double_bound = 1 - (1 - p) ** d - d * p * (1 - p) ** (d - 1)
    assert double_bound <= d * d * p * p
    for cell in part.cells:
        if cell.slice_count:
            entries.append(
                CertEntry(
                    stage="double-hit",
                    descriptor=("double-hit", cell.index),
                    u=Fraction(2, d),
                    bound=double_bound,
                    count=cell.slice_count,
                )
            )

    n = part.n_slices
    q = Fraction(COVER_CONSTANT_TIMES_E) * E_LOWER * d / n
    if not 0 < q < 1:
        raise StageBudgetError("cover", f"cover probability 4 e d / n = {q} invalid")
    if part.top_d_sum() >= threshold:
        subsets = _qualifying_d_subsets(part, threshold, max_cover_sets)
        weight = len(subsets) * q**d
        if weight > Fraction(1, 2):
            raise StageBudgetError(
                "cover", f"cover weight {weight} exceeds 1/2 at probability {q}"
            )
        for slice_ids in sorted(subsets):
            g = len(slice_ids)
            bound = Fraction(1, 1 - p) * comb(d, g) * (p * g) ** g
            if bound > q**g / 2:
                raise StageBudgetError(
                    "cover",
                    f"entry bound {bound} exceeds half the cover weight {q**g / 2}",
                )
            entries.append(
                CertEntry(
                    stage="cover",
                    descriptor=("cover", slice_ids),
                    u=Fraction(g, d),
                    bound=bound,
                )
            )

    return finalize_certificate("empirical", K, s_hat, part.N, part.M, p, d, entries)


class _EmpiricalRuntime:
    """Float-space classifier: sample point -> piece -> tail/cell/slice."""

    def __init__(self, part: EmpiricalPartition):
        inst = part.inst
        self.d = inst.d
        self.n_fns = len(inst.fns)
        self.p = float(part.p)
        pieces = inst.refinement()
        M = part.M
        band = Fraction(1, 4**part.N)
        cells = part.cell_by_levels()
        self.edges = [float(a) for a, _, _ in pieces]
        self.piece_values = [[float(v) for v in values] for _, _, values in pieces]
        # per piece: ('tail', fn_ids) or ('cell', cell, sweep_base_float)
        self.piece_class = []
        for a, b, values in pieces:
            tail_fns = tuple(i for i, v in enumerate(values) if v >= M)
            if tail_fns:
                self.piece_class.append(("tail", tail_fns, 0.0, None))
                continue
            levels = tuple(math.floor(v / band) for v in values)
            cell = cells[levels]
            offset = None
            for ia, ib, off in cell.intervals:
                if ia <= a and b <= ib:
                    offset = off + (a - ia)
                    break
            assert offset is not None
            self.piece_class.append(("cell", cell, float(offset), float(a)))

    def classify(self, x: float):
        """('tail', fn_ids) | ('slice', id) | ('remainder', cell_idx)."""
        idx = bisect.bisect_right(self.edges, x) - 1
        kind, payload, offset, start = self.piece_class[idx]
        if kind == "tail":
            return ("tail", payload, idx)
        cell = payload
        position = offset + (x - start)
        local = int(position / self.p)
        if local >= cell.slice_count:
            return ("remainder", cell.index, idx)
        return ("slice", cell.slice_start + local, idx)


def verify_emp_certificate(
    cert: DeltaSmallCertificate,
    inst: EmpiricalInstance,
    trials: int,
    seed: int,
) -> VerifyReport:
    """Sample d-tuples and check the certificate containment empirically.

    Whenever the supremum reaches ``K * s_hat`` at least one entry must
    fire (entry thresholds are sample-average fractions u, i.e. counts of
    ``u * d`` among the d samples); per-entry firing frequencies are
    compared against their exact bounds.
    """
    part = discretize_emp(inst, cert.N, cert.M, cert.p)
    runtime = _EmpiricalRuntime(part)
    d = inst.d
    threshold = float(cert.threshold)

    stats = []
    tail_entries = {}
    remainder_entries = {}
    double_groups = {}
    cover_entries = []
    covers_by_slice: dict = {}
    for entry in cert.entries:
        stat = EntryStat(entry)
        stats.append(stat)
        kind = entry.descriptor[0]
        if kind == "tail":
            tail_entries[entry.descriptor[1]] = stat
        elif kind == "remainder":
            remainder_entries[entry.descriptor[1]] = stat
        elif kind == "double-hit":
            double_groups[entry.descriptor[1]] = stat
        elif kind == "cover":
            slice_ids = entry.descriptor[1]
            need = int(entry.u * d)
            record = (stat, frozenset(slice_ids), need)
            cover_entries.append(record)
            for s in slice_ids:
                covers_by_slice.setdefault(s, []).append(record)

    cell_of_slice = {}
    for cell in part.cells:
        for local in range(cell.slice_count):
            cell_of_slice[cell.slice_start + local] = cell.index

    event_count = 0
    violation_count = 0
    for trial in range(trials):
        rng = CounterRNG(seed, "emp-verify", trial)
        sums = [0.0] * runtime.n_fns
        occupancy: dict = {}
        trial_tails = set()
        trial_remainders = set()
        for _ in range(d):
            x = rng.uniform()
            region = runtime.classify(x)
            values = runtime.piece_values[region[2]]
            for i in range(runtime.n_fns):
                sums[i] += values[i]
            if region[0] == "slice":
                occupancy[region[1]] = occupancy.get(region[1], 0) + 1
            elif region[0] == "tail":
                trial_tails.update(region[1])
            else:
                trial_remainders.add(region[1])
        sup = max(sums)
        event = sup >= threshold
        if event:
            event_count += 1

        fired_any = False
        for fn_idx in trial_tails:
            stat = tail_entries.get(fn_idx)
            if stat is not None:
                stat.fired += 1
                fired_any = True
        for cell_idx in trial_remainders:
            stat = remainder_entries.get(cell_idx)
            if stat is not None:
                stat.fired += 1
                fired_any = True

        fired_groups = set()
        for slice_id, hits in occupancy.items():
            if hits >= 2:
                cell_idx = cell_of_slice[slice_id]
                stat = double_groups.get(cell_idx)
                if stat is not None:
                    stat.member_fires[slice_id] = (
                        stat.member_fires.get(slice_id, 0) + 1
                    )
                    fired_groups.add(cell_idx)
                    fired_any = True
        for cell_idx in fired_groups:
            double_groups[cell_idx].fired += 1

        if cover_entries and occupancy:
            candidates = []
            seen = set()
            for slice_id in occupancy:
                for record in covers_by_slice.get(slice_id, ()):
                    if id(record) not in seen:
                        seen.add(id(record))
                        candidates.append(record)
            for stat, slice_set, need in candidates:
                inside = sum(c for s, c in occupancy.items() if s in slice_set)
                if inside >= need:
                    stat.fired += 1
                    fired_any = True

        if event and not fired_any:
            violation_count += 1

    return VerifyReport(
        kind=cert.kind,
        trials=trials,
        seed=seed,
        threshold=threshold,
        event_count=event_count,
        violation_count=violation_count,
        entry_stats=stats,
        markov_bound=1.0 / float(cert.K),
    )


def recheck_emp_certificate(cert: DeltaSmallCertificate, inst: EmpiricalInstance) -> bool:
    """Recompute every entry bound and the totals from scratch; exact match
    required."""
    part = discretize_emp(inst, cert.N, cert.M, cert.p)
    d = inst.d
    p = cert.p
    cells = {cell.index: cell for cell in part.cells}
    double_bound = 1 - (1 - p) ** d - d * p * (1 - p) ** (d - 1)
    total = Fraction(0)
    for entry in cert.entries:
        kind = entry.descriptor[0]
        if kind == "tail":
            expected = d * part.tail_masses[entry.descriptor[1]]
        elif kind == "remainder":
            expected = d * cells[entry.descriptor[1]].remainder_mass
        elif kind == "double-hit":
            expected = double_bound
            if entry.count != cells[entry.descriptor[1]].slice_count:
                return False
        elif kind == "cover":
            g = len(entry.descriptor[1])
            expected = Fraction(1, 1 - p) * comb(d, g) * (p * g) ** g
        else:
            return False
        if entry.bound != expected:
            return False
        total += entry.total_bound
    return total == cert.total_bound and total <= Fraction(1, 2)


# ---------------------------------------------------------------------------
# exact small-instance facts used by the test batteries


def occupied_vs_uniform(part: EmpiricalPartition, *, max_terms: int = 500_000):
    """Exact pair (8/7 * E sup over sample occupancies, E sup over a uniform
    d-subset of slices); the first dominates the second on every partition
    whose remainder and double-hit budgets hold.

    Enumerates all assignments of the d samples to (slices + everything
    else), so only tiny slice counts are feasible.
    """
    inst = part.inst
    d = inst.d
    n = part.n_slices
    if (n + 1) ** d > max_terms:
        raise GuardLimitError(f"({n}+1)^{d} assignment terms exceed {max_terms}")
    p = part.p
    # the inequality needs the conditioning failure probability below 1/8
    double_bound = 1 - (1 - p) ** d - d * p * (1 - p) ** (d - 1)
    failure = d * (
        sum(part.tail_masses, Fraction(0))
        + sum((c.remainder_mass for c in part.cells), Fraction(0))
    ) + n * double_bound
    if failure > Fraction(1, 8):
        raise ValueError(
            f"conditioning failure bound {failure} exceeds 1/8 on this partition"
        )
    coeffs = []
    for cell in part.cells:
        coeffs.extend([cell.coeffs] * cell.slice_count)
    n_fns = len(inst.fns)
    other_mass = 1 - n * p

    total_occ = Fraction(0)
    for assignment in product(range(n + 1), repeat=d):
        prob = Fraction(1)
        sums = [Fraction(0)] * n_fns
        for slot in assignment:
            if slot == n:
                prob *= other_mass
            else:
                prob *= p
                for i in range(n_fns):
                    sums[i] += coeffs[slot][i]
        total_occ += prob * max(sums)

    total_uniform = Fraction(0)
    for ids in combinations(range(n), d):
        sums = [Fraction(0)] * n_fns
        for slot in ids:
            for i in range(n_fns):
                sums[i] += coeffs[slot][i]
        total_uniform += max(sums)
    total_uniform /= comb(n, d)

    return Fraction(8, 7) * total_occ, total_uniform


def occupancy_exchangeability(
    part: EmpiricalPartition, trials: int, seed: int
) -> dict:
    """Chi-square uniformity check of the occupied-slice set, conditioned on
    all samples landing in distinct slices.

    Returns the statistic, degrees of freedom, the 0.999 critical value,
    and the acceptance flag.
    """
    from scipy.stats import chi2

    runtime = _EmpiricalRuntime(part)
    d = part.inst.d
    n = part.n_slices
    counts: dict = {}
    accepted = 0
    for trial in range(trials):
        rng = CounterRNG(seed, "emp-exchange", trial)
        slices = []
        ok = True
        for _ in range(d):
            region = runtime.classify(rng.uniform())
            if region[0] != "slice":
                ok = False
                break
            slices.append(region[1])
        if not ok or len(set(slices)) != d:
            continue
        accepted += 1
        key = tuple(sorted(slices))
        counts[key] = counts.get(key, 0) + 1
    cells = comb(n, d)
    expected = accepted / cells
    if expected == 0:
        raise ValueError("no conditioned trials; increase trials or p")
    stat = 0.0
    for ids in combinations(range(n), d):
        observed = counts.get(tuple(ids), 0)
        stat += (observed - expected) ** 2 / expected
    dof = cells - 1
    critical = float(chi2.ppf(0.999, dof))
    return {
        "statistic": stat,
        "dof": dof,
        "critical": critical,
        "accepted_trials": accepted,
        "uniform": stat <= critical,
    }
