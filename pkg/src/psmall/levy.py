"""Positive infinitely divisible processes via Poisson point sampling, their
grid discretization, and explicit delta-small certificates.

A process is specified by an atomless finite measure on the nonnegative
orthant of R^T given as a mixture of axis-aligned boxes with uniform
densities.  Sampling draws a Poisson number of points from the normalized
mixture and the process value at t is the sum of the t-coordinates.

The certificate construction discretizes coordinate space into half-open
grid cells of side 4^-N below a cutoff M, carves each cell into slices of
measure exactly p (plus a remainder below p), and emits one entry per
failure mode: a small-value mass entry per coordinate, a tail entry per
coordinate, a remainder entry per cell, a double-hit entry per slice, and
one entry per set of a cover of the slice-sum threshold family.  Every
entry carries an exact rational probability bound, the per-stage bound
totals respect fixed budgets (1/16 each for the first four stages, 1/4 for
the cover stage), and the grand total never exceeds 1/2.

Box masses are exact rationals throughout, so every cell, slice, and
remainder measure used in a bound is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from .certificates import (
    E_UPPER,
    CertEntry,
    DeltaSmallCertificate,
    EntryStat,
    VerifyReport,
    finalize_certificate,
)
from .errors import GuardLimitError, PreconditionError, StageBudgetError
from .rng import CounterRNG
from .selector import Estimate, SelectorInstance, _threshold_minimal
from .sets import SetFamily, antichain_cover, min_cover_weight, upset_cover_check

# Event amplification: the cover stage needs its threshold to reach 221
# times the coarse slice-sum expectation; the coarse split costs a factor
# 2e(1+o(1)) and the grid bridge another factor 2, so any K of at least
# 2 * 221 * 2e = 2403.1 closes the margin chain.  Default with headroom:
MIN_K = 884 * E_UPPER
DEFAULT_K = Fraction(2500)

DEFAULT_MAX_CELLS = 4096
DEFAULT_COVER_EXACT_N = 20
DEFAULT_COVER_MAX_MEMBERS = 512


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with uniform density and a total mass."""

    mass: Fraction
    intervals: tuple  # per-label (lo, hi) Fractions, lo >= 0, hi > lo

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("box mass must be positive")
        for lo, hi in self.intervals:
            if lo < 0:
                raise ValueError("boxes must lie in the nonnegative orthant")
            if hi <= lo:
                # zero-width coordinates would concentrate mass on a slab
                # boundary; requiring positive width keeps the measure atomless
                raise ValueError("box coordinate intervals need positive width")


@dataclass(frozen=True)
class LevyMeasureSpec:
    """Finite index set plus a box-mixture intensity measure."""

    labels: tuple
    boxes: tuple

    def __post_init__(self):
        if not self.labels:
            raise ValueError("need at least one index label")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("index labels must be distinct")
        for box in self.boxes:
            if len(box.intervals) != len(self.labels):
                raise ValueError("each box needs one interval per label")

    @classmethod
    def build(cls, labels, boxes) -> "LevyMeasureSpec":
        frozen = tuple(
            Box(Fraction(mass), tuple((Fraction(lo), Fraction(hi)) for lo, hi in ivs))
            for mass, ivs in boxes
        )
        return cls(tuple(labels), frozen)

    @property
    def total_mass(self) -> Fraction:
        return sum((b.mass for b in self.boxes), Fraction(0))

    def first_moment(self, label_idx: int) -> Fraction:
        """Exact integral of the coordinate against the measure."""
        total = Fraction(0)
        for box in self.boxes:
            lo, hi = box.intervals[label_idx]
            total += box.mass * (lo + hi) / 2
        return total

    def small_value_integral(self, label_idx: int, cut: Fraction) -> Fraction:
        """Exact integral of the coordinate where it stays below ``cut``."""
        total = Fraction(0)
        for box in self.boxes:
            lo, hi = box.intervals[label_idx]
            top = min(hi, cut)
            if top > lo:
                total += box.mass * (top * top - lo * lo) / (2 * (hi - lo))
        return total

    def tail_mass(self, label_idx: int, cutoff: Fraction) -> Fraction:
        """Exact measure of the region where the coordinate reaches ``cutoff``."""
        total = Fraction(0)
        for box in self.boxes:
            lo, hi = box.intervals[label_idx]
            bottom = max(lo, cutoff)
            if hi > bottom:
                total += box.mass * (hi - bottom) / (hi - lo)
        return total

    def mass_below(self, cutoff: Fraction) -> Fraction:
        """Exact measure of the region where every coordinate stays below
        ``cutoff`` (coordinates are independent within a box)."""
        total = Fraction(0)
        for box in self.boxes:
            frac = Fraction(1)
            for lo, hi in box.intervals:
                top = min(hi, cutoff)
                if top <= lo:
                    frac = Fraction(0)
                    break
                frac *= (top - lo) / (hi - lo)
            total += box.mass * frac
        return total


@dataclass(frozen=True)
class CellPiece:
    """Intersection of one box with one grid cell."""

    box_idx: int
    intervals: tuple  # clipped (lo, hi) per label
    mass: Fraction
    sweep_offset: Fraction  # cell mass strictly before this piece


@dataclass(frozen=True)
class Cell:
    """One grid cell: all coordinates inside fixed half-open value bands."""

    index: int
    levels: tuple  # per-label band index k; values lie in [k, k+1) / 4^N
    coeffs: tuple  # per-label upper band edge (k+1) / 4^N
    pieces: tuple
    mass: Fraction
    slice_count: int
    slice_start: int
    remainder_mass: Fraction


@dataclass(frozen=True)
class CellPartition:
    """Grid cells with exact masses plus their mass-p slicing."""

    spec: LevyMeasureSpec
    N: int
    M: Fraction
    p: Fraction
    cells: tuple
    n_slices: int

    def cell_by_levels(self) -> dict:
        return {cell.levels: cell for cell in self.cells}

    def slice_coefficient_rows(self) -> list:
        """Per-label coefficient row over the global slice indexing."""
        rows = []
        for label_idx in range(len(self.spec.labels)):
            row = []
            for cell in self.cells:
                row.extend([cell.coeffs[label_idx]] * cell.slice_count)
            rows.append(tuple(row))
        return rows

    def max_slice_sum(self) -> Fraction:
        """Largest achievable slice sum over labels (all slices occupied)."""
        best = Fraction(0)
        for label_idx in range(len(self.spec.labels)):
            total = sum(
                (cell.coeffs[label_idx] * cell.slice_count for cell in self.cells),
                Fraction(0),
            )
            best = max(best, total)
        return best


def _band_range(lo: Fraction, hi: Fraction, band: Fraction):
    """Band indices k whose window [k*band, (k+1)*band) meets [lo, hi)."""
    first = math.floor(lo / band)
    last = math.ceil(hi / band) - 1
    return range(first, last + 1)


def discretize(
    spec: LevyMeasureSpec,
    N: int,
    M,
    p,
    s_hat=None,
    *,
    max_cells: int = DEFAULT_MAX_CELLS,
) -> CellPartition:
    """Cut the measure into grid cells below ``M`` and mass-``p`` slices.

    Cells are intersections of per-coordinate half-open value bands
    ``[k/4^N, (k+1)/4^N)`` with the boxes, clipped below ``M`` in every
    coordinate; the cell coefficient is the upper band edge, so values obey
    ``coeff - 4^-N <= x < coeff`` on the cell.  Slices sweep each cell along
    the first coordinate of each box piece in box order and cut the
    cumulative mass at multiples of p, making every slice measure exactly p.

    When ``s_hat`` (a certified estimate of the expected supremum) is
    given, the slicing preconditions that depend on it are enforced: every
    cell must yield at least ``16 * 2^N * s_hat`` slices and the total
    slice count n must satisfy ``n p^2 < 1/16``.
    """
    M = Fraction(M)
    p = Fraction(p)
    if N < 0:
        raise ValueError("grid exponent must be nonnegative")
    if not 0 < p:
        raise ValueError("slice mass must be positive")
    if M <= 0:
        raise ValueError("cutoff must be positive")
    band = Fraction(1, 4**N)
    n_labels = len(spec.labels)

    # gather pieces per level vector
    cell_pieces: dict = {}
    for box_idx, box in enumerate(spec.boxes):
        per_label_bands = []
        for label_idx in range(n_labels):
            lo, hi = box.intervals[label_idx]
            hi = min(hi, M)
            if hi <= lo:
                per_label_bands = None
                break
            per_label_bands.append(
                [
                    (k, max(lo, k * band), min(hi, (k + 1) * band))
                    for k in _band_range(lo, hi, band)
                ]
            )
        if per_label_bands is None:
            continue  # box entirely beyond the cutoff in some coordinate
        width = [hi - lo for lo, hi in box.intervals]
        for combo in product(*per_label_bands):
            levels = tuple(k for k, _, _ in combo)
            frac = Fraction(1)
            clipped = []
            for label_idx, (_, a, b) in enumerate(combo):
                if b <= a:
                    frac = Fraction(0)
                    break
                clipped.append((a, b))
                frac *= (b - a) / width[label_idx]
            if frac == 0:
                continue
            cell_pieces.setdefault(levels, []).append(
                (box_idx, tuple(clipped), box.mass * frac)
            )
            if len(cell_pieces) > max_cells:
                raise GuardLimitError(
                    f"more than {max_cells} grid cells at N={N}; "
                    "coarsen the grid or raise max_cells"
                )

    cells = []
    slice_start = 0
    for levels in sorted(cell_pieces):
        raw_pieces = sorted(cell_pieces[levels], key=lambda t: t[0])
        offset = Fraction(0)
        pieces = []
        for box_idx, intervals, mass in raw_pieces:
            pieces.append(CellPiece(box_idx, intervals, mass, offset))
            offset += mass
        mass = offset
        slice_count = math.floor(mass / p)
        cells.append(
            Cell(
                index=len(cells),
                levels=levels,
                coeffs=tuple((k + 1) * band for k in levels),
                pieces=tuple(pieces),
                mass=mass,
                slice_count=slice_count,
                slice_start=slice_start,
                remainder_mass=mass - slice_count * p,
            )
        )
        slice_start += slice_count

    part = CellPartition(spec, N, M, p, tuple(cells), slice_start)

    if s_hat is not None:
        s_hat = Fraction(s_hat)
        needed = 16 * 2**N * s_hat
        for cell in part.cells:
            if cell.slice_count < needed:
                raise ValueError(
                    f"cell {cell.levels} yields {cell.slice_count} slices, "
                    f"below the required 16 * 2^N * s_hat = {needed}"
                )
        if part.n_slices * p * p >= Fraction(1, 16):
            raise ValueError(
                f"n p^2 = {part.n_slices * p * p} reaches 1/16; decrease p"
            )
    return part


def auto_tune(
    spec: LevyMeasureSpec,
    s_hat,
    K=DEFAULT_K,
    *,
    max_cells: int = DEFAULT_MAX_CELLS,
) -> tuple:
    """Smallest cutoff and grid, then the largest slice mass, satisfying all
    certificate preconditions; returns ``(N, M, p)``.

    The search doubles M until the tail budget holds, then increases N until
    the small-value residual fits its budget and the grid is fine enough for
    the bridge between the process and its slice sums, then halves p from
    the largest per-cell-admissible value until the double-hit and remainder
    budgets hold.
    """
    s_hat = Fraction(s_hat)
    K = Fraction(K)
    if s_hat <= 0:
        raise ValueError("need a positive expected-supremum estimate")

    M = Fraction(1)
    for _ in range(60):
        tail_total = sum(
            (spec.tail_mass(i, M) for i in range(len(spec.labels))), Fraction(0)
        )
        if tail_total <= Fraction(1, 16):
            break
        M *= 2
    else:
        raise PreconditionError("no cutoff under 2^60 meets the tail budget")

    mass_in = spec.mass_below(M)
    N = 1
    while True:
        residual = sum(
            (
                spec.small_value_integral(i, Fraction(1, 2**N))
                for i in range(len(spec.labels))
            ),
            Fraction(0),
        )
        if residual <= K * s_hat / 16 and mass_in <= s_hat * 4**N:
            break
        N += 1
        if N > 30:
            raise PreconditionError("no grid exponent under 31 meets the residual budget")

    probe = discretize(spec, N, M, Fraction(1, 1), max_cells=max_cells)
    if not probe.cells:
        raise PreconditionError("the measure has no mass below the cutoff")
    min_mass = min(cell.mass for cell in probe.cells)
    needed = max(1, math.ceil(16 * 2**N * s_hat))
    p = min_mass / needed
    for _ in range(80):
        part = discretize(spec, N, M, p, max_cells=max_cells)
        n = part.n_slices
        remainder_total = sum(
            (c.remainder_mass for c in part.cells), Fraction(0)
        )
        if (
            all(c.slice_count >= needed for c in part.cells)
            and n * p * p < Fraction(1, 16)
            and remainder_total <= Fraction(1, 16)
        ):
            return N, M, p
        p = p / 2
    raise PreconditionError("no slice mass met the stage budgets after 80 halvings")


def slice_threshold_cover(
    rows,
    n_slices: int,
    q: Fraction,
    threshold: Fraction,
    *,
    max_n: int = DEFAULT_COVER_EXACT_N,
    max_members: int = DEFAULT_COVER_MAX_MEMBERS,
) -> SetFamily:
    """Cover of every slice set whose best coefficient sum reaches the
    threshold, with weight at most 1/2 at probability ``q``.

    If even the full slice set stays below the threshold the family is
    empty and so is the cover.  Within the exact-search guards the cover is
    the minimum-weight one; beyond them the family's minimal members serve
    as their own cover, which is valid but not claimed minimal.
    """
    max_total = max(sum(row, Fraction(0)) for row in rows) if rows else Fraction(0)
    if max_total < threshold:
        return SetFamily(n_slices, [])
    if n_slices > max_n:
        raise GuardLimitError(
            f"nonempty threshold family over {n_slices} slices exceeds the "
            f"exact enumeration guard {max_n}"
        )
    inst = SelectorInstance(n_slices, tuple(tuple(r) for r in rows), q)
    minimal = _threshold_minimal(inst, threshold)
    if len(minimal) <= max_members:
        cert = min_cover_weight(minimal, q, max_n=max_n, max_members=max_members)
    else:
        cert = antichain_cover(minimal, q)
    if not cert.is_small:
        raise StageBudgetError(
            "cover", f"cover weight {cert.weight} exceeds 1/2 at probability {q}"
        )
    assert upset_cover_check(cert.generators, minimal)
    return cert.generators


def build_id_certificate(
    part: CellPartition,
    K=DEFAULT_K,
    s_hat=None,
    *,
    cover_max_n: int = DEFAULT_COVER_EXACT_N,
    cover_max_members: int = DEFAULT_COVER_MAX_MEMBERS,
    enforce_min_k: bool = True,
) -> DeltaSmallCertificate:
    """Assemble the delta-small certificate for the event that the process
    supremum reaches ``K * s_hat``.

    Entries are emitted in construction order: per-coordinate small-value
    mass entries (threshold K*s_hat, bound by the mean), per-coordinate
    tail entries, per-cell remainder entries, per-slice double-hit entries,
    and the slice-sum threshold cover converted to counting entries whose
    Poisson tails are bounded by ``(e p)^|F|``.  Each stage must fit its
    probability budget; any overflow raises naming the stage.
    """
    if s_hat is None:
        raise ValueError("an expected-supremum estimate s_hat is required")
    spec = part.spec
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
    p = part.p
    entries = []

    cut = Fraction(1, 2**part.N)
    for label_idx, label in enumerate(spec.labels):
        residual = spec.small_value_integral(label_idx, cut)
        if residual > 0:
            entries.append(
                CertEntry(
                    stage="small-values",
                    descriptor=("small-values", label),
                    u=threshold,
                    bound=residual / threshold,
                )
            )

    for label_idx, label in enumerate(spec.labels):
        tail = spec.tail_mass(label_idx, part.M)
        if tail > 0:
            entries.append(
                CertEntry(
                    stage="tail",
                    descriptor=("tail", label),
                    u=Fraction(1),
                    bound=tail,
                )
            )

    for cell in part.cells:
        if cell.remainder_mass > 0:
            entries.append(
                CertEntry(
                    stage="remainder",
                    descriptor=("remainder", cell.index),
                    u=Fraction(1),
                    bound=cell.remainder_mass,
                )
            )

    # each slice holds Poisson(p) points; P(>= 2) = 1 - e^-p (1+p) <= p^2
    for cell in part.cells:
        if cell.slice_count:
            entries.append(
                CertEntry(
                    stage="double-hit",
                    descriptor=("double-hit", cell.index),
                    u=Fraction(2),
                    bound=p * p,
                    count=cell.slice_count,
                )
            )

    # cover stage at probability 2ep >= 1 - e^-p, rounded up rationally
    q = 2 * E_UPPER * p
    if q >= 1:
        raise StageBudgetError("cover", f"split probability 2 e p = {q} reaches 1")
    rows = part.slice_coefficient_rows()
    cover = slice_threshold_cover(
        rows,
        part.n_slices,
        q,
        threshold,
        max_n=cover_max_n,
        max_members=cover_max_members,
    )
    for member in sorted(cover.member_bits()):
        size = member.bit_count()
        slice_ids = tuple(i for i in range(part.n_slices) if member >> i & 1)
        # Poisson(p |F|) reaches |F| with probability at most (e p)^|F|
        entries.append(
            CertEntry(
                stage="cover",
                descriptor=("cover", slice_ids),
                u=Fraction(size),
                bound=(E_UPPER * p) ** size,
            )
        )

    return finalize_certificate(
        "infinitely-divisible", K, s_hat, part.N, part.M, p, 0, entries
    )


# ---------------------------------------------------------------------------
# sampling and Monte Carlo verification


class _SamplerRuntime:
    """Float-space view of a measure spec for fast sampling."""

    def __init__(self, spec: LevyMeasureSpec):
        self.spec = spec
        self.total = float(spec.total_mass)
        self.cum = []
        acc = 0.0
        for box in spec.boxes:
            acc += float(box.mass)
            self.cum.append(acc)
        self.bounds = [
            [(float(lo), float(hi)) for lo, hi in box.intervals]
            for box in spec.boxes
        ]

    def sample_points(self, rng: CounterRNG) -> list:
        count = rng.poisson(self.total)
        points = []
        last = len(self.cum) - 1
        for _ in range(count):
            u = rng.uniform() * self.total
            box_idx = 0
            # the final cumulative value can undershoot the exact total in
            # floats, so the last box absorbs the sliver
            while box_idx < last and self.cum[box_idx] <= u:
                box_idx += 1
            coords = tuple(
                lo + rng.uniform() * (hi - lo) for lo, hi in self.bounds[box_idx]
            )
            points.append((box_idx, coords))
        return points


def sample_ppp(spec: LevyMeasureSpec, seed: int) -> list:
    """One Poisson point process realization: ``(box index, coords)`` pairs."""
    return _SamplerRuntime(spec).sample_points(CounterRNG(seed, "ppp"))


def estimate_S(spec: LevyMeasureSpec, trials: int, seed: int) -> Estimate:
    """Monte Carlo estimate of the expected supremum of the process."""
    runtime = _SamplerRuntime(spec)
    n_labels = len(spec.labels)
    mean = 0.0
    m2 = 0.0
    for trial in range(trials):
        rng = CounterRNG(seed, "id-sup", trial)
        points = runtime.sample_points(rng)
        value = 0.0
        if points:
            value = max(
                sum(coords[i] for _, coords in points) for i in range(n_labels)
            )
        delta = value - mean
        mean += delta / (trial + 1)
        m2 += delta * (value - mean)
    stderr = math.sqrt(m2 / (trials - 1) / trials) if trials > 1 else float("inf")
    return Estimate(mean, stderr, False, trials)


def estimate_slice_sup(part: CellPartition, trials: int, seed: int) -> Estimate:
    """Monte Carlo estimate of the slice-sum process expectation
    ``E sup_t sum_B t(B) Y(B)``, the grid side of the bridge between the
    process and its discretization (at most twice the process expectation
    once the grid is fine enough)."""
    runtime = _PartitionRuntime(part)
    sampler = _SamplerRuntime(part.spec)
    n_labels = len(part.spec.labels)
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
        rng = CounterRNG(seed, "id-slice-sup", trial)
        sums = [0.0] * n_labels
        for box_idx, coords in sampler.sample_points(rng):
            region, payload = runtime.classify(box_idx, coords)
            if region != "slice":
                continue
            coeffs = coeff_of_cell[cell_of_slice[payload]]
            for i in range(n_labels):
                sums[i] += coeffs[i]
        value = max(sums) if n_labels else 0.0
        delta = value - mean
        mean += delta / (trial + 1)
        m2 += delta * (value - mean)
    stderr = math.sqrt(m2 / (trials - 1) / trials) if trials > 1 else float("inf")
    return Estimate(mean, stderr, False, trials)


def exact_first_moment_supremum(spec: LevyMeasureSpec) -> Fraction:
    """Exact expected supremum for a single-label spec, where the supremum
    is the plain coordinate sum and expectation is the first moment."""
    if len(spec.labels) != 1:
        raise ValueError("exact expectation requires a single label")
    return spec.first_moment(0)


class _PartitionRuntime:
    """Float-space point classifier for a cell partition."""

    def __init__(self, part: CellPartition):
        self.part = part
        self.band_inv = float(4**part.N)
        self.M = float(part.M)
        self.p = float(part.p)
        self.cells = part.cell_by_levels()
        self.piece_index = {}
        for cell in part.cells:
            for piece in cell.pieces:
                self.piece_index[(cell.levels, piece.box_idx)] = (
                    float(piece.sweep_offset),
                    float(piece.intervals[0][0]),
                    float(piece.intervals[0][1] - piece.intervals[0][0]),
                    float(piece.mass),
                )

    def classify(self, box_idx: int, coords: tuple):
        """Returns ('tail', label_idx) | ('slice', global_idx) |
        ('remainder', cell_idx) | ('offgrid', None)."""
        for label_idx, x in enumerate(coords):
            if x >= self.M:
                return ("tail", label_idx)
        levels = tuple(int(x * self.band_inv) for x in coords)
        cell = self.cells.get(levels)
        if cell is None:
            return ("offgrid", None)
        key = (levels, box_idx)
        piece = self.piece_index.get(key)
        if piece is None:
            return ("offgrid", None)
        offset, lo0, width0, mass = piece
        position = offset + (coords[0] - lo0) / width0 * mass
        local = int(position / self.p)
        if local >= cell.slice_count:
            return ("remainder", cell.index)
        return ("slice", cell.slice_start + local)


def verify_id_certificate(
    cert: DeltaSmallCertificate,
    spec: LevyMeasureSpec,
    trials: int,
    seed: int,
) -> VerifyReport:
    """Sample the process and check the certificate containment empirically.

    Whenever the supremum reaches ``K * s_hat`` at least one entry must
    fire; violations are counted (a valid certificate yields zero).  Every
    entry's firing frequency is tracked against its exact bound, and the
    event frequency is compared against the ``1/K`` mean bound.
    """
    part = discretize(spec, cert.N, cert.M, cert.p)
    runtime = _PartitionRuntime(part)
    sampler = _SamplerRuntime(spec)
    n_labels = len(spec.labels)
    threshold = float(cert.threshold)
    small_cut = 1.0 / 2**cert.N

    stats = []
    small_entries = {}
    tail_entries = {}
    remainder_entries = {}
    double_groups = {}
    cover_entries = []
    for entry in cert.entries:
        stat = EntryStat(entry)
        stats.append(stat)
        kind = entry.descriptor[0]
        if kind == "small-values":
            small_entries[spec.labels.index(entry.descriptor[1])] = stat
        elif kind == "tail":
            tail_entries[spec.labels.index(entry.descriptor[1])] = stat
        elif kind == "remainder":
            remainder_entries[entry.descriptor[1]] = stat
        elif kind == "double-hit":
            double_groups[entry.descriptor[1]] = stat
        elif kind == "cover":
            cover_entries.append((stat, entry.descriptor[1], int(entry.u)))

    cell_of_slice = {}
    for cell in part.cells:
        for local in range(cell.slice_count):
            cell_of_slice[cell.slice_start + local] = cell.index
    min_cover_size = min((u for _, _, u in cover_entries), default=None)

    event_count = 0
    violation_count = 0
    for trial in range(trials):
        rng = CounterRNG(seed, "id-verify", trial)
        points = sampler.sample_points(rng)
        sums = [0.0] * n_labels
        for _, coords in points:
            for i in range(n_labels):
                sums[i] += coords[i]
        sup = max(sums) if points else 0.0
        event = sup >= threshold
        if event:
            event_count += 1

        occupancy: dict = {}
        trial_tails = set()
        trial_remainders = set()
        small_sums = [0.0] * n_labels if small_entries else None
        for box_idx, coords in points:
            if small_sums is not None:
                for i in range(n_labels):
                    if coords[i] < small_cut:
                        small_sums[i] += coords[i]
            region, payload = runtime.classify(box_idx, coords)
            if region == "slice":
                occupancy[payload] = occupancy.get(payload, 0) + 1
            elif region == "tail":
                trial_tails.add(payload)
            elif region == "remainder":
                trial_remainders.add(payload)
            # offgrid: float boundary artifact, counts as no entry firing

        fired_any = False
        for label_idx in trial_tails:
            stat = tail_entries.get(label_idx)
            if stat is not None:
                stat.fired += 1
                fired_any = True
        for cell_idx in trial_remainders:
            stat = remainder_entries.get(cell_idx)
            if stat is not None:
                stat.fired += 1
                fired_any = True
        if small_sums is not None:
            for label_idx, stat in small_entries.items():
                if small_sums[label_idx] >= float(stat.entry.u):
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

        if min_cover_size is not None and sum(occupancy.values()) >= min_cover_size:
            for stat, slice_ids, u in cover_entries:
                inside = sum(occupancy.get(s, 0) for s in slice_ids)
                if inside >= u:
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


def recheck_id_certificate(cert: DeltaSmallCertificate, spec: LevyMeasureSpec) -> bool:
    """Recompute every entry bound and the totals from scratch; exact match
    required."""
    part = discretize(spec, cert.N, cert.M, cert.p)
    p = cert.p
    threshold = cert.K * cert.s_hat
    cut = Fraction(1, 2**cert.N)
    cells = {cell.index: cell for cell in part.cells}
    total = Fraction(0)
    for entry in cert.entries:
        kind = entry.descriptor[0]
        if kind == "small-values":
            label_idx = spec.labels.index(entry.descriptor[1])
            expected = spec.small_value_integral(label_idx, cut) / threshold
        elif kind == "tail":
            label_idx = spec.labels.index(entry.descriptor[1])
            expected = spec.tail_mass(label_idx, cert.M)
        elif kind == "remainder":
            expected = cells[entry.descriptor[1]].remainder_mass
        elif kind == "double-hit":
            expected = p * p
            if entry.count != cells[entry.descriptor[1]].slice_count:
                return False
        elif kind == "cover":
            expected = (E_UPPER * p) ** len(entry.descriptor[1])
        else:
            return False
        if entry.bound != expected:
            return False
        total += entry.total_bound
    return total == cert.total_bound and total <= Fraction(1, 2)
