"""Badness thresholds, witness construction, and the fragment cover.

Given a family F with nonnegative per-member coefficients, a set X is
*c-bad* when no member captures coefficient mass c inside X.  For a bad X,
each member I gets an exact truncation threshold eps(I, X) (the largest
truncation level at which X still captures a c-fraction of I's truncated
mass), a level j(I, X) counting coefficients strictly above the threshold,
and a witness: the best prefix among members whose off-X part fits inside
I \\ X.  The off-X parts (fragments) of the witnesses form a cover of F.

All arithmetic is exact rational; there is no floating tolerance anywhere
in this module.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb

from .errors import GuardLimitError, NotBadError
from .sets import SetFamily, Subset, upset_cover_check

HALF = Fraction(1, 2)


class WeightedFamily:
    """Set family with per-member nonnegative coefficients.

    ``mode`` records how the per-member coefficient sums behave:
    ``"normalized"`` (every sum exactly 1), ``"superunit"`` (every sum at
    least 1), or ``"general"``.
    """

    __slots__ = ("base", "coeffs", "mode", "_sums")

    def __init__(self, base: SetFamily, coeffs):
        self.base = base
        coeffs = list(coeffs)
        if len(coeffs) != len(base.members):
            # also triggers when duplicate members collapsed in the base
            raise ValueError(
                f"{len(coeffs)} coefficient maps for {len(base.members)} "
                "distinct members"
            )
        normalized = []
        for member, cmap in zip(base.members, coeffs):
            cmap = {int(i): Fraction(v) for i, v in dict(cmap).items()}
            if set(cmap) != set(member.indices()):
                raise ValueError(
                    f"coefficient keys {sorted(cmap)} do not match member "
                    f"{sorted(member.indices())}"
                )
            if any(v < 0 for v in cmap.values()):
                raise ValueError("coefficients must be nonnegative")
            normalized.append(cmap)
        self.coeffs = tuple(normalized)
        self._sums = tuple(sum(c.values(), Fraction(0)) for c in self.coeffs)
        if all(s == 1 for s in self._sums):
            self.mode = "normalized"
        elif all(s >= 1 for s in self._sums):
            self.mode = "superunit"
        else:
            self.mode = "general"

    @classmethod
    def from_lists(cls, n: int, members) -> "WeightedFamily":
        """Build from ``[(indices, coefficient_values), ...]`` pairs."""
        subsets = []
        coeffs = []
        for indices, values in members:
            indices = sorted(indices)
            if len(indices) != len(values):
                raise ValueError("one coefficient per index required")
            subsets.append(Subset.from_indices(n, indices))
            coeffs.append(dict(zip(indices, map(Fraction, values))))
        return cls(SetFamily(n, subsets), coeffs)

    @property
    def n(self) -> int:
        return self.base.n

    def member_sum(self, idx: int) -> Fraction:
        return self._sums[idx]

    def captured(self, idx: int, x_bits: int) -> Fraction:
        """Coefficient mass of member ``idx`` inside the set ``x_bits``."""
        member = self.base.members[idx]
        masked = member.bits & x_bits
        return sum(
            (v for i, v in self.coeffs[idx].items() if masked >> i & 1),
            Fraction(0),
        )

    def sup_captured(self, x_bits: int) -> Fraction:
        """Largest captured mass over all members (0 for an empty family)."""
        best = Fraction(0)
        for idx in range(len(self.base.members)):
            val = self.captured(idx, x_bits)
            if val > best:
                best = val
        return best

    def __len__(self):
        return len(self.base.members)


@dataclass(frozen=True)
class WitnessRecord:
    """Witness data for one (member, bad set) pair.

    ``source`` is the member whose prefix realises the witness; ``witness``
    equals that prefix and ``fragment`` is its part outside the bad set.
    """

    member: Subset
    source: Subset
    epsilon: Fraction
    j: int
    prefix: Subset
    witness: Subset
    fragment: Subset


def is_c_bad(x: Subset, family: WeightedFamily, c) -> bool:
    """True iff no member captures coefficient mass ``c`` inside ``x``."""
    c = Fraction(c)
    if not 0 < c <= 1:
        raise ValueError(f"badness level must lie in (0,1], got {c}")
    return family.sup_captured(x.bits) < c


def sorted_prefix(member: Subset, coeff_map, j: int) -> Subset:
    """The ``j`` elements of ``member`` with the highest coefficients.

    Ties among equal coefficients break by ascending index; ``j = 0`` gives
    the empty set and ``j >= |member|`` gives the member itself.
    """
    if j < 0:
        raise ValueError("prefix length must be nonnegative")
    order = sorted(member.indices(), key=lambda i: (-Fraction(coeff_map[i]), i))
    return Subset.from_indices(member.n, order[:j])


def _phi(coeff_map, member_bits: int, x_bits: int, c: Fraction, eps: Fraction) -> Fraction:
    inside = Fraction(0)
    total = Fraction(0)
    for i, v in coeff_map.items():
        capped = v if v < eps else eps
        total += capped
        if x_bits >> i & 1:
            inside += capped
    return inside - c * total


def threshold_epsilon(member: Subset, coeff_map, x: Subset, c) -> Fraction:
    """Largest eps in [0,1) where X still captures a c-fraction of the
    eps-truncated coefficient mass, with strict failure beyond.

    The map eps -> captured(eps) - c * total(eps) is piecewise linear with
    breakpoints at the distinct coefficient values, so the last sign change
    is located exactly by scanning the breakpoints from the right and
    solving the one linear piece that crosses zero.
    """
    c = Fraction(c)
    coeff_map = {i: Fraction(v) for i, v in coeff_map.items()}
    bps = sorted({Fraction(0), Fraction(1)} | {
        v for v in coeff_map.values() if 0 < v < 1
    })
    vals = [_phi(coeff_map, member.bits, x.bits, c, b) for b in bps]
    if vals[-1] >= 0:
        raise NotBadError(
            "no defining sign change: the pair is not bad at this level"
        )
    for k in range(len(bps) - 2, -1, -1):
        if vals[k] >= 0:
            # crossing inside [bps[k], bps[k+1]]; vals[k] >= 0 > vals[k+1]
            return bps[k] + (bps[k + 1] - bps[k]) * vals[k] / (vals[k] - vals[k + 1])
    raise AssertionError("unreachable: the map vanishes at 0")


def level_j(member: Subset, coeff_map, x: Subset, c) -> tuple:
    """Threshold, level, and prefix for one (member, bad set) pair.

    Returns ``(epsilon, j, prefix)`` where ``j`` counts coefficients
    strictly above the threshold.  The prefix always equals the strict
    exceeder set, and the prefix meets the bad set in fewer than ``c * j``
    elements; both facts are asserted.
    """
    c = Fraction(c)
    eps = threshold_epsilon(member, coeff_map, x, c)
    exceeders = [i for i in member.indices() if Fraction(coeff_map[i]) > eps]
    j = len(exceeders)
    prefix = sorted_prefix(member, coeff_map, j)
    assert prefix.bits == Subset.from_indices(member.n, exceeders).bits
    assert (prefix.bits & x.bits).bit_count() < c * j
    return eps, j, prefix


class WitnessEngine:
    """Memoizing helper for witness construction over one weighted family."""

    def __init__(self, family: WeightedFamily, c):
        self.family = family
        self.c = Fraction(c)
        self._levels: dict = {}

    def is_bad(self, x_bits: int) -> bool:
        return self.family.sup_captured(x_bits) < self.c

    def level(self, member_idx: int, x_bits: int) -> tuple:
        key = (member_idx, x_bits)
        cached = self._levels.get(key)
        if cached is None:
            member = self.family.base.members[member_idx]
            x = Subset(x_bits, self.family.n)
            cached = level_j(member, self.family.coeffs[member_idx], x, self.c)
            self._levels[key] = cached
        return cached

    def witness(self, member_idx: int, x_bits: int) -> WitnessRecord:
        member = self.family.base.members[member_idx]
        allowed = member.bits & ~x_bits
        best = None
        for idx, candidate in enumerate(self.family.base.members):
            eps, j, prefix = self.level(idx, x_bits)
            frag_bits = prefix.bits & ~x_bits
            if frag_bits & ~allowed:
                continue
            key = (j, frag_bits.bit_count(), frag_bits, prefix.bits, candidate.bits)
            if best is None or key < best[0]:
                best = (key, idx, eps, j, prefix, frag_bits)
        assert best is not None  # the member itself is always admissible
        _, idx, eps, j, prefix, frag_bits = best
        n = self.family.n
        record = WitnessRecord(
            member=member,
            source=self.family.base.members[idx],
            epsilon=eps,
            j=j,
            prefix=prefix,
            witness=prefix,
            fragment=Subset(frag_bits, n),
        )
        t = len(record.fragment)
        assert record.fragment.issubset(member)
        assert j >= t >= (1 - self.c) * j
        return record


def build_witness(member: Subset, x: Subset, c, family: WeightedFamily) -> WitnessRecord:
    """Witness for one member of the family against a c-bad set.

    Among members whose level-prefix has its off-X part inside
    ``member \\ x``, picks the smallest level, then the smallest fragment,
    then (for full determinism) the numerically smallest fragment bitmask,
    prefix bitmask, and source bitmask.
    """
    engine = WitnessEngine(family, c)
    idx = family.base.members.index(member)
    return engine.witness(idx, x.bits)


def build_bad_cover(x: Subset, family: WeightedFamily, c) -> SetFamily:
    """Deduplicated fragments of all member witnesses against ``x``.

    Every fragment sits inside its member, so the result covers the family;
    this is asserted before returning.
    """
    engine = WitnessEngine(family, c)
    fragments = [
        engine.witness(idx, x.bits).fragment for idx in range(len(family))
    ]
    cover = SetFamily(family.n, fragments)
    assert upset_cover_check(cover, family.base)
    return cover


def key_lemma_bound(n: int, m: int, p) -> Fraction:
    """Exact geometric-style bound ``sum((4*n*p/m)**t for t in 1..n)``.

    Returned as-is even when the ratio reaches 1 and the bound is vacuous.
    """
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    ratio = 4 * n * Fraction(p) / m
    total = Fraction(0)
    power = Fraction(1)
    for _ in range(n):
        power *= ratio
        total += power
    return total


def capture_tables(family: WeightedFamily) -> list:
    """Per-member lookup ``(member_bits, {masked_bits: captured mass})``.

    ``table[x & member_bits]`` is the coefficient mass of the member inside
    ``x``; used to evaluate family suprema over many sets quickly.
    """
    tables = []
    for idx, member in enumerate(family.base.members):
        bits = member.bits
        table = {0: Fraction(0)}
        values = family.coeffs[idx]
        # enumerate submasks; build each sum from the submask minus its low bit
        order = []
        s = bits
        while True:
            order.append(s)
            if s == 0:
                break
            s = (s - 1) & bits
        for s in sorted(order):
            if s == 0:
                continue
            low = s & -s
            table[s] = table[s ^ low] + values[low.bit_length() - 1]
        tables.append((bits, table))
    return tables


def sup_captured_from_tables(tables, x_bits: int) -> Fraction:
    best = Fraction(0)
    for bits, table in tables:
        val = table[x_bits & bits]
        if val > best:
            best = val
    return best


def bad_profile(family: WeightedFamily, c, *, max_n: int = 20) -> list:
    """For every cardinality m, the exact fraction of m-subsets that are c-bad.

    One pass over all 2**n subsets; index m of the returned list holds the
    fraction among subsets of size m.
    """
    n = family.n
    if n > max_n:
        raise GuardLimitError(f"ground set {n} exceeds enumeration guard {max_n}")
    c = Fraction(c)
    tables = capture_tables(family)
    bad_counts = [0] * (n + 1)
    for x_bits in range(1 << n):
        bad = True
        for bits, table in tables:
            if table[x_bits & bits] >= c:
                bad = False
                break
        if bad:
            bad_counts[x_bits.bit_count()] += 1
    return [Fraction(bad_counts[m], comb(n, m)) for m in range(n + 1)]


def bad_probability_exact(family: WeightedFamily, c, m: int, *, max_n: int = 20) -> Fraction:
    """Exact fraction of m-subsets of the ground set that are c-bad."""
    n = family.n
    if not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= n, got m={m}")
    return bad_profile(family, c, max_n=max_n)[m]


def enumerate_witness_records(family: WeightedFamily, c, m=None):
    """All witness records over c-bad sets (optionally restricted to size m).

    Yields ``(x, record)`` pairs; the engine memoizes level data across the
    enumeration.
    """
    engine = WitnessEngine(family, c)
    n = family.n
    if m is None:
        candidates = range(1 << n)
    else:
        candidates = (
            sum(1 << i for i in ids) for ids in combinations(range(n), m)
        )
    for x_bits in candidates:
        if not engine.is_bad(x_bits):
            continue
        x = Subset(x_bits, n)
        for idx in range(len(family)):
            yield x, engine.witness(idx, x_bits)


def count_witnesses(family: WeightedFamily, c, z: Subset, m: int, t: int, j: int) -> int:
    """Number of distinct witness sets with the given profile.

    Counts witnesses W over all pairs (bad X of size m, member I) with level
    j, ``W | X == z``, and fragment size t.
    """
    seen = set()
    for x, record in enumerate_witness_records(family, c, m=m):
        if record.j != j:
            continue
        if record.witness.bits | x.bits != z.bits:
            continue
        if len(record.fragment) != t:
            continue
        seen.add(record.witness.bits)
    return len(seen)


def format_witness_record(record: WitnessRecord) -> str:
    """One-line textual dump of a witness record with the exact threshold."""
    def ids(subset: Subset) -> str:
        inner = ",".join(map(str, subset.indices()))
        return "{" + inner + "}"

    return (
        f"member={ids(record.member)} source={ids(record.source)} "
        f"epsilon={record.epsilon} j={record.j} prefix={ids(record.prefix)} "
        f"witness={ids(record.witness)} fragment={ids(record.fragment)}"
    )


def hockey_stick_identity(t: int) -> bool:
    """sum(comb(j, t) for j in t..2t) == comb(2t+1, t+1) <= 4**t."""
    total = sum(comb(j, t) for j in range(t, 2 * t + 1))
    return total == comb(2 * t + 1, t + 1) and total <= 4 ** t


def binomial_ratio_bound(n: int, m: int, t: int) -> bool:
    """comb(n, m+t) / comb(n, m) <= (n/m)**t, exactly."""
    if m + t > n or m < 1:
        raise ValueError("need 1 <= m and m + t <= n")
    return Fraction(comb(n, m + t), comb(n, m)) <= Fraction(n, m) ** t
