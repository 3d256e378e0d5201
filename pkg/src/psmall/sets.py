"""Bitmask subsets, set families, up-set covers, and the exact p-smallness oracle.

A family ``F`` of subsets of ``{0, .., n-1}`` is *p-small* when some
collection ``G`` of subsets covers it through up-sets (every member of ``F``
contains some member of ``G``) with total weight ``sum(p**|S| for S in G)``
at most 1/2.  All weights are exact :class:`fractions.Fraction` values: the
definition compares against exactly 1/2, so floats would make the boundary
ambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

from .errors import GroundSetMismatchError, GuardLimitError

# Exact search guards; callers may relax them explicitly.
DEFAULT_MAX_N = 20
DEFAULT_MAX_MEMBERS = 64


@dataclass(frozen=True)
class Subset:
    """Subset of the ground set {0, .., n-1}, stored as a bitmask."""

    bits: int
    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("ground-set size must be nonnegative")
        if self.bits < 0 or self.bits >> self.n:
            raise ValueError(f"bitmask {self.bits:#x} has bits outside [0, {self.n})")

    @classmethod
    def from_indices(cls, n: int, indices: Iterable[int]) -> "Subset":
        bits = 0
        for i in indices:
            if not 0 <= i < n:
                raise ValueError(f"index {i} outside ground set of size {n}")
            bits |= 1 << i
        return cls(bits, n)

    def indices(self) -> tuple:
        return tuple(i for i in range(self.n) if self.bits >> i & 1)

    def cardinality(self) -> int:
        return self.bits.bit_count()

    def contains(self, other: "Subset") -> bool:
        self._check_ground(other)
        return self.bits & other.bits == other.bits

    def issubset(self, other: "Subset") -> bool:
        return other.contains(self)

    def union(self, other: "Subset") -> "Subset":
        self._check_ground(other)
        return Subset(self.bits | other.bits, self.n)

    def intersection(self, other: "Subset") -> "Subset":
        self._check_ground(other)
        return Subset(self.bits & other.bits, self.n)

    def difference(self, other: "Subset") -> "Subset":
        self._check_ground(other)
        return Subset(self.bits & ~other.bits, self.n)

    def _check_ground(self, other: "Subset"):
        if self.n != other.n:
            raise GroundSetMismatchError(
                f"ground sets differ: {self.n} vs {other.n}"
            )

    def __iter__(self) -> Iterator[int]:
        bits = self.bits
        while bits:
            low = bits & -bits
            yield low.bit_length() - 1
            bits ^= low

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __repr__(self):
        return f"Subset({{{','.join(map(str, self.indices()))}}}, n={self.n})"


class SetFamily:
    """Finite family of subsets on a common ground set, duplicates removed.

    Membership is set-based: two families with the same members in different
    order are equal.
    """

    __slots__ = ("n", "members", "_member_bits")

    def __init__(self, n: int, members: Iterable[Subset]):
        self.n = n
        seen = set()
        kept = []
        for m in members:
            if m.n != n:
                raise GroundSetMismatchError(
                    f"member on ground set {m.n}, family on {n}"
                )
            if m.bits not in seen:
                seen.add(m.bits)
                kept.append(m)
        self.members = tuple(kept)
        self._member_bits = frozenset(seen)

    @classmethod
    def from_bits(cls, n: int, bit_list: Iterable[int]) -> "SetFamily":
        return cls(n, [Subset(b, n) for b in bit_list])

    @classmethod
    def from_indices(cls, n: int, index_lists: Iterable[Iterable[int]]) -> "SetFamily":
        return cls(n, [Subset.from_indices(n, ids) for ids in index_lists])

    def member_bits(self) -> tuple:
        return tuple(m.bits for m in self.members)

    def __len__(self):
        return len(self.members)

    def __iter__(self) -> Iterator[Subset]:
        return iter(self.members)

    def __contains__(self, subset: Subset) -> bool:
        return subset.n == self.n and subset.bits in self._member_bits

    def __eq__(self, other):
        return (
            isinstance(other, SetFamily)
            and self.n == other.n
            and self._member_bits == other._member_bits
        )

    def __hash__(self):
        return hash((self.n, self._member_bits))

    def __repr__(self):
        shown = ", ".join(repr(sorted(m.indices())) for m in self.members[:6])
        tail = ", ..." if len(self.members) > 6 else ""
        return f"SetFamily(n={self.n}, members=[{shown}{tail}])"


@dataclass(frozen=True)
class CoverCertificate:
    """A cover collection together with its exact weight at probability p.

    The certificate claims p-smallness of whatever family it was produced
    for exactly when ``weight <= 1/2``.
    """

    generators: SetFamily
    p: Fraction
    weight: Fraction

    def __post_init__(self):
        _check_probability(self.p)
        recomputed = cover_weight(self.generators, self.p)
        if recomputed != self.weight:
            raise ValueError(
                f"stored weight {self.weight} != recomputed {recomputed}"
            )

    @property
    def is_small(self) -> bool:
        return self.weight <= Fraction(1, 2)

    @classmethod
    def build(cls, generators: SetFamily, p: Fraction) -> "CoverCertificate":
        return cls(generators, Fraction(p), cover_weight(generators, p))


def _check_probability(p: Fraction):
    if not 0 < p < 1:
        raise ValueError(f"probability must lie in (0,1), got {p}")


def upset_cover_check(generators: SetFamily, family: SetFamily) -> bool:
    """True iff every member of ``family`` contains some generator."""
    if generators.n != family.n:
        raise GroundSetMismatchError(
            f"ground sets differ: {generators.n} vs {family.n}"
        )
    gen_bits = generators.member_bits()
    for member in family.member_bits():
        if not any(member & g == g for g in gen_bits):
            return False
    return True


def cover_weight(generators: SetFamily, p) -> Fraction:
    """Exact weight ``sum(p**|S|)`` over the (deduplicated) generators."""
    p = Fraction(p)
    _check_probability(p)
    return sum((p ** m.bit_count() for m in generators.member_bits()), Fraction(0))


def minimal_members(family: SetFamily) -> SetFamily:
    """Members of ``family`` that contain no other member.

    Covering the minimal members through up-sets covers the whole family,
    and no cover of the family can do better, so the smallness oracle may
    always be run on this reduction.
    """
    bits = sorted(family.member_bits(), key=lambda b: (b.bit_count(), b))
    kept = []
    for b in bits:
        if not any(b & k == k for k in kept):
            kept.append(b)
    return SetFamily.from_bits(family.n, kept)


def _enforce_guards(family: SetFamily, max_n: int, max_members: int):
    if family.n > max_n:
        raise GuardLimitError(
            f"ground set {family.n} exceeds exact-search guard {max_n}"
        )
    if len(family) > max_members:
        raise GuardLimitError(
            f"family size {len(family)} exceeds exact-search guard {max_members}"
        )


def min_cover_weight(
    family: SetFamily,
    p,
    *,
    max_n: int = DEFAULT_MAX_N,
    max_members: int = DEFAULT_MAX_MEMBERS,
) -> CoverCertificate:
    """Minimum-weight up-set cover of ``family`` at probability ``p``.

    Any cover can be shrunk member-wise to one where each member I is covered
    by a chosen subset S of I, so the search branches, for the first member
    not yet covered, over the subsets of that member, deduplicated, cheapest
    cardinality first.  Partial weights only grow, so a branch is abandoned
    as soon as its weight reaches the incumbent.

    Returns the certificate with the optimal generators; for an empty family
    this is the empty cover of weight 0.
    """
    p = Fraction(p)
    _check_probability(p)
    _enforce_guards(family, max_n, max_members)

    reduced = minimal_members(family)
    # members sorted by ascending cardinality, ties by bitmask: small members
    # constrain the cover most
    members = sorted(reduced.member_bits(), key=lambda b: (b.bit_count(), b))
    if not members:
        return CoverCertificate.build(SetFamily(family.n, []), p)

    # p**k for every reachable cardinality
    pow_p = [Fraction(1)]
    for _ in range(family.n):
        pow_p.append(pow_p[-1] * p)

    # incumbent: each member covers itself
    best_weight = sum((pow_p[b.bit_count()] for b in members), Fraction(0))
    best_cover = list(members)

    from itertools import combinations as _combinations

    def subsets_by_size(bits: int):
        """Subsets of ``bits`` by descending cardinality, built lazily so
        pruned branches never materialise the lower size classes."""
        elems = [1 << i for i in range(bits.bit_length()) if bits >> i & 1]
        for size in range(len(elems), -1, -1):
            yield size, [
                sum(pick) for pick in _combinations(elems, size)
            ]

    chosen: list = []

    def search(idx: int, weight: Fraction):
        nonlocal best_weight, best_cover
        while idx < len(members) and any(
            members[idx] & s == s for s in chosen
        ):
            idx += 1
        if idx == len(members):
            if weight < best_weight:
                best_weight = weight
                best_cover = list(chosen)
            return
        member = members[idx]
        for size, size_group in subsets_by_size(member):
            step = pow_p[size]
            if weight + step >= best_weight:
                # smaller subsets only cost more; the whole branch is dead
                break
            for sub in size_group:
                # sub cannot already be chosen: it would cover this member
                chosen.append(sub)
                search(idx + 1, weight + step)
                chosen.pop()

    search(0, Fraction(0))
    cert = CoverCertificate.build(SetFamily.from_bits(family.n, best_cover), p)
    assert upset_cover_check(cert.generators, family)
    return cert


def is_p_small(
    family: SetFamily,
    p,
    *,
    max_n: int = DEFAULT_MAX_N,
    max_members: int = DEFAULT_MAX_MEMBERS,
) -> tuple:
    """Exact p-smallness decision with a minimal cover certificate either way."""
    cert = min_cover_weight(family, p, max_n=max_n, max_members=max_members)
    return cert.is_small, cert


def antichain_cover(family: SetFamily, p) -> CoverCertificate:
    """Certificate using the family's minimal members as their own cover.

    Not necessarily minimum-weight, but always a valid cover; used where the
    exact search guards would be exceeded.
    """
    return CoverCertificate.build(minimal_members(family), Fraction(p))
