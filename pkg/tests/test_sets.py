"""Core set/cover machinery against a brute-force cover oracle."""

import itertools
from fractions import Fraction

import pytest

from psmall.errors import GroundSetMismatchError, GuardLimitError
from psmall.rng import CounterRNG
from psmall.sets import (
    CoverCertificate,
    SetFamily,
    Subset,
    antichain_cover,
    cover_weight,
    is_p_small,
    min_cover_weight,
    minimal_members,
    upset_cover_check,
)

F = Fraction


def brute_min_cover(family, p):
    """Oracle: minimum cover weight by exhausting all per-member subset choices.

    Independent of the branch-and-bound: enumerates the full product of
    subset choices, one per member, and takes the cheapest deduplicated
    selection.
    """
    members = family.member_bits()
    if not members:
        return Fraction(0)
    choices = []
    for m in members:
        subs = [s for s in range(m + 1) if s & m == s]
        choices.append(subs)
    best = None
    for pick in itertools.product(*choices):
        w = sum((Fraction(p) ** s.bit_count() for s in set(pick)), Fraction(0))
        if best is None or w < best:
            best = w
    return best


def fam(n, *index_lists):
    return SetFamily.from_indices(n, index_lists)


class TestSubset:
    def test_round_trip(self):
        s = Subset.from_indices(5, [0, 3])
        assert s.bits == 0b01001
        assert s.indices() == (0, 3)
        assert len(s) == 2
        assert list(s) == [0, 3]

    def test_out_of_range_bits_rejected(self):
        with pytest.raises(ValueError):
            Subset(0b100, 2)
        with pytest.raises(ValueError):
            Subset.from_indices(3, [3])

    def test_set_algebra(self):
        a = Subset.from_indices(4, [0, 1])
        b = Subset.from_indices(4, [1, 2])
        assert a.union(b).indices() == (0, 1, 2)
        assert a.intersection(b).indices() == (1,)
        assert a.difference(b).indices() == (0,)
        assert not a.contains(b)
        assert a.union(b).contains(a)

    def test_ground_set_mismatch(self):
        with pytest.raises(GroundSetMismatchError):
            Subset(1, 3).union(Subset(1, 4))


class TestSetFamily:
    def test_dedup_and_membership(self):
        family = fam(4, [0, 1], [1, 0], [2])
        assert len(family) == 2
        assert Subset.from_indices(4, [0, 1]) in family
        assert Subset.from_indices(4, [3]) not in family

    def test_order_independent_equality(self):
        assert fam(3, [0], [1, 2]) == fam(3, [1, 2], [0])

    def test_mixed_ground_set_rejected(self):
        with pytest.raises(GroundSetMismatchError):
            SetFamily(3, [Subset(1, 4)])


class TestUpsetCoverCheck:
    def test_singleton_generator_covers(self):
        assert upset_cover_check(fam(3, [0]), fam(3, [0], [0, 1]))

    def test_non_cover(self):
        assert not upset_cover_check(fam(3, [0, 1]), fam(3, [0]))

    def test_empty_set_generates_everything(self):
        assert upset_cover_check(fam(3, []), fam(3, [0], [1, 2], []))

    def test_mismatch_raises(self):
        with pytest.raises(GroundSetMismatchError):
            upset_cover_check(fam(3, [0]), fam(4, [0]))


class TestCoverWeight:
    def test_weight_sum(self):
        assert cover_weight(fam(4, [0], [1, 2]), F(1, 2)) == F(3, 4)

    def test_empty_set_weighs_one(self):
        assert cover_weight(fam(4, []), F(1, 7)) == 1

    def test_all_singletons_weigh_np(self):
        n, p = 6, F(1, 20)
        singles = fam(n, *[[i] for i in range(n)])
        assert cover_weight(singles, p) == n * p
        assert n * p < F(1, 2)

    def test_probability_range_enforced(self):
        with pytest.raises(ValueError):
            cover_weight(fam(2, [0]), F(3, 2))
        with pytest.raises(ValueError):
            cover_weight(fam(2, [0]), 0)


class TestMinCoverWeight:
    def test_all_two_subsets_of_three(self):
        family = fam(3, [0, 1], [0, 2], [1, 2])
        cert = min_cover_weight(family, F(1, 10))
        assert cert.weight == F(3, 100)
        assert cert.generators == family
        assert brute_min_cover(family, F(1, 10)) == F(3, 100)

    def test_family_with_empty_member(self):
        family = fam(3, [], [0, 1])
        cert = min_cover_weight(family, F(1, 3))
        assert cert.weight == 1
        assert cert.generators == fam(3, [])

    def test_single_singleton_high_p(self):
        cert = min_cover_weight(fam(2, [0]), F(3, 5))
        assert cert.weight == F(3, 5)
        assert cert.generators == fam(2, [0])

    def test_empty_family(self):
        cert = min_cover_weight(SetFamily(4, []), F(1, 2))
        assert cert.weight == 0
        assert len(cert.generators) == 0
        assert cert.is_small

    def test_shared_subset_beats_member_cover(self):
        # {0} covers both members at weight p < 2 p^2 once p > 1/2... use
        # p where singleton is cheaper: p + 0 vs p^2 + p^2; p < 2p^2 iff p > 1/2
        family = fam(4, [0, 1], [0, 2])
        p = F(2, 3)
        cert = min_cover_weight(family, p)
        assert cert.weight == brute_min_cover(family, p) == F(2, 3)
        assert cert.generators == fam(4, [0])

    def test_guard_limits(self):
        with pytest.raises(GuardLimitError):
            min_cover_weight(SetFamily(25, []), F(1, 2))
        big = SetFamily.from_bits(8, list(range(1, 70)))
        with pytest.raises(GuardLimitError):
            min_cover_weight(big, F(1, 2))
        # explicit relaxation works
        min_cover_weight(big, F(1, 100), max_members=300)

    def test_matches_oracle_on_random_families(self):
        rng = CounterRNG(20240, "sets-oracle")
        for trial in range(40):
            n = 3 + rng.randint(3)  # 3..5
            size = 1 + rng.randint(4)
            bits = [1 + rng.randint((1 << n) - 1) for _ in range(size)]
            family = SetFamily.from_bits(n, bits)
            p = F(1 + rng.randint(8), 9 + rng.randint(6))
            cert = min_cover_weight(family, p)
            assert cert.weight == brute_min_cover(family, p), (n, bits, p)
            assert upset_cover_check(cert.generators, family)
            assert cover_weight(cert.generators, p) == cert.weight


class TestIsPSmall:
    def test_two_singletons_small(self):
        small, cert = is_p_small(fam(2, [0], [1]), F(1, 5))
        assert small and cert.weight == F(2, 5)

    def test_single_fat_singleton_not_small(self):
        small, cert = is_p_small(fam(1, [0]), F(3, 5))
        assert not small and cert.weight == F(3, 5)

    def test_np_below_half_always_small(self):
        rng = CounterRNG(7, "np-small")
        for trial in range(20):
            n = 2 + rng.randint(5)
            p = F(1, 2 * n + 1 + rng.randint(10))
            assert n * p < F(1, 2)
            size = 1 + rng.randint(6)
            bits = [1 + rng.randint((1 << n) - 1) for _ in range(size)]
            small, _ = is_p_small(SetFamily.from_bits(n, bits), p)
            assert small


class TestCertificateInvariants:
    def test_weight_must_match(self):
        with pytest.raises(ValueError):
            CoverCertificate(fam(3, [0]), F(1, 2), F(1, 4))

    def test_monotone_in_p(self):
        rng = CounterRNG(99, "monotone-p")
        for trial in range(25):
            n = 3 + rng.randint(3)
            bits = [1 + rng.randint((1 << n) - 1) for _ in range(1 + rng.randint(4))]
            family = SetFamily.from_bits(n, bits)
            p = F(1 + rng.randint(6), 8 + rng.randint(8))
            q = p + F(1, 50)
            assert min_cover_weight(family, p).weight <= min_cover_weight(family, q).weight

    def test_monotone_in_family(self):
        rng = CounterRNG(100, "monotone-f")
        for trial in range(25):
            n = 4
            bits = [1 + rng.randint(15) for _ in range(4)]
            family = SetFamily.from_bits(n, bits)
            sub = SetFamily.from_bits(n, bits[:2])
            p = F(1 + rng.randint(5), 7 + rng.randint(5))
            assert min_cover_weight(sub, p).weight <= min_cover_weight(family, p).weight

    def test_superset_replacement_never_costlier(self):
        rng = CounterRNG(101, "superset")
        for trial in range(25):
            n = 4
            bits = [1 + rng.randint(15) for _ in range(3)]
            family = SetFamily.from_bits(n, bits)
            p = F(1 + rng.randint(5), 7 + rng.randint(5))
            base = min_cover_weight(family, p).weight
            # grow the first member by one missing element, if any
            missing = [i for i in range(n) if not bits[0] >> i & 1]
            if not missing:
                continue
            grown = [bits[0] | 1 << missing[0]] + bits[1:]
            assert min_cover_weight(SetFamily.from_bits(n, grown), p).weight <= base


class TestHelpers:
    def test_minimal_members(self):
        family = fam(4, [0], [0, 1], [2, 3], [1, 2, 3])
        assert minimal_members(family) == fam(4, [0], [2, 3])

    def test_antichain_cover_is_valid(self):
        family = fam(4, [0], [0, 1], [2, 3])
        cert = antichain_cover(family, F(1, 4))
        assert upset_cover_check(cert.generators, family)
        assert cert.weight == F(1, 4) + F(1, 16)
