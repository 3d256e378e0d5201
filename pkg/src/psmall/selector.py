"""Positive selector processes: exact suprema expectations, threshold
families, their covers, and the uniform-subset comparison facts.

A selector instance is a finite set T of nonnegative coefficient rows over
the ground set {0, .., n-1} together with a success probability p for the
independent 0/1 selectors.  The headline quantity is the expected supremum
``E sup_{t in T} sum_i t_i * delta_i``; the headline certified object is a
p-small cover of all index sets whose achievable sum crosses a multiple of
that expectation.  The constant ``MAIN_LEVEL = 221`` is the certified
threshold multiplier; ``MAIN_LOWER = 1/220`` the matching expectation lower
bound for non-p-small weighted families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb

from .errors import GuardLimitError, HypothesisError
from .rng import CounterRNG
from .sets import (
    CoverCertificate,
    SetFamily,
    is_p_small,
    min_cover_weight,
    minimal_members,
)
from .witness import (
    WeightedFamily,
    capture_tables,
    key_lemma_bound,
    sup_captured_from_tables,
)

MAIN_LEVEL = Fraction(221)
MAIN_LOWER = Fraction(1, 220)
MASTER_LOWER = Fraction(1, 10)
MASTER_SAMPLE_RATIO = Fraction(9)  # minimal m / (p n) for the subset bound

DEFAULT_EXACT_N = 20
DEFAULT_MC_TRIALS = 100_000


@dataclass(frozen=True)
class SelectorInstance:
    """Finite nonnegative coefficient rows plus a selector probability."""

    n: int
    rows: tuple
    p: Fraction

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("ground-set size must be nonnegative")
        if not 0 < self.p < 1:
            raise ValueError(f"selector probability must lie in (0,1), got {self.p}")
        if not self.rows:
            raise ValueError("need at least one coefficient row")
        for row in self.rows:
            if len(row) != self.n:
                raise ValueError("each row needs one coefficient per index")
            if any(v < 0 for v in row):
                raise ValueError("coefficients must be nonnegative")

    @classmethod
    def build(cls, n: int, rows, p) -> "SelectorInstance":
        frozen = tuple(tuple(Fraction(v) for v in row) for row in rows)
        return cls(n, frozen, Fraction(p))

    def with_probability(self, p) -> "SelectorInstance":
        return SelectorInstance(self.n, self.rows, Fraction(p))

    def max_total(self) -> Fraction:
        """Largest achievable sum: the full ground set maximises every row."""
        return max(sum(row, Fraction(0)) for row in self.rows)

    def row_sum(self, row_idx: int, bits: int) -> Fraction:
        row = self.rows[row_idx]
        return sum((row[i] for i in range(self.n) if bits >> i & 1), Fraction(0))

    def best_sum(self, bits: int) -> Fraction:
        return max(self.row_sum(r, bits) for r in range(len(self.rows)))


@dataclass(frozen=True)
class Estimate:
    """A computed value, exact or Monte Carlo with a standard error."""

    value: object  # Fraction when exact, float otherwise
    stderr: float
    exact: bool
    trials: int

    @classmethod
    def exact_value(cls, value: Fraction) -> "Estimate":
        return cls(value, 0.0, True, 0)


def _iter_gray_sums(inst: SelectorInstance):
    """Yields (bits, per-row sums) over all 2^n subsets, one flip at a time."""
    sums = [Fraction(0)] * len(inst.rows)
    yield 0, sums
    prev = 0
    for k in range(1, 1 << inst.n):
        gray = k ^ (k >> 1)
        flipped = gray ^ prev
        i = flipped.bit_length() - 1
        if gray & flipped:
            for r, row in enumerate(inst.rows):
                sums[r] += row[i]
        else:
            for r, row in enumerate(inst.rows):
                sums[r] -= row[i]
        prev = gray
        yield gray, sums


def expected_sup(
    inst: SelectorInstance,
    mode: str = "exact",
    trials: int = DEFAULT_MC_TRIALS,
    seed: int = 0,
    *,
    max_n: int = DEFAULT_EXACT_N,
) -> Estimate:
    """Expected supremum of the selector process.

    Exact mode sums the supremum over all 2^n outcomes with exact
    probability weights (guarded by ``max_n``); Monte Carlo mode returns the
    sample mean with its standard error.
    """
    if mode == "exact":
        if inst.n > max_n:
            raise GuardLimitError(
                f"ground set {inst.n} exceeds exact-mode guard {max_n}"
            )
        p, n = inst.p, inst.n
        weight_by_size = [p**k * (1 - p) ** (n - k) for k in range(n + 1)]
        total = Fraction(0)
        for bits, sums in _iter_gray_sums(inst):
            total += weight_by_size[bits.bit_count()] * max(sums)
        return Estimate.exact_value(total)
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    rows = [[float(v) for v in row] for row in inst.rows]
    p = float(inst.p)
    mean = 0.0
    m2 = 0.0
    for trial in range(trials):
        rng = CounterRNG(seed, "selector-sup", trial)
        sums = [0.0] * len(rows)
        for i in range(inst.n):
            if rng.uniform() < p:
                for r, row in enumerate(rows):
                    sums[r] += row[i]
        value = max(sums)
        delta = value - mean
        mean += delta / (trial + 1)
        m2 += delta * (value - mean)
    stderr = math.sqrt(m2 / (trials - 1) / trials) if trials > 1 else float("inf")
    return Estimate(mean, stderr, False, trials)


def threshold_family(
    inst: SelectorInstance,
    level,
    *,
    max_n: int = DEFAULT_EXACT_N,
) -> SetFamily:
    """All index sets whose best achievable sum reaches ``level * E sup``.

    The family is an up-set: coefficients are nonnegative, so any superset
    of a qualifying set qualifies.
    """
    level = Fraction(level)
    delta = expected_sup(inst, "exact", max_n=max_n).value
    threshold = level * delta
    if inst.max_total() < threshold:
        return SetFamily(inst.n, [])
    qualifying = []
    for bits, sums in _iter_gray_sums(inst):
        if max(sums) >= threshold:
            qualifying.append(bits)
    return SetFamily.from_bits(inst.n, sorted(qualifying))


def _threshold_minimal(inst: SelectorInstance, threshold: Fraction) -> SetFamily:
    """Minimal members of the threshold up-set at an absolute threshold."""
    if inst.max_total() < threshold:
        return SetFamily(inst.n, [])
    size = 1 << inst.n
    qualifies = bytearray(size)
    for bits, sums in _iter_gray_sums(inst):
        if max(sums) >= threshold:
            qualifies[bits] = 1
    minimal = []
    for bits in range(size):
        if not qualifies[bits]:
            continue
        b = bits
        is_min = True
        while b:
            low = b & -b
            if qualifies[bits ^ low]:
                is_min = False
                break
            b ^= low
        if is_min:
            minimal.append(bits)
    return SetFamily.from_bits(inst.n, minimal)


def certify_main1(
    inst: SelectorInstance,
    level=MAIN_LEVEL,
    *,
    max_n: int = DEFAULT_EXACT_N,
    max_members: int = 64,
) -> CoverCertificate:
    """Minimal-weight cover certificate for the threshold family.

    At the default level the cover weight never exceeds 1/2 (the family is
    empty outright once ``level > 1/p``, because the full-set sum is already
    at most ``E sup / p``).
    """
    level = Fraction(level)
    delta = expected_sup(inst, "exact", max_n=max_n).value
    reduced = _threshold_minimal(inst, level * delta)
    cert = min_cover_weight(reduced, inst.p, max_n=max_n, max_members=max_members)
    return cert


@dataclass(frozen=True)
class SplitParams:
    """Split constant C for factoring selectors into a coarse/fine product.

    Requires ``9 <= C <= 11`` with ``C * p * n`` integral and ``C * p <= 1``;
    the coarse selectors then succeed with probability ``C * p`` and the
    fine ones with ``1 / C``.
    """

    C: Fraction

    def __post_init__(self):
        if not 9 <= self.C <= 11:
            raise ValueError(f"split constant must lie in [9, 11], got {self.C}")

    def validate(self, p: Fraction, n: int):
        if self.C * p >= 1:
            raise ValueError("coarse probability C*p reaches 1")
        if (self.C * p * n).denominator != 1:
            raise ValueError(f"C*p*n = {self.C * p * n} is not an integer")

    def coarse_probability(self, p: Fraction) -> Fraction:
        return self.C * p

    def fine_probability(self) -> Fraction:
        return 1 / self.C

    @classmethod
    def choose(cls, p, n: int) -> "SplitParams":
        """Rational C in [9, 11] with C*p*n integral, as close to 10 as
        possible; rejects the instance when no such C exists."""
        p = Fraction(p)
        lo = math.ceil(9 * p * n)
        hi = math.floor(11 * p * n)
        candidates = [k for k in range(max(lo, 1), hi + 1)]
        if not candidates:
            raise ValueError(f"no integral split point in [9pn, 11pn] for p={p}, n={n}")
        target = 10 * p * n
        k = min(candidates, key=lambda v: (abs(v - target), v))
        sp = cls(Fraction(k) / (p * n))
        sp.validate(p, n)
        return sp


def split_certify(
    inst: SelectorInstance,
    sp: SplitParams,
    *,
    max_n: int = DEFAULT_EXACT_N,
    max_members: int = 64,
) -> CoverCertificate:
    """Certify the level-``221*C`` event under the coarse selector split.

    Builds the coarse instance at probability C*p, certifies its level-221
    threshold family there, and checks exactly that the coarse expectation
    is at most C times the base expectation, which transfers the cover to
    the base process at the amplified level.
    """
    sp.validate(inst.p, inst.n)
    coarse = inst.with_probability(sp.coarse_probability(inst.p))
    delta_base = expected_sup(inst, "exact", max_n=max_n).value
    delta_coarse = expected_sup(coarse, "exact", max_n=max_n).value
    if delta_coarse > sp.C * delta_base:
        raise AssertionError(
            f"coarse expectation {delta_coarse} exceeds C * base = {sp.C * delta_base}"
        )
    return certify_main1(coarse, MAIN_LEVEL, max_n=max_n, max_members=max_members)


def _require_not_small(base: SetFamily, p: Fraction, *, max_n: int, max_members: int):
    small, cert = is_p_small(base, p, max_n=max_n, max_members=max_members)
    if small:
        raise HypothesisError(
            f"family is p-small (cover weight {cert.weight}); the expectation "
            "lower bound does not apply"
        )


def verify_main2(
    family: WeightedFamily,
    p,
    *,
    max_n: int = DEFAULT_EXACT_N,
    max_members: int = 64,
) -> tuple:
    """Exact selector expectation of a non-p-small normalized family.

    Returns ``(value, value >= 1/220)``; refuses p-small or non-normalized
    input.
    """
    p = Fraction(p)
    if family.mode != "normalized":
        raise HypothesisError("coefficient sums must equal 1 for this bound")
    if family.n > max_n:
        raise GuardLimitError(f"ground set {family.n} exceeds guard {max_n}")
    _require_not_small(family.base, p, max_n=max_n, max_members=max_members)
    n = family.n
    tables = capture_tables(family)
    weight_by_size = [p**k * (1 - p) ** (n - k) for k in range(n + 1)]
    total = Fraction(0)
    for x_bits in range(1 << n):
        total += weight_by_size[x_bits.bit_count()] * sup_captured_from_tables(
            tables, x_bits
        )
    return total, total >= MAIN_LOWER


def uniform_subset_expectation(
    family: WeightedFamily,
    m: int,
    mode: str = "exact",
    trials: int = DEFAULT_MC_TRIALS,
    seed: int = 0,
    *,
    max_n: int = DEFAULT_EXACT_N,
) -> Estimate:
    """Expected captured supremum over a uniform m-subset of the ground set."""
    n = family.n
    if not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= n, got m={m}")
    if mode == "exact":
        if n > max_n:
            raise GuardLimitError(f"ground set {n} exceeds guard {max_n}")
        tables = capture_tables(family)
        total = Fraction(0)
        for ids in combinations(range(n), m):
            bits = 0
            for i in ids:
                bits |= 1 << i
            total += sup_captured_from_tables(tables, bits)
        return Estimate.exact_value(total / comb(n, m))
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    mean = 0.0
    m2 = 0.0
    for trial in range(trials):
        rng = CounterRNG(seed, "subset-sup", trial)
        ids = rng.sample_without_replacement(n, m)
        bits = 0
        for i in ids:
            bits |= 1 << i
        value = float(family.sup_captured(bits))
        delta = value - mean
        mean += delta / (trial + 1)
        m2 += delta * (value - mean)
    stderr = math.sqrt(m2 / (trials - 1) / trials) if trials > 1 else float("inf")
    return Estimate(mean, stderr, False, trials)


def verify_master(
    family: WeightedFamily,
    p,
    m: int,
    *,
    max_n: int = DEFAULT_EXACT_N,
    max_members: int = 64,
) -> bool:
    """Uniform m-subset expectation bound for non-p-small families.

    Requires coefficient sums at least 1 and ``m >= 9 p n``; returns whether
    the exact expectation reaches 1/10.
    """
    p = Fraction(p)
    if family.mode not in ("normalized", "superunit"):
        raise HypothesisError("coefficient sums must be at least 1 for this bound")
    if m < MASTER_SAMPLE_RATIO * p * family.n:
        raise HypothesisError(
            f"subset size {m} below {MASTER_SAMPLE_RATIO} * p * n = "
            f"{MASTER_SAMPLE_RATIO * p * family.n}"
        )
    _require_not_small(family.base, p, max_n=max_n, max_members=max_members)
    value = uniform_subset_expectation(family, m, "exact", max_n=max_n).value
    return value >= MASTER_LOWER


def _rows_subset_expectation(rows, n: int, m: int) -> Fraction:
    total = Fraction(0)
    for ids in combinations(range(n), m):
        best = max(sum((row[i] for i in ids), Fraction(0)) for row in rows)
        total += best
    return total / comb(n, m)


def verify_porsup(
    rows,
    n: int,
    m: int,
    k: int,
    mode: str = "exact",
    *,
    max_n: int = DEFAULT_EXACT_N,
) -> bool:
    """Uniform km-subset expectation is at most k times the m-subset one."""
    rows = tuple(tuple(Fraction(v) for v in row) for row in rows)
    if k < 1:
        raise ValueError("k must be a positive integer")
    if k * m > n:
        raise ValueError(f"need k*m <= n, got {k}*{m} > {n}")
    if mode != "exact":
        raise ValueError("only exact mode is implemented for this comparison")
    if n > max_n:
        raise GuardLimitError(f"ground set {n} exceeds guard {max_n}")
    big = _rows_subset_expectation(rows, n, k * m)
    small = _rows_subset_expectation(rows, n, m)
    return big <= k * small


def subset_threshold_certificate(
    rows,
    n: int,
    m: int,
    threshold: Fraction,
    q: Fraction,
    *,
    max_n: int = DEFAULT_EXACT_N,
    max_members: int = 64,
) -> CoverCertificate:
    """Minimal cover of the m-subsets whose best sum reaches ``threshold``."""
    if n > max_n:
        raise GuardLimitError(f"ground set {n} exceeds guard {max_n}")
    if not 0 < q < 1:
        raise ValueError(f"cover probability must lie in (0,1), got {q}")
    qualifying = []
    for ids in combinations(range(n), m):
        best = max(sum((row[i] for i in ids), Fraction(0)) for row in rows)
        if best >= threshold:
            bits = 0
            for i in ids:
                bits |= 1 << i
            qualifying.append(bits)
    family = minimal_members(SetFamily.from_bits(n, qualifying))
    return min_cover_weight(family, q, max_n=max_n, max_members=max_members)


def verify_malarodzina(
    rows,
    n: int,
    m: int,
    level,
    C=MASTER_SAMPLE_RATIO,
    *,
    max_n: int = DEFAULT_EXACT_N,
    max_members: int = 64,
) -> tuple:
    """Certificate that m-subsets reaching ``level`` times the uniform-subset
    expectation form an (m / (C n))-small family, for level > 10.

    Returns ``(certificate, is_small)``.
    """
    rows = tuple(tuple(Fraction(v) for v in row) for row in rows)
    level = Fraction(level)
    if level <= 10:
        raise ValueError("level must exceed 10")
    s = _rows_subset_expectation(rows, n, m)
    q = Fraction(m, C * n)
    cert = subset_threshold_certificate(
        rows, n, m, level * s, q, max_n=max_n, max_members=max_members
    )
    return cert, cert.is_small


def remark1_certificate(
    rows,
    n: int,
    m: int,
    C,
    *,
    max_n: int = DEFAULT_EXACT_N,
    max_members: int = 64,
) -> CoverCertificate:
    """Certificate that m-subsets reaching ``(90C+1)`` times the uniform
    m-subset expectation form a (C m / n)-small family."""
    rows = tuple(tuple(Fraction(v) for v in row) for row in rows)
    C = Fraction(C)
    q = C * m / n
    if not 0 < q < 1:
        raise ValueError(f"cover probability C*m/n = {q} must lie in (0,1)")
    s = _rows_subset_expectation(rows, n, m)
    threshold = (90 * C + 1) * s
    return subset_threshold_certificate(
        rows, n, m, threshold, q, max_n=max_n, max_members=max_members
    )


def binomial_tail(n: int, q, k: int) -> Fraction:
    """Exact upper tail P(Binomial(n, q) >= k)."""
    q = Fraction(q)
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}")
    if not 0 <= q <= 1:
        raise ValueError(f"success probability must lie in [0,1], got {q}")
    return sum(
        (comb(n, j) * q**j * (1 - q) ** (n - j) for j in range(k, n + 1)),
        Fraction(0),
    )


def conditional_expectation_chain(
    family: WeightedFamily, p, m: int, *, max_n: int = DEFAULT_EXACT_N
) -> tuple:
    """Exact check that the m-subset expectation dominates half the
    not-bad probability bound: returns (expectation, lower_bound)."""
    p = Fraction(p)
    expectation = uniform_subset_expectation(family, m, "exact", max_n=max_n).value
    bound = key_lemma_bound(family.n, m, p)
    lower = Fraction(1, 2) * (1 - min(Fraction(1), bound))
    return expectation, lower
