"""Acceptance battery: the headline guarantees, at full scale.

One test per criterion; each prints a single ``[PASS]``/``[FAIL]`` line
(visible with ``pytest -s tests/test_acceptance.py``).  All bound checks
are exact rational comparisons; Monte Carlo enters only where a criterion
is explicitly statistical (containment violations and per-entry frequency
checks over 10^5 trials).
"""

import math
from fractions import Fraction
from math import comb

import pytest

from psmall import io_formats
from psmall.empirical import (
    auto_tune_emp,
    build_emp_certificate,
    discretize_emp,
    estimate_S_emp,
    recheck_emp_certificate,
    verify_emp_certificate,
)
from psmall.generate import generate_instances
from psmall.levy import (
    auto_tune,
    build_id_certificate,
    discretize,
    estimate_S,
    exact_first_moment_supremum,
    recheck_id_certificate,
    verify_id_certificate,
)
from psmall.reference import empirical_cases, levy_cases
from psmall.selector import (
    certify_main1,
    conditional_expectation_chain,
    remark1_certificate,
    threshold_family,
    verify_main2,
    verify_malarodzina,
    verify_master,
    verify_porsup,
)
from psmall.sets import cover_weight, upset_cover_check
from psmall.witness import (
    WitnessEngine,
    bad_profile,
    binomial_ratio_bound,
    enumerate_witness_records,
    hockey_stick_identity,
    key_lemma_bound,
)

F = Fraction
HALF = F(1, 2)
SEED = 20240811
TRIALS = 100_000

_collected_cover_certs = []
_collected_delta_certs = []


def _report(criterion: str, ok: bool, detail: str):
    marker = "PASS" if ok else "FAIL"
    print(f"[{marker}] {criterion}: {detail}")
    assert ok, f"{criterion}: {detail}"


@pytest.fixture(scope="module")
def selector_batch(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("selectors"))
    paths = generate_instances("selector", 100, 12, seed=SEED, out_dir=out)
    return [io_formats.read_selector_instance(p) for p in paths]


@pytest.fixture(scope="module")
def family_batch(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("families"))
    paths = generate_instances("weighted-family", 100, 10, seed=SEED, out_dir=out)
    return [io_formats.read_weighted_family(p) for p in paths]


@pytest.fixture(scope="module")
def small_selector_batch(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("small-selectors"))
    paths = generate_instances("selector", 20, 8, seed=SEED + 1, out_dir=out)
    return [io_formats.read_selector_instance(p) for p in paths]


def test_criterion_01_threshold_cover_at_level_221(selector_batch):
    """100 selector instances: the level-221 family has a half-weight cover
    (empty outright whenever 221 exceeds 1/p)."""
    failures = 0
    empty = 0
    for inst in selector_batch:
        assert inst.n <= 12 and len(inst.rows) <= 8
        assert F(1, 20) <= inst.p <= F(1, 3)
        cert = certify_main1(inst)
        _collected_cover_certs.append((inst, cert))
        if not cert.is_small:
            failures += 1
        if len(cert.generators) == 0 and cert.weight == 0:
            empty += 1
        if 221 > 1 / inst.p and cert.weight != 0:
            failures += 1  # the reciprocal-probability emptiness must hold
    _report(
        "criterion 1 (level-221 covers)",
        failures == 0,
        f"100 instances, {empty} empty families, {failures} failures",
    )


def test_criterion_02_expectation_lower_bound(family_batch):
    """100 non-p-small normalized families: exact expectation >= 1/220."""
    worst = None
    failures = 0
    for family, p in family_batch:
        assert family.n <= 10
        value, ok = verify_main2(family, p, max_members=256)
        if not ok:
            failures += 1
        if worst is None or value < worst:
            worst = value
    _report(
        "criterion 2 (expectation >= 1/220)",
        failures == 0,
        f"100 families, worst expectation {worst} vs bound {F(1, 220)}",
    )


def test_criterion_03_bad_set_probability_bound(family_batch):
    """Same families: for every m, the exact bad-set fraction is at most the
    geometric bound."""
    checked = 0
    failures = 0
    for family, p in family_batch:
        profile = bad_profile(family, HALF)
        for m in range(1, family.n + 1):
            checked += 1
            if profile[m] > key_lemma_bound(family.n, m, p):
                failures += 1
    _report(
        "criterion 3 (bad-set probability bound)",
        failures == 0,
        f"{checked} (family, m) pairs checked exactly, {failures} failures",
    )


def test_criterion_04_witness_count_bound(family_batch):
    """Exhaustive witness enumeration on n <= 8: for every profile
    (union set, bad-set size, fragment size, level) the number of distinct
    witnesses stays within binom(level, fragment size)."""
    profiles = 0
    failures = 0
    families = [fp for fp in family_batch if fp[0].n <= 8]
    for family, _p in families:
        groups = {}
        for x, record in enumerate_witness_records(family, HALF):
            key = (
                record.witness.bits | x.bits,
                len(x),
                len(record.fragment),
                record.j,
            )
            groups.setdefault(key, set()).add(record.witness.bits)
        for (_z, _m, t, j), witnesses in groups.items():
            profiles += 1
            if len(witnesses) > comb(j, t):
                failures += 1
    _report(
        "criterion 4 (witness counting)",
        failures == 0 and profiles > 0,
        f"{len(families)} families, {profiles} profiles, {failures} failures",
    )


def test_criterion_05_threshold_monotonicity_and_fragment_equality(family_batch):
    """Exhaustive profile-matched pairs on n <= 7: the second bad set never
    lowers the witness threshold, and the off-set fragments agree."""
    pairs = 0
    failures = 0
    families = [fp for fp in family_batch if fp[0].n <= 7]
    for family, _p in families:
        engine = WitnessEngine(family, HALF)
        member_index = {m.bits: i for i, m in enumerate(family.base.members)}
        groups = {}
        for x, record in enumerate_witness_records(family, HALF):
            key = (
                record.j,
                record.witness.bits | x.bits,
                len(record.fragment),
                len(x),
            )
            groups.setdefault(key, []).append((x, record))
        for recs in groups.values():
            for x, rec_x in recs:
                src = member_index[rec_x.source.bits]
                for y, rec_y in recs:
                    pairs += 1
                    eps_xy = engine.level(src, y.bits)[0]
                    if eps_xy < rec_x.epsilon:
                        failures += 1
                    if (
                        rec_x.prefix.bits & ~y.bits
                        != rec_y.prefix.bits & ~y.bits
                    ):
                        failures += 1
    _report(
        "criterion 5 (threshold monotonicity / fragment equality)",
        failures == 0 and pairs > 0,
        f"{len(families)} families, {pairs} matched pairs, {failures} failures",
    )


def test_criterion_06_counting_identities():
    """Hockey-stick identity for t <= 20 and the binomial ratio bound for
    n <= 30, all exact."""
    hs_ok = all(hockey_stick_identity(t) for t in range(1, 21))
    ratio_checked = 0
    ratio_ok = True
    for n in range(2, 31):
        for m in range(1, n):
            for t in range(0, n - m + 1):
                ratio_checked += 1
                if not binomial_ratio_bound(n, m, t):
                    ratio_ok = False
    _report(
        "criterion 6 (counting identities)",
        hs_ok and ratio_ok,
        f"hockey stick t<=20 and {ratio_checked} ratio triples",
    )


def test_criterion_07_subset_theorems(family_batch, small_selector_batch):
    """Uniform-subset battery: conditional expectation >= 1/10 on the
    admissible m grid, threshold families small at m/(9n) and C m/n, and
    the km-vs-m subset comparison, all exact."""
    master_checked = 0
    failures = 0
    for family, p in family_batch:
        if family.n > 8:
            continue
        n = family.n
        m_lo = math.ceil(9 * p * n)
        for m in range(max(1, m_lo), n + 1):
            master_checked += 1
            if not verify_master(family, p, m, max_members=256):
                failures += 1
        for m in range(1, n + 1):
            value, lower = conditional_expectation_chain(family, p, m)
            if value < lower:
                failures += 1
    porsup_checked = 0
    cover_checked = 0
    for inst in small_selector_batch:
        n, rows = inst.n, inst.rows
        for k in range(1, n + 1):
            for m in range(1, n // k + 1):
                porsup_checked += 1
                if not verify_porsup(rows, n, m, k):
                    failures += 1
        for m in range(1, n + 1):
            cert, ok = verify_malarodzina(rows, n, m, 11, max_members=256)
            cover_checked += 1
            if not ok:
                failures += 1
            for big_c in (1, 2):
                if F(big_c * m, n) >= 1:
                    continue
                cert = remark1_certificate(rows, n, m, big_c, max_members=256)
                cover_checked += 1
                if not cert.is_small:
                    failures += 1
    _report(
        "criterion 7 (uniform-subset theorems)",
        failures == 0 and master_checked > 0,
        f"{master_checked} conditional-expectation checks, "
        f"{porsup_checked} subset comparisons, {cover_checked} covers, "
        f"{failures} failures",
    )


def _levy_build(case):
    spec = case.instance
    if case.exact_s:
        s_hat = exact_first_moment_supremum(spec)
    else:
        s_hat = F(estimate_S(spec, TRIALS, seed=SEED).value)
    if case.p is None:
        n_exp, cutoff, p = auto_tune(spec, s_hat)
    else:
        n_exp, cutoff, p = case.N, case.M, case.p
    part = discretize(spec, n_exp, cutoff, p)
    cert = build_id_certificate(part, s_hat=s_hat)
    return spec, cert


def test_criterion_08_id_pipeline():
    """Three intensity-measure specs: exact half-total certificates, zero
    containment violations over 10^5 trials, every entry frequency within
    its bound plus four standard errors."""
    details = []
    ok = True
    for case in levy_cases():
        spec, cert = _levy_build(case)
        _collected_delta_certs.append(("id", spec, cert))
        if cert.total_bound > HALF:
            ok = False
        report = verify_id_certificate(cert, spec, TRIALS, seed=SEED)
        if report.violation_count != 0:
            ok = False
        if not report.all_entries_within_bounds():
            ok = False
        details.append(
            f"{case.name}: bound~{float(cert.total_bound):.3e} "
            f"cover={len(cert.entries_for_stage('cover'))} "
            f"violations={report.violation_count} "
            f"event_freq={report.event_frequency:.2e}<=1/K={report.markov_bound:.2e}"
        )
    _report("criterion 8 (infinitely divisible pipeline)", ok, "; ".join(details))


def test_criterion_09_empirical_pipeline():
    """Three empirical instances (d <= 10): exact half-total certificates and
    zero containment violations over 10^5 trials."""
    details = []
    ok = True
    for case in empirical_cases():
        inst = case.instance
        assert inst.d <= 10
        if case.exact_s:
            s_hat = estimate_S_emp(inst, mode="exact").value
        else:
            s_hat = F(estimate_S_emp(inst, TRIALS, seed=SEED).value)
        if case.p is None:
            n_exp, cutoff, p = auto_tune_emp(inst, s_hat)
        else:
            n_exp, cutoff, p = case.N, case.M, case.p
        part = discretize_emp(inst, n_exp, cutoff, p)
        cert = build_emp_certificate(part, s_hat=s_hat)
        _collected_delta_certs.append(("emp", inst, cert))
        if cert.total_bound > HALF:
            ok = False
        report = verify_emp_certificate(cert, inst, TRIALS, seed=SEED)
        if report.violation_count != 0:
            ok = False
        if not report.all_entries_within_bounds():
            ok = False
        details.append(
            f"{case.name}: bound~{float(cert.total_bound):.3e} "
            f"cover={len(cert.entries_for_stage('cover'))} "
            f"violations={report.violation_count}"
        )
    _report("criterion 9 (empirical pipeline)", ok, "; ".join(details))


def test_criterion_10_oracle_equivalence():
    """Every certificate emitted above re-checks exactly: covers against the
    recomputed threshold family and weight, delta certificates entry by
    entry against the recomputed measures."""
    assert _collected_cover_certs, "criterion 1 must run first"
    assert _collected_delta_certs, "criteria 8 and 9 must run first"
    failures = 0
    for inst, cert in _collected_cover_certs:
        family = threshold_family(inst, 221)
        if not upset_cover_check(cert.generators, family):
            failures += 1
        if cover_weight(cert.generators, inst.p) != cert.weight:
            failures += 1
    for kind, instance, cert in _collected_delta_certs:
        if kind == "id":
            good = recheck_id_certificate(cert, instance)
        else:
            good = recheck_emp_certificate(cert, instance)
        if not good:
            failures += 1
    _report(
        "criterion 10 (oracle equivalence)",
        failures == 0,
        f"{len(_collected_cover_certs)} covers and "
        f"{len(_collected_delta_certs)} delta certificates re-checked, "
        f"{failures} failures",
    )
