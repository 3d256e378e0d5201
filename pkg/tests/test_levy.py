"""Poisson sampling, grid discretization, and the delta-small certificate."""

import math
from fractions import Fraction

import pytest

from psmall.errors import GuardLimitError
from psmall.levy import (
    DEFAULT_K,
    E_UPPER,
    Box,
    LevyMeasureSpec,
    auto_tune,
    build_id_certificate,
    discretize,
    estimate_S,
    exact_first_moment_supremum,
    recheck_id_certificate,
    sample_ppp,
    verify_id_certificate,
)
from psmall.rng import CounterRNG

F = Fraction


def single_box_spec(mass=F(1, 2), lo=1, hi=2):
    return LevyMeasureSpec.build(("a",), [(mass, [(lo, hi)])])


TWO_LABEL_SPEC = LevyMeasureSpec.build(
    ("a", "b"),
    [
        (F(1, 3), [(1, F(3, 2)), (0, F(1, 2))]),
        (F(1, 8), [(0, F(1, 4)), (F(3, 4), 2)]),
    ],
)

NARROW_SPEC = single_box_spec(F(1, 160), 1, F(5, 4))


class TestSpecValidation:
    def test_zero_width_rejected(self):
        with pytest.raises(ValueError):
            LevyMeasureSpec.build(("a",), [(F(1, 2), [(1, 1)])])

    def test_negative_orthant_rejected(self):
        with pytest.raises(ValueError):
            LevyMeasureSpec.build(("a",), [(F(1, 2), [(-1, 1)])])

    def test_nonpositive_mass_rejected(self):
        with pytest.raises(ValueError):
            Box(F(0), ((F(0), F(1)),))

    def test_exact_integrals(self):
        spec = single_box_spec()
        assert spec.total_mass == F(1, 2)
        assert spec.first_moment(0) == F(3, 4)
        assert spec.tail_mass(0, F(3, 2)) == F(1, 4)
        assert spec.tail_mass(0, 2) == 0
        assert spec.small_value_integral(0, F(1, 2)) == 0
        assert spec.small_value_integral(0, F(3, 2)) == F(1, 2) * F(
            (F(3, 2) ** 2 - 1), 2
        )
        assert spec.mass_below(F(3, 2)) == F(1, 4)

    def test_two_label_mass_below(self):
        # coordinates are independent uniforms within each box
        assert TWO_LABEL_SPEC.mass_below(F(3, 2)) == F(1, 3) + F(1, 8) * F(3, 5)


class TestSamplePPP:
    def test_empty_measure_when_poisson_zero(self):
        # rate 1/1000: nearly always zero points; check determinism too
        spec = single_box_spec(F(1, 1000))
        assert sample_ppp(spec, 5) == sample_ppp(spec, 5)

    def test_poisson_mean(self):
        spec = single_box_spec()
        counts = []
        for trial in range(20_000):
            rng = CounterRNG(42, "count-test", trial)
            lam = float(spec.total_mass)
            counts.append(rng.poisson(lam))
        mean = sum(counts) / len(counts)
        se = (sum((c - mean) ** 2 for c in counts) / len(counts)) ** 0.5 / math.sqrt(
            len(counts)
        )
        assert abs(mean - 0.5) <= 4 * se

    def test_points_inside_boxes(self):
        for seed in range(30):
            for box_idx, coords in sample_ppp(TWO_LABEL_SPEC, seed):
                box = TWO_LABEL_SPEC.boxes[box_idx]
                for x, (lo, hi) in zip(coords, box.intervals):
                    assert float(lo) <= x < float(hi)


class TestEstimateS:
    def test_single_label_matches_first_moment(self):
        spec = single_box_spec()
        est = estimate_S(spec, 20_000, seed=1)
        assert abs(est.value - 0.75) <= 4 * est.stderr

    def test_zero_mass_not_representable(self):
        with pytest.raises(ValueError):
            single_box_spec(F(0))

    def test_equal_interval_labels_dominate_single(self):
        # two labels with equal boxes draw independent coordinates per point
        # (the box model cannot express pointwise-identical coordinates), so
        # the supremum over the pair can only raise the expectation
        dup = LevyMeasureSpec.build(
            ("a", "b"), [(F(1, 2), [(1, 2), (1, 2)])]
        )
        est_dup = estimate_S(dup, 20_000, seed=9)
        assert est_dup.value >= 0.75 - 4 * est_dup.stderr


class TestDiscretize:
    def test_reference_geometry(self):
        part = discretize(single_box_spec(), 1, 2, F(1, 40))
        assert len(part.cells) == 4
        assert [c.levels for c in part.cells] == [(4,), (5,), (6,), (7,)]
        assert all(c.mass == F(1, 8) for c in part.cells)
        assert all(c.coeffs == (F(k + 1, 4),) for c, k in zip(part.cells, range(4, 8)))

    def test_reference_slicing(self):
        part = discretize(single_box_spec(), 1, 2, F(1, 40))
        assert all(c.slice_count == 5 for c in part.cells)
        assert all(c.remainder_mass == 0 for c in part.cells)
        assert part.n_slices == 20

    def test_coefficient_sandwich_sampled(self):
        part = discretize(TWO_LABEL_SPEC, 1, F(3, 2), F(1, 760))
        cells = part.cell_by_levels()
        band = 1.0 / 4
        rng = CounterRNG(17, "sandwich")
        for _ in range(2_000):
            # sample a random point from the measure below the cutoff
            while True:
                u = rng.uniform() * float(TWO_LABEL_SPEC.total_mass)
                box_idx = 0 if u < 1 / 3 else 1
                box = TWO_LABEL_SPEC.boxes[box_idx]
                coords = tuple(
                    float(lo) + rng.uniform() * float(hi - lo)
                    for lo, hi in box.intervals
                )
                if all(x < 1.5 for x in coords):
                    break
            levels = tuple(int(x / band) for x in coords)
            cell = cells[levels]
            for x, coeff in zip(coords, cell.coeffs):
                assert float(coeff) - band <= x < float(coeff)

    def test_mass_conservation(self):
        part = discretize(TWO_LABEL_SPEC, 1, F(3, 2), F(1, 760))
        total = sum(
            (c.slice_count * part.p + c.remainder_mass for c in part.cells),
            F(0),
        )
        assert total == TWO_LABEL_SPEC.mass_below(F(3, 2))

    def test_s_hat_preconditions_enforced(self):
        spec = single_box_spec()
        # the worked slicing example p = 1/40 fails the slice-count bound
        with pytest.raises(ValueError):
            discretize(spec, 1, 2, F(1, 40), s_hat=F(3, 4))
        # and passes once p is small enough
        part = discretize(spec, 1, 2, F(1, 192), s_hat=F(3, 4))
        assert all(c.slice_count == 24 for c in part.cells)

    def test_cell_guard(self):
        with pytest.raises(GuardLimitError):
            discretize(single_box_spec(), 6, 2, F(1, 40), max_cells=100)


class TestAutoTune:
    def test_reference_tuning(self):
        spec = single_box_spec()
        n, m, p = auto_tune(spec, F(3, 4))
        assert (n, m) == (1, 2)
        assert p == F(1, 8) / 24
        part = discretize(spec, n, m, p, s_hat=F(3, 4))
        assert part.n_slices == 96

    def test_two_label_tuning_satisfies_budgets(self):
        s_hat = F(3, 5)
        n, m, p = auto_tune(TWO_LABEL_SPEC, s_hat)
        part = discretize(TWO_LABEL_SPEC, n, m, p, s_hat=s_hat)
        assert part.n_slices * p * p < F(1, 16)


class TestBuildCertificate:
    def test_reference_certificate_empty_cover(self):
        spec = single_box_spec()
        part = discretize(spec, 1, 2, F(1, 192), s_hat=F(3, 4))
        cert = build_id_certificate(part, DEFAULT_K, F(3, 4))
        assert cert.total_bound <= F(1, 2)
        assert cert.stage_totals["double-hit"] == 96 * F(1, 192) ** 2
        assert not cert.entries_for_stage("cover")
        assert not cert.entries_for_stage("tail")
        assert not cert.entries_for_stage("small-values")
        assert recheck_id_certificate(cert, spec)

    def test_explicit_cutoff_produces_tail_entries(self):
        part = discretize(TWO_LABEL_SPEC, 1, F(3, 2), F(1, 760))
        cert = build_id_certificate(part, DEFAULT_K, F(3, 5))
        tails = cert.entries_for_stage("tail")
        assert len(tails) == 1 and tails[0].bound == F(1, 20)
        smalls = cert.entries_for_stage("small-values")
        assert smalls and all(e.bound > 0 for e in smalls)
        assert cert.total_bound <= F(1, 2)
        assert recheck_id_certificate(cert, TWO_LABEL_SPEC)

    def test_narrow_spec_nonempty_cover(self):
        s = exact_first_moment_supremum(NARROW_SPEC)
        assert s == F(9, 1280)
        part = discretize(NARROW_SPEC, 1, 2, F(1, 2560), s_hat=s)
        assert part.n_slices == 16
        cert = build_id_certificate(part, DEFAULT_K, s)
        cover = cert.entries_for_stage("cover")
        # threshold 2500 * 9/1280 = 17.578..; fifteen slices at 5/4 reach it
        assert len(cover) == 16
        assert all(e.u == 15 for e in cover)
        assert all(e.bound == (E_UPPER * F(1, 2560)) ** 15 for e in cover)
        assert cert.stage_totals["cover"] <= F(1, 4)
        assert recheck_id_certificate(cert, NARROW_SPEC)

    def test_chernoff_entry_dominates_exact_poisson_tail(self):
        # P(Poisson(p) >= 1) = 1 - e^-p <= e * p
        p = 0.1
        assert 1 - math.exp(-p) <= float(E_UPPER) * p

    def test_double_hit_bound_dominates(self):
        p = 0.1
        assert 1 - math.exp(-p) * (1 + p) <= p * p


class TestVerifyCertificate:
    def test_reference_zero_violations(self):
        spec = single_box_spec()
        part = discretize(spec, 1, 2, F(1, 192), s_hat=F(3, 4))
        cert = build_id_certificate(part, DEFAULT_K, F(3, 4))
        report = verify_id_certificate(cert, spec, trials=4_000, seed=3)
        assert report.violation_count == 0
        assert report.event_count == 0  # threshold 1875 is astronomically far
        assert report.all_entries_within_bounds()

    def test_tail_entries_fire_at_their_rate(self):
        part = discretize(TWO_LABEL_SPEC, 1, F(3, 2), F(1, 760))
        cert = build_id_certificate(part, DEFAULT_K, F(3, 5))
        report = verify_id_certificate(cert, TWO_LABEL_SPEC, trials=20_000, seed=11)
        assert report.violation_count == 0
        tail_stats = [
            s for s in report.entry_stats if s.entry.stage == "tail"
        ]
        assert tail_stats[0].fired > 0
        assert report.all_entries_within_bounds()

    def test_double_hit_frequency_matches(self):
        # fat slices to make double hits visible: p = 1/16 on one cell
        spec = single_box_spec(F(1, 2), 1, F(5, 4))
        part = discretize(spec, 1, 2, F(1, 16))
        cert = build_id_certificate(part, DEFAULT_K, F(9, 16))
        report = verify_id_certificate(cert, spec, trials=30_000, seed=19)
        stat = next(s for s in report.entry_stats if s.entry.stage == "double-hit")
        expected = 1 - math.exp(-1 / 16) * (1 + 1 / 16)
        assert stat.member_fires, "expected visible double hits at p = 1/16"
        assert report.all_entries_within_bounds()
        # worst per-slice frequency should approach the exact rate from below
        worst = stat.frequency(report.trials)
        assert worst <= float(cert.p) ** 2
        assert worst >= expected / 3

    def test_report_rows_shape(self):
        part = discretize(TWO_LABEL_SPEC, 1, F(3, 2), F(1, 760))
        cert = build_id_certificate(part, DEFAULT_K, F(3, 5))
        report = verify_id_certificate(cert, TWO_LABEL_SPEC, trials=500, seed=2)
        rows = report.summary_rows()
        assert len(rows) == len(cert.entries)
        assert {"stage", "bound", "fired", "frequency"} <= set(rows[0])


class TestGridBridge:
    def test_slice_sup_within_twice_process_sup(self):
        from psmall.levy import estimate_slice_sup

        spec = TWO_LABEL_SPEC
        part = discretize(spec, 1, F(3, 2), F(1, 760))
        s = estimate_S(spec, 20_000, seed=41)
        s_grid = estimate_slice_sup(part, 20_000, seed=42)
        assert s_grid.value <= 2 * s.value + 4 * (s_grid.stderr + 2 * s.stderr)

    def test_single_box_bridge(self):
        from psmall.levy import estimate_slice_sup

        spec = single_box_spec()
        part = discretize(spec, 1, 2, F(1, 192))
        s_grid = estimate_slice_sup(part, 20_000, seed=43)
        # exact process expectation is 3/4; the grid only adds 1/4^N slack
        assert s_grid.value <= 2 * 0.75 + 4 * s_grid.stderr
