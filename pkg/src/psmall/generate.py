"""Reproducible random instance generation for campaign runs.

Set-family and weighted-family generation rejection-samples against the
exact smallness oracle so every emitted family is certified not p-small
(the expectation lower bounds hypothesize that).  Identical seeds produce
identical files.
"""

from __future__ import annotations

import os
from fractions import Fraction

from . import io_formats
from .empirical import EmpiricalInstance
from .levy import LevyMeasureSpec
from .rng import CounterRNG
from .selector import SelectorInstance
from .sets import SetFamily, is_p_small
from .witness import WeightedFamily

F = Fraction

KINDS = ("set-family", "weighted-family", "selector", "levy-spec", "empirical")


def _non_small_family(rng: CounterRNG, n_max: int):
    """Random family plus a probability under which it is provably not
    p-small: all singletons (forcing cover weight at least n*p > 1/2) plus
    random larger members."""
    n = max(5, 5 + rng.randint(max(1, n_max - 4)))
    p = F(1, 2 * n - 1)
    members = [[i] for i in range(n)]
    extras = 1 + rng.randint(4)
    for _ in range(extras):
        size = 2 + rng.randint(min(3, n - 2) + 1)
        members.append(rng.sample_without_replacement(n, size))
    family = SetFamily.from_indices(n, members)
    small, _ = is_p_small(family, p)
    assert not small, "singleton weight exceeds 1/2 by construction"
    return family, p, n


def _weight_vector(rng: CounterRNG, indices, target_sum: Fraction):
    weights = [1 + rng.randint(6) for _ in indices]
    total = sum(weights)
    return [target_sum * F(w, total) for w in weights]


def generate_instances(kind: str, count: int, n_max: int, seed: int, out_dir: str):
    """Write ``count`` instance files of the given kind; returns the paths."""
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; choose from {KINDS}")
    if count < 0:
        raise ValueError("count must be nonnegative")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for index in range(count):
        rng = CounterRNG(seed, "generate", kind, index)
        path = os.path.join(out_dir, f"{kind}-{index:04d}.txt")
        if kind == "set-family":
            family, p, _ = _non_small_family(rng, n_max)
            io_formats.write_set_family(path, family, p)
        elif kind == "weighted-family":
            family, p, n = _non_small_family(rng, n_max)
            members = []
            for member in family.members:
                ids = list(member.indices())
                members.append((ids, _weight_vector(rng, ids, F(1))))
            weighted = WeightedFamily.from_lists(n, members)
            io_formats.write_weighted_family(path, weighted, p)
        elif kind == "selector":
            n = max(2, 2 + rng.randint(max(1, n_max - 1)))
            rows = [
                [F(rng.randint(8), 1 + rng.randint(6)) for _ in range(n)]
                for _ in range(1 + rng.randint(7))
            ]
            if all(v == 0 for row in rows for v in row):
                rows[0][0] = F(1)
            p = F(1, 20) + F(rng.randint(58), 240)  # within [1/20, 1/3]
            io_formats.write_selector_instance(
                path, SelectorInstance.build(n, rows, p)
            )
        elif kind == "levy-spec":
            labels = tuple(chr(ord("a") + i) for i in range(1 + rng.randint(2)))
            boxes = []
            for _ in range(1 + rng.randint(2)):
                mass = F(1 + rng.randint(4), 8 + rng.randint(8))
                intervals = []
                for _ in labels:
                    lo = F(rng.randint(8), 4)
                    width = F(1 + rng.randint(8), 4)
                    intervals.append((lo, lo + width))
                boxes.append((mass, intervals))
            io_formats.write_levy_spec(path, LevyMeasureSpec.build(labels, boxes))
        elif kind == "empirical":
            d = 1 + rng.randint(6)
            fns = []
            for _ in range(1 + rng.randint(2)):
                pieces = 1 + rng.randint(3)
                breaks = sorted(
                    {F(0)}
                    | {F(1 + rng.randint(15), 16) for _ in range(pieces - 1)}
                )
                pairs = [
                    (b, F(rng.randint(8), 4 + rng.randint(4))) for b in breaks
                ]
                fns.append(pairs)
            if all(v == 0 for fn in fns for _, v in fn):
                # a zero process has no certifiable supremum event
                fns[0][0] = (F(0), F(1, 2))
            io_formats.write_empirical_instance(
                path, EmpiricalInstance.build(fns, d)
            )
        paths.append(path)
    return paths
