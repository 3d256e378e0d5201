"""Reference process instances exercising every certificate path.

Three intensity-measure specs and three empirical instances, chosen so the
battery covers: an auto-tuned build whose cover stage is empty, a build
with genuine tail / small-value / remainder entries, and a narrow
concentrated instance whose cover stage is nonempty.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .empirical import EmpiricalInstance
from .levy import LevyMeasureSpec

F = Fraction


@dataclass(frozen=True)
class ReferenceCase:
    """A named instance plus fixed build parameters (None marks auto-tune)."""

    name: str
    instance: object
    N: int = None
    M: Fraction = None
    p: Fraction = None
    exact_s: bool = False  # use the exact expectation instead of Monte Carlo


def levy_cases() -> list:
    unit_box = LevyMeasureSpec.build(("a",), [(F(1, 2), [(1, 2)])])
    two_label = LevyMeasureSpec.build(
        ("a", "b"),
        [
            (F(1, 3), [(1, F(3, 2)), (0, F(1, 2))]),
            (F(1, 8), [(0, F(1, 4)), (F(3, 4), 2)]),
        ],
    )
    narrow_box = LevyMeasureSpec.build(("a",), [(F(1, 160), [(1, F(5, 4))])])
    return [
        ReferenceCase("unit-box", unit_box, exact_s=True),
        ReferenceCase("two-label", two_label, N=1, M=F(3, 2), p=F(1, 760)),
        ReferenceCase("narrow-box", narrow_box, N=1, M=F(2), p=F(1, 2560), exact_s=True),
    ]


def empirical_cases() -> list:
    half = EmpiricalInstance.build([[(0, 1), (F(1, 2), 0)]], 2)
    two_fn = EmpiricalInstance.build(
        [
            [(0, F(1, 4)), (F(1, 3), F(3, 4))],
            [(0, F(1, 2)), (F(2, 3), 0)],
        ],
        3,
    )
    narrow = EmpiricalInstance.build([[(0, 1), (F(1, 2800), 0)]], 2)
    return [
        ReferenceCase("half-indicator", half, exact_s=True),
        ReferenceCase("two-functions", two_fn, exact_s=True),
        ReferenceCase("narrow-support", narrow, N=2, M=F(2), p=F(1, 89600), exact_s=True),
    ]
