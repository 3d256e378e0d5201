"""Structured-text file formats for instances, certificates, and reports.

Every format is line-based: a ``# psmall <kind> v1`` header, ``key value``
lines, and repeated record lines (``member``, ``row``, ``box``, ``fn``,
``generator``, ``entry``).  All numbers are exact fractions rendered by
``str(Fraction)``; indices are 0-based.  Writers are deterministic so that
identical inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import os
from fractions import Fraction

from .certificates import CertEntry, DeltaSmallCertificate, finalize_certificate
from .empirical import EmpiricalInstance
from .errors import InstanceParseError
from .levy import LevyMeasureSpec
from .selector import SelectorInstance
from .sets import CoverCertificate, SetFamily, Subset
from .witness import WeightedFamily

FORMAT_VERSION = "v1"


def _header(kind: str) -> str:
    return f"# psmall {kind} {FORMAT_VERSION}"


class _Reader:
    def __init__(self, path: str, expect_kind: str):
        self.path = path
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read().splitlines()
        self.lines = []
        for no, line in enumerate(raw, start=1):
            stripped = line.strip()
            if no == 1:
                expected = _header(expect_kind)
                if stripped != expected:
                    raise InstanceParseError(
                        path, 1, f"expected header {expected!r}, got {stripped!r}"
                    )
                continue
            if not stripped or stripped.startswith("#"):
                continue
            self.lines.append((no, stripped))

    def fields(self):
        for no, line in self.lines:
            parts = line.split()
            yield no, parts[0], parts[1:]

    def error(self, no: int, message: str):
        raise InstanceParseError(self.path, no, message)


def _frac(reader: _Reader, no: int, token: str) -> Fraction:
    try:
        return Fraction(token)
    except (ValueError, ZeroDivisionError):
        reader.error(no, f"not a fraction: {token!r}")


def _int(reader: _Reader, no: int, token: str) -> int:
    try:
        return int(token)
    except ValueError:
        reader.error(no, f"not an integer: {token!r}")


# ---------------------------------------------------------------------------
# set families


def write_set_family(path: str, family: SetFamily, p: Fraction):
    lines = [_header("set-family"), f"n {family.n}", f"p {p}"]
    for member in sorted(family.member_bits()):
        ids = [str(i) for i in Subset(member, family.n).indices()]
        lines.append("member " + (" ".join(ids) if ids else "-"))
    _write(path, lines)


def read_set_family(path: str):
    reader = _Reader(path, "set-family")
    n = None
    p = None
    members = []
    for no, key, args in reader.fields():
        if key == "n":
            n = _int(reader, no, args[0])
        elif key == "p":
            p = _frac(reader, no, args[0])
        elif key == "member":
            if n is None:
                reader.error(no, "member before n")
            if args == ["-"]:
                members.append([])
            else:
                members.append([_int(reader, no, a) for a in args])
        else:
            reader.error(no, f"unknown key {key!r}")
    if n is None or p is None:
        raise InstanceParseError(path, 0, "missing n or p")
    return SetFamily.from_indices(n, members), p


# ---------------------------------------------------------------------------
# weighted families


def write_weighted_family(path: str, family: WeightedFamily, p: Fraction):
    lines = [_header("weighted-family"), f"n {family.n}", f"p {p}"]
    for member, coeffs in zip(family.base.members, family.coeffs):
        parts = [f"{i}:{coeffs[i]}" for i in member.indices()]
        lines.append("member " + " ".join(parts))
    _write(path, lines)


def read_weighted_family(path: str):
    reader = _Reader(path, "weighted-family")
    n = None
    p = None
    members = []
    for no, key, args in reader.fields():
        if key == "n":
            n = _int(reader, no, args[0])
        elif key == "p":
            p = _frac(reader, no, args[0])
        elif key == "member":
            pairs = []
            for token in args:
                if ":" not in token:
                    reader.error(no, f"expected index:coefficient, got {token!r}")
                idx, value = token.split(":", 1)
                pairs.append((_int(reader, no, idx), _frac(reader, no, value)))
            members.append(([i for i, _ in pairs], [v for _, v in pairs]))
        else:
            reader.error(no, f"unknown key {key!r}")
    if n is None or p is None:
        raise InstanceParseError(path, 0, "missing n or p")
    return WeightedFamily.from_lists(n, members), p


# ---------------------------------------------------------------------------
# selector instances


def write_selector_instance(path: str, inst: SelectorInstance):
    lines = [_header("selector"), f"n {inst.n}", f"p {inst.p}"]
    for row in inst.rows:
        lines.append("row " + " ".join(str(v) for v in row))
    _write(path, lines)


def read_selector_instance(path: str) -> SelectorInstance:
    reader = _Reader(path, "selector")
    n = None
    p = None
    rows = []
    for no, key, args in reader.fields():
        if key == "n":
            n = _int(reader, no, args[0])
        elif key == "p":
            p = _frac(reader, no, args[0])
        elif key == "row":
            rows.append([_frac(reader, no, a) for a in args])
        else:
            reader.error(no, f"unknown key {key!r}")
    if n is None or p is None or not rows:
        raise InstanceParseError(path, 0, "missing n, p, or rows")
    return SelectorInstance.build(n, rows, p)


# ---------------------------------------------------------------------------
# intensity measure specs


def write_levy_spec(path: str, spec: LevyMeasureSpec):
    lines = [_header("levy-spec"), "labels " + " ".join(spec.labels)]
    for box in spec.boxes:
        parts = [f"box {box.mass}"]
        for label, (lo, hi) in zip(spec.labels, box.intervals):
            parts.append(f"{label}={lo}:{hi}")
        lines.append(" ".join(parts))
    _write(path, lines)


def read_levy_spec(path: str) -> LevyMeasureSpec:
    reader = _Reader(path, "levy-spec")
    labels = None
    boxes = []
    for no, key, args in reader.fields():
        if key == "labels":
            labels = tuple(args)
        elif key == "box":
            if labels is None:
                reader.error(no, "box before labels")
            mass = _frac(reader, no, args[0])
            intervals = {}
            for token in args[1:]:
                if "=" not in token or ":" not in token:
                    reader.error(no, f"expected label=lo:hi, got {token!r}")
                label, bounds = token.split("=", 1)
                lo, hi = bounds.split(":", 1)
                intervals[label] = (
                    _frac(reader, no, lo),
                    _frac(reader, no, hi),
                )
            missing = [lb for lb in labels if lb not in intervals]
            if missing:
                reader.error(no, f"box missing labels {missing}")
            boxes.append((mass, [intervals[lb] for lb in labels]))
        else:
            reader.error(no, f"unknown key {key!r}")
    if labels is None or not boxes:
        raise InstanceParseError(path, 0, "missing labels or boxes")
    return LevyMeasureSpec.build(labels, boxes)


# ---------------------------------------------------------------------------
# empirical instances


def write_empirical_instance(path: str, inst: EmpiricalInstance):
    lines = [_header("empirical"), f"d {inst.d}"]
    for fn in inst.fns:
        parts = [f"{b}:{v}" for b, v in zip(fn.breaks, fn.values)]
        lines.append("fn " + " ".join(parts))
    _write(path, lines)


def read_empirical_instance(path: str) -> EmpiricalInstance:
    reader = _Reader(path, "empirical")
    d = None
    fns = []
    for no, key, args in reader.fields():
        if key == "d":
            d = _int(reader, no, args[0])
        elif key == "fn":
            pairs = []
            for token in args:
                if ":" not in token:
                    reader.error(no, f"expected break:value, got {token!r}")
                b, v = token.split(":", 1)
                pairs.append((_frac(reader, no, b), _frac(reader, no, v)))
            fns.append(pairs)
        else:
            reader.error(no, f"unknown key {key!r}")
    if d is None or not fns:
        raise InstanceParseError(path, 0, "missing d or fn lines")
    return EmpiricalInstance.build(fns, d)


# ---------------------------------------------------------------------------
# cover certificates


def write_cover_certificate(path: str, cert: CoverCertificate):
    lines = [
        _header("certificate"),
        "kind cover",
        f"n {cert.generators.n}",
        f"p {cert.p}",
        f"weight {cert.weight}",
    ]
    for bits in sorted(cert.generators.member_bits()):
        ids = [str(i) for i in Subset(bits, cert.generators.n).indices()]
        lines.append("generator " + (" ".join(ids) if ids else "-"))
    _write(path, lines)


def read_cover_certificate(path: str) -> CoverCertificate:
    reader = _Reader(path, "certificate")
    fields = {}
    generators = []
    for no, key, args in reader.fields():
        if key == "kind":
            if args != ["cover"]:
                reader.error(no, f"expected cover certificate, got {args}")
        elif key in ("n", "p", "weight"):
            fields[key] = (no, args[0])
        elif key == "generator":
            generators.append([] if args == ["-"] else args)
        else:
            reader.error(no, f"unknown key {key!r}")
    for needed in ("n", "p", "weight"):
        if needed not in fields:
            raise InstanceParseError(path, 0, f"missing {needed}")
    n = _int(reader, *fields["n"])
    p = _frac(reader, *fields["p"])
    weight = _frac(reader, *fields["weight"])
    members = [[int(i) for i in ids] for ids in generators]
    cert = CoverCertificate(SetFamily.from_indices(n, members), p, weight)
    return cert


# ---------------------------------------------------------------------------
# delta-small certificates


def _entry_lines(cert: DeltaSmallCertificate):
    lines = []
    for entry in cert.entries:
        kind = entry.descriptor[0]
        if kind in ("tail", "small-values"):
            payload = entry.descriptor[1]
            key = "label" if isinstance(payload, str) else "fn"
            spec = f"{key}={payload}"
        elif kind in ("remainder", "double-hit"):
            spec = f"cell={entry.descriptor[1]}"
        elif kind == "cover":
            spec = "slices=" + ",".join(map(str, entry.descriptor[1]))
        else:
            raise ValueError(f"unknown entry kind {kind!r}")
        parts = [f"entry {kind} {spec}"]
        if entry.count != 1:
            parts.append(f"count={entry.count}")
        parts.append(f"u={entry.u}")
        parts.append(f"bound={entry.bound}")
        lines.append(" ".join(parts))
    return lines


def write_delta_certificate(path: str, cert: DeltaSmallCertificate):
    lines = [
        _header("certificate"),
        "kind delta-small",
        f"process {cert.kind}",
        f"K {cert.K}",
        f"s-hat {cert.s_hat}",
        f"N {cert.N}",
        f"M {cert.M}",
        f"p {cert.p}",
        f"d {cert.d}",
        f"total-bound {cert.total_bound}",
    ]
    lines.extend(_entry_lines(cert))
    _write(path, lines)


def read_delta_certificate(path: str) -> DeltaSmallCertificate:
    reader = _Reader(path, "certificate")
    fields = {}
    entries = []
    for no, key, args in reader.fields():
        if key == "kind":
            if args != ["delta-small"]:
                reader.error(no, f"expected delta-small certificate, got {args}")
        elif key in ("process",):
            fields["process"] = args[0]
        elif key in ("K", "s-hat", "M", "p", "total-bound"):
            fields[key] = _frac(reader, no, args[0])
        elif key in ("N", "d"):
            fields[key] = _int(reader, no, args[0])
        elif key == "entry":
            entries.append(_parse_entry(reader, no, args))
        else:
            reader.error(no, f"unknown key {key!r}")
    for needed in ("process", "K", "s-hat", "N", "M", "p", "d", "total-bound"):
        if needed not in fields:
            raise InstanceParseError(path, 0, f"missing {needed}")
    cert = finalize_certificate(
        fields["process"],
        fields["K"],
        fields["s-hat"],
        fields["N"],
        fields["M"],
        fields["p"],
        fields["d"],
        entries,
    )
    if cert.total_bound != fields["total-bound"]:
        raise InstanceParseError(
            path, 0,
            f"stored total bound {fields['total-bound']} != recomputed {cert.total_bound}",
        )
    return cert


def _parse_entry(reader: _Reader, no: int, args) -> CertEntry:
    stage = args[0]
    options = {}
    for token in args[1:]:
        if "=" not in token:
            reader.error(no, f"expected key=value, got {token!r}")
        key, value = token.split("=", 1)
        options[key] = value
    u = _frac(reader, no, options.pop("u", None) or reader.error(no, "missing u"))
    bound = _frac(
        reader, no, options.pop("bound", None) or reader.error(no, "missing bound")
    )
    count = int(options.pop("count", 1))
    if stage in ("tail", "small-values"):
        if "label" in options:
            descriptor = (stage, options.pop("label"))
        elif "fn" in options:
            descriptor = (stage, int(options.pop("fn")))
        else:
            reader.error(no, "tail entry needs label= or fn=")
    elif stage in ("remainder", "double-hit"):
        descriptor = (stage, int(options.pop("cell")))
    elif stage == "cover":
        ids = tuple(int(i) for i in options.pop("slices").split(","))
        descriptor = (stage, ids)
    else:
        reader.error(no, f"unknown entry stage {stage!r}")
    if options:
        reader.error(no, f"unknown entry options {sorted(options)}")
    return CertEntry(stage=stage, descriptor=descriptor, u=u, bound=bound, count=count)


# ---------------------------------------------------------------------------


def _write(path: str, lines):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_verify_report(path_prefix: str, report):
    """Per-entry verification report as structured text plus CSV.

    ``path_prefix`` gains ``.txt`` and ``.csv``; rows cover every
    certificate entry with its firing frequency against the exact bound.
    """
    rows = report.summary_rows()
    lines = [
        _header("verify-report"),
        f"process {report.kind}",
        f"trials {report.trials}",
        f"seed {report.seed}",
        f"threshold {report.threshold!r}",
        f"event-count {report.event_count}",
        f"event-frequency {report.event_frequency!r}",
        f"markov-bound {report.markov_bound!r}",
        f"violations {report.violation_count}",
    ]
    for row in rows:
        lines.append(
            "entry "
            + " ".join(
                f"{key}={row[key]}"
                for key in (
                    "stage", "descriptor", "count", "u", "bound",
                    "fired", "frequency", "within_bound",
                )
            )
        )
    _write(path_prefix + ".txt", lines)
    with open(path_prefix + ".csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=[
                "stage", "descriptor", "count", "u", "bound",
                "fired", "frequency", "within_bound",
            ],
        )
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


INSTANCE_READERS = {
    "set-family": read_set_family,
    "weighted-family": read_weighted_family,
    "selector": read_selector_instance,
    "levy-spec": read_levy_spec,
    "empirical": read_empirical_instance,
}


def sniff_kind(path: str) -> str:
    """Read the header line and return the file kind."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
    parts = first.split()
    if len(parts) != 4 or parts[0] != "#" or parts[1] != "psmall":
        raise InstanceParseError(path, 1, f"not a psmall file: {first!r}")
    return parts[2]
