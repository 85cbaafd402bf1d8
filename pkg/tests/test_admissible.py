"""Tests for admissible windows, partitions and the morphism builder."""
import math
from fractions import Fraction

import pytest

from coarse_towers.admissible import (
    AdmissibleSequences,
    balanced_partition,
    build_admissible_morphism,
    check_l2_preconditions,
    fiber_counts,
)
from coarse_towers.errors import InputError, PreconditionFailed
from coarse_towers.morphisms import ASYMORPHISM
from coarse_towers.towers import DegreeProfile, degree_profile, regular_tower


@pytest.fixture
def grouped_pair():
    T1 = regular_tower([27, 4], 3)
    T2 = regular_tower([64], 2)
    return T1, T2, AdmissibleSequences((1, 4), (8, 8))


def test_preconditions_hold(grouped_pair):
    T1, T2, seqs = grouped_pair
    report = check_l2_preconditions(degree_profile(T1), degree_profile(T2), seqs)
    assert report.ok
    assert report.notes


def test_preconditions_fail_with_levels():
    p = DegreeProfile.from_degrees([2, 2])
    report = check_l2_preconditions(p, p, AdmissibleSequences((1, 1), (3, 3)))
    lower = report.by_check("lower")[0]
    assert lower.witness == ("1",)
    assert (lower.expected, lower.actual) == (2, 5)
    assert not report.passed("upper")
    assert report.passed("successor")


def test_sequences_need_equal_lengths():
    with pytest.raises(InputError):
        AdmissibleSequences((1, 2), (3,))
    seqs = AdmissibleSequences(("1/2", 3), (4, 5))
    assert seqs.integer_window(1) == (1, 4)
    with pytest.raises(PreconditionFailed):
        seqs.window(3)


@pytest.mark.parametrize("n, parts, lo, hi, sizes", [
    (4, 2, 2, 2, [2, 2]),
    (5, 2, 2, 3, [3, 2]),
    (27, 16, 1, 8, [2] * 11 + [1] * 5),
])
def test_balanced_partition(n, parts, lo, hi, sizes):
    items = [str(k) for k in range(n)]
    blocks = balanced_partition(items, parts, lo, hi)
    assert [len(b) for b in blocks] == sizes
    assert [x for b in blocks for x in b] == items


def test_balanced_partition_out_of_window():
    with pytest.raises(PreconditionFailed) as err:
        balanced_partition(list("abcdefg"), 2, 2, 3)
    assert err.value.inequality == "2*2 <= 7 <= 2*3"


def test_fiber_counts_prefer_least_ids():
    assert fiber_counts(10, ["a", "b", "c"]) == {"a": 4, "b": 3, "c": 3}
    assert fiber_counts(64, ["w", "x", "y", "z"]) == dict.fromkeys("wxyz", 16)


def test_builder_gives_certified_asymorphism(grouped_pair):
    T1, T2, seqs = grouped_pair
    result = build_admissible_morphism(T1, T1.children[T1.top], T2, T2.top, seqs)
    assert result.admissible.ok
    assert result.bounds.ok
    assert result.certificate.kind == ASYMORPHISM
    assert result.certificate.check("admissible").passed
    assert len(result.base_map.source) == 108
    assert len(result.base_map.target) == 64
    fibers = {}
    for b in T1.base:
        fibers.setdefault(result.node_map[b], []).append(b)
    assert sorted({len(v) for v in fibers.values()}) == [1, 2]
    assert len(fibers) == 64


def test_builder_reports_failing_precondition():
    T = regular_tower([2, 2], 3)
    with pytest.raises(PreconditionFailed) as err:
        build_admissible_morphism(T, T.children[T.top], T, T.top, AdmissibleSequences((1, 1), (3, 3)))
    assert err.value.level == 1
    assert err.value.inequality == "lower"


def test_builder_rejects_set_outside_window(grouped_pair):
    T1, T2, seqs = grouped_pair
    with pytest.raises(PreconditionFailed) as err:
        build_admissible_morphism(T1, T1.children[T1.top][:2], T2, T2.top, seqs)
    assert err.value.level == 2


def grouped_cases():
    """(d, s, t, b1): T1 = [d, s], T2 = [s*t], a = (1, s-2), b = (b1, s); every case meets the windows."""
    cases = []
    for b1 in (6, 7, 8):
        for t in (4, 5, 6):
            for s in (4, 5, 6):
                lo = math.ceil(b1 + Fraction(s * t, s - 2))
                hi = 1 + b1 * (t - 2)
                cases.extend((d, s, t, b1) for d in sorted({lo, (lo + hi) // 2, hi}) if lo <= d <= hi)
    return cases


def test_grouped_cases_are_plentiful():
    assert len(grouped_cases()) >= 50


@pytest.mark.parametrize("d, s, t, b1", grouped_cases())
def test_builder_distortion_bounds_across_windows(d, s, t, b1):
    T1 = regular_tower([d, s], 3)
    T2 = regular_tower([s * t], 2)
    seqs = AdmissibleSequences((1, s - 2), (b1, s))
    assert check_l2_preconditions(degree_profile(T1), degree_profile(T2), seqs).ok
    result = build_admissible_morphism(T1, T1.children[T1.top], T2, T2.top, seqs)
    assert result.bounds.ok
    assert result.admissible.ok
    assert result.certificate.kind == ASYMORPHISM
