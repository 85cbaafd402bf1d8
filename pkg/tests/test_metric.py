"""Tests for finite spaces, validation, nets and entropy."""
import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coarse_towers import metric
from coarse_towers.config import Caps
from coarse_towers.errors import InputError, PreconditionFailed, SizeCapExceeded, UnknownPoint
from coarse_towers.metric import (
    CLOSED,
    STRICT,
    WordSpaceSpec,
    ball,
    chain_components,
    entropy_profile,
    exact_min_net,
    from_matrix,
    hyperspace,
    line_space,
    min_net,
    product,
    rational,
    sparse_sequence_space,
    ultrametrize,
    validate_metric,
    validate_ultrametric,
    word_space,
)


def test_rational_reduces_and_keeps_integers():
    assert rational("6/4") == Fraction(3, 2)
    assert rational("2/1") == 2 and isinstance(rational("2/1"), int)
    assert rational("0.25") == Fraction(1, 4)
    assert rational(Fraction(4, 2)) == 2


@pytest.mark.parametrize("bad", [0.5, True, "x/y", "1/0"])
def test_rational_rejects_floats_and_garbage(bad):
    with pytest.raises(InputError):
        rational(bad)


def test_word_space_distances():
    X = word_space(WordSpaceSpec(2, 3))
    assert len(X) == 8
    assert X.points[:2] == ("000", "001")
    assert X.dist("000", "100") == 1
    assert X.dist("000", "010") == 2
    assert X.dist("010", "011") == 4
    assert X.realized == (0, 1, 2, 4)
    assert X.diameter() == 4
    assert validate_ultrametric(X).ok


def test_word_space_size_cap():
    with pytest.raises(SizeCapExceeded):
        word_space(WordSpaceSpec(2, 5), Caps(max_points=16))


def test_unknown_point():
    X = word_space(WordSpaceSpec(2, 2))
    with pytest.raises(UnknownPoint):
        X.dist("00", "zz")


def test_duplicate_ids_rejected():
    with pytest.raises(InputError):
        from_matrix(["a", "a"], [[0, 1], [1, 0]])


def test_strong_triangle_violation_has_witness():
    X = from_matrix(["a", "b", "c"], [[0, 1, 3], [1, 0, 1], [3, 1, 0]])
    report = validate_ultrametric(X)
    assert not report.ok
    v = report.by_check("strong-triangle")[0]
    assert v.witness == ("a", "c", "b")
    assert (v.expected, v.actual) == (1, 3)


def test_plain_triangle_violation():
    X = from_matrix(["a", "b", "c"], [[0, 1, 3], [1, 0, 1], [3, 1, 0]], ultrametric=False)
    report = validate_metric(X)
    v = report.by_check("triangle")[0]
    assert v.witness == ("a", "c", "b")
    assert (v.expected, v.actual) == (2, 3)


def test_asymmetry_and_zero_distance_reported():
    X = from_matrix(["a", "b"], [[0, 1], [2, 0]])
    assert not validate_ultrametric(X).passed("symmetry")
    Y = from_matrix(["a", "b"], [[0, 0], [0, 0]])
    assert not validate_ultrametric(Y).passed("positivity")


def test_ball_in_point_order():
    X = word_space(WordSpaceSpec(2, 3))
    assert ball(X, "000", 2) == ("000", "010", "100", "110")


def test_nets_by_convention():
    X = word_space(WordSpaceSpec(2, 3))
    assert min_net(X, X.points, 1, CLOSED) == ("000", "001", "010", "011")
    assert len(min_net(X, X.points, 1, STRICT)) == 8
    assert len(exact_min_net(X, X.points, 1, CLOSED)) == 4
    with pytest.raises(InputError):
        min_net(X, X.points, 0, STRICT)


def test_entropy_profile_of_word_space():
    X = word_space(WordSpaceSpec(2, 3))
    radii = [0, 1, 2, 4]
    profile = entropy_profile(X, radii, radii)
    assert profile.large(1, 4) == profile.small(1, 4) == 4
    assert profile.large(0, 4) == 8
    assert (profile.large(2, 0), profile.small(2, 0)) == (1, 1)
    assert profile.is_monotone()


def test_product_and_hyperspace_stay_ultrametric():
    X = word_space(WordSpaceSpec(2, 2))
    P = product(X, sparse_sequence_space([1, 4]))
    assert len(P) == 8
    assert validate_ultrametric(P).ok
    H = hyperspace(X, 2)
    assert len(H) == 4 + 6
    assert validate_ultrametric(H).ok
    assert H.dist("{00}", "{00,01}") == 2


def test_chain_components_and_ultrametrize():
    L = line_space([0, 1, 2, 5, 6])
    assert chain_components(L, 1) == (("0", "1", "2"), ("5", "6"))
    U = ultrametrize(L, [1, 3])
    assert U.dist("0", "2") == 2
    assert U.dist("0", "5") == 4
    assert validate_ultrametric(U).ok
    with pytest.raises(PreconditionFailed):
        ultrametrize(L, [1, 2])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=12), min_size=2, max_size=9, unique=True),
       st.lists(st.integers(min_value=1, max_value=6), min_size=1, max_size=3, unique=True))
def test_ultrametrize_always_validates(values, steps):
    L = line_space(values)
    scales = sorted(steps) + [13]
    assert validate_ultrametric(ultrametrize(L, scales)).ok


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=2, max_value=3), st.integers(min_value=1, max_value=3),
       st.integers(min_value=0, max_value=4))
def test_fast_nets_match_exhaustive_search(alphabet, length, exponent):
    X = word_space(WordSpaceSpec(alphabet, length))
    subset = X.points[: min(len(X), 12)]
    eps = 2 ** exponent
    assert len(min_net(X, subset, eps)) == len(exact_min_net(X, subset, eps))


def test_word_space_entropy_under_both_conventions():
    X = word_space(WordSpaceSpec(3, 2))
    closed = entropy_profile(X, [2], [2], CLOSED)
    strict = entropy_profile(X, [2], [2], STRICT)
    assert (closed.large(2, 2), closed.small(2, 2)) == (1, 1)
    assert (strict.large(2, 2), strict.small(2, 2)) == (3, 3)


def test_hyperspace_of_singletons_is_isometric():
    X = word_space(WordSpaceSpec(3, 2))
    H = hyperspace(X, 1)
    assert H.points == X.points
    for a, b in itertools.combinations(X.points, 2):
        assert H.dist(a, b) == X.dist(a, b)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=30), min_size=2, max_size=10, unique=True),
       st.integers(min_value=1, max_value=6), st.integers(min_value=1, max_value=6))
def test_chain_components_coarsen_as_r_grows(values, r, step):
    L = line_space(values)
    fine, coarse = chain_components(L, r), chain_components(L, r + step)
    assert len(coarse) <= len(fine)
    for component in fine:
        assert any(set(component) <= set(c) for c in coarse)


def test_single_linkage_replay():
    assert metric._merges_are_exact(word_space(WordSpaceSpec(2, 4)))
    assert metric._merges_are_exact(ultrametrize(line_space([0, 1, 2, 5, 6]), [1, 3]))
    assert not metric._merges_are_exact(line_space([0, 1, 2, 5, 6]))
    broken = from_matrix(["a", "b", "c"], [[0, 1, 3], [1, 0, 1], [3, 1, 0]])
    assert not metric._merges_are_exact(broken)
