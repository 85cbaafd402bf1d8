"""Tests for towers, subtowers, degree profiles and ball towers."""
import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coarse_towers.errors import InputError
from coarse_towers.metric import CLOSED, WordSpaceSpec, entropy_profile, validate_ultrametric, word_space
from coarse_towers.towers import (
    DegreeProfile,
    ball_tower,
    base_assignment,
    base_space,
    convention_shift,
    degree_profile,
    entropy_from_degrees,
    level_subtower,
    make_tower,
    path_metric,
    regular_tower,
    validate_tower,
)


def test_regular_tower_ids_and_parents():
    T = regular_tower([2, 2], 3)
    assert T.top == "3:"
    assert T.nodes_at(2) == ("2:0", "2:1")
    assert T.base == ("1:00", "1:01", "1:10", "1:11")
    assert T.parent["1:01"] == "2:1"
    assert T.children["2:0"] == ("1:00", "1:10")
    assert T.sup("1:00", "1:10") == "2:0"
    assert T.lower_cone("2:1") == ("1:01", "1:11", "2:1")


def test_path_metric_on_base():
    T = regular_tower([2, 2], 3)
    X = base_space(T)
    assert X.dist("1:00", "1:10") == path_metric(T, "1:00", "1:10") == 2
    assert X.dist("1:00", "1:01") == 4
    assert path_metric(T, "1:00", "2:1") == 3
    assert validate_ultrametric(X).ok


def test_validate_tower_reports_each_axiom():
    level = {"t": 3, "u": 3, "a": 2, "x": 1, "y": 1}
    parent = {"t": None, "u": None, "a": "t", "x": "a", "y": "t"}
    report = validate_tower(level.keys(), level, parent)
    assert not report.passed("single-germ")
    assert not report.passed("level")
    assert not report.passed("childless")


def test_validate_tower_finds_orphans():
    level = {"t": 2, "x": 1, "y": 1}
    report = validate_tower(level.keys(), level, {"t": None, "x": "t", "y": None})
    assert not report.passed("parent")
    ok = validate_tower(level.keys(), level, {"t": None, "x": "t", "y": "t"})
    assert ok.ok


def test_make_tower_rejects_invalid_input():
    with pytest.raises(InputError):
        make_tower({"t": 2, "u": 2, "x": 1}, {"t": None, "u": None, "x": "t"})


def test_level_subtower_keeps_top_and_maps_base_up():
    T = regular_tower([2, 2, 2, 2], 5)
    sub = level_subtower(T, [2, 4])
    assert sub.levels == (2, 4, 5)
    assert sub.tower.height == 3
    assert len(sub.tower.base) == 8
    assert sub.next_map["1:0110"] == "2:110"
    assert degree_profile(sub.tower).deg_n(1) == 4
    with pytest.raises(InputError):
        level_subtower(T, [3, 2])
    with pytest.raises(InputError):
        level_subtower(T, [0, 2])


def test_degree_profile_of_regular_tower():
    p = degree_profile(regular_tower([2, 3], 3))
    assert (p.deg_n(1), p.deg_n(2), p.deg(1, 3)) == (2, 3, 6)
    assert p.is_homogeneous and p.is_finite
    assert p == DegreeProfile.from_degrees([2, 3])
    assert p.check_multiplicativity().ok


def test_degree_profile_of_uneven_tower():
    level = {"t": 3, "a": 2, "b": 2, "x1": 1, "x2": 1, "y1": 1, "y2": 1, "y3": 1}
    parent = {"t": None, "a": "t", "b": "t", "x1": "a", "x2": "a",
              "y1": "b", "y2": "b", "y3": "b"}
    p = degree_profile(make_tower(level, parent))
    assert (p.deg_n(1), p.Deg_n(1)) == (2, 3)
    assert (p.deg(1, 3), p.Deg(1, 3)) == (5, 5)
    assert not p.is_homogeneous


def test_regrouped_profile_matches_subtower():
    T = regular_tower([2, 3, 2, 3], 5)
    assert degree_profile(level_subtower(T, [1, 3, 5]).tower) == \
        degree_profile(T).regrouped([1, 3, 5])


def test_infinite_degrees_mark_profile_infinite():
    p = DegreeProfile.from_degrees([2, math.inf])
    assert not p.is_finite


@pytest.mark.parametrize("degrees", [[2, 2, 2], [3, 2], [2, 3, 2]])
def test_degree_formula_matches_brute_force_entropy(degrees):
    T = regular_tower(degrees, len(degrees) + 1)
    X = base_space(T)
    for i in range(T.height):
        for j in range(i, T.height):
            prof = entropy_profile(X, [2 * i], [2 * j], CLOSED)
            assert (prof.large(2 * i, 2 * j), prof.small(2 * i, 2 * j)) == entropy_from_degrees(T, i, j)


def test_strict_convention_shifts_one_level():
    shift = convention_shift(regular_tower([2, 3, 2], 4), 1, 2)
    assert shift.closed == shift.degrees == (3, 3)
    assert shift.strict == shift.shifted_degrees == (6, 6)


def test_ball_tower_of_word_space():
    X = word_space(WordSpaceSpec(2, 3))
    T = ball_tower(X, [0, 1, 2, 4])
    assert T.height == 4
    assert T.top == "4:000"
    assert degree_profile(T) == DegreeProfile.from_degrees([2, 2, 2])
    assert base_assignment(X, [0, 1, 2, 4])["011"] == "1:011"
    assert T.parent["1:100"] == "2:000"
    with pytest.raises(InputError):
        ball_tower(X, [0, 1, 2])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(min_value=1, max_value=3), min_size=1, max_size=4))
def test_random_towers_validate_and_match_entropy(degrees):
    T = regular_tower(degrees, len(degrees) + 1)
    assert validate_tower(T.nodes, T.level, T.parent, T.height).ok
    X = base_space(T)
    assert validate_ultrametric(X).ok
    i, j = 0, T.height - 1
    prof = entropy_profile(X, [2 * i], [2 * j], CLOSED)
    assert prof.large(0, 2 * j) == len(X)
    assert entropy_from_degrees(T, i, j) == (len(X), len(X))


@pytest.mark.parametrize("seed", range(25))
def test_degree_formula_on_irregular_towers(seed, random_tower):
    rng = random.Random(seed)
    T = random_tower(rng, [(1, 4)] * rng.randint(1, 4))
    X = base_space(T)
    scales = [2 * k for k in range(T.height)]
    prof = entropy_profile(X, scales, scales, CLOSED)
    for i in range(T.height):
        for j in range(i, T.height):
            assert (prof.large(2 * i, 2 * j), prof.small(2 * i, 2 * j)) == entropy_from_degrees(T, i, j)


@pytest.mark.parametrize("seed", range(10))
def test_ball_tower_of_base_space_recovers_tower(seed, random_tower):
    rng = random.Random(seed)
    T = random_tower(rng, [(1, 3)] * rng.randint(1, 4))
    X = base_space(T)
    radii = [2 * k for k in range(T.height)]
    rebuilt = ball_tower(X, radii)
    assert degree_profile(rebuilt) == degree_profile(T)
    assign = base_assignment(X, radii)
    Y = base_space(rebuilt)
    assert sorted(assign.values()) == sorted(Y.points)
    for a, b in itertools.combinations(X.points, 2):
        assert Y.dist(assign[a], assign[b]) == X.dist(a, b)
