"""Tests for homogeneity, sequence synthesis and the equivalence pipeline."""
import math
import random
from fractions import Fraction

import pytest

from coarse_towers.config import make_config
from coarse_towers.errors import InputError, PreconditionFailed, TruncationExhausted
from coarse_towers.homogenize import (
    EQUIVALENT,
    OUT_OF_SCOPE,
    HomogeneityWitness,
    asymptotic_homogeneity,
    canonical_bijection,
    classify,
    entropy_ratio_product,
    equivalence_pipeline,
    space_equivalence,
    synthesize_sequences,
)
from coarse_towers.metric import WordSpaceSpec, line_space, ultrametrize, word_space
from coarse_towers.morphisms import ASYMORPHISM
from coarse_towers.towers import DegreeProfile, ball_tower, base_space, degree_profile, regular_tower

CONFIG = make_config(workers=1)


def test_witness_for_homogeneous_profile():
    witness = HomogeneityWitness.for_profile(DegreeProfile.from_degrees([2] * 6))
    assert witness.c == (1,) * 6
    assert witness.delta[:3] == (2, Fraction(3, 2), Fraction(5, 4))
    assert witness.check(DegreeProfile.from_degrees([2] * 6)).ok
    assert not HomogeneityWitness((1, 1), (2, 1)).check(DegreeProfile.from_degrees([2, 2])).ok


def test_witness_rejects_small_constant():
    profile = DegreeProfile.from_level_bounds([2, 2], [3, 2])
    assert not HomogeneityWitness((1, 1), (2, 2)).check(profile).ok
    assert HomogeneityWitness.for_profile(profile).c == (Fraction(3, 2), 1)


def test_asymptotic_homogeneity_window():
    h = asymptotic_homogeneity(DegreeProfile.from_level_bounds([2, 2, 2], [3, 2, 4]))
    assert (h.product, h.bound, h.window) == (3, 3, (1, 3))
    assert asymptotic_homogeneity(DegreeProfile.from_degrees([2, math.inf])).product == math.inf


def test_synthesis_for_binary_tower():
    synth = synthesize_sequences(DegreeProfile.from_degrees([2] * 6))
    assert synth.n == (1, 6)
    assert synth.m == (0, 11)
    assert synth.a[0] == 1
    tail = synth.witness.tail(1)
    assert synth.b[0] >= tail
    assert synth.b[0] - tail < Fraction(1, 64)
    assert synth.report.ok


def test_synthesis_for_three_regular_towers():
    assert synthesize_sequences(DegreeProfile.from_degrees([3] * 4)).n == (1, 4)
    synth = synthesize_sequences(DegreeProfile.from_degrees([3] * 11))
    assert synth.n == (1, 4, 11)
    assert synth.m[:2] == (0, 8)


@pytest.mark.parametrize("degrees", [[2] * 5, [3] * 3])
def test_synthesis_exhausts_short_towers(degrees):
    with pytest.raises(TruncationExhausted) as err:
        synthesize_sequences(DegreeProfile.from_degrees(degrees))
    assert "n_2" in str(err.value)


def test_synthesis_needs_finite_degrees():
    with pytest.raises(InputError):
        synthesize_sequences(DegreeProfile.from_degrees([2, math.inf]))


def test_canonical_bijection_strips_levels():
    phi = canonical_bijection(regular_tower([2, 2], 3))
    assert phi.bijective
    assert phi.image(["1:01"]) == ("01",)


def test_binary_pipeline():
    result = equivalence_pipeline(regular_tower([2] * 6, 7), config=CONFIG)
    assert result.ok
    assert result.levels == (1, 6, 7)
    assert result.binary_levels == (0, 5)
    assert len(result.composed.source) == 64
    assert len(result.composed.target) == 32
    assert [s.name for s in result.stages] == ["next", "admissible", "next-inverse", "word-bijection"]
    assert all(s.certificate.kind == ASYMORPHISM for s in result.stages)
    assert result.selection.closeness <= result.selection.fiber_bound
    assert result.normal_form.report.passed("largeness")
    assert result.normal_form.largeness <= result.normal_form.closeness
    assert result.entropy_transport.ok


def test_three_regular_pipeline():
    result = equivalence_pipeline(regular_tower([3] * 6, 7), config=CONFIG)
    assert result.ok
    assert result.levels == (1, 4, 7)
    assert len(result.composed.source) == 729
    assert len(result.composed.target) == 256
    # each level-4 node x takes d_x of the 256 slots, d_x in {9, 10}
    spread = {}
    for b, y in result.morphism.node_map.items():
        if b.startswith("1:"):
            spread.setdefault("4:" + b[5:], set()).add(y)
    assert sorted(len(v) for v in spread.values()) == [9] * 14 + [10] * 13
    assert result.certificate.forward.is_monotone()
    assert result.normal_form.report.ok
    assert result.entropy_transport.ok


def test_pipeline_is_deterministic():
    T = regular_tower([2] * 6, 7)
    first = equivalence_pipeline(T, config=CONFIG)
    second = equivalence_pipeline(T, config=CONFIG)
    assert first.composed.pairs == second.composed.pairs
    assert first.certificate.forward == second.certificate.forward


def test_space_equivalence_of_word_space():
    X = word_space(WordSpaceSpec(2, 6))
    result = space_equivalence(X, [0, 1, 2, 4, 8, 16, 32], config=CONFIG)
    assert result.identity_holds
    assert result.ratio_product == 1
    assert result.assignment.certificate.kind == ASYMORPHISM
    assert result.certificate.kind == ASYMORPHISM


def test_entropy_ratio_product_matches_ball_tower():
    X = word_space(WordSpaceSpec(3, 3))
    radii = [0, 1, 2, 4]
    assert entropy_ratio_product(X, radii) == \
        asymptotic_homogeneity(degree_profile(ball_tower(X, radii))).product == 1


def test_classify():
    a = DegreeProfile.from_degrees([2, 2])
    b = DegreeProfile.from_degrees([3, 5])
    assert classify(a, b).verdict == EQUIVALENT
    assert classify(a, DegreeProfile.from_degrees([2, math.inf])).verdict == OUT_OF_SCOPE
    with pytest.raises(PreconditionFailed):
        classify(a, DegreeProfile.from_level_bounds([2, 2], [3, 2]))


@pytest.mark.parametrize("seed", range(15))
def test_entropy_ratio_product_equals_homogeneity_product(seed, random_tower):
    rng = random.Random(seed)
    T = random_tower(rng, [(1, 4)] * rng.randint(1, 4))
    radii = [2 * k for k in range(T.height)]
    assert entropy_ratio_product(base_space(T), radii) == \
        asymptotic_homogeneity(degree_profile(T)).product


def test_space_equivalence_keeps_ratio_when_truncation_is_short():
    U = ultrametrize(line_space([0, 1, 2, 4, 5, 9, 10, 12, 13]), [1, 2, 5])
    with pytest.raises(TruncationExhausted) as err:
        space_equivalence(U, [0, 2, 4, 6], config=CONFIG)
    partial = err.value.partial
    assert not partial.complete
    assert partial.tower.height == 4
    assert partial.ratio_product == partial.homogeneity.product == Fraction(3, 2)
    assert partial.assignment.certificate.kind == ASYMORPHISM
    assert err.value.needed_height > 4
