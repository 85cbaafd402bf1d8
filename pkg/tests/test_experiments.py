"""Tests for the measurement runs."""
from fractions import Fraction

import pytest

from coarse_towers.errors import InputError
from coarse_towers.experiments import (
    hyperspace_entropy,
    product_with_sparse_sequence,
    ratio_bounded_synthesis,
    run_experiment,
)


def test_hyperspace_entropy_table():
    result = hyperspace_entropy(n=2, length=2)
    assert result.summary["points"] == 4 + 6
    assert result.header == ("eps", "delta", "large", "small")
    assert all(large >= small >= 1 for _, _, large, small in result.rows)


def test_product_with_sparse_sequence():
    result = product_with_sparse_sequence(terms=2, length=2)
    assert result.summary["points"] == 8
    assert result.rows


def test_ratio_bounded_synthesis_is_seeded():
    first = ratio_bounded_synthesis(trials=5, ratio_bound=4, height=6, seed=1)
    second = ratio_bounded_synthesis(trials=5, ratio_bound=4, height=6, seed=1)
    assert first.rows == second.rows
    assert len(first.rows) == 5
    assert all(row[1] <= 4 for row in first.rows)
    assert first.summary["rate"] == Fraction(first.summary["successes"], 5)


def test_bad_parameters():
    with pytest.raises(InputError):
        ratio_bounded_synthesis(ratio_bound=Fraction(1, 2))
    with pytest.raises(InputError):
        run_experiment("nope")
