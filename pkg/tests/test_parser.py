"""Tests for reading spaces, towers, multi-maps and profiles."""
import json
from fractions import Fraction
from pathlib import Path

import pytest

from coarse_towers.errors import InputError
from coarse_towers.metric import word_space, WordSpaceSpec
from coarse_towers.parser import (
    MULTIMAP,
    PROFILE,
    SPACE,
    TOWER,
    input_kind,
    load_input,
    load_json,
    read_distance_csv,
    read_multimap_json,
    read_profile_json,
    read_space_json,
    read_tower_json,
    validate_tower_json,
)
from coarse_towers.towers import INFINITE


def write(path: Path, data) -> Path:
    text = data if isinstance(data, str) else json.dumps(data)
    path.write_text(text, encoding="utf-8")
    return path


SMALL_TOWER = {
    "height": 2,
    "nodes": [
        {"id": "t", "level": 2, "parent": None},
        {"id": "x", "level": 1, "parent": "t"},
        {"id": "y", "level": 1, "parent": "t"},
    ],
}


def test_distance_csv_with_row_ids(tmp_path):
    path = write(tmp_path / "d.csv", "id,a,b,c\na,0,1/2,2\nb,1/2,0,2\nc,2,2,0\n")
    X = read_distance_csv(path)
    assert X.points == ("a", "b", "c")
    assert X.dist("a", "b") == Fraction(1, 2)


def test_distance_csv_without_row_ids(tmp_path):
    path = write(tmp_path / "d.csv", "a,b\n0,3\n3,0\n")
    assert read_distance_csv(path).dist("a", "b") == 3


def test_distance_csv_row_length(tmp_path):
    path = write(tmp_path / "d.csv", "a,b\n0,3\n3\n")
    with pytest.raises(InputError, match="line 3"):
        read_distance_csv(path)


def test_malformed_json_reports_position(tmp_path):
    path = write(tmp_path / "bad.json", '{"points": [\n  "a",\n}')
    with pytest.raises(InputError, match="line 3"):
        load_json(path)


def test_space_json_forms(tmp_path):
    words = read_space_json(write(tmp_path / "w.json", {"word_space": {"alphabet": 2, "length": 3}}))
    assert words.points == word_space(WordSpaceSpec(2, 3)).points
    explicit = read_space_json(write(tmp_path / "s.json",
                                     {"points": ["p", "q"], "dist": [[0, "3/4"], ["3/4", 0]]}))
    assert explicit.dist("p", "q") == Fraction(3, 4)


def test_space_json_rejects_floats(tmp_path):
    path = write(tmp_path / "s.json", {"points": ["p", "q"], "dist": [[0, 0.5], [0.5, 0]]})
    with pytest.raises(InputError, match="rationals as strings"):
        read_space_json(path)


def test_tower_json(tmp_path):
    tower = read_tower_json(write(tmp_path / "t.json", SMALL_TOWER))
    assert tower.top == "t"
    assert tower.base == ("x", "y")


def test_invalid_tower_is_a_report_not_an_error(tmp_path):
    data = dict(SMALL_TOWER, nodes=SMALL_TOWER["nodes"] + [{"id": "z", "level": 1, "parent": None}])
    path = write(tmp_path / "t.json", data)
    report = validate_tower_json(path)
    assert not report.ok
    with pytest.raises(InputError):
        read_tower_json(path)


def test_tower_json_duplicate_ids(tmp_path):
    data = dict(SMALL_TOWER, nodes=SMALL_TOWER["nodes"] + [{"id": "x", "level": 1, "parent": "t"}])
    with pytest.raises(InputError, match="duplicate"):
        read_tower_json(write(tmp_path / "t.json", data))


def test_profile_json_with_infinite_degree(tmp_path):
    profile = read_profile_json(write(tmp_path / "p.json", {"degrees": [2, "inf"]}))
    assert profile.deg_n(2) == INFINITE
    assert not profile.is_finite
    with pytest.raises(InputError):
        read_profile_json(write(tmp_path / "q.json", {"degrees": [2, 0]}))


def test_profile_json_tables(tmp_path):
    data = {"height": 3,
            "small": [[1, 2, 2], [1, 3, 4], [2, 3, 2]],
            "large": [[1, 2, 3], [1, 3, 6], [2, 3, 2]]}
    profile = read_profile_json(write(tmp_path / "p.json", data))
    assert (profile.deg_n(1), profile.Deg_n(1)) == (2, 3)
    data["small"] = data["small"][:2]
    with pytest.raises(InputError, match="every pair"):
        read_profile_json(write(tmp_path / "p.json", data))


def test_multimap_json(tmp_path):
    X = word_space(WordSpaceSpec(2, 1))
    path = write(tmp_path / "m.json", {"source_ref": "x", "target_ref": "x",
                                       "pairs": [["0", "1"], ["1", "0"]]})
    phi = read_multimap_json(path, X, X)
    assert phi.bijective
    bad = write(tmp_path / "n.json", {"pairs": [["0", "2"]]})
    with pytest.raises(InputError):
        read_multimap_json(bad, X, X)


def test_load_input_dispatch(tmp_path):
    assert load_input(write(tmp_path / "t.json", SMALL_TOWER))[0] == TOWER
    assert load_input(write(tmp_path / "p.json", {"low": [2], "high": [3]}))[0] == PROFILE
    assert load_input(write(tmp_path / "d.csv", "a,b\n0,1\n1,0\n"))[0] == SPACE
    kind, raw = load_input(write(tmp_path / "m.json", {"pairs": []}))
    assert kind == MULTIMAP and raw == {"pairs": []}
    assert input_kind(tmp_path / "t.json") == TOWER
    with pytest.raises(InputError):
        input_kind(tmp_path / "missing.json")
    with pytest.raises(InputError, match="cannot tell"):
        load_input(write(tmp_path / "x.json", {"other": 1}))
