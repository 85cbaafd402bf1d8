"""Reading spaces, towers, multi-maps and degree profiles from disk.

Formats:

* distance CSV: a header row of point ids, then one row per point (the row
  may start with its own id); entries are integers, "p/q" or decimals;
* space JSON: ``{"points": [...], "dist": [[...]]}`` or
  ``{"word_space": {"alphabet": a, "length": L}}``;
* tower JSON: ``{"height": H, "nodes": [{"id", "level", "parent"}]}``;
* multi-map JSON: ``{"source_ref", "target_ref", "pairs": [[x, y], ...]}``;
* profile JSON: ``{"degrees": [...]}``, ``{"low": [...], "high": [...]}`` or
  ``{"height": H, "small": [[i, j, v]], "large": [[i, j, v]]}`` with v an
  integer or "inf".
"""
import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from .config import DEFAULT_CAPS, Caps
from .errors import InputError
from .findings import ValidationReport
from .metric import FiniteUltraSpace, WordSpaceSpec, from_matrix, rational, word_space
from .morphisms import MultiMap
from .towers import INFINITE, DegreeProfile, Tower, make_tower, validate_tower

SPACE = "space"
TOWER = "tower"
MULTIMAP = "multimap"
PROFILE = "profile"


def load_json(path: Path) -> Any:
    """Parsed JSON; unreadable or malformed files raise InputError with the position."""
    try:
        with path.open("r", encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise InputError(f"Cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e


def _require(data: Dict[str, Any], key: str, path: Path) -> Any:
    if not isinstance(data, dict) or key not in data:
        raise InputError(f"{path}: missing key {key!r}")
    return data[key]


def read_distance_csv(path: Path, ultrametric: bool = True, caps: Caps = DEFAULT_CAPS) -> FiniteUltraSpace:
    """Distance matrix with a header row of ids."""
    try:
        with path.open("r", encoding="utf-8", newline="") as f:
            rows = [row for row in csv.reader(f) if any(cell.strip() for cell in row)]
    except OSError as e:
        raise InputError(f"Cannot read {path}: {e}") from e
    if not rows:
        raise InputError(f"{path}: empty distance file")

    header = [cell.strip() for cell in rows[0]]
    if header and header[0] in ("", "id"):
        header = header[1:]
    n = len(header)
    matrix: List[List[Any]] = []
    for lineno, row in enumerate(rows[1:], start=2):
        cells = [cell.strip() for cell in row]
        if len(cells) == n + 1:
            if cells[0] != header[len(matrix)]:
                raise InputError(f"{path}, line {lineno}: row id {cells[0]!r} does not match "
                                 f"column {header[len(matrix)]!r}")
            cells = cells[1:]
        if len(cells) != n:
            raise InputError(f"{path}, line {lineno}: expected {n} entries, got {len(cells)}")
        try:
            matrix.append([rational(c) for c in cells])
        except InputError as e:
            raise InputError(f"{path}, line {lineno}: {e}") from None
        if len(matrix) == n:
            break
    if len(matrix) != n:
        raise InputError(f"{path}: expected {n} rows, got {len(matrix)}")
    logging.info(f"Read {n}-point distance matrix from {path}")
    return from_matrix(header, matrix, ultrametric, caps)


def _space_from_data(data: Dict[str, Any], path: Path, caps: Caps) -> FiniteUltraSpace:
    if "word_space" in data:
        spec = data["word_space"]
        try:
            return word_space(WordSpaceSpec(int(spec["alphabet"]), int(spec["length"])), caps)
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"{path}: word_space needs integer 'alphabet' and 'length'") from e
    points = [str(p) for p in _require(data, "points", path)]
    rows = _require(data, "dist", path)
    for k, row in enumerate(rows):
        if not isinstance(row, list):
            raise InputError(f"{path}: dist row {k} is not a list")
        for c, value in enumerate(row):
            if isinstance(value, float):
                raise InputError(f"{path}: dist[{k}][{c}] = {value!r}; write rationals as strings")
    try:
        return from_matrix(points, rows, bool(data.get("ultrametric", True)), caps)
    except InputError as e:
        raise InputError(f"{path}: {e}") from None


def read_space_json(path: Path, caps: Caps = DEFAULT_CAPS) -> FiniteUltraSpace:
    space = _space_from_data(load_json(path), path, caps)
    logging.info(f"Read {len(space)}-point space from {path}")
    return space


def _tower_fields(data: Dict[str, Any], path: Path) -> Tuple[Dict[str, int], Dict[str, Optional[str]], Optional[int]]:
    level: Dict[str, int] = {}
    parent: Dict[str, Optional[str]] = {}
    for k, node in enumerate(_require(data, "nodes", path)):
        try:
            x = str(node["id"])
            lev = node["level"]
        except (KeyError, TypeError) as e:
            raise InputError(f"{path}: node {k} needs 'id' and 'level'") from e
        if not isinstance(lev, int) or isinstance(lev, bool):
            raise InputError(f"{path}: node {x!r} has a non-integer level {lev!r}")
        if x in level:
            raise InputError(f"{path}: duplicate node id {x!r}")
        up = node.get("parent")
        level[x], parent[x] = lev, None if up is None else str(up)
    height = data.get("height")
    if height is not None and (not isinstance(height, int) or isinstance(height, bool)):
        raise InputError(f"{path}: height must be an integer")
    return level, parent, height


def validate_tower_json(path: Path) -> ValidationReport:
    """Tower axioms on a file, as a report rather than an exception."""
    level, parent, height = _tower_fields(load_json(path), path)
    return validate_tower(level.keys(), level, parent, height)


def read_tower_json(path: Path) -> Tower:
    level, parent, height = _tower_fields(load_json(path), path)
    try:
        tower = make_tower(level, parent, height)
    except InputError as e:
        raise InputError(f"{path}: {e}") from None
    logging.info(f"Read tower of height {tower.height} with {len(tower)} nodes from {path}")
    return tower


def read_multimap_json(path: Path, source: FiniteUltraSpace, target: FiniteUltraSpace) -> MultiMap:
    """Pairs of ids; the spaces named by source_ref/target_ref are passed in."""
    data = load_json(path)
    pairs = _require(data, "pairs", path)
    out = []
    for k, pair in enumerate(pairs):
        if not isinstance(pair, list) or len(pair) != 2:
            raise InputError(f"{path}: pair {k} is not an [x, y] list")
        out.append((str(pair[0]), str(pair[1])))
    try:
        return MultiMap.from_ids(source, target, out)
    except InputError as e:
        raise InputError(f"{path}: {e}") from None


def _degree(value: Any, where: str) -> Union[int, float]:
    if value == "inf":
        return INFINITE
    if isinstance(value, int) and not isinstance(value, bool) and value >= 1:
        return value
    raise InputError(f"{where}: degree must be a positive integer or \"inf\", got {value!r}")


def _profile_from_data(data: Dict[str, Any], path: Path) -> DegreeProfile:
    if "degrees" in data:
        degrees = [_degree(v, f"{path}: degrees[{k}]") for k, v in enumerate(data["degrees"])]
        return DegreeProfile.from_degrees(degrees)
    if "low" in data:
        lows = [_degree(v, f"{path}: low[{k}]") for k, v in enumerate(data["low"])]
        highs = [_degree(v, f"{path}: high[{k}]") for k, v in enumerate(_require(data, "high", path))]
        return DegreeProfile.from_level_bounds(lows, highs)

    height = _require(data, "height", path)
    tables = []
    for key in ("small", "large"):
        table = {}
        for k, entry in enumerate(_require(data, key, path)):
            if not isinstance(entry, list) or len(entry) != 3:
                raise InputError(f"{path}: {key}[{k}] is not an [i, j, value] triple")
            i, j, v = entry
            if not (isinstance(i, int) and isinstance(j, int) and 1 <= i < j <= height):
                raise InputError(f"{path}: {key}[{k}] has levels ({i}, {j}) outside 1..{height}")
            table[(i, j)] = _degree(v, f"{path}: {key}[{k}]")
        tables.append(table)
    small, large = tables
    expected = {(i, j) for j in range(2, height + 1) for i in range(1, j)}
    if set(small) != expected or set(large) != expected:
        raise InputError(f"{path}: profile tables must list every pair 1 <= i < j <= {height}")
    return DegreeProfile(height, small, large)


def read_profile_json(path: Path) -> DegreeProfile:
    return _profile_from_data(load_json(path), path)


def _kind_of(data: Any, path: Path) -> str:
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object at the top level")
    if "nodes" in data:
        return TOWER
    if "points" in data or "word_space" in data:
        return SPACE
    if "pairs" in data:
        return MULTIMAP
    if {"degrees", "low", "small"} & set(data):
        return PROFILE
    raise InputError(f"{path}: cannot tell what this file holds (keys: {sorted(data)})")


def input_kind(path: Path) -> str:
    """What a file holds, without building it."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"No such file: {path}")
    if path.suffix.lower() == ".csv":
        return SPACE
    return _kind_of(load_json(path), path)


def load_input(path: Path, caps: Caps = DEFAULT_CAPS) -> Tuple[str, Any]:
    """(kind, object) for any supported file, chosen by suffix and JSON keys.

    Multi-maps need their spaces, so they come back as the raw document.
    """
    path = Path(path)
    kind = input_kind(path)
    if path.suffix.lower() == ".csv":
        return SPACE, read_distance_csv(path, caps=caps)
    if kind == TOWER:
        return TOWER, read_tower_json(path)
    data = load_json(path)
    if kind == SPACE:
        return SPACE, _space_from_data(data, path, caps)
    if kind == PROFILE:
        return PROFILE, _profile_from_data(data, path)
    return MULTIMAP, data
