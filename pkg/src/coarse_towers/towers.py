"""Finite towers: leveled forests with parent links, truncated to one germ.

A tower of height H stores for every node its level (1..H) and its parent
one level up. The single node at level H is the top; the level-1 nodes form
the base, which carries the path ultrametric

    d(x, y) = 2 * lev(sup(x, y)) - lev(x) - lev(y).

Node ids are stable strings: ``"<level>:<digits>"`` for regular towers,
``"<level>:<least point>"`` for ball towers.
"""
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx

from .config import DEFAULT_CAPS, Caps
from .errors import InputError, UnknownPoint
from .findings import ValidationReport, Violation
from .metric import (
    CLOSED,
    STRICT,
    AncestorMetric,
    FiniteUltraSpace,
    ball_partition,
    entropy_profile,
    rational,
    word_id,
)

TOWER_CHECKS = ("level-range", "level", "parent", "single-germ", "childless",
                "well-founded", "sup")

# Marker for an infinite degree in a profile read from a file.
INFINITE = math.inf


def validate_tower(nodes: Iterable[str], level: Mapping[str, int],
                   parent: Mapping[str, Optional[str]],
                   height: Optional[int] = None) -> ValidationReport:
    """Check the tower axioms on a finite truncation, plus the single-germ rule."""
    nodes = sorted(set(nodes))
    violations: List[Violation] = []
    missing = [x for x in nodes if x not in level]
    for x in missing:
        violations.append(Violation("level-range", "level", (x,), "a level", None))
    if not nodes or missing:
        if not nodes:
            violations.append(Violation("single-germ", "single-germ", (), 1, 0))
        return ValidationReport("tower", TOWER_CHECKS, tuple(violations))

    H = height if height is not None else max(level[x] for x in nodes)
    known = set(nodes)
    graph = nx.DiGraph()
    graph.add_nodes_from(nodes)
    has_child = set()

    for x in nodes:
        lev = level[x]
        if not 1 <= lev <= H:
            violations.append(Violation("level-range", "level", (x,), f"1..{H}", lev))
        p = parent.get(x)
        if lev >= H:
            if p is not None:
                violations.append(Violation("parent", "parent", (x, p), None, p))
            continue
        if p is None:
            violations.append(Violation("parent", "orphan", (x,), "a parent", None))
            continue
        if p not in known:
            violations.append(Violation("parent", "parent", (x, p), "a known node", p))
            continue
        graph.add_edge(x, p)
        has_child.add(p)
        if level.get(p) != lev + 1:
            violations.append(Violation("level", "level", (x, p), lev + 1, level.get(p)))

    tops = [x for x in nodes if level[x] == H]
    if len(tops) != 1:
        violations.append(Violation("single-germ", "single-germ", tuple(tops), 1, len(tops)))

    for x in nodes:
        if level[x] > 1 and x not in has_child:
            violations.append(Violation("childless", "childless", (x,), 1, level[x]))

    if not nx.is_directed_acyclic_graph(graph):
        cycle = tuple(u for u, _ in nx.find_cycle(graph))
        violations.append(Violation("well-founded", "well-founded", cycle, "no cycle", "cycle"))
    elif len(tops) == 1:
        reach = nx.ancestors(graph, tops[0]) | {tops[0]}
        for x in nodes:
            if x not in reach:
                violations.append(Violation("sup", "sup", (x, tops[0]), "common upper bound", None))

    return ValidationReport("tower", TOWER_CHECKS, tuple(violations))


@dataclass(frozen=True)
class Tower:
    """A validated single-germ tower. Build it with `make_tower`."""
    height: int
    level: Dict[str, int]
    parent: Dict[str, Optional[str]]

    @cached_property
    def nodes(self) -> Tuple[str, ...]:
        return tuple(sorted(self.level, key=lambda x: (self.level[x], x)))

    @cached_property
    def children(self) -> Dict[str, Tuple[str, ...]]:
        kids: Dict[str, List[str]] = {x: [] for x in self.level}
        for x, p in self.parent.items():
            if p is not None:
                kids[p].append(x)
        return {x: tuple(sorted(c)) for x, c in kids.items()}

    @cached_property
    def top(self) -> str:
        return next(x for x, lev in self.level.items() if lev == self.height)

    @cached_property
    def base(self) -> Tuple[str, ...]:
        return self.nodes_at(1)

    def nodes_at(self, lev: int) -> Tuple[str, ...]:
        return tuple(sorted(x for x, v in self.level.items() if v == lev))

    def check(self, x: str) -> str:
        if x not in self.level:
            raise UnknownPoint(x, "node")
        return x

    def ancestor(self, x: str, lev: int) -> str:
        """The unique node at level `lev` above x (x itself at its own level)."""
        self.check(x)
        if lev < self.level[x] or lev > self.height:
            raise InputError(f"No level-{lev} ancestor of {x}")
        while self.level[x] < lev:
            x = self.parent[x]
        return x

    def sup(self, x: str, y: str) -> str:
        lev = max(self.level[self.check(x)], self.level[self.check(y)])
        x, y = self.ancestor(x, lev), self.ancestor(y, lev)
        while x != y:
            x, y = self.parent[x], self.parent[y]
        return x

    def lower_cone(self, x: str) -> Tuple[str, ...]:
        """↓x: x and every node below it, ordered by (level, id)."""
        out, stack = [], [self.check(x)]
        while stack:
            node = stack.pop()
            out.append(node)
            stack.extend(self.children[node])
        return tuple(sorted(out, key=lambda n: (self.level[n], n)))

    def base_below(self, x: str) -> Tuple[str, ...]:
        return tuple(n for n in self.lower_cone(x) if self.level[n] == 1)

    def __len__(self) -> int:
        return len(self.level)


def make_tower(level: Mapping[str, int], parent: Mapping[str, Optional[str]],
               height: Optional[int] = None) -> Tower:
    """Validate and freeze a tower; invalid input raises InputError."""
    report = validate_tower(level.keys(), level, parent, height)
    if not report.ok:
        raise InputError("Invalid tower: " + "; ".join(v.describe() for v in report.violations[:5]))
    H = height if height is not None else max(level.values())
    return Tower(H, dict(level), {x: parent.get(x) for x in level})


def path_metric(tower: Tower, x: str, y: str) -> int:
    s = tower.sup(x, y)
    return 2 * tower.level[s] - tower.level[x] - tower.level[y]


def _ancestor_chains(tower: Tower, base: Sequence[str]) -> Tuple[Tuple[int, ...], ...]:
    number = {x: i for i, x in enumerate(tower.nodes)}
    chains = []
    for b in base:
        chain, x = [], b
        while x is not None:
            chain.append(number[x])
            x = tower.parent[x]
        chains.append(tuple(chain))
    return tuple(chains)


def base_space(tower: Tower) -> FiniteUltraSpace:
    """The base with the path metric."""
    base = tower.base
    return FiniteUltraSpace(base, AncestorMetric(_ancestor_chains(tower, base)))


def regular_tower(degrees: Sequence[int], height: int, caps: Caps = DEFAULT_CAPS) -> Tower:
    """T_k: every level-(n+1) node has k_n children.

    Base points are words x_0..x_{H-2} with x_{n-1} < k_n; a level-l node is
    the suffix x_{l-1}..x_{H-2}.
    """
    if height < 1:
        raise InputError("Tower height must be >= 1")
    ks = list(degrees)[: height - 1]
    if len(ks) < height - 1 or any(k < 1 for k in ks):
        raise InputError(f"Need {height - 1} degrees >= 1, got {list(degrees)}")
    caps.check_points("regular tower base", math.prod(ks))
    radix = max(ks, default=1)

    level: Dict[str, int] = {}
    parent: Dict[str, Optional[str]] = {}
    frontier: List[Tuple[Tuple[int, ...], Optional[str]]] = [((), None)]
    for lev in range(height, 0, -1):
        next_frontier = []
        for suffix, up in frontier:
            node = f"{lev}:{word_id(suffix, radix)}"
            level[node], parent[node] = lev, up
            if lev > 1:
                next_frontier.extend(((c,) + suffix, node) for c in range(ks[lev - 2]))
        frontier = next_frontier
    return Tower(height, level, parent)


@dataclass(frozen=True)
class SubtowerResult:
    tower: Tower
    next_map: Dict[str, str]
    levels: Tuple[int, ...]


def level_subtower(tower: Tower, levels: Sequence[int]) -> SubtowerResult:
    """Keep the selected levels, relabel them 1..len, and map each base point up.

    The top level is added when missing so the result keeps a single germ.
    """
    ks = [int(k) for k in levels]
    if not ks:
        raise InputError("Empty level selection")
    if any(a >= b for a, b in zip(ks, ks[1:])):
        raise InputError(f"Levels must be strictly increasing: {ks}")
    if ks[0] < 1 or ks[-1] > tower.height:
        raise InputError(f"Levels must lie in 1..{tower.height}: {ks}")
    if ks[-1] != tower.height:
        logging.debug(f"Adding top level {tower.height} to subtower selection {ks}")
        ks.append(tower.height)

    relabel = {k: pos for pos, k in enumerate(ks, start=1)}
    level, parent = {}, {}
    for pos, k in enumerate(ks):
        for x in tower.nodes_at(k):
            level[x] = relabel[k]
            parent[x] = tower.ancestor(x, ks[pos + 1]) if pos + 1 < len(ks) else None
    sub = Tower(len(ks), level, parent)
    next_map = {b: tower.ancestor(b, ks[0]) for b in tower.base}
    return SubtowerResult(sub, next_map, tuple(ks))


@dataclass(frozen=True)
class DegreeProfile:
    """deg_i^j (small) and Deg_i^j (large) for 1 <= i < j <= H.

    Entries may be INFINITE for profiles read from files.
    """
    height: int
    small: Dict[Tuple[int, int], Union[int, float]]
    large: Dict[Tuple[int, int], Union[int, float]]

    def deg(self, i: int, j: int):
        return 1 if i == j else self.small[(i, j)]

    def Deg(self, i: int, j: int):
        return 1 if i == j else self.large[(i, j)]

    def deg_n(self, n: int):
        return self.small[(n, n + 1)]

    def Deg_n(self, n: int):
        return self.large[(n, n + 1)]

    @property
    def is_homogeneous(self) -> bool:
        return self.small == self.large

    @property
    def is_finite(self) -> bool:
        return all(v != INFINITE for v in self.large.values())

    def regrouped(self, levels: Sequence[int]) -> "DegreeProfile":
        """Profile of the level subtower on `levels` (1-based, increasing)."""
        ks = list(levels)
        small, large = {}, {}
        for a in range(len(ks)):
            for b in range(a + 1, len(ks)):
                small[(a + 1, b + 1)] = self.deg(ks[a], ks[b])
                large[(a + 1, b + 1)] = self.Deg(ks[a], ks[b])
        return DegreeProfile(len(ks), small, large)

    def check_multiplicativity(self) -> ValidationReport:
        violations = []
        H = self.height
        for i in range(1, H + 1):
            for j in range(i + 2, H + 1):
                for k in range(i + 1, j):
                    if self.Deg(i, j) > self.Deg(i, k) * self.Deg(k, j):
                        violations.append(Violation("multiplicativity", "multiplicativity",
                                                    (str(i), str(k), str(j)),
                                                    self.Deg(i, k) * self.Deg(k, j), self.Deg(i, j)))
                    if self.deg(i, j) < self.deg(i, k) * self.deg(k, j):
                        violations.append(Violation("multiplicativity", "multiplicativity",
                                                    (str(i), str(k), str(j)),
                                                    self.deg(i, k) * self.deg(k, j), self.deg(i, j)))
        return ValidationReport("degree profile", ("multiplicativity",), tuple(violations))

    @classmethod
    def from_level_bounds(cls, lows: Sequence[int], highs: Sequence[int]) -> "DegreeProfile":
        """Profile of a tower whose level-(n+1) nodes have between lows[n-1] and
        highs[n-1] children, with all-low and all-high branches present."""
        if len(lows) != len(highs) or any(lo < 1 or lo > hi for lo, hi in zip(lows, highs)):
            raise InputError("Level bounds need 1 <= low <= high at every level")
        H = len(lows) + 1
        small, large = {}, {}
        for i in range(1, H):
            lo = hi = 1
            for j in range(i + 1, H + 1):
                lo *= lows[j - 2]
                hi *= highs[j - 2]
                small[(i, j)], large[(i, j)] = lo, hi
        return cls(H, small, large)

    @classmethod
    def from_degrees(cls, degrees: Sequence[int]) -> "DegreeProfile":
        """Profile of the regular tower T_k without building it."""
        return cls.from_level_bounds(degrees, degrees)


def degree_profile(tower: Tower) -> DegreeProfile:
    """Exact min/max over level-j nodes of their number of level-i predecessors."""
    H = tower.height
    counts: Dict[str, Dict[int, int]] = {}
    for x in tower.nodes:  # ordered by level, so children come first
        row = {tower.level[x]: 1}
        for c in tower.children[x]:
            for lev, n in counts[c].items():
                row[lev] = row.get(lev, 0) + n
        counts[x] = row

    small, large = {}, {}
    for j in range(2, H + 1):
        at_j = tower.nodes_at(j)
        for i in range(1, j):
            values = [counts[x][i] for x in at_j]
            small[(i, j)], large[(i, j)] = min(values), max(values)
    return DegreeProfile(H, small, large)


def entropy_from_degrees(tower: Union[Tower, DegreeProfile], i: int, j: int) -> Tuple[int, int]:
    """(Ent, ent) at (eps, delta) = (2i, 2j) under the closed convention:
    (Deg_{i+1}^{j+1}, deg_{i+1}^{j+1})."""
    profile = tower if isinstance(tower, DegreeProfile) else degree_profile(tower)
    if not 0 <= i <= j < profile.height:
        raise InputError(f"Need 0 <= i <= j < {profile.height}, got ({i}, {j})")
    if i == j:
        return 1, 1
    return profile.Deg(i + 1, j + 1), profile.deg(i + 1, j + 1)


@dataclass(frozen=True)
class ConventionShift:
    i: int
    j: int
    closed: Tuple[int, int]
    strict: Tuple[int, int]
    degrees: Tuple[int, int]
    shifted_degrees: Tuple[int, int]


def convention_shift(tower: Tower, i: int, j: int) -> ConventionShift:
    """Brute-force entropy at (2i, 2j) under both conventions, next to the
    degree formula and its one-level shift (strict nets count level-i nodes)."""
    if not 1 <= i <= j < tower.height:
        raise InputError(f"Need 1 <= i <= j < {tower.height}, got ({i}, {j})")
    space = base_space(tower)
    closed = entropy_profile(space, [2 * i], [2 * j], CLOSED)
    strict = entropy_profile(space, [2 * i], [2 * j], STRICT)
    profile = degree_profile(tower)
    return ConventionShift(
        i, j,
        (closed.large(2 * i, 2 * j), closed.small(2 * i, 2 * j)),
        (strict.large(2 * i, 2 * j), strict.small(2 * i, 2 * j)),
        entropy_from_degrees(profile, i, j),
        (profile.Deg(i, j + 1), profile.deg(i, j + 1)),
    )


def ball_tower(space: FiniteUltraSpace, radii: Sequence) -> Tower:
    """Tower of closed balls B_{r_n}(x) at level n, ordered by inclusion."""
    if not space.ultrametric:
        raise InputError("Ball towers need an ultrametric space")
    rs = [rational(r) for r in radii]
    if not rs or any(a >= b for a, b in zip(rs, rs[1:])) or rs[0] < 0:
        raise InputError("Radii must be nonnegative and strictly increasing")
    if rs[-1] < space.diameter():
        raise InputError(f"Largest radius {rs[-1]} is below the diameter {space.diameter()}; "
                         f"the balls would form several germs")

    level: Dict[str, int] = {}
    parent: Dict[str, Optional[str]] = {}
    owner_prev: Dict[int, str] = {}
    for n in range(len(rs), 0, -1):
        owner: Dict[int, str] = {}
        for cls in ball_partition(space, rs[n - 1]):
            node = f"{n}:{space.points[cls[0]]}"
            level[node] = n
            parent[node] = owner_prev[cls[0]] if n < len(rs) else None
            for i in cls:
                owner[i] = node
        owner_prev = owner
    return Tower(len(rs), level, parent)


def base_assignment(space: FiniteUltraSpace, radii: Sequence) -> Dict[str, str]:
    """Each point of `space` mapped to the level-1 node of its ball tower."""
    r1 = rational(radii[0])
    return {space.points[i]: f"1:{space.points[cls[0]]}"
            for cls in ball_partition(space, r1) for i in cls}
