"""Finite (ultra-)metric spaces with exact rational distances.

A space is an ordered tuple of point ids plus a distance backend that works
on point indices. Backends are small frozen dataclasses, so spaces pickle
cheaply into worker processes and nothing is materialized unless asked.
Ties are always broken by point order (the least index wins); every space
built here lists its points in sorted id order for alphabets up to ten.

Distances are ``int`` or ``fractions.Fraction``; floats never enter a
metric predicate.
"""
import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import comb
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx

from .config import DEFAULT_CAPS, Caps, RunConfig
from .errors import InputError, PreconditionFailed, SizeCapExceeded, UnknownPoint
from .findings import ValidationReport, Violation
from .parallel import map_chunks, scan_workers

Rational = Union[int, Fraction]

STRICT = "strict"
CLOSED = "closed"


def rational(value) -> Rational:
    """Exact rational from an int, Fraction, "p/q" string or decimal string."""
    if isinstance(value, bool):
        raise InputError(f"Not a rational: {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else value
    if isinstance(value, str):
        try:
            q = Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise InputError(f"Not a rational: {value!r}") from e
        return q.numerator if q.denominator == 1 else q
    raise InputError(f"Not a rational: {value!r} (floats are not accepted)")


# --- distance backends -------------------------------------------------------

@dataclass(frozen=True)
class MatrixMetric:
    rows: Tuple[Tuple[Rational, ...], ...]

    def d(self, i: int, j: int) -> Rational:
        return self.rows[i][j]


@dataclass(frozen=True)
class WordMetric:
    """max 2^n over the positions n where two words disagree."""
    words: Tuple[Tuple[int, ...], ...]

    def d(self, i: int, j: int) -> Rational:
        x, y = self.words[i], self.words[j]
        for n in range(len(x) - 1, -1, -1):
            if x[n] != y[n]:
                return 1 << n
        return 0


@dataclass(frozen=True)
class AncestorMetric:
    """Path metric on a tower base.

    chains[i][k] is the index of the level-(k+1) ancestor of point i; two
    points first share an ancestor at level k+1 and are 2k apart.
    """
    chains: Tuple[Tuple[int, ...], ...]

    def d(self, i: int, j: int) -> Rational:
        if i == j:
            return 0
        for k, (a, b) in enumerate(zip(self.chains[i], self.chains[j])):
            if a == b:
                return 2 * k
        raise ValueError("points without a common ancestor")


@dataclass(frozen=True)
class LineMetric:
    values: Tuple[Rational, ...]

    def d(self, i: int, j: int) -> Rational:
        return abs(self.values[i] - self.values[j])


@dataclass(frozen=True)
class MaxMetric:
    """d(x, y) = max(x, y) for x != y: an ultrametric on positive numbers."""
    values: Tuple[Rational, ...]

    def d(self, i: int, j: int) -> Rational:
        if i == j:
            return 0
        return max(self.values[i], self.values[j])


@dataclass(frozen=True)
class SubMetric:
    parent: object
    indices: Tuple[int, ...]

    def d(self, i: int, j: int) -> Rational:
        return self.parent.d(self.indices[i], self.indices[j])


@dataclass(frozen=True)
class ProductMetric:
    left: object
    right: object
    coords: Tuple[Tuple[int, int], ...]

    def d(self, i: int, j: int) -> Rational:
        (a, b), (c, e) = self.coords[i], self.coords[j]
        return max(self.left.d(a, c), self.right.d(b, e))


@dataclass(frozen=True)
class HausdorffMetric:
    base: object
    subsets: Tuple[Tuple[int, ...], ...]

    def _oriented(self, A: Tuple[int, ...], B: Tuple[int, ...]) -> Rational:
        return max(min(self.base.d(a, b) for b in B) for a in A)

    def d(self, i: int, j: int) -> Rational:
        if i == j:
            return 0
        A, B = self.subsets[i], self.subsets[j]
        return max(self._oriented(A, B), self._oriented(B, A))


# --- the space -----------------------------------------------------------------

@dataclass(frozen=True)
class FiniteUltraSpace:
    """Ordered point ids with a distance backend.

    `ultrametric` is False for plain-metric inputs (e.g. before
    `ultrametrize`); net computations then use exhaustive search.
    """
    points: Tuple[str, ...]
    metric: object
    ultrametric: bool = True
    index: Dict[str, int] = field(init=False, compare=False, repr=False, hash=False)

    def __post_init__(self):
        index = {p: i for i, p in enumerate(self.points)}
        if len(index) != len(self.points):
            raise InputError("Duplicate point ids")
        if not self.points:
            raise InputError("A space needs at least one point")
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.points)

    def idx(self, point: str) -> int:
        try:
            return self.index[point]
        except KeyError:
            raise UnknownPoint(point) from None

    def d(self, i: int, j: int) -> Rational:
        return self.metric.d(i, j)

    def dist(self, x: str, y: str) -> Rational:
        return self.metric.d(self.idx(x), self.idx(y))

    @cached_property
    def realized(self) -> Tuple[Rational, ...]:
        """Sorted distinct distances, 0 included."""
        values = {0}
        n = len(self.points)
        for i in range(n):
            for j in range(i + 1, n):
                values.add(self.metric.d(i, j))
        return tuple(sorted(values))

    def diameter(self) -> Rational:
        return self.realized[-1]

    def matrix(self) -> List[List[Rational]]:
        n = len(self.points)
        return [[self.metric.d(i, j) for j in range(n)] for i in range(n)]

    def subspace(self, ids: Iterable[str]) -> "FiniteUltraSpace":
        indices = tuple(sorted({self.idx(p) for p in ids}))
        if not indices:
            raise InputError("Empty subspace")
        return FiniteUltraSpace(tuple(self.points[i] for i in indices),
                                SubMetric(self.metric, indices), self.ultrametric)


def from_matrix(points: Sequence[str], rows: Sequence[Sequence], ultrametric: bool = True,
                caps: Caps = DEFAULT_CAPS) -> FiniteUltraSpace:
    n = len(points)
    caps.check_points("distance matrix", n)
    if len(rows) != n or any(len(row) != n for row in rows):
        raise InputError(f"Distance matrix must be {n}x{n}")
    table = tuple(tuple(rational(v) for v in row) for row in rows)
    return FiniteUltraSpace(tuple(points), MatrixMetric(table), ultrametric)


@dataclass(frozen=True)
class WordSpaceSpec:
    alphabet_size: int
    length: int

    def __post_init__(self):
        if self.alphabet_size < 2 or self.length < 1:
            raise InputError(f"Word space needs alphabet >= 2 and length >= 1, "
                             f"got ({self.alphabet_size}, {self.length})")

    @property
    def size(self) -> int:
        return self.alphabet_size ** self.length


def word_id(word: Sequence[int], alphabet_size: int) -> str:
    if alphabet_size <= 10:
        return "".join(str(c) for c in word)
    return ".".join(str(c) for c in word)


def word_space(spec: WordSpaceSpec, caps: Caps = DEFAULT_CAPS) -> FiniteUltraSpace:
    """All words of the given length; position n disagreeing costs 2^n."""
    caps.check_points("word space", spec.size)
    words = tuple(itertools.product(range(spec.alphabet_size), repeat=spec.length))
    ids = tuple(word_id(w, spec.alphabet_size) for w in words)
    return FiniteUltraSpace(ids, WordMetric(words))


def line_space(values: Sequence, caps: Caps = DEFAULT_CAPS) -> FiniteUltraSpace:
    """Points on the real line with |x - y|, a plain metric."""
    caps.check_points("line sample", len(values))
    vals = tuple(sorted({rational(v) for v in values}))
    return FiniteUltraSpace(tuple(str(v) for v in vals), LineMetric(vals), ultrametric=False)


def sparse_sequence_space(values: Sequence, caps: Caps = DEFAULT_CAPS) -> FiniteUltraSpace:
    """Positive numbers with d(x, y) = max(x, y), an ultrametric model of a sparse sequence."""
    caps.check_points("sequence", len(values))
    vals = tuple(sorted({rational(v) for v in values}))
    if vals[0] <= 0:
        raise InputError("Sequence values must be positive")
    return FiniteUltraSpace(tuple(str(v) for v in vals), MaxMetric(vals))


# --- validation ----------------------------------------------------------------

def _basic_axioms(space: FiniteUltraSpace) -> List[Violation]:
    found = []
    n = len(space)
    for i in range(n):
        if space.d(i, i) != 0:
            found.append(Violation("identity", "identity", (space.points[i],), 0, space.d(i, i)))
        for j in range(i + 1, n):
            dij, dji = space.d(i, j), space.d(j, i)
            pair = (space.points[i], space.points[j])
            if dij != dji:
                found.append(Violation("symmetry", "symmetry", pair, dij, dji))
            if dij <= 0:
                found.append(Violation("positivity", "positivity", pair, "> 0", dij))
    return found


def _merges_are_exact(space: FiniteUltraSpace) -> bool:
    """True iff d equals its single-linkage (subdominant) ultrametric.

    Replays the merges of a minimum spanning tree in weight order; every
    cross pair of a merge at weight w must sit at distance exactly w.
    """
    n = len(space)
    if n < 3:
        return True
    G = nx.Graph()
    G.add_nodes_from(range(n))
    G.add_weighted_edges_from((i, j, space.d(i, j)) for i, j in itertools.combinations(range(n), 2))
    edges = sorted((data["weight"], min(u, v), max(u, v))
                   for u, v, data in nx.minimum_spanning_edges(G, algorithm="kruskal", data=True))

    clusters = nx.utils.UnionFind(range(n))
    members = {i: [i] for i in range(n)}
    for w, u, v in edges:
        cu, cv = clusters[u], clusters[v]
        for a in members[cu]:
            for b in members[cv]:
                if space.d(a, b) != w:
                    return False
        merged = members.pop(cu) + members.pop(cv)
        clusters.union(u, v)
        members[clusters[u]] = merged
    return True


def _strong_triangle_rows(space: FiniteUltraSpace, start: int, stop: int) -> List[Violation]:
    found = []
    n = len(space)
    pts = space.points
    for i in range(start, stop):
        for j in range(i + 1, n):
            dij = space.d(i, j)
            for k in range(j + 1, n):
                dik, djk = space.d(i, k), space.d(j, k)
                sides = sorted(((dij, (i, j, k)), (dik, (i, k, j)), (djk, (j, k, i))),
                               key=lambda s: s[0])
                if sides[2][0] > sides[1][0]:
                    a, b, c = sides[2][1]
                    found.append(Violation("strong-triangle", "strong-triangle",
                                           (pts[a], pts[b], pts[c]),
                                           sides[1][0], sides[2][0]))
    return found


def _triangle_rows(space: FiniteUltraSpace, start: int, stop: int) -> List[Violation]:
    found = []
    n = len(space)
    pts = space.points
    for i in range(start, stop):
        for j in range(i + 1, n):
            dij = space.d(i, j)
            for k in range(n):
                if k == i or k == j:
                    continue
                bound = space.d(i, k) + space.d(k, j)
                if dij > bound:
                    found.append(Violation("triangle", "triangle",
                                           (pts[i], pts[j], pts[k]), bound, dij))
    return found


def _check_triples(space: FiniteUltraSpace, caps: Caps) -> None:
    n = len(space)
    triples = n * (n - 1) * (n - 2) // 6
    if triples > caps.max_pair_evaluations:
        raise SizeCapExceeded("triple scan", triples, caps.max_pair_evaluations)


def validate_ultrametric(space: FiniteUltraSpace, caps: Caps = DEFAULT_CAPS,
                         config: Optional[RunConfig] = None) -> ValidationReport:
    """Check the metric axioms and the strong triangle inequality.

    Validity is decided with a quadratic single-linkage replay; only when it
    fails are all triples scanned so that every violating triple is listed.
    """
    checks = ("identity", "symmetry", "positivity", "strong-triangle")
    caps.check_pairs("ultrametric validation", len(space))
    violations = _basic_axioms(space)
    if not violations and _merges_are_exact(space):
        return ValidationReport("ultrametric", checks)

    _check_triples(space, caps)
    n = len(space)
    workers, threshold = scan_workers(config)
    for chunk in map_chunks(_strong_triangle_rows, space, n, work=n ** 3 // 6,
                            workers=workers, threshold=threshold, desc="Triples"):
        violations.extend(chunk)
    logging.debug(f"Ultrametric check on {n} points: {len(violations)} violations")
    return ValidationReport("ultrametric", checks, tuple(violations))


def validate_metric(space: FiniteUltraSpace, caps: Caps = DEFAULT_CAPS,
                    config: Optional[RunConfig] = None) -> ValidationReport:
    """Plain metric axioms, triangle inequality over all triples."""
    checks = ("identity", "symmetry", "positivity", "triangle")
    _check_triples(space, caps)
    violations = _basic_axioms(space)
    n = len(space)
    workers, threshold = scan_workers(config)
    for chunk in map_chunks(_triangle_rows, space, n, work=n ** 3 // 2,
                            workers=workers, threshold=threshold, desc="Triangles"):
        violations.extend(chunk)
    return ValidationReport("metric", checks, tuple(violations))


# --- balls and nets ------------------------------------------------------------

def _related(d: Rational, eps: Rational, convention: str) -> bool:
    return d < eps if convention == STRICT else d <= eps


def _check_convention(convention: str, eps: Rational) -> None:
    if convention not in (STRICT, CLOSED):
        raise InputError(f"Unknown net convention {convention!r}")
    if convention == STRICT and eps <= 0:
        raise InputError("Strict nets need eps > 0")


def ball_indices(space: FiniteUltraSpace, i: int, r: Rational) -> List[int]:
    return [j for j in range(len(space)) if space.d(i, j) <= r]


def ball(space: FiniteUltraSpace, center: str, r) -> Tuple[str, ...]:
    """Closed ball {y : d(center, y) <= r} in point order."""
    i = space.idx(center)
    return tuple(space.points[j] for j in ball_indices(space, i, rational(r)))


def _class_representatives(space: FiniteUltraSpace, indices: Sequence[int], eps: Rational,
                           convention: str) -> List[int]:
    reps: List[int] = []
    for i in indices:
        if not any(_related(space.d(i, r), eps, convention) for r in reps):
            reps.append(i)
    return reps


def _covers(space: FiniteUltraSpace, net: Sequence[int], indices: Sequence[int],
            eps: Rational, convention: str) -> bool:
    return all(any(_related(space.d(i, c), eps, convention) for c in net) for i in indices)


def _exact_net_indices(space: FiniteUltraSpace, indices: Sequence[int], eps: Rational,
                       convention: str, caps: Caps) -> List[int]:
    if len(indices) > caps.exact_net_points:
        raise SizeCapExceeded("exact net search", len(indices), caps.exact_net_points)
    for k in range(1, len(indices) + 1):
        for net in itertools.combinations(indices, k):
            if _covers(space, net, indices, eps, convention):
                return list(net)
    raise PreconditionFailed("No net exists for this radius")


def _net_indices(space: FiniteUltraSpace, indices: Sequence[int], eps: Rational,
                 convention: str, caps: Caps) -> List[int]:
    if space.ultrametric:
        return _class_representatives(space, indices, eps, convention)
    return _exact_net_indices(space, indices, eps, convention, caps)


def _subset_indices(space: FiniteUltraSpace, subset: Iterable[str]) -> List[int]:
    indices = sorted({space.idx(p) for p in subset})
    if not indices:
        raise InputError("Net of an empty subset")
    return indices


def min_net(space: FiniteUltraSpace, subset: Iterable[str], eps, convention: str = CLOSED,
            caps: Caps = DEFAULT_CAPS) -> Tuple[str, ...]:
    """A minimum eps-net of `subset`.

    On ultrametric spaces the relation d < eps (or d <= eps) is an
    equivalence and the net is the least point of each class; otherwise
    subsets are searched exhaustively up to the exact-search cap.
    """
    eps = rational(eps)
    _check_convention(convention, eps)
    indices = _subset_indices(space, subset)
    return tuple(space.points[i] for i in _net_indices(space, indices, eps, convention, caps))


def exact_min_net(space: FiniteUltraSpace, subset: Iterable[str], eps, convention: str = CLOSED,
                  caps: Caps = DEFAULT_CAPS) -> Tuple[str, ...]:
    """Exhaustive-search net, whatever the space; used as an oracle for the fast path."""
    eps = rational(eps)
    _check_convention(convention, eps)
    indices = _subset_indices(space, subset)
    return tuple(space.points[i] for i in _exact_net_indices(space, indices, eps, convention, caps))


def ball_partition(space: FiniteUltraSpace, r: Rational) -> List[List[int]]:
    """Closed r-balls of an ultrametric space; they partition it."""
    reps: List[int] = []
    classes: List[List[int]] = []
    for i in range(len(space)):
        for k, rep in enumerate(reps):
            if space.d(i, rep) <= r:
                classes[k].append(i)
                break
        else:
            reps.append(i)
            classes.append([i])
    return classes


@dataclass(frozen=True)
class EntropyProfile:
    """(eps, delta) -> (large, small): max and min net size over delta-balls."""
    entries: Dict[Tuple[Rational, Rational], Tuple[int, int]]
    convention: str

    def large(self, eps, delta) -> int:
        return self.entries[(rational(eps), rational(delta))][0]

    def small(self, eps, delta) -> int:
        return self.entries[(rational(eps), rational(delta))][1]

    def rows(self) -> List[Tuple[Rational, Rational, int, int]]:
        return [(e, d, lg, sm) for (e, d), (lg, sm) in sorted(self.entries.items())]

    def is_monotone(self) -> bool:
        eps_values = sorted({e for e, _ in self.entries})
        deltas = sorted({d for _, d in self.entries})
        for pos in (0, 1):
            for d in deltas:
                col = [self.entries[(e, d)][pos] for e in eps_values]
                if any(a < b for a, b in zip(col, col[1:])):
                    return False
            for e in eps_values:
                row = [self.entries[(e, d)][pos] for d in deltas]
                if any(a > b for a, b in zip(row, row[1:])):
                    return False
        return True


def entropy_profile(space: FiniteUltraSpace, eps_list: Sequence, delta_list: Sequence,
                    convention: str = CLOSED, caps: Caps = DEFAULT_CAPS) -> EntropyProfile:
    """Exact Ent and ent for every (eps, delta) over all centres."""
    if not eps_list or not delta_list:
        raise InputError("Entropy grid needs at least one eps and one delta")
    eps_values = [rational(e) for e in eps_list]
    deltas = [rational(d) for d in delta_list]
    for e in eps_values:
        _check_convention(convention, e)

    entries: Dict[Tuple[Rational, Rational], Tuple[int, int]] = {}
    for delta in deltas:
        if space.ultrametric:
            # Every centre of a class sees the same ball.
            balls = ball_partition(space, delta)
        else:
            balls = [ball_indices(space, i, delta) for i in range(len(space))]
        for eps in eps_values:
            sizes = [len(_net_indices(space, b, eps, convention, caps)) for b in balls]
            entries[(eps, delta)] = (max(sizes), min(sizes))
    return EntropyProfile(entries, convention)


# --- constructions -------------------------------------------------------------

def product(X: FiniteUltraSpace, Y: FiniteUltraSpace, caps: Caps = DEFAULT_CAPS) -> FiniteUltraSpace:
    """X x Y with the max metric."""
    caps.check_points("product", len(X) * len(Y))
    coords = tuple(itertools.product(range(len(X)), range(len(Y))))
    ids = tuple(f"({X.points[a]},{Y.points[b]})" for a, b in coords)
    return FiniteUltraSpace(ids, ProductMetric(X.metric, Y.metric, coords),
                            X.ultrametric and Y.ultrametric)


def hyperspace(X: FiniteUltraSpace, n: int, caps: Caps = DEFAULT_CAPS) -> FiniteUltraSpace:
    """Nonempty subsets of size <= n with the Hausdorff metric."""
    if n < 1:
        raise InputError("Hyperspace order must be >= 1")
    size = sum(comb(len(X), k) for k in range(1, min(n, len(X)) + 1))
    caps.check_points("hyperspace", size)
    subsets = tuple(s for k in range(1, min(n, len(X)) + 1)
                    for s in itertools.combinations(range(len(X)), k))
    if n == 1:
        ids = tuple(X.points[s[0]] for s in subsets)
    else:
        ids = tuple("{" + ",".join(X.points[i] for i in s) + "}" for s in subsets)
    return FiniteUltraSpace(ids, HausdorffMetric(X.metric, subsets), X.ultrametric)


def _component_indices(X: FiniteUltraSpace, r: Rational) -> List[List[int]]:
    graph = nx.Graph()
    n = len(X)
    graph.add_nodes_from(range(n))
    graph.add_edges_from((i, j) for i in range(n) for j in range(i + 1, n) if X.d(i, j) <= r)
    return sorted((sorted(c) for c in nx.connected_components(graph)), key=lambda c: c[0])


def chain_components(X: FiniteUltraSpace, r) -> Tuple[Tuple[str, ...], ...]:
    """Classes of points joined by chains with steps of length <= r."""
    return tuple(tuple(X.points[i] for i in c) for c in _component_indices(X, rational(r)))


def ultrametrize(X: FiniteUltraSpace, scales: Sequence, caps: Caps = DEFAULT_CAPS) -> FiniteUltraSpace:
    """Ultrametric rho = 2 * (index of the first scale at which the pair chains together)."""
    rs = [rational(r) for r in scales]
    if not rs or any(a >= b for a, b in zip(rs, rs[1:])):
        raise InputError("Scales must be a nonempty strictly increasing list")
    caps.check_pairs("ultrametrize", len(X))

    n = len(X)
    labels = []
    for r in rs:
        label = [0] * n
        for k, component in enumerate(_component_indices(X, r)):
            for i in component:
                label[i] = k
        labels.append(label)
    if len(set(labels[-1])) != 1:
        raise PreconditionFailed(f"Top scale {rs[-1]} does not chain all points together",
                                 level=len(rs))

    rows = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            merge = next(k for k, label in enumerate(labels, start=1) if label[i] == label[j])
            rows[i][j] = rows[j][i] = 2 * merge
    return FiniteUltraSpace(X.points, MatrixMetric(tuple(tuple(r) for r in rows)))
