"""Multi-maps between finite spaces and the certificates built on them.

A MultiMap is a relation given by index pairs. Everything a certificate
reports is computed exhaustively: distortion moduli over all source pairs,
surjectivity in both directions, closeness of a selection pair.
"""
import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .config import DEFAULT_CAPS, Caps, RunConfig
from .errors import InputError, PreconditionFailed
from .findings import ValidationReport, Violation
from .metric import (
    CLOSED,
    FiniteUltraSpace,
    Rational,
    ball_indices,
    ball_partition,
    min_net,
    rational,
)
from .parallel import map_chunks, scan_workers
from .towers import SubtowerResult, Tower, base_space, degree_profile

ASYMORPHISM = "asymorphism"
EMBEDDING = "embedding"
ISOMETRY = "isometry"
RELATION = "relation"


@dataclass(frozen=True)
class MultiMap:
    """A relation Φ ⊆ source × target stored as index pairs."""
    source: FiniteUltraSpace
    target: FiniteUltraSpace
    pairs: FrozenSet[Tuple[int, int]]

    @classmethod
    def from_ids(cls, source: FiniteUltraSpace, target: FiniteUltraSpace,
                 pairs: Iterable[Tuple[str, str]]) -> "MultiMap":
        return cls(source, target, frozenset((source.idx(x), target.idx(y)) for x, y in pairs))

    @classmethod
    def from_function(cls, source: FiniteUltraSpace, target: FiniteUltraSpace,
                      mapping: Mapping[str, str]) -> "MultiMap":
        return cls.from_ids(source, target, mapping.items())

    @classmethod
    def identity(cls, space: FiniteUltraSpace) -> "MultiMap":
        return cls(space, space, frozenset((i, i) for i in range(len(space))))

    @cached_property
    def forward(self) -> Tuple[Tuple[int, ...], ...]:
        rows: List[List[int]] = [[] for _ in range(len(self.source))]
        for i, j in self.pairs:
            rows[i].append(j)
        return tuple(tuple(sorted(r)) for r in rows)

    @cached_property
    def backward(self) -> Tuple[Tuple[int, ...], ...]:
        rows: List[List[int]] = [[] for _ in range(len(self.target))]
        for i, j in self.pairs:
            rows[j].append(i)
        return tuple(tuple(sorted(r)) for r in rows)

    @property
    def total(self) -> bool:
        """Every source point has an image, i.e. the inverse is surjective."""
        return all(self.forward)

    @property
    def surjective(self) -> bool:
        return all(self.backward)

    @property
    def bijective(self) -> bool:
        return (all(len(r) == 1 for r in self.forward)
                and all(len(r) == 1 for r in self.backward))

    def image(self, points: Iterable[str]) -> Tuple[str, ...]:
        found = {j for p in points for j in self.forward[self.source.idx(p)]}
        return tuple(self.target.points[j] for j in sorted(found))

    def preimage(self, points: Iterable[str]) -> Tuple[str, ...]:
        found = {i for p in points for i in self.backward[self.target.idx(p)]}
        return tuple(self.source.points[i] for i in sorted(found))

    def id_pairs(self) -> List[Tuple[str, str]]:
        return [(self.source.points[i], self.target.points[j]) for i, j in sorted(self.pairs)]

    def inverse(self) -> "MultiMap":
        return MultiMap(self.target, self.source, frozenset((j, i) for i, j in self.pairs))

    def __len__(self) -> int:
        return len(self.pairs)


def inverse(phi: MultiMap) -> MultiMap:
    return phi.inverse()


def compose(phi: MultiMap, psi: MultiMap) -> MultiMap:
    """Ψ∘Φ: pairs (x, z) with some y such that (x, y) ∈ Φ and (y, z) ∈ Ψ."""
    if phi.target.points != psi.source.points:
        raise InputError("Cannot compose: target of the first map is not the source of the second")
    pairs = frozenset((i, k) for i, row in enumerate(phi.forward)
                      for j in row for k in psi.forward[j])
    return MultiMap(phi.source, psi.target, pairs)


# --- distortion ---------------------------------------------------------------

@dataclass(frozen=True)
class DistortionModulus:
    """ε ↦ δ(ε) over the realized source distances, nondecreasing."""
    table: Tuple[Tuple[Rational, Rational], ...]

    @property
    def finite(self) -> bool:
        """Every δ is an exact number.

        A nonempty relation between finite spaces always has a finite modulus;
        this only fails for tables built by hand with an infinite entry.
        """
        return bool(self.table) and all(isinstance(delta, (int, Fraction)) for _, delta in self.table)

    def at(self, t) -> Rational:
        """Value at the largest realized ε <= t, 0 below the smallest."""
        t = rational(t)
        value = 0
        for eps, delta in self.table:
            if eps > t:
                break
            value = delta
        return value

    def as_dict(self) -> Dict[Rational, Rational]:
        return dict(self.table)

    def is_monotone(self) -> bool:
        return all(a[1] <= b[1] for a, b in zip(self.table, self.table[1:]))


def _modulus_rows(payload, start: int, stop: int) -> Dict[Rational, Rational]:
    source, target, forward = payload
    n = len(source)
    worst: Dict[Rational, Rational] = {}
    for i in range(start, stop):
        fi = forward[i]
        if not fi:
            continue
        for j in range(i, n):
            fj = forward[j]
            if not fj:
                continue
            e = source.d(i, j) if i != j else 0
            spread = max(target.d(b, c) if b != c else 0 for b in fi for c in fj)
            if spread > worst.get(e, -1):
                worst[e] = spread
    return worst


def distortion_modulus(phi: MultiMap, config: Optional[RunConfig] = None) -> DistortionModulus:
    """δ(ε) = max d(b, b') over (a, b), (a', b') ∈ Φ with d(a, a') <= ε."""
    if not phi.pairs:
        raise InputError("Distortion of an empty relation")
    n = len(phi.source)
    workers, threshold = scan_workers(config)
    worst: Dict[Rational, Rational] = {}
    for chunk in map_chunks(_modulus_rows, (phi.source, phi.target, phi.forward), n,
                            work=n * n // 2, workers=workers, threshold=threshold,
                            desc="Distortion"):
        for e, spread in chunk.items():
            if spread > worst.get(e, -1):
                worst[e] = spread
    table, running = [], 0
    for eps in phi.source.realized:
        running = max(running, worst.get(eps, 0))
        table.append((eps, running))
    return DistortionModulus(tuple(table))


def chained_bound(moduli: Sequence[DistortionModulus], t) -> Rational:
    """δ_k(...δ_2(δ_1(t))): the bound a composition inherits from its stages."""
    value = rational(t)
    for modulus in moduli:
        value = modulus.at(value)
    return value


def check_composition_bound(composed: DistortionModulus,
                            stages: Sequence[DistortionModulus]) -> ValidationReport:
    violations = []
    for eps, delta in composed.table:
        bound = chained_bound(stages, eps)
        if delta > bound:
            violations.append(Violation("composition", "distortion", (str(eps),), bound, delta))
    return ValidationReport("composed modulus", ("composition",), tuple(violations))


# --- certificates -------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    axiom: str
    passed: bool
    witness: Tuple[str, ...] = ()


@dataclass(frozen=True)
class MorphismCertificate:
    kind: str
    forward: DistortionModulus
    backward: DistortionModulus
    checks: Tuple[Check, ...]
    closeness_bound: Optional[Rational] = None
    fiber_bound: Optional[Rational] = None
    subject: str = ""

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, axiom: str) -> Check:
        return next(c for c in self.checks if c.axiom == axiom)


def _first_empty(rows: Sequence[Tuple[int, ...]], points: Sequence[str]) -> Tuple[str, ...]:
    for i, row in enumerate(rows):
        if not row:
            return (points[i],)
    return ()


def verify_asymorphism(phi: MultiMap, subject: str = "",
                       config: Optional[RunConfig] = None) -> MorphismCertificate:
    """Surjectivity of Φ and Φ⁻¹ plus both moduli.

    Kind is asymorphism when both directions are surjective, embedding when
    only Φ⁻¹ is (Φ total), relation otherwise.
    """
    if not phi.pairs:
        raise InputError("Cannot certify an empty relation")
    forward = distortion_modulus(phi, config)
    backward = distortion_modulus(phi.inverse(), config)
    missing_target = _first_empty(phi.backward, phi.target.points)
    missing_source = _first_empty(phi.forward, phi.source.points)
    checks = (
        Check("surjective", not missing_target, missing_target),
        Check("inverse-surjective", not missing_source, missing_source),
        Check("bornologous", forward.finite),
        Check("inverse-bornologous", backward.finite),
    )
    if phi.surjective and phi.total and forward.finite and backward.finite:
        kind = ASYMORPHISM
    elif phi.total and forward.finite and backward.finite:
        kind = EMBEDDING
    else:
        kind = RELATION

    closeness = fibers = None
    if kind == ASYMORPHISM:
        pair = _selection(phi)
        closeness, fibers = pair.closeness, pair.fiber_bound
    logging.debug(f"Certificate {subject or '(unnamed)'}: {kind}, "
                  f"{len(phi.source)} -> {len(phi.target)} points")
    return MorphismCertificate(kind, forward, backward, checks, closeness, fibers, subject)


@dataclass(frozen=True)
class SelectionPair:
    f: Dict[str, str]
    g: Dict[str, str]
    source_closeness: Rational
    target_closeness: Rational
    fiber_bound: Rational

    @property
    def closeness(self) -> Rational:
        return max(self.source_closeness, self.target_closeness)


def _fiber_diameter(space: FiniteUltraSpace, indices: Sequence[int]) -> Rational:
    return max((space.d(a, b) for k, a in enumerate(indices) for b in indices[k + 1:]), default=0)


def _selection(phi: MultiMap) -> SelectionPair:
    X, Y = phi.source, phi.target
    f = [row[0] for row in phi.forward]
    g = [row[0] for row in phi.backward]
    source_close = max(X.d(x, g[f[x]]) if g[f[x]] != x else 0 for x in range(len(X)))
    target_close = max(Y.d(y, f[g[y]]) if f[g[y]] != y else 0 for y in range(len(Y)))

    fiber = 0
    for x in range(len(X)):
        back = sorted({a for y in phi.forward[x] for a in phi.backward[y]})
        fiber = max(fiber, _fiber_diameter(X, back))
    for y in range(len(Y)):
        ahead = sorted({b for x in phi.backward[y] for b in phi.forward[x]})
        fiber = max(fiber, _fiber_diameter(Y, ahead))

    return SelectionPair(
        {X.points[x]: Y.points[f[x]] for x in range(len(X))},
        {Y.points[y]: X.points[g[y]] for y in range(len(Y))},
        source_close, target_close, fiber,
    )


def selection_pair(phi: MultiMap, certificate: Optional[MorphismCertificate] = None) -> SelectionPair:
    """Least-id selections f(x) ∈ Φ(x), g(y) ∈ Φ⁻¹(y) and their closeness to the identities."""
    if certificate is None:
        if not (phi.pairs and phi.surjective and phi.total):
            raise PreconditionFailed("Selection pair needs an asymorphism")
    elif certificate.kind != ASYMORPHISM:
        raise PreconditionFailed(f"Selection pair needs an asymorphism, got {certificate.kind}")
    return _selection(phi)


def is_large(space: FiniteUltraSpace, subset: Iterable[str]) -> Rational:
    """sup_x d(x, subset); every r above it makes the subset r-large under "<"."""
    indices = sorted({space.idx(p) for p in subset})
    if not indices:
        raise InputError("Largeness of an empty subset")
    members = set(indices)
    worst = 0
    for x in range(len(space)):
        if x in members:
            continue
        worst = max(worst, min(space.d(x, s) for s in indices))
    return worst


@dataclass(frozen=True)
class NormalForm:
    """h: X' → Y' bijective, X' a transversal of f's fibres and Y' = f(X)."""
    x_subset: Tuple[str, ...]
    y_subset: Tuple[str, ...]
    h: Dict[str, str]
    closeness: Rational
    largeness: Rational
    forward: DistortionModulus
    backward: DistortionModulus
    report: ValidationReport


def _map_distance(space: FiniteUltraSpace, a: Mapping[str, str], b: Mapping[str, str]) -> Rational:
    return max((space.dist(a[p], b[p]) if a[p] != b[p] else 0 for p in a), default=0)


def coarse_normal_form(f: Mapping[str, str], g: Mapping[str, str], X: FiniteUltraSpace,
                       Y: FiniteUltraSpace, config: Optional[RunConfig] = None) -> NormalForm:
    """Restrict f to a bijection between large subsets and check the backward bound.

    With R = max(dist(g∘f, id), dist(f∘g, id)) every realized ε of Y' must
    satisfy δ_{h⁻¹}(ε) <= δ_g(ε) + 2R, and f(X) is within R of every point
    of Y since f(g(y)) lies in it.
    """
    if set(f) != set(X.points) or set(g) != set(Y.points):
        raise InputError("Normal form needs maps defined on every point")
    gf = {x: g[f[x]] for x in X.points}
    fg = {y: f[g[y]] for y in Y.points}
    R = max(_map_distance(X, gf, {x: x for x in X.points}),
            _map_distance(Y, fg, {y: y for y in Y.points}))

    h: Dict[str, str] = {}
    for x in X.points:  # least id first
        if f[x] not in h.values():
            h[x] = f[x]
    x_sub = tuple(h)
    y_sub = tuple(sorted(h.values(), key=Y.idx))
    Xs, Ys = X.subspace(x_sub), Y.subspace(y_sub)
    h_map = MultiMap.from_function(Xs, Ys, h)
    forward = distortion_modulus(h_map, config)
    backward = distortion_modulus(h_map.inverse(), config)
    g_modulus = distortion_modulus(MultiMap.from_function(Y, X, g), config)

    violations = []
    for eps, delta in backward.table:
        bound = g_modulus.at(eps) + 2 * R
        if delta > bound:
            violations.append(Violation("backward-bound", "distortion", (str(eps),), bound, delta))
    largeness = is_large(Y, y_sub)
    if largeness > R:
        violations.append(Violation("largeness", "distortion", y_sub[:3], R, largeness))
    report = ValidationReport("normal form", ("backward-bound", "largeness"), tuple(violations))
    return NormalForm(x_sub, y_sub, h, R, largeness, forward, backward, report)


# --- tower maps ---------------------------------------------------------------

@dataclass(frozen=True)
class TowerEmbedding:
    node_map: Dict[str, str]
    base_map: MultiMap
    report: ValidationReport
    certificate: MorphismCertificate


def _check_embedding_degrees(T1: Tower, T2: Tower, require_iso: bool) -> None:
    p1, p2 = degree_profile(T1), degree_profile(T2)
    for k in range(1, T1.height):
        if p1.Deg_n(k) > p2.deg_n(k):
            raise PreconditionFailed(
                f"No tower embedding: Deg_{k}(T1) = {p1.Deg_n(k)} > deg_{k}(T2) = {p2.deg_n(k)}",
                level=k, inequality=f"Deg_{k}(T1) <= deg_{k}(T2)")
        if require_iso and p2.Deg_n(k) > p1.deg_n(k):
            raise PreconditionFailed(
                f"No tower isomorphism: Deg_{k}(T2) = {p2.Deg_n(k)} > deg_{k}(T1) = {p1.deg_n(k)}",
                level=k, inequality=f"Deg_{k}(T2) <= deg_{k}(T1)")


def tower_embedding(T1: Tower, T2: Tower, require_iso: bool = False) -> TowerEmbedding:
    """Level-preserving monotone injection of the germ T1 into the germ T2.

    Children are matched in least-id order, then each subtree recursively.
    """
    if T1.height != T2.height:
        raise InputError(f"Tower heights differ: {T1.height} vs {T2.height}")
    _check_embedding_degrees(T1, T2, require_iso)

    node_map = {T1.top: T2.top}
    stack = [T1.top]
    while stack:
        u = stack.pop()
        targets = T2.children[node_map[u]]
        for child, image in zip(T1.children[u], targets):
            node_map[child] = image
            stack.append(child)

    base_map = base_restriction(node_map, T1, T2)
    X, Y = base_map.source, base_map.target
    violations = []
    if len(set(node_map.values())) != len(node_map):
        violations.append(Violation("injective", "fiber", (), len(node_map), len(set(node_map.values()))))
    for a, b in node_map.items():
        if T1.level[a] != T2.level[b]:
            violations.append(Violation("level-preservation", "level-preservation", (a, b),
                                        T1.level[a], T2.level[b]))
        p = T1.parent[a]
        if p is not None and T2.parent[b] != node_map[p]:
            violations.append(Violation("monotone", "monotone", (a, p), node_map[p], T2.parent[b]))
    image = [Y.idx(node_map[b]) for b in X.points]
    for i in range(len(X)):
        for j in range(i + 1, len(X)):
            if X.d(i, j) != Y.d(image[i], image[j]):
                violations.append(Violation("isometry", "distortion", (X.points[i], X.points[j]),
                                            X.d(i, j), Y.d(image[i], image[j])))
    report = ValidationReport("tower embedding",
                              ("injective", "level-preservation", "monotone", "isometry"),
                              tuple(violations))
    certificate = verify_asymorphism(base_map, "tower embedding")
    if report.ok:
        certificate = replace(certificate, kind=ISOMETRY)
    return TowerEmbedding(node_map, base_map, report, certificate)


ADMISSIBLE_CHECKS = ("domain", "level-preservation", "monotone", "fiber", "lower-set", "top-image")


def check_admissible(phi: Mapping[str, str], T1: Tower, T2: Tower) -> ValidationReport:
    """The five admissible-morphism conditions for a node map on a lower set of T1."""
    violations = []
    for a, b in phi.items():
        if a not in T1.level or b not in T2.level:
            violations.append(Violation("domain", "domain", (a, b), "known nodes", None))
    if violations:
        return ValidationReport("admissible morphism", ADMISSIBLE_CHECKS, tuple(violations))

    for a in phi:
        for c in T1.children[a]:
            if c not in phi:
                violations.append(Violation("domain", "domain", (a, c), "lower set", "missing child"))
                break
        b = phi[a]
        if T1.level[a] != T2.level[b]:
            violations.append(Violation("level-preservation", "level-preservation", (a, b),
                                        T1.level[a], T2.level[b]))
        p = T1.parent[a]
        if p in phi:
            q = phi[p]
            if T2.level[b] > T2.level[q] or T2.ancestor(b, T2.level[q]) != q:
                violations.append(Violation("monotone", "monotone", (a, p), f"{b} <= {q}", "not below"))

    fibers: Dict[str, List[str]] = {}
    for a in sorted(phi):
        fibers.setdefault(phi[a], []).append(a)
    for b, members in fibers.items():
        parents = {T1.parent[a] for a in members}
        if len(members) > 1 and (len(parents) != 1 or None in parents):
            violations.append(Violation("fiber", "fiber", tuple(members[:2]) + (b,),
                                        "one predecessor set", f"{len(parents)} parents"))

    image = set(phi.values())
    for b in sorted(image):
        for c in T2.children[b]:
            if c not in image:
                violations.append(Violation("lower-set", "lower-set", (b, c), "in image", "missing"))
                break

    tops = sorted({phi[a] for a in phi if T1.parent[a] not in phi})
    if len(tops) > 1:
        violations.append(Violation("top-image", "top-image", tuple(tops[:3]), 1, len(tops)))
    return ValidationReport("admissible morphism", ADMISSIBLE_CHECKS, tuple(violations))


def base_restriction(phi: Mapping[str, str], T1: Tower, T2: Tower) -> MultiMap:
    """φ|[T1] as a multi-map between the two bases."""
    X, Y = base_space(T1), base_space(T2)
    return MultiMap.from_function(X, Y, {b: phi[b] for b in T1.base if b in phi})


def next_multimap(tower: Tower, sub: SubtowerResult) -> MultiMap:
    """next: [T] → [T(k)] sending each base point to its least ancestor kept."""
    return MultiMap.from_function(base_space(tower), base_space(sub.tower), sub.next_map)


def check_distortion_bounds(phi: MultiMap) -> ValidationReport:
    """For path-metric bases: d <= 2n implies image d <= 2n, and image d <= 2n implies d <= 2n + 2.

    On even distances both reduce to d2 <= d1 <= d2 + 2 for every pair.
    """
    X, Y = phi.source, phi.target
    violations = []
    for i in range(len(X)):
        for j in range(i + 1, len(X)):
            d1 = X.d(i, j)
            for b in phi.forward[i]:
                for c in phi.forward[j]:
                    d2 = Y.d(b, c) if b != c else 0
                    pair = (X.points[i], X.points[j])
                    if d2 > d1:
                        violations.append(Violation("expansion", "distortion", pair, d1, d2))
                    if d1 > d2 + 2:
                        violations.append(Violation("contraction", "distortion", pair, d2 + 2, d1))
    return ValidationReport("distortion bounds", ("expansion", "contraction"), tuple(violations))


def check_entropy_transport(phi: MultiMap, certificate: MorphismCertificate,
                            eps_values: Sequence, delta_values: Sequence,
                            caps: Caps = DEFAULT_CAPS, one_per_ball: bool = False) -> ValidationReport:
    """Closed-net entropy only grows along a coarse embedding.

    For every centre x0, y0 = least image of x0 and (ε, δ):
    Ent_{ω⁻(2ε)}(B_δ(x0)) <= Ent_ε(B_{ω(2δ)}(y0)).

    With `one_per_ball` only the least point of each closed δ-ball is used
    as x0. Between ultrametric spaces the other points of the ball give the
    same two balls, since their images lie within ω(δ) of y0.
    """
    if certificate.kind not in (ASYMORPHISM, EMBEDDING):
        raise PreconditionFailed(f"Entropy transport needs an embedding, got {certificate.kind}")
    X, Y = phi.source, phi.target
    violations = []
    for delta in (rational(d) for d in delta_values):
        centres = [c[0] for c in ball_partition(X, delta)] if one_per_ball else range(len(X))
        for x0 in centres:
            y0 = phi.forward[x0][0]
            source_ball = [X.points[i] for i in ball_indices(X, x0, delta)]
            target_ball = [Y.points[j]
                           for j in ball_indices(Y, y0, certificate.forward.at(2 * delta))]
            for eps in (rational(e) for e in eps_values):
                left = len(min_net(X, source_ball, certificate.backward.at(2 * eps), CLOSED, caps))
                right = len(min_net(Y, target_ball, eps, CLOSED, caps))
                if left > right:
                    violations.append(Violation("entropy-transport", "entropy",
                                                (X.points[x0], str(eps), str(delta)), right, left))
    return ValidationReport("entropy transport", ("entropy-transport",), tuple(violations))
