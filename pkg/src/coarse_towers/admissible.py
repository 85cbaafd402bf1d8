"""Surjective admissible morphisms between germs, built level by level.

Sets of level-k nodes sharing a parent are *admissible* when their size lies
in the window [a_k, b_k]. The builder maps an admissible set A onto a node w
of the same level, splits every pred(x), x ∈ A, into admissible parts and
pairs the parts with pred(w), recursing down to the base.

Floors and ceilings are the standard ones.
"""
import logging
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .config import RunConfig
from .errors import InputError, PreconditionFailed
from .findings import ValidationReport, Violation
from .metric import Rational, rational
from .morphisms import (
    Check,
    MorphismCertificate,
    MultiMap,
    check_admissible,
    check_distortion_bounds,
    verify_asymorphism,
)
from .towers import DegreeProfile, Tower, base_space, degree_profile

L2_CHECKS = ("sequence", "successor", "ceiling", "lower", "upper")


@dataclass(frozen=True)
class AdmissibleSequences:
    """Windows [a_k, b_k] for admissible sets of level-k nodes, k = 1..len(a).

    With `exact_top` the last window is the exact size of the top set and is
    exempt from the a + 2 <= b gap.
    """
    a: Tuple[Rational, ...]
    b: Tuple[Rational, ...]
    exact_top: bool = False

    def __post_init__(self):
        if not self.a or len(self.a) != len(self.b):
            raise InputError(f"Sequence lengths differ: {len(self.a)} vs {len(self.b)}")
        object.__setattr__(self, "a", tuple(rational(v) for v in self.a))
        object.__setattr__(self, "b", tuple(rational(v) for v in self.b))

    def __len__(self) -> int:
        return len(self.a)

    def window(self, level: int) -> Tuple[Rational, Rational]:
        if not 1 <= level <= len(self.a):
            raise PreconditionFailed(f"No size window for level {level}", level=level)
        return self.a[level - 1], self.b[level - 1]

    def integer_window(self, level: int) -> Tuple[int, int]:
        lo, hi = self.window(level)
        return math.ceil(lo), math.floor(hi)


def check_l2_preconditions(profile1: DegreeProfile, profile2: DegreeProfile,
                           seqs: AdmissibleSequences) -> ValidationReport:
    """Level-by-level check, in exact arithmetic, that an admissible morphism exists:

        1 <= a_i,  a_i + 2 <= b_i,  a_i + 1 <= deg_i(T1),  ceil(a_i) <= deg_i(T1),
        b_i + a_i * Deg_i(T2) / a_{i+1} <= deg_i(T1) <= Deg_i(T1)
                                          <= a_i + b_i * (deg_i(T2) / b_{i+1} - 2).
    """
    K = len(seqs)
    if profile1.height < K or profile2.height < K:
        raise InputError(f"Sequences of length {K} need profiles of height >= {K}, "
                         f"got {profile1.height} and {profile2.height}")
    a, b = seqs.a, seqs.b
    violations = []
    notes = ["floor/ceiling: standard; the ceiling bound is checked with the standard ceiling "
             "and implies the swapped reading"]
    for i in range(1, K + 1):
        ai, bi = a[i - 1], b[i - 1]
        top = seqs.exact_top and i == K
        if ai < 1:
            violations.append(Violation("sequence", "sequence", (str(i),), ">= 1", ai))
        if top and ai != bi:
            violations.append(Violation("sequence", "sequence", (str(i),), ai, bi))
        elif not top and ai + 2 > bi:
            violations.append(Violation("sequence", "sequence", (str(i),), f">= {ai + 2}", bi))
        if i == K:
            continue

        d1, D1 = profile1.deg_n(i), profile1.Deg_n(i)
        d2, D2 = profile2.deg_n(i), profile2.Deg_n(i)
        if ai + 1 > d1:
            violations.append(Violation("successor", "inequality", (str(i),), d1, ai + 1))
        if math.ceil(ai) > d1:
            violations.append(Violation("ceiling", "inequality", (str(i),), d1, math.ceil(ai)))
        lower = bi + ai * Fraction(D2) / a[i] if D2 != math.inf else math.inf
        if lower > d1:
            violations.append(Violation("lower", "inequality", (str(i),), d1, lower))
        upper = ai + bi * (Fraction(d2) / b[i] - 2) if d2 != math.inf else math.inf
        if D1 > upper:
            violations.append(Violation("upper", "inequality", (str(i),), upper, D1))
    return ValidationReport("admissible preconditions", L2_CHECKS, tuple(violations), tuple(notes))


def balanced_partition(items: Sequence[str], parts: int, lo, hi) -> List[List[str]]:
    """Split `items` in order into `parts` blocks whose sizes differ by at most one
    and lie in [ceil(lo), floor(hi)]; larger blocks come first."""
    n = len(items)
    if parts < 1:
        raise PreconditionFailed(f"Cannot split {n} items into {parts} parts")
    small, extra = divmod(n, parts)
    lo_i, hi_i = math.ceil(rational(lo)), math.floor(rational(hi))
    largest = small + (1 if extra else 0)
    if small < lo_i or largest > hi_i:
        raise PreconditionFailed(
            f"Cannot split {n} items into {parts} parts of size in [{lo_i}, {hi_i}]",
            inequality=f"{parts}*{lo_i} <= {n} <= {parts}*{hi_i}")
    out, start = [], 0
    for k in range(parts):
        size = small + (1 if k < extra else 0)
        out.append(list(items[start:start + size]))
        start += size
    return out


def fiber_counts(total: int, keys: Sequence[str]) -> Dict[str, int]:
    """d_x ∈ {floor(total/|A|), ceil(total/|A|)} summing to `total`.

    Largest remainder: every share has the same fractional part, so the
    extra units go to the least ids.
    """
    base, extra = divmod(total, len(keys))
    return {x: base + (1 if k < extra else 0) for k, x in enumerate(keys)}


@dataclass(frozen=True)
class AdmissibleMorphism:
    node_map: Dict[str, str]
    base_map: MultiMap
    certificate: MorphismCertificate
    admissible: ValidationReport
    bounds: ValidationReport


def _first_failure(report: ValidationReport) -> PreconditionFailed:
    v = report.violations[0]
    level = int(v.witness[0]) if v.witness and v.witness[0].isdigit() else None
    return PreconditionFailed(f"Admissible-morphism precondition fails: {v.describe()}",
                              level=level, inequality=v.check)


def build_admissible_morphism(T1: Tower, A: Sequence[str], T2: Tower, w: str,
                              seqs: AdmissibleSequences,
                              config: Optional[RunConfig] = None) -> AdmissibleMorphism:
    """Surjective admissible φ: ↓A → ↓w with a certificate for its base restriction."""
    report = check_l2_preconditions(degree_profile(T1), degree_profile(T2), seqs)
    if not report.ok:
        raise _first_failure(report)

    A = sorted(T1.check(x) for x in A)
    if not A:
        raise InputError("Empty admissible set")
    lev = T1.level[A[0]]
    if any(T1.level[x] != lev for x in A) or T2.level[T2.check(w)] != lev:
        raise PreconditionFailed("A and w must lie on one level", level=lev)
    if len(A) > 1 and len({T1.parent[x] for x in A}) != 1:
        raise PreconditionFailed("A must lie in a single predecessor set", level=lev)
    lo, hi = seqs.window(lev)
    if not lo <= len(A) <= hi:
        raise PreconditionFailed(f"|A| = {len(A)} outside the window [{lo}, {hi}]",
                                 level=lev, inequality="a <= |A| <= b")

    node_map: Dict[str, str] = {}

    def claim(block: List[str], target: str) -> None:
        level = T1.level[block[0]]
        for x in block:
            node_map[x] = target
        if level == 1:
            return
        slots = T2.children[target]
        counts = fiber_counts(len(slots), block)
        window = seqs.window(level - 1)
        family: List[List[str]] = []
        for x in block:
            try:
                family.extend(balanced_partition(T1.children[x], counts[x], *window))
            except PreconditionFailed as e:
                raise PreconditionFailed(f"{e} below {x} -> {target}", level=level - 1,
                                         inequality=e.inequality) from None
        for part, child in zip(family, slots):
            claim(part, child)

    claim(A, w)
    logging.debug(f"Admissible morphism on {len(node_map)} nodes, level {lev} -> {w}")

    source_base = [b for x in A for b in T1.base_below(x)]
    X = base_space(T1).subspace(source_base)
    Y = base_space(T2).subspace(T2.base_below(w))
    base_map = MultiMap.from_function(X, Y, {b: node_map[b] for b in X.points})
    admissible = check_admissible(node_map, T1, T2)
    bounds = check_distortion_bounds(base_map)
    certificate = verify_asymorphism(base_map, "admissible morphism", config)
    certificate = replace(certificate, checks=certificate.checks + (
        Check("admissible", admissible.ok,
              admissible.violations[0].witness if admissible.violations else ()),
        Check("distortion-bounds", bounds.ok,
              bounds.violations[0].witness if bounds.violations else ()),
    ))
    return AdmissibleMorphism(node_map, base_map, certificate, admissible, bounds)
