"""Asymptotic homogeneity and explicit coarse equivalences with the binary germ.

The pipeline for a germ T of height H:

1. synthesize windows (a_i, b_i) and grouping levels n_i (in T) and m_i
   (in the binary tower);
2. group T at n = (n_1..n_K, H) and the binary tower at m = (m_1..m_K);
3. build a surjective admissible morphism between the grouped germs;
4. compose next -> admissible -> next^-1 -> canonical bijection onto the
   word space, certifying every stage and the composite;
5. check the normal form of the selection pair and the entropy transport
   of the composite.

All arithmetic is exact.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from .admissible import (
    AdmissibleMorphism,
    AdmissibleSequences,
    build_admissible_morphism,
    check_l2_preconditions,
)
from .config import RunConfig, SynthesisPolicy, default_config
from .errors import CoarseError, InputError, PreconditionFailed, TruncationExhausted
from .findings import ValidationReport, Violation
from .metric import (
    CLOSED,
    FiniteUltraSpace,
    Rational,
    WordSpaceSpec,
    entropy_profile,
    rational,
    validate_ultrametric,
    word_space,
)
from .morphisms import (
    ASYMORPHISM,
    MorphismCertificate,
    MultiMap,
    NormalForm,
    SelectionPair,
    check_composition_bound,
    check_entropy_transport,
    coarse_normal_form,
    compose,
    next_multimap,
    selection_pair,
    verify_asymorphism,
)
from .towers import (
    DegreeProfile,
    Tower,
    ball_tower,
    base_assignment,
    base_space,
    degree_profile,
    level_subtower,
    regular_tower,
)


def _product(values) -> Rational:
    out = Fraction(1)
    for v in values:
        out *= v
    return out.numerator if out.denominator == 1 else out


@dataclass(frozen=True)
class HomogeneityWitness:
    """c_k >= 1 with Deg_k <= c_k * deg_k and δ_k > 1, for k = 1..H-1."""
    c: Tuple[Rational, ...]
    delta: Tuple[Rational, ...]

    @property
    def height(self) -> int:
        return len(self.c) + 1

    def C(self, i: int, j: int) -> Rational:
        """C_i^j = c_i * ... * c_{j-1}."""
        return _product(self.c[i - 1:j - 1])

    def D(self, i: int, j: int) -> Rational:
        """δ_i^j = δ_i * ... * δ_{j-1}."""
        return _product(self.delta[i - 1:j - 1])

    def tail(self, i: int) -> Rational:
        """C_i^H * δ_i^H, the truncated tail product."""
        return self.C(i, self.height) * self.D(i, self.height)

    @classmethod
    def for_profile(cls, profile: DegreeProfile, delta_policy: str = "dyadic") -> "HomogeneityWitness":
        if delta_policy != "dyadic":
            raise InputError(f"Unknown delta policy {delta_policy!r}")
        if not profile.is_finite:
            raise InputError("A homogeneity witness needs finite degrees")
        H = profile.height
        c = tuple(Fraction(profile.Deg_n(k), profile.deg_n(k)) for k in range(1, H))
        delta = tuple(1 + Fraction(1, 2 ** (k - 1)) for k in range(1, H))
        return cls(tuple(rational(v) for v in c), tuple(rational(v) for v in delta))

    def check(self, profile: DegreeProfile) -> ValidationReport:
        violations = []
        if self.height != profile.height:
            violations.append(Violation("witness", "sequence", (), profile.height - 1, len(self.c)))
            return ValidationReport("homogeneity witness", ("witness",), tuple(violations))
        for k in range(1, self.height):
            ck, dk = self.c[k - 1], self.delta[k - 1]
            if ck < 1 or profile.Deg_n(k) > ck * profile.deg_n(k):
                violations.append(Violation("witness", "inequality", (str(k),),
                                            f"Deg_{k} <= c_{k} * deg_{k}", ck))
            if dk <= 1:
                violations.append(Violation("witness", "inequality", (str(k),), "> 1", dk))
        return ValidationReport("homogeneity witness", ("witness",), tuple(violations))


@dataclass(frozen=True)
class Homogeneity:
    product: Rational
    bound: Rational
    window: Tuple[int, int]


def asymptotic_homogeneity(profile: DegreeProfile) -> Homogeneity:
    """Max over windows [n, m] of the product of Deg_k / deg_k.

    Every ratio is >= 1, so the widest window attains the maximum.
    """
    H = profile.height
    if H < 2:
        return Homogeneity(1, 1, (1, 1))
    if not profile.is_finite:
        return Homogeneity(math.inf, math.inf, (1, H - 1))
    ratios = [Fraction(profile.Deg_n(k), profile.deg_n(k)) for k in range(1, H)]
    best, window = Fraction(1), (1, 1)
    for n in range(1, H):
        running = Fraction(1)
        for m in range(n, H):
            running *= ratios[m - 1]
            if running > best:
                best, window = running, (n, m)
    product = rational(_product(ratios))
    return Homogeneity(product, rational(best), window)


def entropy_ratio_product(space: FiniteUltraSpace, radii: Sequence) -> Rational:
    """Product over consecutive radii of Ent_{r_n}^{r_{n+1}} / ent_{r_n}^{r_{n+1}} (closed nets)."""
    rs = [rational(r) for r in radii]
    ratios = []
    for r, R in zip(rs, rs[1:]):
        profile = entropy_profile(space, [r], [R], CLOSED)
        ratios.append(Fraction(profile.large(r, R), profile.small(r, R)))
    return rational(_product(ratios))


# --- synthesis ----------------------------------------------------------------

@dataclass(frozen=True)
class SynthesisOutput:
    a: Tuple[Rational, ...]
    b: Tuple[Rational, ...]
    n: Tuple[int, ...]
    m: Tuple[int, ...]
    witness: HomogeneityWitness
    report: ValidationReport

    def __len__(self) -> int:
        return len(self.n)


def _least_fraction_above(x: Rational, max_denominator: int) -> Rational:
    """Smallest p/q >= x with q <= max_denominator."""
    best = None
    for q in range(1, max_denominator + 1):
        p = math.ceil(x * q)
        if best is None or Fraction(p, q) < best:
            best = Fraction(p, q)
    return rational(best)


def _height_advice(profile: DegreeProfile, start: int, needed: Rational) -> Optional[int]:
    """Rough height at which deg_start^H reaches `needed`, from the average growth."""
    H = profile.height
    if start >= H:
        return None
    have = profile.deg(start, H)
    growth = have ** (1 / (H - start))
    if growth <= 1:
        return None
    extra = max(1, math.ceil(math.log(float(needed) / have) / math.log(growth)))
    return H + extra + 1


def _grouping_threshold(a: Rational, b: Rational, delta: Rational) -> Rational:
    """Least d with (d - b)/(d + 2b) >= 1/δ, also d > ceil(a) and d >= a + 1."""
    return max(Fraction(b) * (delta + 2) / (delta - 1), math.ceil(a) + 1, a + 1)


def verify_synthesis(profile: DegreeProfile, a: Sequence[Rational], b: Sequence[Rational],
                     n: Sequence[int], m: Sequence[int]) -> ValidationReport:
    """Re-check the admissibility inequalities on the grouped profiles."""
    grouped = profile.regrouped(n)
    binary = DegreeProfile.from_degrees([2 ** (m[i + 1] - m[i]) for i in range(len(m) - 1)])
    return check_l2_preconditions(grouped, binary, AdmissibleSequences(tuple(a), tuple(b)))


def synthesize_sequences(profile: DegreeProfile, witness: Optional[HomogeneityWitness] = None,
                         policy: SynthesisPolicy = SynthesisPolicy(),
                         target_base: int = 2) -> SynthesisOutput:
    """Windows and grouping levels for an admissible morphism onto a grouped binary germ.

    Each step takes the least n_{i+1} <= H-1 and then the least m_{i+1} that
    work; synthesis stops at the first step the truncation cannot support.
    """
    if target_base != 2:
        raise InputError("Only the binary target is supported")
    if not profile.is_finite:
        raise InputError("Synthesis needs finite degrees")
    H = profile.height
    witness = witness or HomogeneityWitness.for_profile(profile, policy.delta_policy)
    wreport = witness.check(profile)
    if not wreport.ok:
        raise PreconditionFailed("Homogeneity witness does not fit the profile: "
                                 + wreport.violations[0].describe())

    a: List[Rational] = [1]
    b: List[Rational] = [_least_fraction_above(max(a[0] + 2, a[0] * witness.tail(1)),
                                               policy.b1_max_denominator)]
    n, m = [1], [0]
    ratio_checks = []

    while True:
        ai, bi, ni = a[-1], b[-1], n[-1]
        delta = witness.delta[ni - 1] if ni < H else None
        n_next = None
        if delta is not None:
            for cand in range(ni + 1, H):
                d = profile.deg(ni, cand)
                if d > math.ceil(ai) and ai + 1 <= d and Fraction(d - bi, d + 2 * bi) >= Fraction(1) / delta:
                    n_next = cand
                    break
        if n_next is None:
            if len(n) == 1:
                needed = _grouping_threshold(ai, bi, witness.delta[0]) if H > 1 else 2
                raise TruncationExhausted(f"No grouping level n_2 within height {H}",
                                          _height_advice(profile, 1, needed))
            logging.debug(f"Synthesis stops after {len(n)} levels (height {H})")
            break

        d = profile.deg(ni, n_next)
        tail = witness.tail(n_next)
        C = witness.C(ni, n_next)
        step = None
        for e in range(1, policy.max_exponent + 1):
            scale = 2 ** e
            a_next = Fraction(scale * ai, d - bi)
            b_next = Fraction(scale * bi, C * d + 2 * bi - ai)
            if scale * (tail - 1) * Fraction(ai, d - bi) > 2 and a_next > 1 and b_next > 1:
                step = (e, rational(a_next), rational(b_next))
                break
        if step is None:
            if len(n) == 1:
                raise TruncationExhausted(f"No binary grouping step up to 2^{policy.max_exponent}")
            break
        e, a_next, b_next = step
        a.append(a_next)
        b.append(b_next)
        n.append(n_next)
        m.append(m[-1] + e)
        if Fraction(b_next) / Fraction(a_next) < tail:
            ratio_checks.append(Violation("ratio", "inequality", (str(len(n)),), tail,
                                          Fraction(b_next) / Fraction(a_next)))

    report = verify_synthesis(profile, a, b, n, m)
    report = ValidationReport(report.subject, report.checks + ("ratio",),
                              report.violations + tuple(ratio_checks), report.notes)
    if not report.ok:
        raise PreconditionFailed("Synthesized sequences fail re-verification: "
                                 + report.violations[0].describe())
    return SynthesisOutput(tuple(a), tuple(b), tuple(n), tuple(m), witness, report)


# --- pipelines ----------------------------------------------------------------

@dataclass(frozen=True)
class Stage:
    name: str
    multimap: MultiMap
    certificate: MorphismCertificate


@dataclass(frozen=True)
class PipelineResult:
    synthesis: SynthesisOutput
    sequences: AdmissibleSequences
    levels: Tuple[int, ...]
    binary_levels: Tuple[int, ...]
    morphism: AdmissibleMorphism
    stages: Tuple[Stage, ...]
    composed: MultiMap
    certificate: MorphismCertificate
    selection: SelectionPair
    forward_bound: ValidationReport
    backward_bound: ValidationReport
    normal_form: NormalForm
    entropy_transport: ValidationReport

    @property
    def ok(self) -> bool:
        return (self.certificate.kind == ASYMORPHISM and self.forward_bound.ok
                and self.backward_bound.ok and self.morphism.bounds.ok
                and self.morphism.admissible.ok and self.normal_form.report.ok
                and self.entropy_transport.ok
                and self.selection.closeness <= self.selection.fiber_bound)


def canonical_bijection(binary: Tower) -> MultiMap:
    """[binary tower of height L+1] -> word_space(2, L): "1:w" -> "w"."""
    L = binary.height - 1
    X = base_space(binary)
    W = word_space(WordSpaceSpec(2, L))
    return MultiMap.from_function(X, W, {x: x.split(":", 1)[1] for x in X.points})


def _top_morphism(grouped: Tower, synth: SynthesisOutput, config: RunConfig):
    """Close the germ: try binary top steps 2^e until the builder succeeds."""
    K = len(synth.n)
    A = grouped.children[grouped.top]
    N = len(A)
    seqs = AdmissibleSequences(synth.a[:K - 1] + (N,), synth.b[:K - 1] + (N,), exact_top=True)
    p1 = degree_profile(grouped)
    policy = config.synthesis
    for e in range(1, policy.max_exponent + 1):
        m_star = synth.m[:K - 1] + (synth.m[K - 2] + e,)
        steps = [2 ** (m_star[i + 1] - m_star[i]) for i in range(K - 1)]
        if not check_l2_preconditions(p1, DegreeProfile.from_degrees(steps), seqs).ok:
            continue
        L = m_star[-1]
        if 2 ** L > config.caps.max_points:
            break
        binary = regular_tower([2] * L, L + 1, config.caps)
        sub = level_subtower(binary, [mi + 1 for mi in m_star])
        try:
            morphism = build_admissible_morphism(grouped, A, sub.tower, sub.tower.top, seqs, config)
        except PreconditionFailed as err:
            logging.debug(f"Top step 2^{e} rejected: {err}")
            continue
        return seqs, m_star, binary, sub, morphism
    raise TruncationExhausted(f"No binary top step within 2^{policy.max_exponent} and the "
                              f"point cap {config.caps.max_points}")


def _composite_entropy_transport(composed: MultiMap, certificate: MorphismCertificate,
                                 config: RunConfig) -> ValidationReport:
    # smallest scale at every radius from the finest ball to the whole germ
    radii = [r for r in composed.source.realized if r > 0]
    return check_entropy_transport(composed, certificate, radii[:1], radii, config.caps,
                                   one_per_ball=True)


def equivalence_pipeline(tower: Tower, witness: Optional[HomogeneityWitness] = None,
                         config: Optional[RunConfig] = None) -> PipelineResult:
    """Explicit asymorphism [T] -> word_space(2, L) through grouped germs."""
    config = config or default_config()
    profile = degree_profile(tower)
    synth = synthesize_sequences(profile, witness, config.synthesis)
    levels = synth.n + (tower.height,)
    sub1 = level_subtower(tower, levels)
    seqs, m_star, binary, sub2, morphism = _top_morphism(sub1.tower, synth, config)
    logging.info(f"Grouped at levels {levels}; binary germ of height {binary.height} "
                 f"grouped at {tuple(mi + 1 for mi in m_star)}")

    maps = [
        ("next", next_multimap(tower, sub1)),
        ("admissible", morphism.base_map),
        ("next-inverse", next_multimap(binary, sub2).inverse()),
        ("word-bijection", canonical_bijection(binary)),
    ]
    stages = []
    for name, phi in maps:
        cert = morphism.certificate if name == "admissible" else verify_asymorphism(phi, name, config)
        if cert.kind != ASYMORPHISM:
            raise PreconditionFailed(f"Stage {name} is not an asymorphism ({cert.kind})")
        stages.append(Stage(name, phi, cert))

    composed = stages[0].multimap
    for stage in stages[1:]:
        composed = compose(composed, stage.multimap)
    certificate = verify_asymorphism(composed, "composed", config)
    if certificate.kind != ASYMORPHISM:
        raise PreconditionFailed(f"Composite is not an asymorphism ({certificate.kind})")

    forward_bound = check_composition_bound(certificate.forward,
                                            [s.certificate.forward for s in stages])
    backward_bound = check_composition_bound(certificate.backward,
                                             [s.certificate.backward for s in reversed(stages)])
    selection = selection_pair(composed, certificate)
    normal_form = coarse_normal_form(selection.f, selection.g, composed.source, composed.target, config)
    entropy = _composite_entropy_transport(composed, certificate, config)
    return PipelineResult(synth, seqs, levels, tuple(m_star), morphism, tuple(stages), composed,
                          certificate, selection, forward_bound, backward_bound, normal_form, entropy)


@dataclass(frozen=True)
class SpaceEquivalence:
    ratio_product: Rational
    homogeneity: Homogeneity
    tower: Tower
    assignment: Stage
    pipeline: Optional[PipelineResult] = None
    composed: Optional[MultiMap] = None
    certificate: Optional[MorphismCertificate] = None

    @property
    def complete(self) -> bool:
        return self.pipeline is not None

    @property
    def identity_holds(self) -> bool:
        return self.ratio_product == self.homogeneity.product


def space_equivalence(space: FiniteUltraSpace, radii: Sequence,
                      witness: Optional[HomogeneityWitness] = None,
                      config: Optional[RunConfig] = None) -> SpaceEquivalence:
    """Ball tower of X at the radii, entropy-ratio identity, then the tower pipeline."""
    config = config or default_config()
    report = validate_ultrametric(space, config.caps, config)
    if not report.ok:
        raise PreconditionFailed("Not an ultrametric: " + report.violations[0].describe())
    tower = ball_tower(space, radii)
    ratio = entropy_ratio_product(space, radii)
    homogeneity = asymptotic_homogeneity(degree_profile(tower))
    if ratio != homogeneity.product:
        raise CoarseError(f"Entropy-ratio product {ratio} differs from the ball-tower "
                          f"homogeneity product {homogeneity.product}")

    phi = MultiMap.from_function(space, base_space(tower), base_assignment(space, radii))
    assignment = Stage("ball-assignment", phi, verify_asymorphism(phi, "ball-assignment", config))
    try:
        pipeline = equivalence_pipeline(tower, witness, config)
    except TruncationExhausted as err:
        logging.warning(f"Entropy-ratio product {ratio} (homogeneity bound {homogeneity.bound}); "
                        f"no certificate: {err}")
        err.partial = SpaceEquivalence(ratio, homogeneity, tower, assignment)
        raise
    composed = compose(phi, pipeline.composed)
    certificate = verify_asymorphism(composed, "composed", config)
    return SpaceEquivalence(ratio, homogeneity, tower, assignment, pipeline, composed, certificate)


@dataclass(frozen=True)
class Verdict:
    verdict: str
    detail: str


EQUIVALENT = "equivalent"
OUT_OF_SCOPE = "out of scope"


def classify(profile1: DegreeProfile, profile2: DegreeProfile) -> Verdict:
    """Homogeneous towers with finite degrees all share the countable sharp entropy."""
    if not (profile1.is_finite and profile2.is_finite):
        return Verdict(OUT_OF_SCOPE, "an infinite degree marks the uncountable-cardinal case, "
                                     "which is not handled here")
    for name, profile in (("first", profile1), ("second", profile2)):
        if not profile.is_homogeneous:
            raise PreconditionFailed(f"The {name} profile is not homogeneous (deg != Deg)")
    return Verdict(EQUIVALENT, "both sharp entropies are countable; run the equivalence "
                               "pipeline on each side and compose the first with the inverse "
                               "of the second for an explicit coarse equivalence")
