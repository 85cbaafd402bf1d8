"""Measurement runs for open questions; they emit tables, never verdicts."""
import logging
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Dict, List, Sequence

from .config import RunConfig, default_config
from .errors import InputError, PreconditionFailed, TruncationExhausted
from .homogenize import asymptotic_homogeneity, synthesize_sequences
from .metric import WordSpaceSpec, entropy_profile, hyperspace, product, sparse_sequence_space, word_space
from .towers import DegreeProfile


@dataclass(frozen=True)
class ExperimentResult:
    name: str
    header: Sequence[str]
    rows: List[Sequence[Any]]
    summary: Dict[str, Any]


def _entropy_grid(space, config: RunConfig) -> List[Sequence[Any]]:
    radii = list(space.realized)
    eps_values = [r for r in radii if r > 0] if config.net == "strict" else radii
    profile = entropy_profile(space, eps_values, radii, config.net, config.caps)
    return [list(row) for row in profile.rows()]


def hyperspace_entropy(n: int = 2, length: int = 4, config: RunConfig = None) -> ExperimentResult:
    """Entropy table of the subsets of size <= n of the binary word space."""
    config = config or default_config()
    base = word_space(WordSpaceSpec(2, length), config.caps)
    space = hyperspace(base, n, config.caps)
    rows = _entropy_grid(space, config)
    logging.info(f"Hyperspace of order {n} over {len(base)} words: {len(space)} points, {len(rows)} rows")
    return ExperimentResult("hyperspace-entropy", ("eps", "delta", "large", "small"), rows,
                            {"points": len(space), "n": n, "length": length})


def product_with_sparse_sequence(terms: int = 4, length: int = 4,
                                 config: RunConfig = None) -> ExperimentResult:
    """Entropy table of the binary word space times the squares 1, 4, ..., terms^2."""
    config = config or default_config()
    if terms < 1:
        raise InputError("The sequence needs at least one term")
    base = word_space(WordSpaceSpec(2, length), config.caps)
    sequence = sparse_sequence_space([k * k for k in range(1, terms + 1)], config.caps)
    space = product(base, sequence, config.caps)
    rows = _entropy_grid(space, config)
    logging.info(f"Product of {len(base)} words and {terms} squares: {len(space)} points")
    return ExperimentResult("product-with-sparse-sequence", ("eps", "delta", "large", "small"), rows,
                            {"points": len(space), "terms": terms, "length": length})


def _random_bounded_profile(rng: random.Random, height: int, ratio_bound: Fraction) -> DegreeProfile:
    """Random level bounds whose total Deg/deg product stays within the bound."""
    lows, highs = [], []
    budget = Fraction(1)
    for _ in range(height - 1):
        low = rng.randint(2, 4)
        high = low
        for cand in range(low + 2, low, -1):
            if rng.random() < 0.5 and budget * Fraction(cand, low) <= ratio_bound:
                high = cand
                break
        budget *= Fraction(high, low)
        lows.append(low)
        highs.append(high)
    return DegreeProfile.from_level_bounds(lows, highs)


def ratio_bounded_synthesis(trials: int = 20, ratio_bound=4, height: int = 10,
                            seed: int = 0, config: RunConfig = None) -> ExperimentResult:
    """Share of random ratio-bounded profiles on which synthesis yields >= 2 indices."""
    config = config or default_config()
    if trials < 1 or height < 2:
        raise InputError("Need trials >= 1 and height >= 2")
    bound = Fraction(ratio_bound)
    if bound < 1:
        raise InputError("The ratio bound must be >= 1")
    rng = random.Random(seed)
    rows = []
    successes = 0
    for trial in range(trials):
        profile = _random_bounded_profile(rng, height, bound)
        ratio = asymptotic_homogeneity(profile).product
        try:
            synth = synthesize_sequences(profile, policy=config.synthesis)
            indices, levels = len(synth.n), " ".join(map(str, synth.n))
        except (TruncationExhausted, PreconditionFailed):
            indices, levels = 1, "1"
        ok = indices >= 2
        successes += ok
        rows.append((trial, ratio, indices, levels, ok))
    rate = Fraction(successes, trials)
    logging.info(f"Synthesis succeeded on {successes}/{trials} profiles with ratio <= {bound}")
    return ExperimentResult("ratio-bounded-synthesis",
                            ("trial", "ratio_product", "indices", "levels", "success"), rows,
                            {"trials": trials, "successes": successes, "rate": rate,
                             "ratio_bound": bound, "height": height, "seed": seed})


EXPERIMENTS: Dict[str, Callable[..., ExperimentResult]] = {
    "hyperspace-entropy": hyperspace_entropy,
    "ratio-bounded-synthesis": ratio_bounded_synthesis,
    "product-with-sparse-sequence": product_with_sparse_sequence,
}


def run_experiment(name: str, config: RunConfig = None, **params) -> ExperimentResult:
    try:
        fn = EXPERIMENTS[name]
    except KeyError:
        raise InputError(f"Unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}") from None
    return fn(config=config, **params)
