"""Run configuration: size caps, net convention and synthesis policy.

The defaults are desk scale. A project can override them with a small TOML
file passed via --config, e.g.:

    net = "strict"
    workers = 4

    [caps]
    max_points = 50000

    [synthesis]
    b1_max_denominator = 32
"""
import tomllib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional

from .errors import InputError, SizeCapExceeded

DEFAULT_MAX_POINTS = 20_000
DEFAULT_MAX_PAIR_EVALUATIONS = 200_000_000
# Largest subset the exhaustive (plain metric) net search will look at.
DEFAULT_EXACT_NET_POINTS = 16

NET_CONVENTIONS = ("strict", "closed")
A1_POLICIES = ("unit",)
DELTA_POLICIES = ("dyadic",)

# Below this many pair evaluations a scan runs inline instead of in a pool.
DEFAULT_PARALLEL_THRESHOLD = 4_000_000


@dataclass(frozen=True)
class Caps:
    max_points: int = DEFAULT_MAX_POINTS
    max_pair_evaluations: int = DEFAULT_MAX_PAIR_EVALUATIONS
    exact_net_points: int = DEFAULT_EXACT_NET_POINTS

    def check_points(self, what: str, size: int) -> None:
        if size > self.max_points:
            raise SizeCapExceeded(what, size, self.max_points)

    def check_pairs(self, what: str, n_points: int) -> None:
        pairs = n_points * (n_points - 1) // 2
        if pairs > self.max_pair_evaluations:
            raise SizeCapExceeded(f"{what} (pair evaluations)", pairs,
                                  self.max_pair_evaluations)


DEFAULT_CAPS = Caps()


@dataclass(frozen=True)
class SynthesisPolicy:
    a1_policy: str = "unit"
    delta_policy: str = "dyadic"
    b1_max_denominator: int = 64
    # Upper bound on a single binary grouping step 2^(m_{i+1} - m_i).
    max_exponent: int = 64


@dataclass(frozen=True)
class RunConfig:
    caps: Caps = field(default_factory=Caps)
    net: str = "closed"
    synthesis: SynthesisPolicy = field(default_factory=SynthesisPolicy)
    workers: int = 0  # 0 = auto, 1 = inline
    parallel_threshold: int = DEFAULT_PARALLEL_THRESHOLD
    seed: int = 0
    output: Optional[Path] = None

    def decision_ledger(self) -> Dict[str, Any]:
        """Decisions every report embeds so certificates describe themselves."""
        return {
            "net_convention": self.net,
            "floor_ceiling": "standard floor/ceiling; ceil(a_i) bound checked in both readings",
            "a1_policy": self.synthesis.a1_policy,
            "b1_max_denominator": self.synthesis.b1_max_denominator,
            "delta_policy": "delta_i = 1 + 2^(1-i)",
            "tails": "finite products up to the truncation height",
            "word_metric": "max 2^n over disagreeing positions",
        }


def _validate(config: RunConfig) -> RunConfig:
    caps = config.caps
    if min(caps.max_points, caps.max_pair_evaluations, caps.exact_net_points) <= 0:
        raise InputError("Size caps must be positive")
    if config.net not in NET_CONVENTIONS:
        raise InputError(f"Unknown net convention {config.net!r}; use one of {NET_CONVENTIONS}")
    syn = config.synthesis
    if syn.a1_policy not in A1_POLICIES:
        raise InputError(f"Unknown a1 policy {syn.a1_policy!r}")
    if syn.delta_policy not in DELTA_POLICIES:
        raise InputError(f"Unknown delta policy {syn.delta_policy!r}")
    if syn.b1_max_denominator < 1 or syn.max_exponent < 1:
        raise InputError("Synthesis bounds must be positive")
    if config.workers < 0:
        raise InputError("workers must be >= 0")
    return config


def make_config(base: Optional[RunConfig] = None, **overrides) -> RunConfig:
    """Return `base` (or the defaults) with top-level fields replaced."""
    config = replace(base or RunConfig(), **overrides)
    return _validate(config)


def default_config() -> RunConfig:
    return RunConfig()


def load_config(path: Path) -> RunConfig:
    """Load a run config from TOML; unspecified keys keep their defaults."""
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as e:
        raise InputError(f"Cannot read config {path}: {e}") from e

    try:
        caps = replace(DEFAULT_CAPS, **data.get("caps", {}))
        synthesis = replace(SynthesisPolicy(), **data.get("synthesis", {}))
    except TypeError as e:
        raise InputError(f"Unknown key in {path}: {e}") from e
    output = data.get("output")
    return make_config(
        caps=caps,
        synthesis=synthesis,
        net=data.get("net", "closed"),
        workers=int(data.get("workers", 0)),
        parallel_threshold=int(data.get("parallel_threshold", DEFAULT_PARALLEL_THRESHOLD)),
        seed=int(data.get("seed", 0)),
        output=Path(output) if output else None,
    )
