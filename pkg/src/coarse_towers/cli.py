import argparse
import logging
import multiprocessing
import sys
from dataclasses import dataclass, replace
from itertools import cycle, islice
from logging.handlers import QueueHandler, QueueListener, RotatingFileHandler
from pathlib import Path
from typing import Any, List, Optional, Sequence

from tqdm.contrib.logging import logging_redirect_tqdm

from . import __version__, parallel
from .config import RunConfig, default_config, load_config, make_config
from .errors import CoarseError, InputError, PreconditionFailed, SizeCapExceeded, TruncationExhausted
from .experiments import run_experiment
from .homogenize import classify, equivalence_pipeline, space_equivalence
from .metric import (
    FiniteUltraSpace,
    WordSpaceSpec,
    entropy_profile,
    rational,
    validate_metric,
    validate_ultrametric,
    word_space,
)
from .morphisms import ASYMORPHISM, next_multimap, tower_embedding, verify_asymorphism
from .parser import PROFILE, SPACE, TOWER, input_kind, load_input, load_json, validate_tower_json
from .towers import (
    DegreeProfile,
    Tower,
    ball_tower,
    base_space,
    degree_profile,
    level_subtower,
    regular_tower,
    validate_tower,
)
from .writer import (
    certificate_to_json,
    embedding_to_json,
    entropy_rows,
    multimap_to_json,
    pipeline_to_json,
    profile_to_json,
    report_to_json,
    reproducibility_header,
    space_equivalence_to_json,
    space_to_json,
    tower_to_json,
    write_csv,
    write_json,
    write_markdown_summary,
)

log_queue = multiprocessing.Queue()

# Exit codes: 0 = success, 1 = verified negative, 2 = input error,
# 3 = size cap or truncation exhausted.
EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2
EXIT_EXHAUSTED = 3

DEFAULT_HEIGHT = 8


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--cap", type=int, default=None,
                        help="Maximum number of points any construction may build.")
    common.add_argument("--net", choices=("strict", "closed"), default=None,
                        help="Net convention for entropy (default: closed).")
    common.add_argument("-o", "--out", type=Path, default=None,
                        help="Write the result here instead of stdout.")
    common.add_argument("--seed", type=int, default=None,
                        help="Seed for randomized experiments.")
    common.add_argument("--workers", type=int, default=None,
                        help="Worker processes for exhaustive scans (0 = auto, 1 = inline).")
    common.add_argument("-c", "--config", type=Path, default=None,
                        help="Optional TOML file with caps and synthesis policy.")
    common.add_argument("-v", "--verbose", action="store_true",
                        help="Enable verbose logging (DEBUG level)")
    common.add_argument("--quiet", action="store_true",
                        help="Suppress info messages, only show errors (ERROR level)")
    return common


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parse command-line arguments."""
    parser = argparse.ArgumentParser(
        description="Towers, entropy and explicit coarse equivalences of finite ultrametric germs."
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}",
                        help="Show program version and exit.")
    common = _common_options()
    sub = parser.add_subparsers(dest="command", required=True)
    source_help = ("regular:k[,k2,...], word:a, or a space/tower/profile file "
                   "(.csv or .json).")

    p = sub.add_parser("validate", parents=[common],
                       help="Check a space (ultrametric) or a tower (tower axioms).")
    p.add_argument("source", help=source_help)
    p.add_argument("--height", type=int, default=DEFAULT_HEIGHT)
    p.add_argument("--metric", action="store_true",
                   help="Check the plain triangle inequality instead of the strong one.")

    p = sub.add_parser("entropy", parents=[common], help="Entropy table as CSV.")
    p.add_argument("source", help=source_help)
    p.add_argument("--height", type=int, default=DEFAULT_HEIGHT)
    p.add_argument("--eps", nargs="+", default=None, help="Net radii (default: realized distances).")
    p.add_argument("--delta", nargs="+", default=None, help="Ball radii (default: realized distances).")

    p = sub.add_parser("towerize", parents=[common], help="Ball tower of a space at given radii.")
    p.add_argument("source", help=source_help)
    p.add_argument("--height", type=int, default=DEFAULT_HEIGHT)
    p.add_argument("--radii", nargs="+", default=None)

    p = sub.add_parser("subtower", parents=[common], help="Level subtower and its next map.")
    p.add_argument("source", help=source_help)
    p.add_argument("--height", type=int, default=DEFAULT_HEIGHT)
    p.add_argument("--radii", nargs="+", default=None)
    p.add_argument("--levels", type=int, nargs="+", required=True)

    p = sub.add_parser("embed", parents=[common], help="Tower embedding of T1 into T2.")
    p.add_argument("first", help=source_help)
    p.add_argument("second", help=source_help)
    p.add_argument("--height", type=int, default=DEFAULT_HEIGHT)
    p.add_argument("--iso", action="store_true", help="Require a tower isomorphism.")

    p = sub.add_parser("equiv", parents=[common],
                       help="Explicit coarse equivalence with the binary germ.")
    p.add_argument("--from", dest="source", required=True, help=source_help)
    p.add_argument("--to", choices=("binary",), default="binary")
    p.add_argument("--height", type=int, default=DEFAULT_HEIGHT)
    p.add_argument("--radii", nargs="+", default=None)

    p = sub.add_parser("classify", parents=[common], help="Compare two degree profiles.")
    p.add_argument("first", help=source_help)
    p.add_argument("second", help=source_help)
    p.add_argument("--height", type=int, default=DEFAULT_HEIGHT)

    p = sub.add_parser("experiment", parents=[common], help="Measurement runs (CSV).")
    p.add_argument("name", help="hyperspace-entropy, ratio-bounded-synthesis or "
                                "product-with-sparse-sequence")
    p.add_argument("--n", type=int, default=2, help="Hyperspace order.")
    p.add_argument("--length", type=int, default=4, help="Binary word length.")
    p.add_argument("--terms", type=int, default=4, help="Sparse sequence terms.")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--ratio", default="4", help="Bound on the Deg/deg product.")
    p.add_argument("--height", type=int, default=10)

    return parser.parse_args(argv)


def setup_logging(verbose: bool = False, quiet: bool = False) -> QueueListener:
    """Configure logging with a queue for multiprocessing safety."""
    log_dir = Path("logs")
    log_dir.mkdir(exist_ok=True)
    log_file = log_dir / "coarse_towers.log"

    if quiet:
        level = logging.ERROR
    elif verbose:
        level = logging.DEBUG
    else:
        level = logging.INFO

    formatter = logging.Formatter("%(asctime)s [%(levelname)s] %(message)s")

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)

    file_handler = RotatingFileHandler(
        log_file, maxBytes=5 * 1024 * 1024, backupCount=5, encoding="utf-8")
    file_handler.setFormatter(formatter)

    queue_handler = QueueHandler(log_queue)
    root = logging.getLogger()
    root.setLevel(level)
    root.handlers = [queue_handler]
    parallel.use_log_queue(log_queue)

    listener = QueueListener(log_queue, console_handler, file_handler)
    listener.start()
    return listener


def build_config(args: argparse.Namespace) -> RunConfig:
    """Config file first, then the command-line overrides."""
    config = load_config(args.config) if args.config else default_config()
    overrides = {}
    if args.cap is not None:
        overrides["caps"] = replace(config.caps, max_points=args.cap)
    if args.net is not None:
        overrides["net"] = args.net
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.out is not None:
        overrides["output"] = args.out
    return make_config(config, **overrides)


@dataclass(frozen=True)
class Source:
    kind: str
    value: Any
    radii: Optional[List[Any]]
    descriptor: Any


def _dyadic_radii(length: int) -> List[int]:
    return [0] + [2 ** n for n in range(length)]


def resolve_source(spec: str, height: int, config: RunConfig) -> Source:
    """Turn a `regular:`/`word:` spec or a file path into a space, tower or profile."""
    caps = config.caps
    if spec.startswith("regular:"):
        try:
            degrees = [int(k) for k in spec.split(":", 1)[1].split(",")]
        except ValueError:
            raise InputError(f"Bad tower spec {spec!r}; use regular:k or regular:k1,k2,...") from None
        if not degrees or height < 1:
            raise InputError(f"Bad tower spec {spec!r} or height {height}")
        tower = regular_tower(list(islice(cycle(degrees), height - 1)), height, caps)
        logging.info(f"Built {spec} of height {height} with {len(tower.base)} base points")
        return Source(TOWER, tower, None, {"from": spec, "height": height})
    if spec.startswith("word:"):
        try:
            alphabet = int(spec.split(":", 1)[1])
        except ValueError:
            raise InputError(f"Bad word spec {spec!r}; use word:a") from None
        if height < 2:
            raise InputError("word: specs need height >= 2")
        space = word_space(WordSpaceSpec(alphabet, height - 1), caps)
        return Source(SPACE, space, _dyadic_radii(height - 1), {"from": spec, "height": height})

    kind, value = load_input(Path(spec), caps)
    if kind == SPACE:
        descriptor = space_to_json(value)
    elif kind == TOWER:
        descriptor = tower_to_json(value)
    elif kind == PROFILE:
        descriptor = profile_to_json(value)
    else:
        descriptor = value
    return Source(kind, value, None, descriptor)


def _as_tower(source: Source, radii: Optional[Sequence[str]]) -> Tower:
    if source.kind == TOWER:
        return source.value
    if source.kind == SPACE:
        rs = radii or source.radii
        if not rs:
            raise InputError("A space needs --radii to become a tower")
        return ball_tower(source.value, rs)
    raise InputError(f"Expected a tower or a space, got a {source.kind}")


def _as_space(source: Source) -> FiniteUltraSpace:
    if source.kind == SPACE:
        return source.value
    if source.kind == TOWER:
        return base_space(source.value)
    raise InputError(f"Expected a space or a tower, got a {source.kind}")


def _is_file(spec: str) -> bool:
    return not spec.startswith(("regular:", "word:"))


def _emit(config: RunConfig, source_descriptors, payload) -> None:
    header = reproducibility_header(source_descriptors, config)
    write_json(config.output, {"header": header, **payload})


def cmd_validate(args: argparse.Namespace, config: RunConfig) -> int:
    if _is_file(args.source) and input_kind(Path(args.source)) == TOWER:
        # Invalid towers are findings here, not unreadable input.
        report = validate_tower_json(Path(args.source))
        descriptor = load_json(Path(args.source))
    else:
        source = resolve_source(args.source, args.height, config)
        descriptor = source.descriptor
        if source.kind == SPACE:
            space = source.value
            if args.metric or not space.ultrametric:
                report = validate_metric(space, config.caps, config)
            else:
                report = validate_ultrametric(space, config.caps, config)
        elif source.kind == TOWER:
            tower = source.value
            report = validate_tower(tower.nodes, tower.level, tower.parent, tower.height)
        elif source.kind == PROFILE:
            report = source.value.check_multiplicativity()
        else:
            raise InputError("Multi-map files are certified by 'equiv', not validated on their own")

    for v in report.violations[:10]:
        logging.error(f"{report.subject}: {v.describe()}")
    _emit(config, {"source": descriptor}, {"report": report_to_json(report)})
    logging.info(f"{report.subject}: {'valid' if report.ok else f'{len(report.violations)} violations'}")
    return EXIT_OK if report.ok else EXIT_FINDINGS


def cmd_entropy(args: argparse.Namespace, config: RunConfig) -> int:
    space = _as_space(resolve_source(args.source, args.height, config))
    deltas = args.delta or list(space.realized)
    if args.eps:
        eps_values = args.eps
    else:
        eps_values = [r for r in space.realized if config.net == "closed" or r > 0]
    profile = entropy_profile(space, eps_values, deltas, config.net, config.caps)
    write_csv(config.output, ("eps", "delta", "large", "small"), entropy_rows(profile))
    logging.info(f"Entropy table over {len(space)} points: {len(profile.entries)} rows")
    return EXIT_OK


def cmd_towerize(args: argparse.Namespace, config: RunConfig) -> int:
    source = resolve_source(args.source, args.height, config)
    if source.kind != SPACE:
        raise InputError("towerize needs a space")
    tower = _as_tower(source, args.radii)
    radii = [rational(r) for r in (args.radii or source.radii)]
    logging.info(f"Ball tower of height {tower.height} with {len(tower)} nodes")
    _emit(config, {"source": source.descriptor},
          {"radii": [str(r) for r in radii], "tower": tower_to_json(tower)})
    return EXIT_OK


def cmd_subtower(args: argparse.Namespace, config: RunConfig) -> int:
    source = resolve_source(args.source, args.height, config)
    tower = _as_tower(source, args.radii)
    sub = level_subtower(tower, args.levels)
    phi = next_multimap(tower, sub)
    certificate = verify_asymorphism(phi, "next", config)
    logging.info(f"Subtower on levels {sub.levels}: {len(sub.tower)} nodes, next map {certificate.kind}")
    _emit(config, {"source": source.descriptor}, {
        "levels": list(sub.levels),
        "tower": tower_to_json(sub.tower),
        "next": multimap_to_json(phi, "source", "subtower"),
        "certificate": certificate_to_json(certificate),
    })
    return EXIT_OK


def cmd_embed(args: argparse.Namespace, config: RunConfig) -> int:
    first = resolve_source(args.first, args.height, config)
    second = resolve_source(args.second, args.height, config)
    embedding = tower_embedding(_as_tower(first, None), _as_tower(second, None), args.iso)
    _emit(config, {"first": first.descriptor, "second": second.descriptor},
          {"embedding": embedding_to_json(embedding)})
    logging.info(f"Tower embedding: {embedding.certificate.kind}")
    return EXIT_OK if embedding.report.ok else EXIT_FINDINGS


def cmd_equiv(args: argparse.Namespace, config: RunConfig) -> int:
    source = resolve_source(args.source, args.height, config)
    inputs = {"source": source.descriptor}
    header = reproducibility_header(inputs, config)
    if source.kind == SPACE:
        radii = args.radii or source.radii
        if not radii:
            raise InputError("A space needs --radii for the equivalence pipeline")
        try:
            result = space_equivalence(source.value, radii, config=config)
        except TruncationExhausted as e:
            if e.partial is not None:
                write_json(config.output, {
                    "header": header,
                    "equivalence": space_equivalence_to_json(e.partial),
                    "exhausted": {"message": str(e), "needed_height": e.needed_height},
                })
            raise
        pipeline = result.pipeline
        ok = pipeline.ok and result.certificate.kind == ASYMORPHISM
        payload = {"equivalence": space_equivalence_to_json(result)}
    else:
        pipeline = equivalence_pipeline(_as_tower(source, None), config=config)
        ok = pipeline.ok
        payload = {"equivalence": pipeline_to_json(pipeline)}

    write_json(config.output, {"header": header, **payload})
    if config.output is not None:
        write_markdown_summary(config.output.with_suffix(".md"), pipeline, header)
    logging.info(f"Composed certificate: {pipeline.certificate.kind}, "
                 f"{len(pipeline.composed.source)} -> {len(pipeline.composed.target)} points")
    return EXIT_OK if ok else EXIT_FINDINGS


def _as_profile(source: Source) -> DegreeProfile:
    if source.kind == PROFILE:
        return source.value
    return degree_profile(_as_tower(source, None))


def cmd_classify(args: argparse.Namespace, config: RunConfig) -> int:
    first = resolve_source(args.first, args.height, config)
    second = resolve_source(args.second, args.height, config)
    verdict = classify(_as_profile(first), _as_profile(second))
    _emit(config, {"first": first.descriptor, "second": second.descriptor},
          {"verdict": verdict.verdict, "detail": verdict.detail})
    logging.info(f"Verdict: {verdict.verdict}")
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace, config: RunConfig) -> int:
    params = {
        "hyperspace-entropy": {"n": args.n, "length": args.length},
        "product-with-sparse-sequence": {"terms": args.terms, "length": args.length},
        "ratio-bounded-synthesis": {"trials": args.trials, "ratio_bound": rational(args.ratio),
                                    "height": args.height, "seed": config.seed},
    }
    if args.name not in params:
        raise InputError(f"Unknown experiment {args.name!r}; choose from {sorted(params)}")
    result = run_experiment(args.name, config, **params[args.name])
    write_csv(config.output, result.header, result.rows)
    logging.info(f"Experiment {result.name}: " +
                 ", ".join(f"{k}={v}" for k, v in result.summary.items()))
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "entropy": cmd_entropy,
    "towerize": cmd_towerize,
    "subtower": cmd_subtower,
    "embed": cmd_embed,
    "equiv": cmd_equiv,
    "classify": cmd_classify,
    "experiment": cmd_experiment,
}


def main(argv: Optional[Sequence[str]] = None) -> None:
    """Run one subcommand and exit with its status."""
    args = parse_args(argv)
    listener = setup_logging(verbose=args.verbose, quiet=args.quiet)
    exit_code = EXIT_OK

    try:
        config = build_config(args)
        exit_code = COMMANDS[args.command](args, config)
    except (SizeCapExceeded, TruncationExhausted) as e:
        logging.error(str(e))
        exit_code = EXIT_EXHAUSTED
    except InputError as e:
        logging.error(str(e))
        exit_code = EXIT_USAGE
    except PreconditionFailed as e:
        where = f" (level {e.level}, {e.inequality})" if e.level is not None else ""
        logging.error(f"{e}{where}")
        exit_code = EXIT_FINDINGS
    except CoarseError as e:
        logging.error(str(e))
        exit_code = EXIT_FINDINGS
    finally:
        listener.stop()

    sys.exit(exit_code)


if __name__ == "__main__":
    with logging_redirect_tqdm():
        main()
