"""JSON, CSV and Markdown emission.

Rationals are written as "p/q" strings and integers unadorned; infinite
degrees as "inf". Nothing time-dependent goes into a report, so identical
runs give byte-identical files.
"""
import csv
import hashlib
import io
import json
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

from . import __version__
from .config import RunConfig
from .findings import ValidationReport
from .homogenize import PipelineResult, SpaceEquivalence, SynthesisOutput
from .metric import EntropyProfile, FiniteUltraSpace
from .morphisms import DistortionModulus, MorphismCertificate, MultiMap, TowerEmbedding
from .towers import DegreeProfile, Tower


def rational_to_json(value: Any) -> Any:
    if value is None or isinstance(value, bool):
        return value
    if isinstance(value, int):
        return value
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return str(value)


def space_to_json(space: FiniteUltraSpace) -> Dict[str, Any]:
    return {
        "points": list(space.points),
        "dist": [[rational_to_json(v) for v in row] for row in space.matrix()],
        "ultrametric": space.ultrametric,
    }


def tower_to_json(tower: Tower) -> Dict[str, Any]:
    return {
        "height": tower.height,
        "nodes": [{"id": x, "level": tower.level[x], "parent": tower.parent[x]}
                  for x in tower.nodes],
    }


def multimap_to_json(phi: MultiMap, source_ref: str = "source",
                     target_ref: str = "target") -> Dict[str, Any]:
    return {
        "source_ref": source_ref,
        "target_ref": target_ref,
        "pairs": [[x, y] for x, y in phi.id_pairs()],
    }


def modulus_to_json(modulus: DistortionModulus) -> List[List[Any]]:
    return [[rational_to_json(e), rational_to_json(d)] for e, d in modulus.table]


def report_to_json(report: ValidationReport) -> Dict[str, Any]:
    return {
        "subject": report.subject,
        "ok": report.ok,
        "checks": {check: report.passed(check) for check in report.checks},
        "violations": [
            {
                "check": v.check,
                "kind": v.kind,
                "witness": list(v.witness),
                "expected": rational_to_json(v.expected),
                "actual": rational_to_json(v.actual),
                "description": v.describe(),
            }
            for v in report.violations
        ],
        "notes": list(report.notes),
    }


def certificate_to_json(certificate: MorphismCertificate) -> Dict[str, Any]:
    return {
        "subject": certificate.subject,
        "kind": certificate.kind,
        "checks": [{"axiom": c.axiom, "passed": c.passed, "witness": list(c.witness)}
                   for c in certificate.checks],
        "forward_modulus": modulus_to_json(certificate.forward),
        "backward_modulus": modulus_to_json(certificate.backward),
        "closeness_bound": rational_to_json(certificate.closeness_bound),
        "fiber_bound": rational_to_json(certificate.fiber_bound),
    }


def profile_to_json(profile: DegreeProfile) -> Dict[str, Any]:
    pairs = sorted(profile.small)
    return {
        "height": profile.height,
        "small": [[i, j, rational_to_json(profile.small[(i, j)])] for i, j in pairs],
        "large": [[i, j, rational_to_json(profile.large[(i, j)])] for i, j in pairs],
    }


def entropy_rows(profile: EntropyProfile) -> List[List[Any]]:
    return [[rational_to_json(e), rational_to_json(d), large, small]
            for e, d, large, small in profile.rows()]


def synthesis_to_json(synth: SynthesisOutput) -> Dict[str, Any]:
    return {
        "a": [rational_to_json(v) for v in synth.a],
        "b": [rational_to_json(v) for v in synth.b],
        "n": list(synth.n),
        "m": list(synth.m),
        "witness": {
            "c": [rational_to_json(v) for v in synth.witness.c],
            "delta": [rational_to_json(v) for v in synth.witness.delta],
        },
        "verification": report_to_json(synth.report),
    }


def embedding_to_json(embedding: TowerEmbedding) -> Dict[str, Any]:
    return {
        "node_map": dict(sorted(embedding.node_map.items())),
        "report": report_to_json(embedding.report),
        "certificate": certificate_to_json(embedding.certificate),
    }


def pipeline_to_json(result: PipelineResult) -> Dict[str, Any]:
    selection = result.selection
    return {
        "ok": result.ok,
        "synthesis": synthesis_to_json(result.synthesis),
        "sequences": {
            "a": [rational_to_json(v) for v in result.sequences.a],
            "b": [rational_to_json(v) for v in result.sequences.b],
            "exact_top": result.sequences.exact_top,
        },
        "levels": list(result.levels),
        "binary_levels": [m + 1 for m in result.binary_levels],
        "admissible": {
            "node_map": dict(sorted(result.morphism.node_map.items())),
            "report": report_to_json(result.morphism.admissible),
            "distortion_bounds": report_to_json(result.morphism.bounds),
        },
        "stages": [
            {
                "name": stage.name,
                "source_points": len(stage.multimap.source),
                "target_points": len(stage.multimap.target),
                "certificate": certificate_to_json(stage.certificate),
            }
            for stage in result.stages
        ],
        "composed": {
            "certificate": certificate_to_json(result.certificate),
            "forward_bound": report_to_json(result.forward_bound),
            "backward_bound": report_to_json(result.backward_bound),
            "selection": {
                "f": selection.f,
                "g": selection.g,
                "closeness": rational_to_json(selection.closeness),
                "fiber_bound": rational_to_json(selection.fiber_bound),
            },
            "normal_form": {
                "closeness": rational_to_json(result.normal_form.closeness),
                "largeness": rational_to_json(result.normal_form.largeness),
                "x_subset": len(result.normal_form.x_subset),
                "y_subset": len(result.normal_form.y_subset),
                "report": report_to_json(result.normal_form.report),
            },
            "entropy_transport": report_to_json(result.entropy_transport),
        },
    }


def space_equivalence_to_json(result: SpaceEquivalence) -> Dict[str, Any]:
    """Partial results (no pipeline) keep the entropy-ratio report with null certificates."""
    return {
        "ratio_product": rational_to_json(result.ratio_product),
        "homogeneity_product": rational_to_json(result.homogeneity.product),
        "homogeneity_bound": rational_to_json(result.homogeneity.bound),
        "identity_holds": result.identity_holds,
        "ball_tower": {"height": result.tower.height, "nodes": len(result.tower)},
        "assignment": certificate_to_json(result.assignment.certificate),
        "pipeline": pipeline_to_json(result.pipeline) if result.complete else None,
        "certificate": certificate_to_json(result.certificate) if result.complete else None,
    }


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def reproducibility_header(inputs: Mapping[str, Any], config: RunConfig) -> Dict[str, Any]:
    """Version, sha256 of every input in canonical JSON, and the decision ledger."""
    return {
        "version": __version__,
        "inputs": {name: hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()
                   for name, data in sorted(inputs.items())},
        "decisions": config.decision_ledger(),
    }


def write_json(path: Optional[Path], payload: Any) -> None:
    """JSON to `path`, or to stdout without a path."""
    text = json.dumps(payload, ensure_ascii=False, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        f.write(text)
    logging.info(f"Saved {path}")


def write_csv(path: Optional[Path], header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    buffer = io.StringIO()
    out = csv.writer(buffer, lineterminator="\n")
    out.writerow(header)
    for row in rows:
        out.writerow([rational_to_json(v) for v in row])
    if path is None:
        sys.stdout.write(buffer.getvalue())
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        f.write(buffer.getvalue())
    logging.info(f"Saved {path}")


def _modulus_cell(modulus: DistortionModulus) -> str:
    return ", ".join(f"{rational_to_json(e)}→{rational_to_json(d)}" for e, d in modulus.table)


def write_markdown_summary(path: Path, result: PipelineResult,
                           header: Optional[Dict[str, Any]] = None) -> None:
    """Human-readable companion of the pipeline JSON."""
    synth = result.synthesis
    cert = result.certificate
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        f.write("# Coarse equivalence with the binary germ\n\n")
        f.write("## Summary\n")
        f.write(f"- Result: {'verified asymorphism' if result.ok else 'NOT verified'}\n")
        f.write(f"- Source points: {len(result.composed.source)}\n")
        f.write(f"- Binary words: {len(result.composed.target)}\n")
        f.write(f"- Grouping levels: {', '.join(map(str, result.levels))}\n")
        f.write(f"- Binary grouping levels: {', '.join(str(m + 1) for m in result.binary_levels)}\n")
        f.write(f"- Windows a: {', '.join(str(rational_to_json(v)) for v in result.sequences.a)}\n")
        f.write(f"- Windows b: {', '.join(str(rational_to_json(v)) for v in result.sequences.b)}\n")
        f.write(f"- Synthesized n: {list(synth.n)}, m: {list(synth.m)}\n")
        f.write(f"- Closeness: {rational_to_json(result.selection.closeness)} "
                f"(fiber bound {rational_to_json(result.selection.fiber_bound)})\n\n")

        f.write("## Stages\n\n")
        f.write("| stage | points | kind | forward modulus | backward modulus |\n")
        f.write("|---|---|---|---|---|\n")
        for stage in result.stages:
            c = stage.certificate
            f.write(f"| {stage.name} | {len(stage.multimap.source)} → {len(stage.multimap.target)} "
                    f"| {c.kind} | {_modulus_cell(c.forward)} | {_modulus_cell(c.backward)} |\n")
        f.write(f"| composed | {len(result.composed.source)} → {len(result.composed.target)} "
                f"| {cert.kind} | {_modulus_cell(cert.forward)} | {_modulus_cell(cert.backward)} |\n\n")

        f.write("## Checks\n\n")
        for report in (result.morphism.admissible, result.morphism.bounds,
                       result.forward_bound, result.backward_bound, result.normal_form.report,
                       result.entropy_transport, synth.report):
            status = "ok" if report.ok else f"{len(report.violations)} violations"
            f.write(f"- {report.subject}: {status}\n")
            for v in report.violations[:10]:
                f.write(f"  - {v.describe()}\n")

        if header:
            f.write("\n---\n\n## Reproducibility\n\n")
            f.write(f"- Version: {header['version']}\n")
            for name, digest in header["inputs"].items():
                f.write(f"- Input {name}: sha256 {digest}\n")
            for key, value in header["decisions"].items():
                f.write(f"- {key}: {value}\n")
    logging.info(f"Saved {path}")
