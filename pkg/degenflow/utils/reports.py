import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence

from pydantic import BaseModel

from degenflow.errors import ReportIOError
from degenflow.models import (
    BoundaryClassification,
    ComparisonReport,
    ConditionSummary,
    CroccoReport,
    EntropyReport,
    ErrorResponse,
    JumpScanReport,
    RunManifest,
    StabilityReport,
    SupNormReport,
    SweepReport,
)

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
ERROR_NAME = "error.json"


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def run_id_for(config: BaseModel) -> str:
    """Stable id: hash of the canonical config echo"""
    payload = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _format(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def _target(out_dir: Path, name: str) -> Path:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ReportIOError(str(out_dir), str(e))
    return out_dir / name


def write_json(out_dir: Path, name: str, data: Any) -> str:
    path = _target(Path(out_dir), name)
    try:
        path.write_text(canonical_json(data), encoding="utf-8")
    except OSError as e:
        raise ReportIOError(str(path), str(e))
    return name


def write_csv(out_dir: Path, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """UTF-8, comma separated, header row, %.17g floats"""
    path = _target(Path(out_dir), name)
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_format(v) for v in row])
    except OSError as e:
        raise ReportIOError(str(path), str(e))
    return name


def _entropy(report: EntropyReport, out_dir: Path) -> List[str]:
    rows = [(e.k, e.eta, e.lam, e.residual) for e in report.entries]
    return [
        write_json(out_dir, "entropy_report.json", report.model_dump(mode="json")),
        write_csv(out_dir, "residuals.csv", ("k", "eta", "lambda", "residual"), rows),
    ]


def _stability(report: StabilityReport, out_dir: Path) -> List[str]:
    return [
        write_json(out_dir, "stability_report.json", report.model_dump(mode="json")),
        write_csv(out_dir, "l1_series.csv", ("t", "l1_distance"), zip(report.times, report.l1_distances)),
    ]


def _sup_norm(report: SupNormReport, out_dir: Path) -> List[str]:
    rows = zip(report.times, report.sup_norms, report.generalized_bound)
    return [
        write_json(out_dir, "sup_norm_report.json", report.model_dump(mode="json")),
        write_csv(out_dir, "sup_norm_series.csv", ("t", "sup_norm", "generalized_bound"), rows),
    ]


def _comparison(report: ComparisonReport, out_dir: Path) -> List[str]:
    rows = [(entry.lam, name, value) for entry in report.entries for name, value in sorted(entry.terms.items())]
    return [
        write_json(out_dir, "comparison_report.json", report.model_dump(mode="json")),
        write_csv(out_dir, "lambda_decay.csv", ("lambda", "term", "value"), rows),
    ]


def _sweep(report: SweepReport, out_dir: Path) -> List[str]:
    rows = [(e.epsilon, e.sup_norm, e.tv_final, e.tv_ratio, e.energy, e.l1_to_next) for e in report.entries]
    return [
        write_json(out_dir, "sweep_report.json", report.model_dump(mode="json")),
        write_csv(out_dir, "sweep.csv", ("epsilon", "sup_norm", "tv_final", "tv_ratio", "energy", "l1_to_next"), rows),
    ]


def _classification(report: BoundaryClassification, out_dir: Path) -> List[str]:
    rows = [
        (",".join(str(i) for i in node.index), node.status.value, node.in_sigma_p,
         "|".join(t.value for t in node.triggers), node.fichera_member)
        for node in report.nodes
    ]
    return [
        write_json(out_dir, "sigma_p.json", report.model_dump(mode="json")),
        write_csv(out_dir, "boundary_nodes.csv", ("index", "status", "in_sigma_p", "triggers", "fichera"), rows),
    ]


def _conditions(report: ConditionSummary, out_dir: Path) -> List[str]:
    return [write_json(out_dir, "conditions.json", report.model_dump(mode="json"))]


def _crocco(report: CroccoReport, out_dir: Path) -> List[str]:
    return [write_json(out_dir, "crocco_report.json", report.model_dump(mode="json"))]


def _jumps(report: JumpScanReport, out_dir: Path) -> List[str]:
    rows = [(f.axis, ",".join(str(i) for i in f.index), f.jump, f.max_a) for f in report.flags]
    return [
        write_json(out_dir, "jump_scan.json", report.model_dump(mode="json")),
        write_csv(out_dir, "jump_flags.csv", ("axis", "index", "jump", "max_a"), rows),
    ]


_WRITERS = {
    EntropyReport: _entropy,
    StabilityReport: _stability,
    SupNormReport: _sup_norm,
    ComparisonReport: _comparison,
    SweepReport: _sweep,
    BoundaryClassification: _classification,
    ConditionSummary: _conditions,
    CroccoReport: _crocco,
    JumpScanReport: _jumps,
}


def emit_report(reports: Sequence[BaseModel], out_dir) -> List[str]:
    """Write each report under its fixed file names; returns the names written, in order"""
    out_dir = Path(out_dir)
    files: List[str] = []
    for report in reports:
        writer = _WRITERS.get(type(report))
        if writer is None:
            raise TypeError(f"No writer for report type {type(report).__name__}")
        files.extend(writer(report, out_dir))
    if files:
        logger.info(f"Wrote {len(files)} report files to {out_dir}")
    return files


def write_manifest(manifest: RunManifest, out_dir) -> str:
    return write_json(Path(out_dir), MANIFEST_NAME, manifest.model_dump(mode="json"))


def write_error(error: ErrorResponse, out_dir) -> Optional[str]:
    """Best effort; a write failure is logged and None returned"""
    try:
        return write_json(Path(out_dir), ERROR_NAME, error.model_dump(mode="json"))
    except ReportIOError as e:
        logger.error(f"Could not write {ERROR_NAME}: {e.detail}")
        return None
