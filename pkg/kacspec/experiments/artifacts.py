"""
Artifact rendering.

CSV files start with one `# ` line holding the report metadata as JSON, then a
header row and data rows with 17 significant digits, '.' decimals and '\\n'
line endings.  JSON artifacts carry the same numbers.  Non-finite values are
written as `nan` in CSV and `null` in JSON.
"""

import contextlib
import json
import logging
from pathlib import Path
from typing import Any, Optional, Union

from kacspec.errors import ArtifactIOError
from kacspec.experiments.schemas import ExperimentReport
from kacspec.weyl_quantization import OperatorMatrix

logger = logging.getLogger(__name__)


def _cell(value: Optional[float]) -> str:
    if value is None:
        return "nan"
    if float(value).is_integer() and abs(value) < 2 ** 53:
        return str(int(value))
    return format(value, ".17g")


def render_csv(report: ExperimentReport) -> str:
    header = report.model_dump(exclude={"columns", "rows"})
    lines = ["# " + json.dumps(header, sort_keys=True, separators=(",", ":")), ",".join(report.columns)]
    for row in report.rows:
        lines.append(",".join(_cell(value) for value in row))
    return "\n".join(lines) + "\n"


def render_json(report: ExperimentReport) -> str:
    return json.dumps(report.model_dump(), sort_keys=True, indent=2, allow_nan=False) + "\n"


def matrix_report(op: OperatorMatrix, **metadata: Any) -> ExperimentReport:
    """All elements of a Hermite-basis matrix; symbol, s, K and the grid go to the header."""
    return ExperimentReport(
        experiment="operator-matrix",
        config={**op.metadata, **metadata},
        columns=["i", "j", "re", "im"],
        rows=[list(entry) for entry in op.entries()],
        summary={
            "max_offdiag": op.max_offdiag(),
            "hermitian_defect": op.hermitian_defect(),
        },
    )


def render(report: ExperimentReport, output_format: str) -> str:
    if output_format == "csv":
        return render_csv(report)
    if output_format == "json":
        return render_json(report)
    raise ArtifactIOError(f"unknown output format {output_format!r}")


def write_artifact(text: str, path: Union[str, Path]) -> Path:
    """Atomic write: the target is replaced only by a complete file."""
    target = Path(path)
    tmp = target.with_suffix(target.suffix + ".tmp")
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with tmp.open("w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        tmp.replace(target)
    except OSError as exc:
        logger.warning("Failed to write artifact %s: %s", target, exc)
        with contextlib.suppress(OSError):
            tmp.unlink()
        raise ArtifactIOError(f"cannot write {target}: {exc}") from exc
    logger.info("Wrote %s", target)
    return target
