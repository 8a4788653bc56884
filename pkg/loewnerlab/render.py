"""Report emission: CSV tables, SVG line plots and the run manifest."""
import csv
import logging
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
from jinja2 import Template

from loewnerlab.config import config

logger = logging.getLogger(__name__)

TEMPLATES_DIR = Path(__file__).parent / "templates"

PALETTE = ["#0066cc", "#cc3300", "#339933", "#9933cc", "#cc9900", "#006666", "#999999"]


@lru_cache(maxsize=None)
def _template(name: str) -> Template:
    return Template((TEMPLATES_DIR / name).read_text(encoding="utf-8"), trim_blocks=True, lstrip_blocks=True)


def format_value(value: Any) -> str:
    """Deterministic text for a CSV cell; missing values are empty."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, columns: List[str], rows: Iterable[Dict[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(c)) for c in columns])
    return path


def render_svg(curves: Dict[str, np.ndarray], title: str = "", width: int = 480, height: int = 480) -> str:
    """
    Plot complex polylines in a common frame.

    Args:
        curves: Label → complex vertices
        title: Plot title
        width: Canvas width in pixels
        height: Canvas height in pixels

    Returns:
        SVG document text
    """
    margin = 32
    items = [(label, np.asarray(z, dtype=complex)) for label, z in curves.items() if np.size(z)]
    if items:
        allz = np.concatenate([z for _, z in items])
        lo = complex(allz.real.min(), allz.imag.min())
        span = max(allz.real.max() - lo.real, allz.imag.max() - lo.imag, 1e-12)
    else:
        lo, span = 0j, 1.0
    scale = (min(width, height) - 2 * margin) / span

    lines = []
    for k, (label, z) in enumerate(items):
        x = margin + (z.real - lo.real) * scale
        y = height - margin - (z.imag - lo.imag) * scale
        points = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y))
        lines.append({"label": label, "color": PALETTE[k % len(PALETTE)], "points": points})
    return _template("plot.svg.j2").render(title=title, width=width, height=height, margin=margin, lines=lines)


def render_manifest(report, files: List[str]) -> str:
    params = report.provenance.get("params", {})
    return _template("manifest.txt.j2").render(
        name=report.name,
        provenance=report.provenance,
        params=sorted(params.items()),
        summary=sorted(report.summary.items()),
        files=files,
    )


def write_report(report, out: Optional[Path] = None) -> Dict[str, Path]:
    """
    Write `<name>.csv`, `<name>.svg` (when the report carries curves) and `manifest.txt`.

    Returns:
        Mapping of artefact kind to written path
    """
    out = Path(out if out is not None else config.OUTPUT_DIR)
    out.mkdir(parents=True, exist_ok=True)
    written = {"csv": write_csv(out / f"{report.name}.csv", report.columns, report.rows)}
    if report.curves:
        svg = out / f"{report.name}.svg"
        svg.write_text(render_svg(report.curves, title=report.name), encoding="utf-8")
        written["svg"] = svg
    manifest = out / "manifest.txt"
    manifest.write_text(render_manifest(report, sorted(p.name for p in written.values())), encoding="utf-8")
    written["manifest"] = manifest
    logger.info(f"Wrote {report.name} report ({len(report.rows)} rows) to {out}")
    return written
