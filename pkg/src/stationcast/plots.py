"""Error-versus-lead curves as standalone SVG files.

Each point carries its exact value in ``data-lead`` / ``data-value``
attributes so plots can be checked against the reports they came from.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

from .errors import EvaluationError

PANELS = (
    ("wind", "Wind vector error (m/s)"),
    ("temperature", "Temperature RMSE (K)"),
    ("dewpoint", "Dewpoint RMSE (K)"),
)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
W, H, PAD = 560, 360, 56


def _curves(reports, metric):
    out = []
    for r in reports:
        pts = [(l, r.metrics[l][metric]) for l in r.leads if r.metrics.get(l) is not None]
        if pts:
            out.append((f"{r.name} ({r.source})", pts))
    return out


def render_panel(reports, metric: str, title: str) -> str:
    curves = _curves(reports, metric)
    if not curves:
        raise EvaluationError(f"no values to plot for {metric}")
    xs = [l for _, pts in curves for l, _ in pts]
    ys = [v for _, pts in curves for _, v in pts]
    x0, x1 = min(xs), max(xs)
    y1 = max(ys) * 1.1 if max(ys) > 0 else 1.0
    xspan = (x1 - x0) or 1

    def sx(x):
        return PAD + (x - x0) / xspan * (W - 2 * PAD)

    def sy(y):
        return H - PAD - y / y1 * (H - 2 * PAD)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<text x="{W / 2}" y="{H - 14}" text-anchor="middle" font-size="12">lead time (h)</text>',
    ]
    for lead in sorted(set(xs)):
        parts.append(f'<text x="{sx(lead):.2f}" y="{H - PAD + 16}" text-anchor="middle" font-size="10">{lead}</text>')
    for i in range(5):
        y = y1 * i / 4
        parts.append(f'<text x="{PAD - 6}" y="{sy(y) + 3:.2f}" text-anchor="end" font-size="10">{y:.3g}</text>')
    for n, (label, pts) in enumerate(curves):
        color = COLORS[n % len(COLORS)]
        line = " ".join(f"{sx(l):.2f},{sy(v):.2f}" for l, v in pts)
        parts.append(f'<g class="curve" data-label="{escape(label)}">')
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{line}"/>')
        for l, v in pts:
            parts.append(
                f'<circle cx="{sx(l):.2f}" cy="{sy(v):.2f}" r="3" fill="{color}" data-lead="{l}" data-value="{float(v)!r}"/>'
            )
        parts.append("</g>")
        ly = PAD + 14 * n
        parts.append(f'<text x="{W - PAD}" y="{ly}" text-anchor="end" font-size="11" fill="{color}">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def plot_reports(reports, out_dir) -> list[Path]:
    """One SVG per panel (wind, temperature, dewpoint); returns the paths."""
    reports = list(reports)
    if not reports:
        raise EvaluationError("no reports to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for metric, title in PANELS:
        p = out_dir / f"error_vs_lead_{metric}.svg"
        p.write_text(render_panel(reports, metric, title))
        paths.append(p)
    return paths


def read_points(path) -> dict[str, list[tuple[int, float]]]:
    """Parse the points back out of a plot written by :func:`render_panel`."""
    import xml.etree.ElementTree as ET

    ns = "{http://www.w3.org/2000/svg}"
    root = ET.parse(path).getroot()
    out = {}
    for g in root.iter(f"{ns}g"):
        out[g.get("data-label")] = [(int(c.get("data-lead")), float(c.get("data-value"))) for c in g.iter(f"{ns}circle")]
    return out
