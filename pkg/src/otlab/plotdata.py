"""CSV and SVG export of sweep tables.

A CSV file ``out.csv`` is accompanied by ``out.csv.header``, one
``column: description`` line per column.  SVG output is a single
self-contained polyline plot with optional logarithmic x axis.
"""

import math

from .errors import IoError, ValidationError

COLUMN_DOCS = {
    "index": "instance index within the sweep",
    "size": "perturbation size of the instance",
    "lhs": "left-hand side of the estimate",
    "lhs_plan": "distance between optimal plans",
    "lhs_grad": "L2 distance between transport maps",
    "rhs": "right-hand side combination of data distances",
    "ratio": "lhs / rhs",
    "ratio_plan": "lhs_plan / rhs",
    "ratio_grad": "lhs_grad / rhs^(1/3)",
    "normalization_error": "|int exp(-phi) - 1| after normalization",
    "flagged": "1 when the backend failed on the instance",
    "error": "failure message for flagged rows",
    "eps": "perturbation parameter of the vanishing-density pair",
    "a": "location of the zero of the perturbed density",
    "quantile_sup": "sup of the quantile difference",
    "density_sup": "sup of the density difference",
    "quantile_gap_half": "quantile difference at level 1/2",
}

DEFAULT_COLUMNS = ("size", "lhs", "rhs", "ratio")


def _rows(report):
    if hasattr(report, "rows"):
        return list(report.rows)
    if isinstance(report, dict):
        return list(report.get("rows", []))
    return list(report)


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    text = str(v)
    if any(c in text for c in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def _columns(rows, columns):
    if columns is not None:
        return list(columns)
    if not rows:
        return list(DEFAULT_COLUMNS)
    seen = []
    for r in rows:
        for k in r:
            if k not in seen:
                seen.append(k)
    return seen


def csv_text(report, columns=None):
    rows = _rows(report)
    cols = _columns(rows, columns)
    lines = [",".join(cols)]
    lines += [",".join(_cell(r.get(c)) for c in cols) for r in rows]
    return "\n".join(lines) + "\n", cols


def header_text(cols):
    return "".join(f"{c}: {COLUMN_DOCS.get(c, 'value')}\n" for c in cols)


def svg_text(report, x="size", y="ratio", logx=False, logy=False, title=""):
    """Minimal line plot of column ``y`` against column ``x``."""
    pts = []
    for r in _rows(report):
        xv, yv = r.get(x), r.get(y)
        if xv is None or yv is None or r.get("flagged"):
            continue
        xv, yv = float(xv), float(yv)
        if (logx and xv <= 0) or (logy and yv <= 0) or not (math.isfinite(xv) and math.isfinite(yv)):
            continue
        pts.append((math.log10(xv) if logx else xv, math.log10(yv) if logy else yv))
    pts.sort()
    W, H, m = 480, 320, 50
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
             f'viewBox="0 0 {W} {H}">',
             f'<rect width="{W}" height="{H}" fill="white"/>',
             f'<line x1="{m}" y1="{H - m}" x2="{W - m}" y2="{H - m}" stroke="black"/>',
             f'<line x1="{m}" y1="{m}" x2="{m}" y2="{H - m}" stroke="black"/>',
             f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle" font-size="12">'
             f'{"log10 " if logx else ""}{x}</text>',
             f'<text x="14" y="{H / 2}" text-anchor="middle" font-size="12" '
             f'transform="rotate(-90 14 {H / 2})">{"log10 " if logy else ""}{y}</text>']
    if title:
        parts.append(f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="13">{title}</text>')
    if pts:
        xs, ys = [p[0] for p in pts], [p[1] for p in pts]
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        sx = (W - 2 * m) / (x1 - x0) if x1 > x0 else 0.0
        sy = (H - 2 * m) / (y1 - y0) if y1 > y0 else 0.0
        px = [m + (a - x0) * sx if sx else W / 2 for a in xs]
        py = [H - m - (b - y0) * sy if sy else H / 2 for b in ys]
        coords = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        parts.append(f'<polyline points="{coords}" fill="none" stroke="steelblue" stroke-width="2"/>')
        parts += [f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="steelblue"/>'
                  for a, b in zip(px, py)]
        for val, pos in ((x0, m), (x1, W - m)):
            parts.append(f'<text x="{pos}" y="{H - m + 16}" text-anchor="middle" '
                         f'font-size="10">{val:.3g}</text>')
        for val, pos in ((y0, H - m), (y1, m)):
            parts.append(f'<text x="{m - 4}" y="{pos}" text-anchor="end" '
                         f'font-size="10">{val:.3g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _write(path, text):
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def emit_plotdata(report, fmt, path, columns=None, **svg_opts):
    """Write ``report`` as ``csv`` (plus sidecar header) or ``svg``.

    Returns
    -------
    list of str
        Paths written.

    Raises
    ------
    IoError
        The path cannot be written.
    """
    if fmt == "csv":
        text, cols = csv_text(report, columns)
        _write(path, text)
        _write(path + ".header", header_text(cols))
        return [path, path + ".header"]
    if fmt == "svg":
        _write(path, svg_text(report, **svg_opts))
        return [path]
    raise ValidationError(f"format: expected 'csv' or 'svg', got {fmt!r}")


__all__ = ["emit_plotdata", "csv_text", "svg_text", "header_text", "COLUMN_DOCS"]
