"""Hand-emitted SVG renderings of the diagnostic artifacts: Love plot,
propensity histograms, TOC curve with band, lambda-interval ladder, and the
cutoff-sweep panels.  No plotting dependency; the CLI `report` subcommand
writes these from the documented CSV/JSON outputs without recomputation.
"""

import html

import numpy as np

WIDTH = 720
HEIGHT = 480
MARGIN = dict(left=150, right=30, top=40, bottom=50)


def _esc(s) -> str:
    return html.escape(str(s), quote=True)


class _Canvas:
    def __init__(self, width=WIDTH, height=HEIGHT, title=""):
        self.width = width
        self.height = height
        self.parts = []
        if title:
            self.text(width / 2, MARGIN["top"] / 2, title, size=15, anchor="middle")

    def line(self, x1, y1, x2, y2, color="#444", width=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y2:.1f}" '
            f'stroke="{color}" stroke-width="{width}"{d}/>')

    def rect(self, x, y, w, h, color, opacity=1.0):
        self.parts.append(
            f'<rect x="{x:.1f}" y="{y:.1f}" width="{w:.1f}" height="{h:.1f}" '
            f'fill="{color}" fill-opacity="{opacity}"/>')

    def circle(self, x, y, r, color, fill="none"):
        self.parts.append(
            f'<circle cx="{x:.1f}" cy="{y:.1f}" r="{r:.1f}" stroke="{color}" '
            f'fill="{fill}"/>')

    def text(self, x, y, s, size=11, anchor="start", color="#222", rotate=None):
        t = f' transform="rotate({rotate} {x:.1f} {y:.1f})"' if rotate else ""
        self.parts.append(
            f'<text x="{x:.1f}" y="{y:.1f}" font-size="{size}" fill="{color}" '
            f'text-anchor="{anchor}" font-family="sans-serif"{t}>{_esc(s)}</text>')

    def polyline(self, points, color="#1f77b4", width=1.5, dash=None):
        pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in points)
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{width}"{d}/>')

    def render(self) -> str:
        body = "\n".join(self.parts)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
                f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n'
                f'<rect width="{self.width}" height="{self.height}" fill="white"/>\n'
                f"{body}\n</svg>\n")


def _axis(canvas, lo, hi):
    """Map data x in [lo, hi] to pixels inside the margins."""
    span = hi - lo if hi > lo else 1.0
    inner = canvas.width - MARGIN["left"] - MARGIN["right"]

    def to_px(x):
        return MARGIN["left"] + (x - lo) / span * inner
    return to_px


def love_plot(balance, threshold: float = 0.05) -> str:
    """Dot plot of raw vs weighted SMD per covariate with guide lines."""
    table = balance.table if hasattr(balance, "table") else balance
    rows = list(table.itertuples())
    values = np.concatenate([table["raw_smd"].to_numpy(),
                             table["weighted_smd"].to_numpy(), [threshold, -threshold]])
    lo, hi = float(values.min()) - 0.05, float(values.max()) + 0.05
    height = MARGIN["top"] + MARGIN["bottom"] + 28 * max(1, len(rows))
    canvas = _Canvas(height=height, title="Covariate balance (standardized mean differences)")
    to_px = _axis(canvas, lo, hi)
    base = canvas.height - MARGIN["bottom"]
    for guide in (-threshold, threshold, 0.0):
        dash = None if guide == 0.0 else "4,3"
        canvas.line(to_px(guide), MARGIN["top"], to_px(guide), base,
                    color="#888", dash=dash)
    for i, row in enumerate(rows):
        y = MARGIN["top"] + 14 + 28 * i
        canvas.text(MARGIN["left"] - 8, y + 4, row.covariate, anchor="end")
        canvas.circle(to_px(row.raw_smd), y, 5, "#d62728", fill="#d62728")
        canvas.circle(to_px(row.weighted_smd), y, 5, "#1f77b4", fill="#1f77b4")
    for tick in np.round(np.linspace(lo, hi, 5), 2):
        canvas.text(to_px(tick), base + 18, f"{tick:g}", anchor="middle")
    canvas.text(to_px(lo), MARGIN["top"] - 8, "red = raw, blue = weighted", size=11)
    return canvas.render()


def overlap_plot(frame) -> str:
    """Side-by-side histogram bars of propensity scores per arm."""
    canvas = _Canvas(title="Propensity score overlap")
    lo, hi = 0.0, 1.0
    to_px = _axis(canvas, lo, hi)
    base = canvas.height - MARGIN["bottom"]
    top = MARGIN["top"] + 10
    max_count = max(1, int(max(frame["treated"].max(), frame["control"].max())))
    scale = (base - top) / max_count
    for row in frame.itertuples():
        x0, x1 = to_px(row.bin_lo), to_px(row.bin_hi)
        w = (x1 - x0) / 2 - 1
        canvas.rect(x0 + 0.5, base - row.treated * scale, w, row.treated * scale,
                    "#1f77b4", opacity=0.85)
        canvas.rect(x0 + w + 1.5, base - row.control * scale, w, row.control * scale,
                    "#d62728", opacity=0.85)
    canvas.line(MARGIN["left"], base, canvas.width - MARGIN["right"], base)
    for tick in (0, 0.25, 0.5, 0.75, 1.0):
        canvas.text(to_px(tick), base + 18, f"{tick:g}", anchor="middle")
    canvas.text(canvas.width / 2, base + 36, "estimated propensity", anchor="middle")
    canvas.text(MARGIN["left"], MARGIN["top"] - 8,
                "blue = attempts, red = non-attempts", size=11)
    return canvas.render()


def toc_plot(frame) -> str:
    """TOC curve with its bootstrap band (dashed)."""
    canvas = _Canvas(title="Targeting operator characteristic")
    to_px = _axis(canvas, 0.0, 1.0)
    cols = [frame["toc"]]
    has_band = "band_lo" in frame.columns
    if has_band:
        cols += [frame["band_lo"], frame["band_hi"]]
    values = np.concatenate([np.asarray(c, dtype=float) for c in cols] + [np.zeros(1)])
    vlo, vhi = float(values.min()), float(values.max())
    pad = 0.05 * (vhi - vlo if vhi > vlo else 1.0)
    vlo, vhi = vlo - pad, vhi + pad
    base = canvas.height - MARGIN["bottom"]
    top = MARGIN["top"] + 10

    def to_py(v):
        return base - (v - vlo) / (vhi - vlo) * (base - top)

    canvas.line(MARGIN["left"], to_py(0.0), canvas.width - MARGIN["right"], to_py(0.0),
                color="#888", dash="4,3")
    qs = frame["q"].to_numpy(dtype=float)
    canvas.polyline([(to_px(q), to_py(v)) for q, v in zip(qs, frame["toc"])])
    if has_band:
        for col in ("band_lo", "band_hi"):
            canvas.polyline([(to_px(q), to_py(v)) for q, v in zip(qs, frame[col])],
                            color="#1f77b4", width=1.0, dash="5,4")
    for tick in (0, 0.25, 0.5, 0.75, 1.0):
        canvas.text(to_px(tick), base + 18, f"{tick:g}", anchor="middle")
    canvas.text(canvas.width / 2, base + 36, "treated fraction q", anchor="middle")
    for tick in np.round(np.linspace(vlo, vhi, 5), 2):
        canvas.text(MARGIN["left"] - 8, to_py(tick) + 4, f"{tick:g}", anchor="end")
    return canvas.render()


def lambda_plot(frame, point_estimate=None) -> str:
    """Confidence-interval ladder over the confounding bound.

    *point_estimate*, when given, draws the unperturbed headline estimate as
    a horizontal reference line.
    """
    canvas = _Canvas(title="Sensitivity to unmeasured confounding")
    lams = frame["lambda"].to_numpy(dtype=float)
    to_px = _axis(canvas, float(lams.min()) - 0.03, float(lams.max()) + 0.03)
    extra = [0.0] if point_estimate is None else [0.0, point_estimate]
    values = np.concatenate([frame["lo"], frame["hi"], extra])
    vlo = float(np.nanmin(values)) - 0.05
    vhi = float(np.nanmax(values)) + 0.05
    base = canvas.height - MARGIN["bottom"]
    top = MARGIN["top"] + 10

    def to_py(v):
        return base - (v - vlo) / (vhi - vlo) * (base - top)

    canvas.line(MARGIN["left"], to_py(0.0), canvas.width - MARGIN["right"], to_py(0.0),
                color="#888", dash="4,3")
    if point_estimate is not None:
        canvas.line(MARGIN["left"], to_py(point_estimate),
                    canvas.width - MARGIN["right"], to_py(point_estimate),
                    color="#2ca02c", dash="7,3")
        canvas.text(canvas.width - MARGIN["right"], to_py(point_estimate) - 5,
                    f"point estimate {point_estimate:g}", anchor="end", size=10,
                    color="#2ca02c")
    for lam, lo, hi in zip(lams, frame["lo"], frame["hi"]):
        x = to_px(lam)
        color = "#1f77b4" if lo > 0 or hi < 0 else "#d62728"
        canvas.line(x, to_py(lo), x, to_py(hi), color=color, width=2.5)
        canvas.line(x - 4, to_py(lo), x + 4, to_py(lo), color=color, width=2)
        canvas.line(x - 4, to_py(hi), x + 4, to_py(hi), color=color, width=2)
        canvas.text(x, base + 18, f"{lam:g}", anchor="middle", size=10)
    canvas.text(canvas.width / 2, base + 36, "confounding bound", anchor="middle")
    for tick in np.round(np.linspace(vlo, vhi, 5), 2):
        canvas.text(MARGIN["left"] - 8, to_py(tick) + 4, f"{tick:g}", anchor="end")
    canvas.text(MARGIN["left"], MARGIN["top"] - 8,
                "blue = interval excludes zero", size=11)
    return canvas.render()


def cutoff_plot(frame, headline=(43, 35, 28)) -> str:
    """Estimates with CIs, faceted into one panel per attempt cutoff."""
    done = frame[~frame["skipped"]].reset_index(drop=True)
    cutoffs = sorted(done["cutoff"].unique())
    n_panels = max(1, len(cutoffs))
    panel_h = 170
    canvas = _Canvas(height=MARGIN["top"] + MARGIN["bottom"] + panel_h * n_panels,
                     title="Treatment-definition sweep")
    values = np.concatenate([done["lo"], done["hi"], [0.0]]) if len(done) else np.zeros(1)
    vlo = float(np.nanmin(values)) - 0.05
    vhi = float(np.nanmax(values)) + 0.05
    for pi, cutoff in enumerate(cutoffs):
        sub = done[done["cutoff"] == cutoff].reset_index(drop=True)
        top = MARGIN["top"] + panel_h * pi + 18
        base = MARGIN["top"] + panel_h * (pi + 1) - 26

        def to_py(v):
            return base - (v - vlo) / (vhi - vlo) * (base - top)

        canvas.text(MARGIN["left"], top - 4, f"attempt cutoff {cutoff}s", size=12)
        canvas.line(MARGIN["left"], to_py(0.0), canvas.width - MARGIN["right"],
                    to_py(0.0), color="#888", dash="4,3")
        inner = canvas.width - MARGIN["left"] - MARGIN["right"]
        step = inner / max(1, len(sub))
        for i, row in enumerate(sub.itertuples()):
            x = MARGIN["left"] + step * (i + 0.5)
            canvas.line(x, to_py(row.lo), x, to_py(row.hi), color="#444", width=2)
            is_headline = (row.upper, row.lower, row.cutoff) == headline
            color = "#d62728" if is_headline else "#1f77b4"
            canvas.circle(x, to_py(row.estimate), 5 if is_headline else 4,
                          color, fill=color)
            canvas.text(x, base + 14, f"{int(row.upper)}-{int(row.lower)}",
                        anchor="middle", size=10)
    canvas.text(canvas.width / 2, canvas.height - 12,
                "opportunity window (gain upper-lower seconds)", anchor="middle")
    return canvas.render()
