"""
Bifurcation diagrams as standalone SVG.

One ``<polyline>`` per branch; axes and ticks are drawn with ``<line>`` and
``<text>`` only. Coordinates are printed with a fixed number of decimals so
the output is byte-stable.
"""

import math
from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

from ..enums import BranchKind
from ..types import Branch
from .string_template import TemplateReport

SVG_TEMPLATE = """<svg xmlns="http://www.w3.org/2000/svg" width="$width" height="$height" viewBox="0 0 $width $height" font-family="sans-serif" font-size="11">
<title>$title</title>
<rect x="0" y="0" width="$width" height="$height" fill="#ffffff"/>
$panels
</svg>"""

PALETTE = ("#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d35400", "#555555")
MARGIN = (58.0, 18.0, 28.0, 42.0)  # left, right, top, bottom
TICKS = 5


def _num(value: float) -> str:
    return f"{value:.2f}"


def _tick_label(value: float) -> str:
    return f"{value:.4g}"


@dataclass(frozen=True)
class Series:
    """One polyline: (x, y) points, stroke colour and dash style."""
    label: str
    points: Tuple[Tuple[float, float], ...]
    color: str = PALETTE[0]
    dashed: bool = False


@dataclass
class Panel:
    title: str
    series: List[Series] = field(default_factory=list)
    x_label: str = "d2"
    y_label: str = "sup v"


def branch_series(branch: Branch, measure: Optional[str] = None) -> Series:
    """
    Series of a branch in the (d2, measure) plane.

    Dashed when any point has a positive stability index; coloured by mode
    index, with limit branches drawn in grey.
    """
    polyline = branch.polyline(measure)
    unstable = any(p.stability_index is not None and p.stability_index > 0 for p in branch.points)
    if branch.origin.kind is BranchKind.LIMIT:
        color = PALETTE[-1]
    elif branch.origin.j is None:
        color = PALETTE[0]
    else:
        color = PALETTE[(branch.origin.j - 1) % (len(PALETTE) - 1)]
    points = tuple((float(x), float(y)) for x, y in polyline)
    return Series(label=branch.id, points=points, color=color, dashed=unstable)


def _bounds(values: Sequence[float]) -> Tuple[float, float]:
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        return lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


class BifurcationDiagram(TemplateReport):
    """
    Grid of diagram panels rendered into one SVG document.

    The plotted measure is recorded in a trailing XML comment unless a
    ``note`` replaces it.
    """

    def __init__(self, panels: Sequence[Panel], measure: str = "sup_v", title: str = "bifurcation diagram",
                 columns: int = 1, panel_width: float = 480.0, panel_height: float = 360.0,
                 note: Optional[str] = None) -> None:
        super().__init__(SVG_TEMPLATE)
        self.note = note
        self.panels = list(panels)
        self.measure = measure
        self.title = title
        self.columns = max(1, columns)
        self.panel_width = panel_width
        self.panel_height = panel_height

    @classmethod
    def from_branches(cls, branches: Sequence[Branch], measure: str = "sup_v", title: str = "bifurcation diagram",
                      **kwargs: Any) -> "BifurcationDiagram":
        panel = Panel(title=title, series=[branch_series(b, measure) for b in branches if len(b)],
                      y_label=measure.replace("_", " "))
        return cls([panel], measure=measure, title=title, **kwargs)

    def polyline_count(self) -> int:
        return sum(len(panel.series) for panel in self.panels)

    def _render_panel(self, panel: Panel, x0: float, y0: float) -> str:
        left, right, top, bottom = MARGIN
        width = self.panel_width - left - right
        height = self.panel_height - top - bottom
        xs = [x for s in panel.series for x, _ in s.points]
        ys = [y for s in panel.series for _, y in s.points]
        x_lo, x_hi = _bounds(xs)
        y_lo, y_hi = _bounds(ys)
        ox, oy = x0 + left, y0 + top

        def px(x: float) -> float:
            return ox + (x - x_lo) / (x_hi - x_lo) * width

        def py(y: float) -> float:
            return oy + height - (y - y_lo) / (y_hi - y_lo) * height

        parts = [f'<g class="panel">',
                 f'<text x="{_num(ox + width / 2)}" y="{_num(y0 + 16)}" text-anchor="middle">{escape(panel.title)}</text>',
                 f'<line x1="{_num(ox)}" y1="{_num(oy + height)}" x2="{_num(ox + width)}" y2="{_num(oy + height)}" stroke="#000000"/>',
                 f'<line x1="{_num(ox)}" y1="{_num(oy)}" x2="{_num(ox)}" y2="{_num(oy + height)}" stroke="#000000"/>']
        for value in np.linspace(x_lo, x_hi, TICKS):
            x = px(value)
            parts.append(f'<line x1="{_num(x)}" y1="{_num(oy + height)}" x2="{_num(x)}" y2="{_num(oy + height + 4)}" stroke="#000000"/>')
            parts.append(f'<text x="{_num(x)}" y="{_num(oy + height + 16)}" text-anchor="middle">{_tick_label(value)}</text>')
        for value in np.linspace(y_lo, y_hi, TICKS):
            y = py(value)
            parts.append(f'<line x1="{_num(ox - 4)}" y1="{_num(y)}" x2="{_num(ox)}" y2="{_num(y)}" stroke="#000000"/>')
            parts.append(f'<text x="{_num(ox - 6)}" y="{_num(y + 4)}" text-anchor="end">{_tick_label(value)}</text>')
        parts.append(f'<text x="{_num(ox + width / 2)}" y="{_num(oy + height + 32)}" text-anchor="middle">{escape(panel.x_label)}</text>')
        parts.append(f'<text x="{_num(x0 + 12)}" y="{_num(oy + height / 2)}" text-anchor="middle" '
                     f'transform="rotate(-90 {_num(x0 + 12)} {_num(oy + height / 2)})">{escape(panel.y_label)}</text>')
        for s in panel.series:
            coords = " ".join(f"{_num(px(x))},{_num(py(y))}" for x, y in s.points)
            dash = ' stroke-dasharray="6,4"' if s.dashed else ""
            parts.append(f'<polyline fill="none" stroke="{s.color}" stroke-width="1.5"{dash} points="{coords}">'
                         f'<title>{escape(s.label)}</title></polyline>')
        parts.append("</g>")
        return "\n".join(parts)

    def _render_content(self, **kwargs: Any) -> str:
        rows = max(1, math.ceil(len(self.panels) / self.columns))
        columns = min(self.columns, max(1, len(self.panels)))
        fragments = []
        for index, panel in enumerate(self.panels):
            row, col = divmod(index, self.columns)
            fragments.append(self._render_panel(panel, col * self.panel_width, row * self.panel_height))
        return super()._render_content(
            width=_num(columns * self.panel_width),
            height=_num(rows * self.panel_height),
            title=escape(kwargs.get("title", self.title)),
            panels="\n".join(fragments),
        )

    def get_suffix(self) -> str:
        if self.note is not None:
            return f"<!-- {self.note} -->"
        return f"<!-- measure: {self.measure}; dashed: branch has points with a growing mode -->"
