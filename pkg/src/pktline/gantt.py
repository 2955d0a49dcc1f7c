"""Schedule charts: one column per router, time running downwards.

Consecutive steps of the same block on a router are drawn as one run, so
charts of long adversary traces stay small. Output is byte-deterministic:
no timestamps, fixed float formatting, colours assigned by sorted label.
"""
from __future__ import annotations

from dataclasses import dataclass
from html import escape
from typing import Optional, Sequence

from .core import Instance, Trace, flow_times

PALETTE = (
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
)
UNLABELED = "-"

COL_W = 28
LEFT = 64
TOP = 48
PANEL_GAP = 72
PLOT_H = 480
LEGEND_ROW = 14
MAX_TICKS = 24


@dataclass(frozen=True)
class Run:
    router: int
    start: int
    end: int  # exclusive
    label: str


@dataclass(frozen=True)
class BlockSummary:
    label: str
    release: int
    completion: int
    flow: int


def runs(instance: Instance, trace: Trace) -> list[Run]:
    """Maximal same-label stretches of busy steps, per router."""
    by_id = instance.by_id
    out: list[Run] = []
    open_: dict[int, list] = {}
    for t, r, pid in trace.assignments:
        lab = by_id[pid].block or UNLABELED
        cur = open_.get(r)
        if cur is not None and cur[1] == t and cur[2] == lab:
            cur[1] = t + 1
            continue
        if cur is not None:
            out.append(Run(r, cur[0], cur[1], cur[2]))
        open_[r] = [t, t + 1, lab]
    for r, cur in open_.items():
        out.append(Run(r, cur[0], cur[1], cur[2]))
    out.sort(key=lambda x: (x.router, x.start))
    return out


def block_summaries(instance: Instance, trace: Trace) -> list[BlockSummary]:
    """Earliest release, latest completion and max flow per label, for a complete trace."""
    if not trace.assignments:
        return []
    flows, _ = flow_times(instance, trace)
    acc: dict[str, list[int]] = {}
    for p in instance.packets:
        lab = p.block or UNLABELED
        done = p.release + flows[p.id]
        cur = acc.get(lab)
        if cur is None:
            acc[lab] = [p.release, done, flows[p.id]]
        else:
            cur[0] = min(cur[0], p.release)
            cur[1] = max(cur[1], done)
            cur[2] = max(cur[2], flows[p.id])
    rows = [BlockSummary(lab, *v) for lab, v in acc.items()]
    rows.sort(key=lambda b: (b.release, b.label))
    return rows


def colours(instance: Instance) -> dict[str, str]:
    labels = sorted({p.block or UNLABELED for p in instance.packets})
    return {lab: PALETTE[n % len(PALETTE)] for n, lab in enumerate(labels)}


def _fmt(x: float) -> str:
    s = f"{x:.2f}".rstrip("0").rstrip(".")
    return s if s != "-0" else "0"


def _ticks(instance: Instance, span: int) -> list[int]:
    ts = sorted({p.release for p in instance.packets} | {0})
    ts = [t for t in ts if t <= span]
    if len(ts) > MAX_TICKS:
        step = -(-len(ts) // MAX_TICKS)
        ts = ts[::step]
    return ts


def render_svg(instance: Instance, traces: Sequence[tuple[str, Trace]]) -> str:
    """Panels side by side, one per ``(title, trace)``; an empty list still draws axes."""
    if not traces:
        traces = [("", Trace())]
    span = max([t.horizon + 1 for _, t in traces] + [max((p.release for p in instance.packets), default=0), 1])
    scale = PLOT_H / span
    k = instance.k
    panel_w = k * COL_W
    summaries = [block_summaries(instance, tr) for _, tr in traces]
    legend_h = LEGEND_ROW * (max((len(s) for s in summaries), default=0) + 1)
    width = LEFT + len(traces) * panel_w + (len(traces) - 1) * PANEL_GAP + 24
    height = TOP + PLOT_H + 16 + legend_h + 8
    col = colours(instance)
    ticks = _ticks(instance, span)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="10">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    for n, ((title, trace), summ) in enumerate(zip(traces, summaries)):
        x0 = LEFT + n * (panel_w + PANEL_GAP)
        out.append(f'<g class="panel" id="panel-{n}">')
        if title:
            out.append(f'<text x="{x0}" y="14" font-size="12">{escape(title)}</text>')
        for r in range(1, k + 1):
            cx = x0 + (r - 1) * COL_W
            out.append(
                f'<rect x="{cx}" y="{TOP}" width="{COL_W}" height="{PLOT_H}" '
                f'fill="none" stroke="#dddddd"/>'
            )
            out.append(f'<text x="{_fmt(cx + COL_W / 2)}" y="{TOP - 6}" text-anchor="middle">{r}</text>')
        # time axis with release ticks
        out.append(f'<line x1="{x0}" y1="{TOP}" x2="{x0}" y2="{TOP + PLOT_H}" stroke="#000000"/>')
        for t in ticks:
            y = _fmt(TOP + t * scale)
            out.append(f'<line x1="{x0 - 4}" y1="{y}" x2="{x0}" y2="{y}" stroke="#000000"/>')
            out.append(f'<text x="{x0 - 6}" y="{y}" text-anchor="end" dominant-baseline="middle">{t}</text>')
        for run in runs(instance, trace):
            cx = x0 + (run.router - 1) * COL_W
            y = TOP + run.start * scale
            h = max((run.end - run.start) * scale, 0.5)
            out.append(
                f'<rect x="{cx + 2}" y="{_fmt(y)}" width="{COL_W - 4}" height="{_fmt(h)}" '
                f'fill="{col[run.label]}"><title>{escape(run.label)} '
                f'router {run.router} [{run.start},{run.end})</title></rect>'
            )
        ly = TOP + PLOT_H + 16
        out.append(f'<text x="{x0}" y="{ly}">block release completion flow</text>')
        for m, b in enumerate(summ, start=1):
            yy = ly + m * LEGEND_ROW
            out.append(f'<rect x="{x0}" y="{yy - 8}" width="8" height="8" fill="{col[b.label]}"/>')
            out.append(
                f'<text x="{x0 + 12}" y="{yy}">{escape(b.label)} r={b.release} '
                f'c={b.completion} f={b.flow}</text>'
            )
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_text(instance: Instance, traces: Sequence[tuple[str, Trace]]) -> str:
    """Plain-text fallback: runs per router and the per-block summary."""
    if not traces:
        traces = [("", Trace())]
    lines: list[str] = []
    for n, (title, trace) in enumerate(traces):
        lines.append(f"== {title or f'trace {n}'} ==")
        by_router: dict[int, list[Run]] = {}
        for run in runs(instance, trace):
            by_router.setdefault(run.router, []).append(run)
        for r in range(1, instance.k + 1):
            cells = " ".join(f"[{x.start},{x.end}){x.label}" for x in by_router.get(r, ()))
            lines.append(f"router {r}: {cells}".rstrip())
        for b in block_summaries(instance, trace):
            lines.append(f"block {b.label} release={b.release} completion={b.completion} flow={b.flow}")
    return "\n".join(lines) + "\n"


def render(instance: Instance, traces: Sequence[tuple[str, Trace]], fmt: Optional[str] = "svg") -> str:
    if fmt == "svg":
        return render_svg(instance, traces)
    if fmt == "text":
        return render_text(instance, traces)
    raise ValueError(f"unknown chart format {fmt!r}")
