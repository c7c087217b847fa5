"""Text and SVG pictures of one page: stems across, filtration up."""
from __future__ import annotations

from collections import defaultdict
from xml.sax.saxutils import escape

from .linalg import PreconditionError
from .sseq import er_page

__all__ = ["page_cells", "render_ascii", "render_svg"]


def page_cells(obj, page: int = 1):
    """``({(stem, filtration): [labels]}, [(source, target, text)], notes)`` for E_page."""
    P = er_page(obj, page)
    cells = defaultdict(list)
    arrows = []
    notes = []
    for key in P.nonzero_keys():
        gens = P.generators(key)
        G = P.groups[key]
        for g, o in zip(gens, G.orders):
            label = g.format()
            if o != P.mod.m:
                label += f"[{o}]"
            cells[key[:2]].append(label)
        for g in gens:
            try:
                dg = P.d(g)
            except PreconditionError:
                notes.append(f"d_{page} unknown at {key[:2]}")
                break
            if not dg.is_zero():
                arrows.append((key[:2], dg.key[:2], f"d_{page}({g.format()}) = {dg.format()}"))
    return dict(cells), arrows, notes


def render_ascii(obj, page: int = 1) -> str:
    cells, arrows, notes = page_cells(obj, page)
    out = [f"E_{page}"]
    if not cells:
        return "\n".join(out + ["(empty)"]) + "\n"
    stems = range(min(k[0] for k in cells), max(k[0] for k in cells) + 1)
    fils = range(max(k[1] for k in cells), min(0, min(k[1] for k in cells)) - 1, -1)
    text = {k: ",".join(v) for k, v in cells.items()}
    w = max([len(t) for t in text.values()] + [len(str(s)) for s in stems] + [1])
    lw = max(len(str(f)) for f in fils)
    for f in fils:
        row = [text.get((s, f), ".").center(w) for s in stems]
        out.append(f"{str(f).rjust(lw)} | " + " ".join(row).rstrip())
    out.append(" " * lw + "-+-" + "-".join("-" * w for _ in stems))
    out.append(" " * lw + "   " + " ".join(str(s).center(w) for s in stems).rstrip())
    for _, _, t in arrows:
        out.append(t)
    out.extend(dict.fromkeys(notes))
    return "\n".join(out) + "\n"


def render_svg(obj, page: int = 1, unit: int = 60) -> str:
    """A standalone SVG 1.1 document; output depends only on the page."""
    cells, arrows, _ = page_cells(obj, page)
    keys = list(cells) or [(0, 0)]
    s0, s1 = min(k[0] for k in keys), max(k[0] for k in keys)
    f0, f1 = min(0, min(k[1] for k in keys)), max(k[1] for k in keys)
    pad = 40
    width = (s1 - s0 + 1) * unit + 2 * pad
    height = (f1 - f0 + 1) * unit + 2 * pad

    def pos(key, i=0, n=1):
        x = pad + (key[0] - s0) * unit + unit / 2 + (i - (n - 1) / 2) * 10
        y = pad + (f1 - key[1]) * unit + unit / 2
        return round(x, 2), round(y, 2)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<defs><marker id="head" markerWidth="8" markerHeight="8" refX="7" refY="4" orient="auto">'
        '<path d="M0,0 L8,4 L0,8 z" fill="#b00"/></marker></defs>',
        f'<text x="{pad}" y="{pad / 2}" font-family="sans-serif" font-size="14">E_{page}</text>',
    ]
    for s in range(s0, s1 + 2):
        x = pad + (s - s0) * unit
        out.append(f'<line x1="{x}" y1="{pad}" x2="{x}" y2="{height - pad}" stroke="#ddd"/>')
    for f in range(f0, f1 + 2):
        y = pad + (f1 + 1 - f) * unit
        out.append(f'<line x1="{pad}" y1="{y}" x2="{width - pad}" y2="{y}" stroke="#ddd"/>')
    for s in range(s0, s1 + 1):
        x, _ = pos((s, f0))
        out.append(f'<text x="{x}" y="{height - pad / 3}" font-family="sans-serif" font-size="11" '
                   f'text-anchor="middle">{s}</text>')
    for f in range(f0, f1 + 1):
        _, y = pos((s0, f))
        out.append(f'<text x="{pad / 2}" y="{y}" font-family="sans-serif" font-size="11" '
                   f'text-anchor="middle">{f}</text>')
    for key in sorted(cells):
        labels = cells[key]
        for i, lab in enumerate(labels):
            x, y = pos(key, i, len(labels))
            out.append(f'<circle cx="{x}" cy="{y}" r="3.5" fill="#000"><title>{escape(lab)}</title></circle>')
        x, y = pos(key)
        out.append(f'<text x="{x}" y="{y - 8}" font-family="sans-serif" font-size="10" '
                   f'text-anchor="middle">{escape(", ".join(labels))}</text>')
    for src, tgt, t in arrows:
        x1, y1 = pos(src)
        x2, y2 = pos(tgt)
        out.append(f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="#b00" '
                   f'marker-end="url(#head)"><title>{escape(t)}</title></line>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
