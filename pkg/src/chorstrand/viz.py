"""Render bundles as message-sequence style figures.

Each strand is a vertical column of nodes joined top to bottom; delivery
edges are drawn as arrows between columns.  Output is a PNG file.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from . import terms
from .absem import EndMarker
from .strands import Bundle

__all__ = ["render_bundle"]

_TERM_TYPES = (
    terms.Value,
    terms.Nonce,
    terms.SymKey,
    terms.PubKey,
    terms.PrivKey,
    terms.Principal,
    terms.Tag,
    terms.Seq,
    terms.Enc,
    terms.Var,
)


def _msg_text(msg: object) -> str:
    if isinstance(msg, EndMarker):
        return f"end({msg.role})"
    if isinstance(msg, _TERM_TYPES):
        return terms.term_to_text(msg)
    return str(msg)


def render_bundle(b: Bundle, path: str, title: str | None = None) -> None:
    ids = b.strand_ids()
    max_h = max((b.height(sid) for sid in ids), default=1)
    width = max(3.0, 2.2 * len(ids))
    height = max(2.5, 0.9 * max_h + 1.2)
    fig, ax = plt.subplots(figsize=(width, height))
    xs = {sid: i * 2.2 for i, sid in enumerate(ids)}

    for sid in ids:
        x = xs[sid]
        h = b.height(sid)
        kind = b.strands[sid].kind
        ax.text(x, 0.6, sid, ha="center", va="bottom", fontsize=9, fontweight="bold")
        if h > 1:
            ax.plot([x, x], [-1, -h], color="0.6", lw=1.0, zorder=1)
        for k in range(1, h + 1):
            ev = b.strands[sid].trace[k - 1]
            face = {"regular": "black", "adversary": "firebrick", "marker": "0.7"}[kind]
            ax.plot([x], [-k], marker="o", color=face, markersize=5, zorder=3)
            ax.annotate(
                f"{ev.direction}{_msg_text(ev.msg)}",
                (x, -k),
                textcoords="offset points",
                xytext=(6, 5),
                fontsize=6.5,
            )

    for m, n in sorted(b.comm_edges):
        x1, y1 = xs[m.strand], -m.index
        x2, y2 = xs[n.strand], -n.index
        ax.annotate(
            "",
            xy=(x2, y2),
            xytext=(x1, y1),
            arrowprops={"arrowstyle": "->", "color": "steelblue", "lw": 1.1},
            zorder=2,
        )

    if title:
        ax.set_title(title, fontsize=10)
    ax.set_xlim(-1.2, max(xs.values(), default=0) + 1.8)
    ax.set_ylim(-max_h - 0.8, 1.2)
    ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
