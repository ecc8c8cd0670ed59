"""Graphviz export of history trees and views."""

from __future__ import annotations

from typing import Iterable, Mapping

from .history import GroundTruth, HNode, View


def _label(h: HNode, anonymity: int | None) -> str:
    if h.label is None:
        text = "r"
    else:
        text = ("L:" if h.label.leader else "") + str(h.label.value)
    if anonymity is not None:
        text += f"\\n{anonymity}"
    return text


def to_dot(nodes: Iterable[HNode], alpha: Mapping[HNode, int] | None = None, highlight: HNode | None = None, name: str = "history") -> str:
    """Black edges solid, red edges dashed; red multiplicities shown when > 1."""
    nodes = sorted(nodes, key=lambda h: (h.level, h.key))
    ids = {h: f"n{i}" for i, h in enumerate(nodes)}
    lines = [f"graph {name} {{", "  rankdir=TB;", '  node [shape=circle, fontsize=10];']
    by_level: dict[int, list[HNode]] = {}
    for h in nodes:
        by_level.setdefault(h.level, []).append(h)
    for lvl in sorted(by_level):
        members = []
        for h in by_level[lvl]:
            attrs = f'label="{_label(h, alpha.get(h) if alpha else None)}"'
            if h == highlight:
                attrs += ", style=filled, fillcolor=lightblue"
            members.append(f"{ids[h]} [{attrs}];")
        lines.append(f"  {{ rank=same; {' '.join(members)} }}")
    for h in nodes:
        if h.parent is not None and h.parent in ids:
            lines.append(f"  {ids[h.parent]} -- {ids[h]} [color=black];")
    for h in nodes:
        for u, m in h.red:
            if u in ids:
                lab = f', label="{m}"' if m > 1 else ""
                lines.append(f"  {ids[u]} -- {ids[h]} [color=red, style=dashed, constraint=false{lab}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def view_to_dot(view: View, alpha: Mapping[HNode, int] | None = None) -> str:
    return to_dot(view.nodes.values(), alpha, highlight=view.viewpoint, name="view")


def ground_truth_to_dot(gt: GroundTruth) -> str:
    return to_dot((h for lvl in gt.levels for h in lvl), gt.alpha, name="history_tree")
