"""History trees, views and the local history-update algorithm.

Nodes are immutable and carry a structural identity: a digest of the
parent's identity, the node's label and the multiset of red edges to the
previous level. Inside a (sub-)history tree, siblings with the same label
always differ in their red edges, so this identity is unique. The view of a
node is its closure under "parent" and "red neighbor one level up", which
the node's references already span.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

from .model import DynamicNetworkTrace, ProcessInput


class ProtocolError(ValueError):
    """Raised when received histories are inconsistent with the own history."""


def _label_bytes(label: ProcessInput | None) -> bytes:
    if label is None:
        return b"root"
    return repr((label.leader, type(label.value).__name__, repr(label.value))).encode()


class HNode:
    """A history-tree node. ``red`` lists edges to level ``level - 1`` as
    ``(node, multiplicity)`` pairs sorted by node identity."""

    __slots__ = ("level", "label", "parent", "red", "key", "_hash", "_red_map")

    def __init__(
        self,
        parent: "HNode | None",
        label: ProcessInput | None,
        red: Mapping["HNode", int] | Iterable[tuple["HNode", int]] = (),
    ):
        items = red.items() if isinstance(red, Mapping) else red
        merged: dict[HNode, int] = {}
        for node, mult in items:
            if mult < 1:
                raise ValueError("red multiplicities must be positive")
            merged[node] = merged.get(node, 0) + mult
        self.parent = parent
        self.level = -1 if parent is None else parent.level + 1
        self.label = label
        for node in merged:
            if node.level != self.level - 1:
                raise ValueError("red edges must join consecutive levels")
        self.red = tuple(sorted(merged.items(), key=lambda kv: kv[0].key))
        h = hashlib.blake2b(digest_size=16)
        h.update(b"P" + (parent.key if parent is not None else b""))
        h.update(b"L" + _label_bytes(label))
        for node, mult in self.red:
            h.update(b"R" + node.key + mult.to_bytes(8, "big"))
        self.key = h.digest()
        self._hash = hash(self.key)
        self._red_map = None

    @classmethod
    def root(cls) -> "HNode":
        return cls(None, None)

    @property
    def red_map(self) -> dict["HNode", int]:
        if self._red_map is None:
            self._red_map = dict(self.red)
        return self._red_map

    def red_mult(self, other: "HNode") -> int:
        """Multiplicity of the red edge from this node up to ``other``."""
        return self.red_map.get(other, 0)

    @property
    def is_leader(self) -> bool:
        return self.label is not None and self.label.leader

    def __eq__(self, other) -> bool:
        return isinstance(other, HNode) and self.key == other.key

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "HNode") -> bool:
        return self.key < other.key

    def __repr__(self) -> str:
        return f"HNode(L{self.level}, {self.label!r}, {self.key.hex()[:8]})"


def _closure(viewpoint: HNode) -> dict[bytes, HNode]:
    nodes = {viewpoint.key: viewpoint}
    stack = [viewpoint]
    while stack:
        h = stack.pop()
        ups = [nd for nd, _ in h.red]
        if h.parent is not None:
            ups.append(h.parent)
        for u in ups:
            if u.key not in nodes:
                nodes[u.key] = u
                stack.append(u)
    return nodes


class View:
    """A finite sub-history with a unique deepest node, the viewpoint.

    Views are values: equality and hashing go through the viewpoint's
    identity, which determines the whole view.
    """

    __slots__ = ("viewpoint", "nodes", "__dict__")

    def __init__(self, viewpoint: HNode, nodes: Mapping[bytes, HNode] | None = None):
        self.viewpoint = viewpoint
        self.nodes = dict(nodes) if nodes is not None else _closure(viewpoint)

    @classmethod
    def of(cls, viewpoint: HNode) -> "View":
        return cls(viewpoint)

    @property
    def height(self) -> int:
        """Level of the viewpoint (the round this history belongs to)."""
        return self.viewpoint.level

    @cached_property
    def root(self) -> HNode:
        h = self.viewpoint
        while h.parent is not None:
            h = h.parent
        return h

    def __contains__(self, node: HNode) -> bool:
        return node.key in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes.values())

    def __eq__(self, other) -> bool:
        return isinstance(other, View) and self.viewpoint.key == other.viewpoint.key

    def __hash__(self) -> int:
        return hash(self.viewpoint.key)

    def __repr__(self) -> str:
        return f"View(height={self.height}, nodes={len(self.nodes)}, vp={self.viewpoint.key.hex()[:8]})"

    @cached_property
    def levels(self) -> list[list[HNode]]:
        """``levels[t + 1]`` holds the nodes of level ``t``, sorted by identity."""
        out: list[list[HNode]] = [[] for _ in range(self.height + 2)]
        for h in self.nodes.values():
            out[h.level + 1].append(h)
        for lvl in out:
            lvl.sort()
        return out

    def level(self, t: int) -> list[HNode]:
        if t < -1 or t > self.height:
            return []
        return self.levels[t + 1]

    @cached_property
    def children(self) -> dict[HNode, list[HNode]]:
        out: dict[HNode, list[HNode]] = {h: [] for h in self.nodes.values()}
        for lvl in self.levels[1:]:
            for h in lvl:
                out[h.parent].append(h)
        return out

    @cached_property
    def red_down(self) -> dict[HNode, list[tuple[HNode, int]]]:
        """Red edges from each node to view nodes one level below."""
        out: dict[HNode, list[tuple[HNode, int]]] = {h: [] for h in self.nodes.values()}
        for lvl in self.levels[1:]:
            for h in lvl:
                for u, m in h.red:
                    out[u].append((h, m))
        return out

    def leaves(self) -> list[HNode]:
        ch = self.children
        return [h for h in self.nodes.values() if not ch[h]]

    def leader_node(self, t: int) -> HNode | None:
        return next((h for h in self.level(t) if h.is_leader), None)


@dataclass(frozen=True)
class GroundTruth:
    """History tree of a trace with its representation maps.

    ``levels[i + 1]`` is level ``i``; ``rho[i + 1][p]`` is the node of level
    ``i`` representing process ``p``; ``alpha`` gives anonymities.
    """

    trace: DynamicNetworkTrace
    levels: tuple[tuple[HNode, ...], ...]
    rho: tuple[Mapping[int, HNode], ...]
    alpha: Mapping[HNode, int]

    @property
    def root(self) -> HNode:
        return self.levels[0][0]

    @property
    def depth(self) -> int:
        return len(self.levels) - 2

    def level(self, t: int) -> tuple[HNode, ...]:
        return self.levels[t + 1]

    def node_of(self, p: int, t: int) -> HNode:
        return self.rho[t + 1][p]

    def history(self, p: int, t: int) -> View:
        return view_of(self, self.node_of(p, t))

    def preimage(self, t: int) -> dict[HNode, frozenset[int]]:
        out: dict[HNode, set[int]] = {}
        for p, h in self.rho[t + 1].items():
            out.setdefault(h, set()).add(p)
        return {h: frozenset(ps) for h, ps in out.items()}

    def partition(self, t: int) -> frozenset[frozenset[int]]:
        return frozenset(self.preimage(t).values())

    @cached_property
    def children(self) -> dict[HNode, list[HNode]]:
        out: dict[HNode, list[HNode]] = {h: [] for lvl in self.levels for h in lvl}
        for lvl in self.levels[1:]:
            for h in lvl:
                out.setdefault(h.parent, []).append(h)
        return out


def build_ground_truth(trace: DynamicNetworkTrace, depth: int | None = None) -> GroundTruth:
    """Construct the history tree level by level from observation multisets."""
    trace.validate()
    depth = trace.rounds if depth is None else min(depth, trace.rounds)
    procs = range(1, trace.n + 1)
    root = HNode.root()
    levels = [(root,)]
    rho: list[dict[int, HNode]] = [{p: root for p in procs}]

    l0: dict[ProcessInput, HNode] = {}
    for p in procs:
        x = trace.assignment[p]
        if x not in l0:
            l0[x] = HNode(root, x)
    rho.append({p: l0[trace.assignment[p]] for p in procs})
    levels.append(tuple(sorted(l0.values())))

    for i in range(1, depth + 1):
        prev = rho[-1]
        obs: dict[int, dict[HNode, int]] = {p: {} for p in procs}
        for (u, v), m in trace.snapshot(i).edges.items():
            if u == v:
                obs[u][prev[u]] = obs[u].get(prev[u], 0) + m
            else:
                obs[u][prev[v]] = obs[u].get(prev[v], 0) + m
                obs[v][prev[u]] = obs[v].get(prev[u], 0) + m
        made: dict[tuple, HNode] = {}
        cur: dict[int, HNode] = {}
        for p in procs:
            parent = prev[p]
            sig = (parent.key, tuple(sorted((h.key, m) for h, m in obs[p].items())))
            if sig not in made:
                made[sig] = HNode(parent, parent.label, obs[p])
            cur[p] = made[sig]
        rho.append(cur)
        levels.append(tuple(sorted(made.values())))

    alpha: dict[HNode, int] = {}
    for r in rho:
        for h in r.values():
            alpha[h] = alpha.get(h, 0) + 1
    return GroundTruth(trace, tuple(levels), tuple(rho), alpha)


def view_of(gt: GroundTruth, node: HNode) -> View:
    """Sub-history induced by all ascending paths starting at ``node``."""
    if node not in gt.alpha:
        raise KeyError(f"{node!r} is not in the history tree")
    return View(node)


def initial_history(x: ProcessInput) -> View:
    """History of a process with input ``x`` at round 0."""
    return View(HNode(HNode.root(), x))


def extend_and_merge(own: View, received: Mapping[View, int] | Iterable[tuple[View, int]]) -> View:
    """One round of the history-update algorithm.

    The own history is extended with a child of its viewpoint; each distinct
    received history is then mapped into the accumulated structure by a
    breadth-first scan along black edges, adding the nodes that have no
    match (same parent image, same label, same red edges into already-mapped
    nodes). Finally the new viewpoint gets one red edge per received history,
    with that history's multiplicity.
    """
    items = list(received.items()) if isinstance(received, Mapping) else list(received)
    h = own.viewpoint
    if h.level < 0:
        raise ProtocolError("own history must have its viewpoint at level 0 or below")
    acc: dict[bytes, HNode] = dict(own.nodes)
    # children index of the accumulator: (parent key, label bytes, red signature) -> node
    index: dict[tuple, HNode] | None = None

    def signature(parent: HNode, label, red) -> tuple:
        return (parent.key, _label_bytes(label), tuple(sorted((u.key, m) for u, m in red)))

    new_red: dict[HNode, int] = {}
    for view, mult in items:
        if mult < 1:
            continue
        vp = view.viewpoint
        if vp.level != h.level:
            raise ProtocolError(f"received history of round {vp.level}, expected round {h.level}")
        if vp.key in acc:
            # the received history is already contained in the accumulator
            new_red[acc[vp.key]] = new_red.get(acc[vp.key], 0) + mult
            continue
        if index is None:
            index = {signature(w.parent, w.label, w.red): w for w in acc.values() if w.parent is not None}
        phi: dict[bytes, HNode] = {}
        queue = deque([view.root])
        children = view.children
        phi[view.root.key] = acc.get(view.root.key) or _root_of(acc)
        while queue:
            v = queue.popleft()
            for c in children[v]:
                parent_img = phi[v.key]
                red_img = [(phi[u.key], m) for u, m in c.red]
                sig = signature(parent_img, c.label, red_img)
                w = index.get(sig)
                if w is None:
                    w = HNode(parent_img, c.label, red_img)
                    acc[w.key] = w
                    index[sig] = w
                phi[c.key] = w
                queue.append(c)
        img = phi[vp.key]
        new_red[img] = new_red.get(img, 0) + mult

    child = HNode(h, h.label, new_red)
    acc[child.key] = child
    return View(child, acc)


def _root_of(nodes: Mapping[bytes, HNode]) -> HNode:
    return next(h for h in nodes.values() if h.parent is None)


def canonical_form(v: View) -> bytes:
    """Renaming-invariant encoding of a view.

    Nodes are numbered level by level; within a level they are ordered by
    (parent number, label, sorted red edges to numbered nodes), and each
    node's children are listed in that order. Two valid views get the same
    encoding iff they are isomorphic as labeled red/black structures.
    """
    number: dict[bytes, int] = {}
    rows: list[list] = []
    frontier = [n for n in v.nodes.values() if n.parent is None]
    if len(frontier) != 1:
        raise ValueError("a view must have exactly one root")
    number[frontier[0].key] = 0
    by_level: dict[int, list[HNode]] = {}
    for n in v.nodes.values():
        by_level.setdefault(n.level, []).append(n)
    counter = 1
    for lvl in range(0, max(by_level) + 1):
        descr = []
        for n in by_level.get(lvl, []):
            lab = None if n.label is None else [n.label.leader, type(n.label.value).__name__, repr(n.label.value)]
            red = sorted([number[u.key], m] for u, m in n.red)
            descr.append(([number[n.parent.key], lab, red], n))
        descr.sort(key=lambda d: json.dumps(d[0]))
        for i in range(1, len(descr)):
            if descr[i][0] == descr[i - 1][0]:
                raise ValueError("malformed view: two siblings are structurally identical")
        row = []
        for d, n in descr:
            number[n.key] = counter
            counter += 1
            row.append(d)
        rows.append(row)
    vp = number[v.viewpoint.key]
    return json.dumps({"levels": rows, "viewpoint": vp}, separators=(",", ":")).encode()


def views_isomorphic(a: View, b: View) -> bool:
    return canonical_form(a) == canonical_form(b)


def view_size(v: View) -> tuple[int, int]:
    """(number of nodes, number of red edges counted with multiplicity)."""
    return len(v.nodes), sum(m for n in v.nodes.values() for _, m in n.red)
