"""Generalized Counting over histories: a stabilizing and a terminating
algorithm, plus the guessing machinery the terminating one relies on."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Iterable

from .history import HNode, View, extend_and_merge, initial_history
from .model import Inventory, ProcessInput, Unknown

Hook = Callable[..., None]


class ContractError(ValueError):
    pass


@dataclass(frozen=True)
class ExposedPair:
    v1: HNode
    v2: HNode
    m1: int  # red edge {c(v1), v2}
    m2: int  # red edge {c(v2), v1}


def find_exposed_pairs(view: View, level: int) -> list[ExposedPair]:
    """All exposed pairs of non-branching nodes in ``level``, each reported
    once with ``v1 < v2`` in identity order."""
    children = view.children
    nb = {v: children[v][0] for v in view.level(level) if len(children[v]) == 1}
    pairs = []
    for v1 in sorted(nb):
        c1 = nb[v1]
        for v2, m1 in c1.red:
            if v2 == v1 or v2 not in nb or not v1 < v2:
                continue
            m2 = nb[v2].red_mult(v1)
            if m2 >= 1:
                pairs.append(ExposedPair(v1, v2, m1, m2))
    pairs.sort(key=lambda p: (p.v1.key, p.v2.key))
    return pairs


def _l0_inventory(view: View, weights: dict[HNode, int], bottom: Iterable[HNode]) -> Inventory:
    counts: dict[ProcessInput, int] = {}
    for h in bottom:
        top = h
        while top.level > 0:
            top = top.parent
        if top.level == 0:
            counts[top.label] = counts.get(top.label, 0) + weights.get(h, 0)
    return Inventory(counts)


def stabilizing_count(view: View):
    """Inventory estimate from the first level whose nodes all have exactly
    one child, with anonymities propagated over exposed pairs starting from
    the leader. May be wrong before round 2n-2."""
    children = view.children
    for t in range(0, view.height + 1):
        nodes = view.level(t)
        leader = next((v for v in nodes if v.is_leader), None)
        if leader is None:
            return Unknown
        if not all(len(children[v]) == 1 for v in nodes):
            continue
        a = {v: 0 for v in nodes}
        a[leader] = 1
        pairs = find_exposed_pairs(view, t)
        progress = True
        while progress:
            progress = False
            for p in pairs:
                for (x, y, mx, my) in ((p.v1, p.v2, p.m1, p.m2), (p.v2, p.v1, p.m2, p.m1)):
                    if a[x] != 0 and a[y] == 0:
                        a[y] = -(-a[x] * mx // my)
                        progress = True
        return _l0_inventory(view, a, nodes)
    return Unknown


@dataclass
class GuessState:
    """Flags and values of one terminating-count run over a view.

    ``w`` is not stored: ``weight`` derives it from the maintained count of
    guessed nodes per black subtree.
    """

    counted: set = field(default_factory=set)
    guessed: set = field(default_factory=set)
    a: dict = field(default_factory=dict)
    g: dict = field(default_factory=dict)
    subtree_guessed: Counter = field(default_factory=Counter)

    def weight(self, v: HNode) -> int | None:
        if v not in self.guessed:
            return None
        return self.subtree_guessed[v]

    def heavy(self, v: HNode) -> bool:
        return v in self.guessed and self.subtree_guessed[v] >= self.g[v]

    def locked_levels(self) -> set[int]:
        return {v.level for v in self.guessed}


def is_guesser(view: View, state: GuessState, u: HNode) -> bool:
    if u not in state.counted:
        return False
    kids = view.children[u]
    if not all(c in state.counted for c in kids):
        return False
    # a childless node sums to 0, never its (positive) anonymity
    return state.a[u] == sum(state.a[c] for c in kids)


def compute_guess(view: View, state: GuessState, v: HNode, u: HNode) -> int:
    """Ceiling of sum_i a(u_i) * m_i over m, where the u_i are u's children,
    m_i the red multiplicity {u_i, parent(v)} and m that of {v, u}."""
    if v.level != u.level + 1:
        raise ContractError("guesser must be one level above the guessed node")
    if not is_guesser(view, state, u):
        raise ContractError(f"{u!r} is not a guesser")
    m = v.red_mult(u)
    if m < 1:
        raise ContractError(f"no red edge between {v!r} and {u!r}")
    vp = v.parent
    total = sum(state.a[ui] * ui.red_mult(vp) for ui in view.children[u])
    return -(-total // m)


@dataclass(frozen=True)
class Isle:
    root: HNode
    leaves: frozenset
    internal: tuple  # deepest first
    complete: bool

    @property
    def trivial(self) -> bool:
        return not self.internal


def isle_of(view: View, state: GuessState, s: HNode) -> Isle | None:
    """Isle rooted at counted ``s`` whose leaves are the first counted nodes
    below ``s``; None when some view leaf under ``s`` is not covered."""
    if s not in state.counted:
        raise ContractError("isle root must be counted")
    children = view.children
    if not children[s]:
        return None
    leaves = []
    internal = []
    stack = list(children[s])
    while stack:
        x = stack.pop()
        if x in state.counted:
            leaves.append(x)
            continue
        kids = children[x]
        if not kids:
            return None
        internal.append(x)
        stack.extend(kids)
    internal.sort(key=lambda h: (-h.level, h.key))
    complete = state.a[s] == sum(state.a[f] for f in leaves)
    return Isle(s, frozenset(leaves), tuple(internal), complete)


def find_counting_cut(view: View, state: GuessState) -> frozenset | None:
    """Minimum-depth counted ancestors of all counted nodes, if they form a
    cut for the root."""
    if not state.counted:
        return None
    cut = set()
    for v in state.counted:
        top = v
        x = v.parent
        while x is not None:
            if x in state.counted:
                top = x
            x = x.parent
        cut.add(top)
    root = view.root
    if root in cut:
        return None
    children = view.children
    # (i) every view leaf under the root meets the cut
    stack = [root]
    while stack:
        x = stack.pop()
        for c in children[x]:
            if c in cut:
                continue
            if not children[c]:
                return None
            stack.append(c)
    # (ii) each member reaches a view leaf without meeting another member
    for c in cut:
        ok = False
        probe = [c]
        while probe:
            x = probe.pop()
            kids = children[x]
            if not kids:
                ok = True
                break
            probe.extend(k for k in kids if k not in cut)
        if not ok:
            return None
    return frozenset(cut)


@dataclass(frozen=True)
class TerminatingResult:
    output: Any
    state: GuessState
    cut: frozenset | None
    cut_level: int | None
    estimate: int | None


class _GuessingRun:
    def __init__(self, view: View, hook: Hook | None):
        self.view = view
        self.children = view.children
        self.red_down = view.red_down
        self.hook = hook
        self.state = GuessState()
        self.guessers: set[HNode] = set()
        self.cand: dict[int, set[HNode]] = defaultdict(set)

    def emit(self, event: str, **data):
        if self.hook is not None:
            self.hook(event, run=self, **data)

    def guesser_ups(self, v: HNode) -> list[HNode]:
        return [u for u, _ in v.red if u in self.guessers]

    def _refresh_guesser(self, u: HNode):
        if u in self.guessers or u.parent is None:
            return
        if is_guesser(self.view, self.state, u):
            self.guessers.add(u)
            for v, _m in self.red_down[u]:
                if v not in self.state.counted and v not in self.state.guessed:
                    self.cand[v.level].add(v)

    def _bump_weights(self, v: HNode, delta: int):
        st = self.state
        x = v
        while x is not None:
            st.subtree_guessed[x] += delta
            x = x.parent

    def mark_counted(self, v: HNode, value: int, reason: str):
        st = self.state
        st.a[v] = value
        st.counted.add(v)
        if v in st.guessed:
            st.guessed.discard(v)
            self._bump_weights(v, -1)
        self.cand[v.level].discard(v)
        self.emit("count", node=v, value=value, reason=reason)
        self._refresh_guesser(v)
        if v.parent is not None:
            self._refresh_guesser(v.parent)

    def next_guess(self) -> HNode | None:
        locked = self.state.locked_levels()
        for t in sorted(self.cand):
            if self.cand[t] and t not in locked:
                return min(self.cand[t])
        return None

    def resolve_isle(self, isle: Isle):
        st = self.state
        sums: dict[HNode, int] = {}
        for w in isle.internal:  # deepest first
            sums[w] = sum(st.a[c] if c in isle.leaves else sums[c] for c in self.children[w])
        self.emit("isle", isle=isle)
        for w in isle.internal:
            self.mark_counted(w, sums[w], "isle")

    def run(self) -> TerminatingResult:
        view, st = self.view, self.state
        for t in range(0, view.height + 1):
            ell = view.leader_node(t)
            if ell is not None:
                self.mark_counted(ell, 1, "leader")
        while True:
            self.emit("loop_head")
            v = self.next_guess()
            if v is None:
                break
            u = min(self.guesser_ups(v))
            g = compute_guess(view, st, v, u)
            st.g[v] = g
            st.guessed.add(v)
            self.cand[v.level].discard(v)
            self._bump_weights(v, +1)
            self.emit("guess", node=v, guesser=u, value=g)
            heavy = None
            x = v
            while x is not None:
                if st.heavy(x):
                    heavy = x
                    break
                x = x.parent
            if heavy is None:
                continue
            self.mark_counted(heavy, st.g[heavy], "heavy")
            isle = isle_of(view, st, heavy)
            if isle is not None and isle.complete and not isle.trivial:
                self.resolve_isle(isle)
            s = heavy.parent
            while s is not None and s not in st.counted:
                s = s.parent
            if s is not None:
                isle = isle_of(view, st, s)
                if isle is not None and heavy in isle.leaves and isle.complete and not isle.trivial:
                    self.resolve_isle(isle)

        cut = find_counting_cut(view, st)
        if cut is None:
            self.emit("cut", cut=None, accepted=False)
            return TerminatingResult(Unknown, st, None, None, None)
        t = max(c.level for c in cut)
        n_est = sum(st.a[c] for c in cut)
        accepted = view.height >= t + n_est
        self.emit("cut", cut=cut, accepted=accepted, level=t, estimate=n_est)
        if not accepted:
            return TerminatingResult(Unknown, st, cut, t, n_est)
        inv = _l0_inventory(view, st.a, cut)
        return TerminatingResult(inv, st, cut, t, n_est)


def terminating_run(view: View, hook: Hook | None = None) -> TerminatingResult:
    """Run the terminating algorithm and keep its final bookkeeping."""
    return _GuessingRun(view, hook).run()


@lru_cache(maxsize=1 << 14)
def _terminating_cached(view: View):
    return _GuessingRun(view, None).run().output


def terminating_count(view: View, hook: Hook | None = None):
    """Inventory when the termination condition holds, else ``Unknown``."""
    if hook is not None:
        return terminating_run(view, hook).output
    return _terminating_cached(view)


# -- process wrappers ----------------------------------------------------------


@dataclass(frozen=True)
class CountingState:
    history: View
    output: Any
    terminal: bool = False


class _CountingProcess:
    name = "abstract"

    def __init__(self, cache_size: int = 1 << 12):
        self._step = lru_cache(maxsize=cache_size)(self._step_impl)

    def count(self, view: View):
        raise NotImplementedError

    def init(self, x: ProcessInput) -> CountingState:
        h = initial_history(x)
        return self._state(h)

    def _state(self, h: View) -> CountingState:
        return CountingState(h, self.count(h), False)

    def step(self, state: CountingState, received: Counter) -> CountingState:
        return self._step(state, frozenset(received.items()))

    def _step_impl(self, state: CountingState, received: frozenset) -> CountingState:
        views: Counter = Counter()
        for st, m in received:
            views[st.history] += m
        return self._state(extend_and_merge(state.history, views))

    def output(self, state: CountingState):
        return state.output

    def is_terminal(self, state: CountingState) -> bool:
        return state.terminal


class StabilizingCounting(_CountingProcess):
    name = "stabilizing"

    def count(self, view):
        return stabilizing_count(view)


class TerminatingCounting(_CountingProcess):
    """Terminating counting as a local algorithm.

    A process whose neighbor has already terminated adopts that neighbor's
    inventory and terminates too: the neighbor's frozen history is one round
    short and cannot be merged.
    """

    name = "terminating"

    def __init__(self, count_fn: Callable[[View], Any] | None = None, cache_size: int = 1 << 12):
        super().__init__(cache_size)
        self._count_fn = count_fn or terminating_count

    def count(self, view):
        return self._count_fn(view)

    def _state(self, h: View) -> CountingState:
        out = self.count(h)
        return CountingState(h, out, isinstance(out, Inventory))

    def _step_impl(self, state, received):
        decided = sorted(
            (st for st, _ in received if st.terminal),
            key=lambda st: repr(st.output),
        )
        if decided:
            return CountingState(state.history, decided[0].output, True)
        return super()._step_impl(state, received)


ALGORITHMS = {"stabilizing": StabilizingCounting, "terminating": TerminatingCounting}
