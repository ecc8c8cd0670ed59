"""Network families: the lower-bound family, cycle-to-path networks, static
complete graphs and seeded random multigraph sequences."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence

from .model import DynamicNetworkTrace, Inventory, MultigraphSnapshot, ProcessInput


class ParameterError(ValueError):
    pass


def _assignment(n: int, values: Sequence, leader_value="x") -> dict[int, ProcessInput]:
    out = {1: ProcessInput(True, leader_value)}
    for p in range(2, n + 1):
        out[p] = ProcessInput(False, values[(p - 2) % len(values)])
    return out


def _path(n: int) -> list[tuple[int, int, int]]:
    return [(j, j + 1, 1) for j in range(1, n)]


def gen_lower_bound_gn(n: int, rounds: int, value="x") -> DynamicNetworkTrace:
    """Path p_1..p_n, plus the edge {p_{t+1}, p_n} in rounds t <= n-3."""
    if n < 4:
        raise ParameterError(f"lower-bound family needs n >= 4, got {n}")
    if rounds < 0:
        raise ParameterError("rounds must be non-negative")
    snaps = []
    for t in range(1, rounds + 1):
        edges = _path(n)
        if t <= n - 3:
            edges.append((t + 1, n, 1))
        snaps.append(MultigraphSnapshot.from_list(n, edges))
    return DynamicNetworkTrace(n, _assignment(n, [value], value), tuple(snaps), name=f"gn-{n}")


def gen_cycle_to_path(n: int, m: int, rounds: int, value="x") -> DynamicNetworkTrace:
    """Cycle 1..n for rounds < m; from round m on, the edges (m, m+1) and
    (1, n) are replaced by (m, n), giving a path with endpoints 1 and m+1."""
    if not 1 <= m < n:
        raise ParameterError(f"cycle-to-path needs 1 <= m < n, got n={n}, m={m}")
    cycle = _path(n) + [(1, n, 1)]
    path = [e for e in _path(n) if e[0] != m] + [(m, n, 1)]
    snaps = [MultigraphSnapshot.from_list(n, cycle if i < m else path) for i in range(1, rounds + 1)]
    return DynamicNetworkTrace(n, _assignment(n, [value], value), tuple(snaps), name=f"c2p-{n}-{m}")


def gen_static_complete(n: int, input_scheme: Sequence = ("x",), rounds: int = 1, leader_value="x") -> DynamicNetworkTrace:
    """K_n in every round; non-leader inputs cycle through ``input_scheme``."""
    if n < 1:
        raise ParameterError("n must be positive")
    if not input_scheme:
        raise ParameterError("input scheme must not be empty")
    edges = [(u, v, 1) for u in range(1, n + 1) for v in range(u + 1, n + 1)]
    snap = MultigraphSnapshot.from_list(n, edges)
    tag = "".join(str(x) for x in input_scheme)
    return DynamicNetworkTrace(
        n, _assignment(n, list(input_scheme), leader_value), tuple(snap for _ in range(rounds)), name=f"kn-{n}-{tag}"
    )


def _random_tree(n: int, rng: random.Random) -> list[tuple[int, int]]:
    """Uniform labeled tree on 1..n via a random Pruefer sequence."""
    if n == 1:
        return []
    if n == 2:
        return [(1, 2)]
    seq = [rng.randint(1, n) for _ in range(n - 2)]
    degree = [1] * (n + 1)
    for x in seq:
        degree[x] += 1
    edges = []
    for x in seq:
        leaf = next(j for j in range(1, n + 1) if degree[j] == 1)
        edges.append((leaf, x))
        degree[leaf] -= 1
        degree[x] -= 1
    u, v = [j for j in range(1, n + 1) if degree[j] == 1]
    edges.append((u, v))
    return edges


def gen_random_connected(
    n: int,
    rounds: int,
    extra_edge_budget: int = 2,
    loop_and_parallel_prob: float = 0.0,
    seed: int = 0,
    values: Sequence = ("a", "b"),
) -> DynamicNetworkTrace:
    """Per round: a random spanning tree plus up to ``extra_edge_budget``
    random extra links. With probability ``loop_and_parallel_prob`` each
    extra link becomes a self-loop, and each tree link gets an extra
    parallel copy."""
    if n < 1:
        raise ParameterError("n must be positive")
    rng = random.Random(seed)
    assignment = {1: ProcessInput(True, "x")}
    for p in range(2, n + 1):
        assignment[p] = ProcessInput(False, rng.choice(list(values)))
    snaps = []
    for _ in range(rounds):
        edges = [(u, v, 1) for u, v in _random_tree(n, rng)]
        if loop_and_parallel_prob > 0:
            edges = [(u, v, m + (rng.random() < loop_and_parallel_prob)) for u, v, m in edges]
        for _ in range(rng.randint(0, extra_edge_budget)):
            u = rng.randint(1, n)
            if loop_and_parallel_prob > 0 and rng.random() < loop_and_parallel_prob:
                edges.append((u, u, 1))
            elif n > 1:
                v = rng.randint(1, n - 1)
                v = v + 1 if v >= u else v
                edges.append((u, v, 1))
        snaps.append(MultigraphSnapshot.from_list(n, edges))
    return DynamicNetworkTrace(n, assignment, tuple(snaps), name=f"random-{n}-s{seed}")


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    n: int
    m: int | None = None
    rounds: int | None = None
    seed: int = 0
    extra_edges: int = 2
    multi_prob: float = 0.0
    values: tuple = ("x",)

    FAMILIES = ("gn", "cycle-to-path", "complete", "random")

    def build(self) -> DynamicNetworkTrace:
        rounds = self.rounds if self.rounds is not None else 3 * self.n
        if rounds < 0:
            raise ParameterError("rounds must be non-negative")
        if self.family == "gn":
            return gen_lower_bound_gn(self.n, rounds)
        if self.family == "cycle-to-path":
            if self.m is None:
                raise ParameterError("cycle-to-path needs m")
            return gen_cycle_to_path(self.n, self.m, rounds)
        if self.family == "complete":
            return gen_static_complete(self.n, self.values, rounds)
        if self.family == "random":
            values = self.values if self.values != ("x",) else ("a", "b")
            return gen_random_connected(self.n, rounds, self.extra_edges, self.multi_prob, self.seed, values)
        raise ParameterError(f"unknown family {self.family!r}")


@dataclass(frozen=True)
class NaiveFailure:
    """A trace where the stabilizing estimate of some process is wrong."""

    trace: DynamicNetworkTrace
    round: int
    process: int
    output: Inventory
    seed: int = field(default=0)


def search_naive_failure(seed: int = 0, n_range: tuple[int, int] = (3, 8), round_budget: int = 10_000) -> NaiveFailure | None:
    """Random search for a history on which the stabilizing estimate reports
    a total different from n. ``round_budget`` bounds the number of traces
    tried; each trace has 2n-2 rounds and is evaluated at every round before
    the last, so the witness can be replayed up to round 2n-2."""
    from .counting import stabilizing_count
    from .history import build_ground_truth, view_of

    rng = random.Random(seed)
    lo, hi = n_range
    for attempt in range(round_budget):
        n = rng.randint(max(lo, 2), hi)
        s = rng.randrange(1 << 30)
        trace = gen_random_connected(
            n, 2 * n - 2, extra_edge_budget=rng.randint(0, 2), loop_and_parallel_prob=rng.choice([0.0, 0.3]),
            seed=s, values=("x",),
        )
        gt = build_ground_truth(trace)
        for t in range(0, 2 * n - 2):
            for node in gt.level(t):
                out = stabilizing_count(view_of(gt, node))
                if isinstance(out, Inventory) and out.total != n:
                    p = min(p for p, h in gt.rho[t + 1].items() if h == node)
                    return NaiveFailure(trace, t, p, out, seed=s)
    return None
