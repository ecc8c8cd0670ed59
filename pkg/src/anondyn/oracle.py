"""Brute-force references for history trees and counting runs.

Nothing here uses history-tree node identities: indistinguishability is
recomputed from raw process states, where a state is a digest of the
previous state together with the multiset of received states.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from typing import Any

from .counting import isle_of, terminating_run
from .history import GroundTruth, build_ground_truth
from .model import DynamicNetworkTrace, inventory, run_execution


def _digest(*parts: bytes) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        h.update(len(part).to_bytes(4, "big"))
        h.update(part)
    return h.digest()


def message_states(trace: DynamicNetworkTrace, t: int) -> dict[int, bytes]:
    """State of each process after round ``t`` when every process keeps and
    broadcasts its full received-message tree."""
    return all_message_states(trace, t)[t]


def all_message_states(trace: DynamicNetworkTrace, t: int) -> list[dict[int, bytes]]:
    if not 0 <= t <= trace.rounds:
        raise ValueError(f"round {t} outside 0..{trace.rounds}")
    state = {p: _digest(b"input", repr(x).encode()) for p, x in trace.assignment.items()}
    history = [state]
    for i in range(1, t + 1):
        inbox: dict[int, list[bytes]] = {p: [] for p in state}
        for (u, v), m in trace.snapshot(i).edges.items():
            if u == v:
                inbox[u].extend([state[u]] * m)
            else:
                inbox[u].extend([state[v]] * m)
                inbox[v].extend([state[u]] * m)
        state = {p: _digest(b"round", state[p], *sorted(inbox[p])) for p in state}
        history.append(state)
    return history


def _classes(states: dict[int, bytes]) -> frozenset[frozenset[int]]:
    classes: dict[bytes, set[int]] = {}
    for p, s in states.items():
        classes.setdefault(s, set()).add(p)
    return frozenset(frozenset(c) for c in classes.values())


def brute_force_partition(trace: DynamicNetworkTrace, t: int) -> frozenset[frozenset[int]]:
    """Classes of processes indistinguishable at the end of round ``t``."""
    return _classes(message_states(trace, t))


def brute_force_partitions(trace: DynamicNetworkTrace, t: int) -> list[frozenset[frozenset[int]]]:
    """Partitions after rounds ``0..t``."""
    return [_classes(s) for s in all_message_states(trace, t)]


def verify_ground_truth(gt: GroundTruth, trace: DynamicNetworkTrace) -> bool:
    return not ground_truth_problems(gt, trace)


def ground_truth_problems(gt: GroundTruth, trace: DynamicNetworkTrace) -> list[str]:
    """Every discrepancy between ``gt`` and a direct recount from ``trace``."""
    problems: list[str] = []
    procs = set(range(1, trace.n + 1))
    if len(gt.levels) != len(gt.rho):
        return ["levels and representation maps have different lengths"]
    if len(gt.levels[0]) != 1 or gt.levels[0][0].parent is not None:
        problems.append("level -1 must contain exactly the root")
    root = gt.levels[0][0]
    if set(gt.rho[0]) != procs or any(h != root for h in gt.rho[0].values()):
        problems.append("rho_-1 must map every process to the root")
    if gt.alpha.get(root) != trace.n:
        problems.append("root anonymity differs from n")
    depth = len(gt.levels) - 2
    if depth > trace.rounds:
        return problems + ["history tree is deeper than the trace"]
    partitions = brute_force_partitions(trace, depth)

    for idx in range(1, len(gt.levels)):
        t = idx - 1
        level = gt.levels[idx]
        level_set = set(level)
        rho = gt.rho[idx]
        if set(rho) != procs:
            problems.append(f"L{t}: representation map is not total")
            continue
        pre: dict[Any, set[int]] = {}
        for p, h in rho.items():
            if h not in level_set:
                problems.append(f"L{t}: process {p} mapped outside its level")
            pre.setdefault(h, set()).add(p)
        for h in level:
            if h not in pre:
                problems.append(f"L{t}: node {h!r} represents no process")
            elif gt.alpha.get(h) != len(pre[h]):
                problems.append(f"L{t}: anonymity of {h!r} is {gt.alpha.get(h)}, recount {len(pre[h])}")
            if h.level != t:
                problems.append(f"L{t}: node {h!r} reports level {h.level}")
        if frozenset(frozenset(c) for c in pre.values()) != partitions[t]:
            problems.append(f"L{t}: partition differs from brute force")

        prev_rho = gt.rho[idx - 1]
        prev_level = set(gt.levels[idx - 1])
        labels = set()
        for h, ps in pre.items():
            if h.parent not in prev_level:
                problems.append(f"L{t}: parent of {h!r} is not in the previous level")
            if any(prev_rho[p] != h.parent for p in ps):
                problems.append(f"L{t}: {h!r} does not refine its parent's class")
            if t == 0:
                if any(trace.assignment[p] != h.label for p in ps):
                    problems.append(f"L0: label of {h!r} differs from its processes' input")
                if h.label in labels:
                    problems.append(f"L0: duplicate label {h.label!r}")
                labels.add(h.label)
                if h.red:
                    problems.append(f"L0: {h!r} has red edges")
                continue
            if h.label != h.parent.label:
                problems.append(f"L{t}: {h!r} has a label different from its parent")
            snap = trace.snapshot(t)
            for p in ps:
                obs: Counter = Counter()
                for (u, v), m in snap.edges.items():
                    if u == p:
                        obs[prev_rho[v]] += m
                    elif v == p:
                        obs[prev_rho[u]] += m
                if dict(obs) != dict(h.red):
                    problems.append(f"L{t}: red edges of {h!r} differ from the links of process {p}")
                    break
        for h in gt.levels[idx - 1]:
            kids = [c for c in level if c.parent == h]
            if gt.alpha.get(h) != sum(gt.alpha.get(c, 0) for c in kids):
                problems.append(f"L{t - 1}: anonymity of {h!r} is not the sum over its children")
    return problems


class RunAuditor:
    """Hook for ``terminating_run`` that checks guesses and counted values
    against true anonymities, and the loop-head invariants: guessed nodes on
    distinct levels, no heavy node, no complete non-trivial isle, and at most
    n-1 locked levels."""

    def __init__(self, alpha, n: int):
        self.alpha = alpha
        self.n = n
        self.violations: list[dict] = []
        self.guesses = 0
        self.loop_heads = 0
        self.max_locked = 0

    def flag(self, kind: str, node=None, **extra):
        self.violations.append({"kind": kind, "node": node, **extra})

    def __call__(self, event, run=None, **data):
        st = run.state
        if event == "guess":
            self.guesses += 1
            v = data["node"]
            if data["value"] < self.alpha[v]:
                self.flag("guess-below-anonymity", v, guess=data["value"], alpha=self.alpha[v])
        elif event == "count":
            v = data["node"]
            if data["value"] != self.alpha[v]:
                self.flag("wrong-count", v, value=data["value"], alpha=self.alpha[v], reason=data["reason"])
        elif event == "loop_head":
            self.loop_heads += 1
            levels = [v.level for v in st.guessed]
            if len(levels) != len(set(levels)):
                self.flag("not-well-spread")
            for v in st.guessed:
                if st.heavy(v):
                    self.flag("heavy-at-loop-head", v)
            for s in st.counted:
                isle = isle_of(run.view, st, s)
                if isle is not None and isle.complete and not isle.trivial:
                    self.flag("complete-isle-not-trivial", s)
            locked = len(st.locked_levels())
            self.max_locked = max(self.max_locked, locked)
            if locked > self.n - 1:
                self.flag("too-many-locked-levels", locked=locked)


def audit_view(view, alpha, n: int):
    """Instrumented terminating run on ``view``; returns (auditor, result)."""
    auditor = RunAuditor(alpha, n)
    result = terminating_run(view, auditor)
    for v in result.state.counted:
        if result.state.a[v] != alpha[v]:
            auditor.flag("final-count", v)
    return auditor, result


def verify_counting_run(trace: DynamicNetworkTrace, algorithm, family: str | None = None, audit: bool = False) -> dict:
    """Simulate ``algorithm`` and report every violated guarantee.

    Stabilizing runs must be correct from round 2n-2 on; terminating runs must
    never terminate wrongly and must terminate by 3n-2 (when the trace is
    that long). On the lower-bound family no process may terminate before
    round 2n-4. With ``audit``, a terminating run is also replayed on the
    leader's history of every round and its internal guesses are checked
    against true anonymities.
    """
    result = run_execution(trace, algorithm)
    truth = inventory(trace.assignment)
    n = trace.n
    kind = getattr(algorithm, "name", type(algorithm).__name__)
    violations = []
    for i, outs in enumerate(result.outputs):
        for p, out in outs.items():
            if kind == "stabilizing":
                if i >= 2 * n - 2 and out != truth:
                    violations.append({"round": i, "process": p, "kind": "not-stabilized", "output": repr(out)})
            elif p in result.terminal[i]:
                if out != truth:
                    violations.append({"round": i, "process": p, "kind": "wrong-termination", "output": repr(out)})
                if family == "gn" and i < 2 * n - 4:
                    violations.append({"round": i, "process": p, "kind": "below-lower-bound", "output": repr(out)})
    if kind == "terminating" and trace.rounds >= 3 * n - 2:
        late = [p for p in range(1, n + 1) if p not in result.terminal[3 * n - 2]]
        for p in late:
            violations.append({"round": 3 * n - 2, "process": p, "kind": "not-terminated", "output": repr(result.outputs[3 * n - 2][p])})
    if audit and kind == "terminating":
        gt = build_ground_truth(trace)
        for i in range(0, gt.depth + 1):
            auditor, _ = audit_view(gt.history(trace.leader, i), gt.alpha, n)
            for v in auditor.violations:
                violations.append({"round": i, "process": trace.leader, "kind": v["kind"], "output": repr(v.get("node"))})
    final = result.final_outputs()
    return {
        "trace": trace.name,
        "n": n,
        "algorithm": kind,
        "rounds": trace.rounds,
        "stabilization_round": result.stabilization_round,
        "termination_round": result.termination_round,
        "correct": all(o == truth for o in final.values()),
        "violations": violations,
    }


def leader_histories_match(a: DynamicNetworkTrace, b: DynamicNetworkTrace, t: int) -> bool:
    """Whether the leaders of two traces are indistinguishable after round
    ``t``, decided from raw message states."""
    sa = message_states(a, t)[a.leader]
    sb = message_states(b, t)[b.leader]
    return sa == sb

