"""Network model and round-synchronous execution engine.

A trace is a finite prefix of a 1-interval-connected dynamic network: a
fixed set of processes ``1..n``, an input assignment with exactly one
leader, and one connected multigraph snapshot per round.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Iterator, Mapping, Protocol


class ModelError(ValueError):
    """Base class for invalid model objects."""


class MalformedSnapshotError(ModelError):
    pass


class TraceValidationError(ModelError):
    pass


class ExecutionError(RuntimeError):
    def __init__(self, round_index: int, process: int, cause: BaseException):
        super().__init__(f"round {round_index}, process {process}: {cause}")
        self.round_index = round_index
        self.process = process
        self.cause = cause


@dataclass(frozen=True, order=True)
class ProcessInput:
    leader: bool
    value: Hashable = "x"

    def __repr__(self) -> str:
        return f"({'L' if self.leader else 'N'},{self.value!r})"

    def sort_key(self) -> tuple:
        # leader first, then by value; repr keeps mixed value types comparable
        return (not self.leader, type(self.value).__name__, repr(self.value))


class _UnknownType:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Unknown"

    def __reduce__(self):
        return (_UnknownType, ())


Unknown = _UnknownType()


class Inventory(Mapping):
    """Immutable multiset of process inputs. Zero multiplicities are dropped."""

    __slots__ = ("_counts", "_hash")

    def __init__(self, counts: Mapping[ProcessInput, int] | Iterable[ProcessInput] = ()):
        if isinstance(counts, Mapping):
            items = counts.items()
        else:
            items = Counter(counts).items()
        data = {}
        for key, mult in items:
            mult = int(mult)
            if mult < 0:
                raise ValueError(f"negative multiplicity for {key!r}")
            if mult:
                data[key] = mult
        self._counts = data
        self._hash = None

    def __getitem__(self, key):
        return self._counts[key]

    def __iter__(self) -> Iterator[ProcessInput]:
        return iter(self._counts)

    def __len__(self) -> int:
        return len(self._counts)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._counts.items()))
        return self._hash

    def __eq__(self, other) -> bool:
        if isinstance(other, Inventory):
            return self._counts == other._counts
        if isinstance(other, Mapping):
            return self._counts == {k: v for k, v in other.items() if v}
        return NotImplemented

    @property
    def total(self) -> int:
        return sum(self._counts.values())

    def __repr__(self) -> str:
        body = ", ".join(
            f"{k!r}: {v}" for k, v in sorted(self._counts.items(), key=lambda kv: kv[0].sort_key())
        )
        return f"Inventory({{{body}}})"


@dataclass(frozen=True)
class MultigraphSnapshot:
    """One round's topology. ``edges`` maps normalized pairs ``(u, v)``,
    ``u <= v``, to positive multiplicities; ``(u, u)`` is a self-loop."""

    n: int
    edges: Mapping[tuple[int, int], int]

    def __post_init__(self):
        if self.n < 1:
            raise MalformedSnapshotError(f"n must be positive, got {self.n}")
        norm: dict[tuple[int, int], int] = {}
        for (u, v), mult in dict(self.edges).items():
            if not (1 <= u <= self.n and 1 <= v <= self.n):
                raise MalformedSnapshotError(f"endpoint out of range in edge ({u}, {v}) for n={self.n}")
            if int(mult) < 1:
                raise MalformedSnapshotError(f"edge ({u}, {v}) has non-positive multiplicity {mult}")
            key = (u, v) if u <= v else (v, u)
            norm[key] = norm.get(key, 0) + int(mult)
        object.__setattr__(self, "edges", dict(sorted(norm.items())))

    @classmethod
    def from_list(cls, n: int, edges: Iterable[tuple[int, int] | tuple[int, int, int]]) -> "MultigraphSnapshot":
        acc: dict[tuple[int, int], int] = {}
        for e in edges:
            u, v = e[0], e[1]
            mult = e[2] if len(e) > 2 else 1
            if not (1 <= u <= n and 1 <= v <= n):
                raise MalformedSnapshotError(f"endpoint out of range in edge ({u}, {v}) for n={n}")
            key = (u, v) if u <= v else (v, u)
            acc[key] = acc.get(key, 0) + mult
        return cls(n, acc)

    def multiplicity(self, u: int, v: int) -> int:
        return self.edges.get((u, v) if u <= v else (v, u), 0)

    def incident(self) -> dict[int, list[tuple[int, int]]]:
        """Per-process list of ``(neighbor, copies received)``."""
        out: dict[int, list[tuple[int, int]]] = {p: [] for p in range(1, self.n + 1)}
        for (u, v), m in self.edges.items():
            if u == v:
                out[u].append((u, m))
            else:
                out[u].append((v, m))
                out[v].append((u, m))
        return out

    def as_list(self) -> list[list[int]]:
        return [[u, v, m] for (u, v), m in self.edges.items()]

    def __hash__(self) -> int:
        return hash((self.n, tuple(self.edges.items())))


def validate_connectivity(s: MultigraphSnapshot) -> bool:
    """True iff the simple graph left after dropping loops and multiplicities
    is connected on all ``n`` vertices."""
    for (u, v) in s.edges:
        if not (1 <= u <= s.n and 1 <= v <= s.n):
            raise MalformedSnapshotError(f"endpoint out of range in edge ({u}, {v})")
    if s.n == 1:
        return True
    adj: dict[int, set[int]] = {p: set() for p in range(1, s.n + 1)}
    for (u, v) in s.edges:
        if u != v:
            adj[u].add(v)
            adj[v].add(u)
    seen = {1}
    stack = [1]
    while stack:
        p = stack.pop()
        for q in adj[p]:
            if q not in seen:
                seen.add(q)
                stack.append(q)
    return len(seen) == s.n


def inventory(assignment: Mapping[int, ProcessInput]) -> Inventory:
    return Inventory(Counter(assignment.values()))


@dataclass(frozen=True)
class DynamicNetworkTrace:
    n: int
    assignment: Mapping[int, ProcessInput]
    snapshots: tuple[MultigraphSnapshot, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "assignment", dict(self.assignment))
        object.__setattr__(self, "snapshots", tuple(self.snapshots))
        self.validate()

    def validate(self) -> None:
        if self.n < 1:
            raise TraceValidationError("n must be positive")
        if sorted(self.assignment) != list(range(1, self.n + 1)):
            raise TraceValidationError("assignment must cover exactly processes 1..n")
        leaders = [p for p, x in self.assignment.items() if x.leader]
        if len(leaders) != 1:
            raise TraceValidationError(f"expected exactly one leader, found {len(leaders)}")
        for i, s in enumerate(self.snapshots, start=1):
            if s.n != self.n:
                raise TraceValidationError(f"round {i}: snapshot has n={s.n}, trace has n={self.n}")
            if not validate_connectivity(s):
                raise TraceValidationError(f"round {i}: snapshot is not connected")

    @property
    def rounds(self) -> int:
        return len(self.snapshots)

    @property
    def leader(self) -> int:
        return next(p for p, x in self.assignment.items() if x.leader)

    def snapshot(self, i: int) -> MultigraphSnapshot:
        """Topology of round ``i`` (1-based)."""
        return self.snapshots[i - 1]

    def relabel(self, perm: Mapping[int, int]) -> "DynamicNetworkTrace":
        """Rename process ``p`` to ``perm[p]`` everywhere."""
        return DynamicNetworkTrace(
            self.n,
            {perm[p]: x for p, x in self.assignment.items()},
            tuple(
                MultigraphSnapshot.from_list(self.n, [(perm[u], perm[v], m) for (u, v), m in s.edges.items()])
                for s in self.snapshots
            ),
            name=self.name,
        )

    def truncated(self, rounds: int) -> "DynamicNetworkTrace":
        return DynamicNetworkTrace(self.n, self.assignment, self.snapshots[:rounds], name=self.name)

    # JSON trace format: 1-based ids, loops as [u, u, mult]
    def to_json(self) -> dict:
        return {
            "n": self.n,
            "inputs": [
                {"leader": self.assignment[p].leader, "value": self.assignment[p].value}
                for p in range(1, self.n + 1)
            ],
            "rounds": [s.as_list() for s in self.snapshots],
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any], name: str = "") -> "DynamicNetworkTrace":
        try:
            n = int(data["n"])
            inputs = data["inputs"]
            rounds = data["rounds"]
        except (KeyError, TypeError, ValueError) as exc:
            raise TraceValidationError(f"malformed trace document: {exc}") from exc
        if len(inputs) != n:
            raise TraceValidationError(f"expected {n} inputs, got {len(inputs)}")
        assignment = {}
        for p, item in enumerate(inputs, start=1):
            if not isinstance(item, Mapping) or "leader" not in item:
                raise TraceValidationError(f"input {p} is malformed")
            assignment[p] = ProcessInput(bool(item["leader"]), item.get("value", "x"))
        snaps = []
        for i, edges in enumerate(rounds, start=1):
            try:
                triples = [(int(e[0]), int(e[1]), int(e[2]) if len(e) > 2 else 1) for e in edges]
            except (TypeError, ValueError, IndexError) as exc:
                raise TraceValidationError(f"round {i}: malformed edge list") from exc
            snaps.append(MultigraphSnapshot.from_list(n, triples))
        return cls(n, assignment, tuple(snaps), name=name)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def loads(cls, text: str, name: str = "") -> "DynamicNetworkTrace":
        return cls.from_json(json.loads(text), name=name)


class LocalAlgorithm(Protocol):
    def init(self, x: ProcessInput) -> Hashable: ...

    def step(self, state: Hashable, received: Counter) -> Hashable: ...

    def output(self, state: Hashable) -> Any: ...

    def is_terminal(self, state: Hashable) -> bool: ...


@dataclass(frozen=True)
class ExecutionResult:
    """``outputs[i][p]`` is process ``p``'s output after round ``i`` (round 0
    is the initial state). ``termination_round`` is None when some process had
    not terminated by the end of the trace."""

    outputs: tuple[Mapping[int, Any], ...]
    terminal: tuple[frozenset[int], ...]
    stabilization_round: int
    termination_round: int | None
    delivered: tuple[int, ...]
    final_states: Mapping[int, Any]

    @property
    def rounds(self) -> int:
        return len(self.outputs) - 1

    @property
    def terminated(self) -> bool:
        return self.termination_round is not None

    def final_outputs(self) -> Mapping[int, Any]:
        return self.outputs[-1]


def _stabilization_round(outputs: list[dict[int, Any]]) -> int:
    last = outputs[-1]
    r = len(outputs) - 1
    while r > 0 and outputs[r - 1] == last:
        r -= 1
    return r


def run_execution(trace: DynamicNetworkTrace, algorithm: LocalAlgorithm) -> ExecutionResult:
    """Run ``algorithm`` on every process for rounds ``1..T`` of ``trace``.

    In round ``i`` each process receives, per incident link, one copy of its
    neighbor's round ``i-1`` state (a self-loop of multiplicity ``m`` delivers
    ``m`` copies of the process's own state). Terminal states are frozen.
    Stabilization is measured relative to the end of the trace.
    """
    trace.validate()
    procs = range(1, trace.n + 1)
    states: dict[int, Any] = {}
    for p in procs:
        try:
            states[p] = algorithm.init(trace.assignment[p])
        except Exception as exc:  # noqa: BLE001 - rewrapped with location
            raise ExecutionError(0, p, exc) from exc
    outputs = [{p: algorithm.output(states[p]) for p in procs}]
    terminal = [frozenset(p for p in procs if algorithm.is_terminal(states[p]))]
    delivered = []
    for i, snap in enumerate(trace.snapshots, start=1):
        received: dict[int, Counter] = {p: Counter() for p in procs}
        total = 0
        for (u, v), m in snap.edges.items():
            if u == v:
                received[u][states[u]] += m
                total += m
            else:
                received[u][states[v]] += m
                received[v][states[u]] += m
                total += 2 * m
        delivered.append(total)
        new_states = {}
        for p in procs:
            if p in terminal[-1]:
                new_states[p] = states[p]
                continue
            try:
                new_states[p] = algorithm.step(states[p], received[p])
            except Exception as exc:  # noqa: BLE001
                raise ExecutionError(i, p, exc) from exc
        states = new_states
        outputs.append({p: algorithm.output(states[p]) for p in procs})
        terminal.append(frozenset(p for p in procs if algorithm.is_terminal(states[p])))

    termination_round = next((i for i, t in enumerate(terminal) if len(t) == trace.n), None)
    return ExecutionResult(
        outputs=tuple(outputs),
        terminal=tuple(terminal),
        stabilization_round=_stabilization_round(outputs),
        termination_round=termination_round,
        delivered=tuple(delivered),
        final_states=states,
    )


def multi_aggregate(x: ProcessInput, inv: Inventory, signature: Callable[[ProcessInput, Inventory], Any]) -> Any:
    """Answer a multi-aggregation problem from a full inventory."""
    return signature(x, inv)


class Echo:
    """Trivial local algorithm: state is the input, never terminal."""

    name = "echo"

    def init(self, x):
        return x

    def step(self, state, received):
        return state

    def output(self, state):
        return state

    def is_terminal(self, state):
        return False
