"""Command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import corpus
from .counting import ALGORITHMS, terminating_run
from .dot import ground_truth_to_dot, view_to_dot
from .generators import GeneratorSpec, ParameterError
from .history import build_ground_truth, canonical_form
from .model import DynamicNetworkTrace, Inventory, ModelError, inventory, run_execution
from .oracle import ground_truth_problems, leader_histories_match, verify_counting_run

CORPUS_ENV = "ANONDYN_CORPUS_DIR"
CSV_COLUMNS = ["family", "n", "m", "seed", "algorithm", "stabilization_round", "termination_round", "correct"]


class UsageError(Exception):
    pass


def _fmt(out) -> str:
    if isinstance(out, Inventory):
        return json.dumps({repr(k): v for k, v in sorted(out.items(), key=lambda kv: kv[0].sort_key())})
    return repr(out)


def load_trace(path: str) -> DynamicNetworkTrace:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    try:
        return DynamicNetworkTrace.loads(text, name=Path(path).stem)
    except (ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"invalid trace {path}: {exc}") from exc


def _values(text: str | None) -> tuple:
    return tuple(v for v in text.split(",") if v) if text else ("x",)


def cmd_generate(args) -> int:
    spec = GeneratorSpec(
        family=args.family,
        n=args.n,
        m=args.m,
        rounds=args.rounds,
        seed=args.seed,
        extra_edges=args.extra_edges,
        multi_prob=args.multi_prob,
        values=_values(args.values),
    )
    try:
        trace = spec.build()
    except (ParameterError, ModelError) as exc:
        raise UsageError(str(exc)) from exc
    text = trace.dumps() + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_run(args) -> int:
    trace = load_trace(args.trace)
    algorithm = ALGORITHMS[args.alg]()
    result = run_execution(trace, algorithm)
    truth = inventory(trace.assignment)
    final = result.final_outputs()
    summary = {
        "trace": trace.name,
        "n": trace.n,
        "rounds": trace.rounds,
        "algorithm": args.alg,
        "stabilization_round": result.stabilization_round,
        "termination_round": result.termination_round,
        "bound": (2 * trace.n - 2) if args.alg == "stabilizing" else (3 * trace.n - 2),
        "correct": all(o == truth for o in final.values()),
        "outputs": {str(p): _fmt(o) for p, o in final.items()},
    }
    if args.json:
        print(json.dumps(summary, indent=2))
    else:
        print(f"trace {trace.name or args.trace}: n={trace.n}, rounds={trace.rounds}, algorithm={args.alg}")
        print(f"stabilization round: {result.stabilization_round} (bound {2 * trace.n - 2})")
        term = result.termination_round
        print(f"termination round: {term if term is not None else f'none within {trace.rounds} rounds'}")
        print(f"leader output: {_fmt(final[trace.leader])}")
        print(f"correct: {summary['correct']}")
    leader_view = result.final_states[trace.leader].history
    if args.dot:
        Path(args.dot).write_text(view_to_dot(leader_view))
    if args.ground_truth:
        Path(args.ground_truth).write_text(ground_truth_to_dot(build_ground_truth(trace)))
    if args.events:
        events = []

        def hook(event, run=None, **data):
            rec = {"event": event}
            for k, v in data.items():
                if hasattr(v, "key") and hasattr(v, "level"):
                    rec[k] = {"level": v.level, "node": v.key.hex()[:12]}
                elif isinstance(v, (int, bool, str)) or v is None:
                    rec[k] = v
                elif isinstance(v, frozenset):
                    rec[k] = sorted(f"L{h.level}:{h.key.hex()[:12]}" for h in v)
            events.append(rec)

        terminating_run(leader_view, hook)
        with open(args.events, "w") as fh:
            for rec in events:
                fh.write(json.dumps(rec) + "\n")
    return 0


def _corpus_from_dir(path: Path):
    files = sorted(path.glob("*.json"))
    if not files:
        raise UsageError(f"no *.json traces in {path}")
    for f in files:
        yield "file", load_trace(str(f))


def _verify_traces(items, check_tree: bool, audit: bool = False) -> dict:
    reports = []
    for family, trace in items:
        entry = {"trace": trace.name, "family": family, "n": trace.n, "problems": [], "runs": []}
        if check_tree:
            entry["problems"] = ground_truth_problems(build_ground_truth(trace), trace)
        for name, cls in ALGORITHMS.items():
            entry["runs"].append(verify_counting_run(trace, cls(), family=family, audit=audit))
        reports.append(entry)
    failures = sum(len(e["problems"]) + sum(len(r["violations"]) for r in e["runs"]) for e in reports)
    return {"traces": len(reports), "failures": failures, "reports": reports}


def _verify_lower_bound(family: str, n: int | None, m: int | None) -> dict:
    checks = []
    if family == "gn":
        if n is None or n < 4:
            raise UsageError("--lower-bound gn needs --n >= 4")
        a = GeneratorSpec("gn", n, rounds=2 * n - 4).build()
        b = GeneratorSpec("gn", n + 1, rounds=2 * n - 4).build()
        equal_until, differ_at = 2 * n - 5, 2 * n - 4
    elif family == "cycle-to-path":
        if m is None or m < 1:
            raise UsageError("--lower-bound cycle-to-path needs --m >= 1")
        a = GeneratorSpec("cycle-to-path", 2 * m, m=m, rounds=3 * m - 2).build()
        b = GeneratorSpec("cycle-to-path", 2 * m + 1, m=m, rounds=3 * m - 2).build()
        equal_until, differ_at = 3 * m - 2, None
    else:
        raise UsageError(f"unknown lower-bound family {family!r}")
    ga, gb = build_ground_truth(a), build_ground_truth(b)
    for t in range(0, a.rounds + 1):
        iso = canonical_form(ga.history(a.leader, t)) == canonical_form(gb.history(b.leader, t))
        raw = leader_histories_match(a, b, t)
        expected = t <= equal_until
        checks.append({"round": t, "isomorphic": iso, "raw_states_equal": raw, "expected": expected})
    ok = all(c["isomorphic"] == c["expected"] == c["raw_states_equal"] for c in checks)
    return {"family": family, "n": n, "m": m, "equal_through": equal_until, "differ_at": differ_at, "ok": ok, "checks": checks}


def cmd_verify(args) -> int:
    if args.lower_bound:
        report = _verify_lower_bound(args.lower_bound, args.n, args.m)
        failed = not report["ok"]
    elif args.trace:
        report = _verify_traces([("file", load_trace(args.trace))], check_tree=True, audit=args.audit)
        failed = report["failures"] > 0
    else:
        source = args.corpus
        if source is None or source == "":
            source = os.environ.get(CORPUS_ENV, "default")
        if source == "default":
            items = list(corpus.counting_corpus(max_n=args.max_n))
        else:
            items = list(_corpus_from_dir(Path(source)))
        report = _verify_traces(items, check_tree=args.tree, audit=args.audit)
        failed = report["failures"] > 0
    text = json.dumps(report, indent=2, default=str)
    if args.report:
        Path(args.report).write_text(text + "\n")
    else:
        summary = {k: v for k, v in report.items() if k not in ("reports", "checks")}
        print(json.dumps(summary, indent=2))
    return 1 if failed else 0


@dataclass
class ExperimentConfig:
    family: str
    n_values: list[int]
    m_values: list[int | None] = field(default_factory=lambda: [None])
    seeds: list[int] = field(default_factory=lambda: [0])
    algorithms: list[str] = field(default_factory=lambda: ["stabilizing", "terminating"])
    round_cap: int | None = None
    extra_edges: int = 2
    multi_prob: float = 0.0
    values: tuple = ("x",)

    def validate(self) -> None:
        if self.family not in GeneratorSpec.FAMILIES:
            raise UsageError(f"unknown family {self.family!r}")
        if not self.n_values or not self.seeds or not self.algorithms or not self.m_values:
            raise UsageError("experiment grid is empty")
        if any(a not in ALGORITHMS for a in self.algorithms):
            raise UsageError(f"unknown algorithm in {self.algorithms}")
        if self.round_cap is not None and self.round_cap <= 0:
            raise UsageError("round cap must be positive")

    def cells(self):
        for n in self.n_values:
            for m in self.m_values:
                if self.family == "cycle-to-path":
                    m_eff = m if m is not None else n // 2
                    if not 1 <= m_eff < n:
                        continue
                else:
                    m_eff = None
                seeds = self.seeds if self.family == "random" else self.seeds[:1]
                for seed in seeds:
                    yield n, m_eff, seed


def _rows(family: str, trace: DynamicNetworkTrace, m, seed, algorithms) -> list[dict]:
    truth = inventory(trace.assignment)
    rows = []
    for alg in algorithms:
        result = run_execution(trace, ALGORITHMS[alg]())
        rows.append({
            "family": family,
            "n": trace.n,
            "m": "" if m is None else m,
            "seed": "" if seed is None else seed,
            "algorithm": alg,
            "stabilization_round": result.stabilization_round,
            "termination_round": "" if result.termination_round is None else result.termination_round,
            "correct": all(o == truth for o in result.final_outputs().values()),
        })
    return rows


def run_experiment(cfg: ExperimentConfig) -> list[dict]:
    cfg.validate()
    rows = []
    for n, m, seed in cfg.cells():
        rounds = cfg.round_cap if cfg.round_cap is not None else 3 * n - 2 + 2
        spec = GeneratorSpec(cfg.family, n, m=m, rounds=rounds, seed=seed, extra_edges=cfg.extra_edges,
                             multi_prob=cfg.multi_prob, values=tuple(cfg.values))
        try:
            trace = spec.build()
        except (ParameterError, ModelError) as exc:
            raise UsageError(str(exc)) from exc
        rows.extend(_rows(cfg.family, trace, m, seed if cfg.family == "random" else None, cfg.algorithms))
    return rows


def run_corpus_experiment(algorithms, max_n: int = 16) -> list[dict]:
    """One row per (corpus trace, algorithm)."""
    rows = []
    for family, trace in corpus.counting_corpus(max_n=max_n):
        parts = trace.name.split("-")
        m = int(parts[2]) if family == "cycle-to-path" else None
        seed = int(parts[2][1:]) if family == "random" else None
        rows.extend(_rows(family, trace, m, seed, algorithms))
    return rows


def _int_range(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def cmd_experiment(args) -> int:
    algorithms = ["stabilizing", "terminating"] if args.alg == "both" else [args.alg]
    if args.corpus:
        rows = run_corpus_experiment(algorithms, max_n=args.max_n)
        return _write_rows(rows, args)
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot load config: {exc}") from exc
        try:
            cfg = ExperimentConfig(**data)
        except TypeError as exc:
            raise UsageError(f"bad config: {exc}") from exc
    else:
        if not args.family:
            raise UsageError("--family or --config is required")
        try:
            cfg = ExperimentConfig(
                family=args.family,
                n_values=_int_range(args.n_range),
                m_values=_int_range(args.m) if args.m else [None],
                seeds=list(range(args.seeds)),
                algorithms=algorithms,
                round_cap=args.rounds,
                extra_edges=args.extra_edges,
                multi_prob=args.multi_prob,
                values=_values(args.values),
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    return _write_rows(run_experiment(cfg), args)


def _write_rows(rows: list[dict], args) -> int:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    if args.summary:
        for line in summarize(rows):
            print(line, file=sys.stderr)
    return 0 if all(r["correct"] for r in rows) else 1


def summarize(rows: list[dict]) -> list[str]:
    """Per (algorithm, n): worst observed round next to the proven bound."""
    worst: dict[tuple[str, int], int] = {}
    for r in rows:
        col = "termination_round" if r["algorithm"] == "terminating" else "stabilization_round"
        if r[col] == "":
            continue
        k = (r["algorithm"], int(r["n"]))
        worst[k] = max(worst.get(k, 0), int(r[col]))
    lines = []
    for (alg, n), w in sorted(worst.items()):
        bound = 3 * n - 2 if alg == "terminating" else 2 * n - 2
        lines.append(f"{alg} n={n}: max round {w} (bound {bound})")
    return lines


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anondyn", description="History-tree counting in anonymous dynamic networks")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a trace file")
    g.add_argument("--family", required=True, choices=["gn", "cycle-to-path", "complete", "random"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int)
    g.add_argument("--rounds", type=int, help="number of rounds (default 3n)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--extra-edges", type=int, default=2)
    g.add_argument("--multi-prob", type=float, default=0.0)
    g.add_argument("--values", help="comma-separated non-leader input values")
    g.add_argument("-o", "--out")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="simulate a counting algorithm on a trace")
    r.add_argument("trace")
    r.add_argument("--alg", choices=sorted(ALGORITHMS), default="terminating")
    r.add_argument("--dot", help="write the leader's final history as DOT")
    r.add_argument("--ground-truth", help="write the full history tree with anonymities as DOT")
    r.add_argument("--events", help="write the leader's final terminating-count events as JSON lines")
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="check traces against the brute-force oracle")
    v.add_argument("trace", nargs="?")
    v.add_argument("--corpus", nargs="?", const="", help=f"'default', a directory of traces, or empty for ${CORPUS_ENV}")
    v.add_argument("--max-n", type=int, default=16)
    v.add_argument("--tree", action="store_true", help="also verify ground truths on the corpus")
    v.add_argument("--audit", action="store_true", help="also check internal guesses against true anonymities")
    v.add_argument("--lower-bound", choices=["gn", "cycle-to-path"])
    v.add_argument("--n", type=int)
    v.add_argument("--m", type=int)
    v.add_argument("--report", help="write the full JSON report here")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("experiment", help="sweep a family and write a CSV")
    e.add_argument("--config", help="JSON experiment config")
    e.add_argument("--corpus", action="store_true", help="run the built-in corpus instead of a grid")
    e.add_argument("--max-n", type=int, default=16, help="largest n taken from the corpus")
    e.add_argument("--family", choices=["gn", "cycle-to-path", "complete", "random"])
    e.add_argument("--n-range", default="4..8", help="e.g. 4..16 or 4,6,8")
    e.add_argument("--m")
    e.add_argument("--seeds", type=int, default=1)
    e.add_argument("--alg", choices=["stabilizing", "terminating", "both"], default="both")
    e.add_argument("--rounds", type=int)
    e.add_argument("--extra-edges", type=int, default=2)
    e.add_argument("--multi-prob", type=float, default=0.0)
    e.add_argument("--values")
    e.add_argument("--summary", action="store_true", help="print worst rounds per n to stderr")
    e.add_argument("-o", "--out")
    e.set_defaults(func=cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify" and not (args.trace or args.lower_bound or args.corpus is not None):
        parser.error("verify needs a trace, --corpus or --lower-bound")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
