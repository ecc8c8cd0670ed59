"""End-to-end acceptance checks; each prints one PASS/FAIL line."""

import csv
import re

import pytest

from anondyn import corpus
from anondyn.cli import main
from anondyn.counting import StabilizingCounting, TerminatingCounting, stabilizing_count, terminating_count
from anondyn.generators import gen_cycle_to_path, gen_lower_bound_gn, gen_static_complete, search_naive_failure
from anondyn.history import build_ground_truth, canonical_form, view_of
from anondyn.model import Inventory, Unknown, inventory, run_execution
from anondyn.oracle import audit_view, brute_force_partitions

from conftest import ACCEPTANCE_LINES


def report(number, title, ok, detail):
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def counting_runs():
    runs = []
    for family, tr in corpus.counting_corpus(max_n=16):
        runs.append((family, tr, run_execution(tr, StabilizingCounting()), run_execution(tr, TerminatingCounting())))
    return runs


def test_criterion_1_partitions_match_brute_force():
    checked = mismatches = traces = 0
    for _, tr in corpus.oracle_corpus(rounds=12):
        traces += 1
        gt = build_ground_truth(tr)
        brute = brute_force_partitions(tr, 12)
        for t in range(0, 13):
            checked += 1
            mismatches += gt.partition(t) != brute[t]
    report(1, "history-tree partitions vs brute force", mismatches == 0 and traces >= 200,
           f"{traces} traces, {checked} levels, {mismatches} mismatches")


def test_criterion_2_stabilizing_bound(counting_runs):
    bad = []
    worst = 0
    for _, tr, stab, _ in counting_runs:
        truth = inventory(tr.assignment)
        for i in range(2 * tr.n - 2, tr.rounds + 1):
            for p, out in stab.outputs[i].items():
                if out != truth:
                    bad.append((tr.name, i, p))
        first_ok = next(i for i in range(tr.rounds + 1) if all(
            o == truth for j in range(i, tr.rounds + 1) for o in stab.outputs[j].values()))
        worst = max(worst, first_ok - (2 * tr.n - 2))
    report(2, "stabilizing output correct from round 2n-2", not bad,
           f"{len(counting_runs)} traces, n in 2..16, {len(bad)} wrong outputs, latest stabilization {worst:+d} vs 2n-2")


def test_criterion_3_terminating_bound(counting_runs):
    wrong, late = [], []
    for _, tr, _, term in counting_runs:
        truth = inventory(tr.assignment)
        for i, done in enumerate(term.terminal):
            wrong += [(tr.name, i, p) for p in done if term.outputs[i][p] != truth]
        bound = 3 * tr.n - 2
        if len(term.terminal[bound]) != tr.n or any(o != truth for o in term.outputs[bound].values()):
            late.append(tr.name)
    report(3, "terminating by 3n-2, never wrong", not wrong and not late,
           f"{len(counting_runs)} traces, {len(wrong)} wrong terminations, {len(late)} late")


def test_criterion_4_gn_lower_bound():
    problems = []
    for n in range(4, 13):
        a = build_ground_truth(gen_lower_bound_gn(n, 2 * n - 4))
        b = build_ground_truth(gen_lower_bound_gn(n + 1, 2 * n - 4))
        for t in range(0, 2 * n - 4):
            if canonical_form(a.history(1, t)) != canonical_form(b.history(1, t)):
                problems.append(f"G_{n} differs at {t}")
            for h in a.level(t):
                if terminating_count(view_of(a, h)) is not Unknown:
                    problems.append(f"G_{n} terminates at {t}")
        if canonical_form(a.history(1, 2 * n - 4)) == canonical_form(b.history(1, 2 * n - 4)):
            problems.append(f"G_{n} still equal at {2 * n - 4}")
    report(4, "G_n vs G_n+1 leader histories and no early termination", not problems,
           f"n in 4..12, {len(problems)} problems {problems[:3]}")


def test_criterion_5_cycle_to_path():
    problems = []
    for m in range(2, 7):
        a = build_ground_truth(gen_cycle_to_path(2 * m, m, 3 * m - 2))
        b = build_ground_truth(gen_cycle_to_path(2 * m + 1, m, 3 * m - 2))
        for t in range(0, 3 * m - 1):
            if canonical_form(a.history(1, t)) != canonical_form(b.history(1, t)):
                problems.append((m, t))
    report(5, "cycle-to-path leader histories equal through 3m-2", not problems,
           f"m in 2..6, {len(problems)} differing rounds")


def test_criterion_6_complete_graph_never_branches():
    branching = checked = 0
    for n in range(2, 11):
        for scheme in (("a", "b"), ("a", "b", "c")):
            gt = build_ground_truth(gen_static_complete(n, scheme, rounds=2 * n))
            assert len(gt.level(0)) >= 2
            for h, kids in gt.children.items():
                if 0 <= h.level < gt.depth:
                    checked += 1
                    branching += len(kids) != 1
    report(6, "static complete graph: one child per non-root node", branching == 0,
           f"{checked} nodes checked, {branching} branching")


def test_criterion_7_instrumented_invariants():
    kinds = {}
    views = guesses = heads = 0
    worst_locked = 0
    for _, tr in corpus.counting_corpus(max_n=16):
        n = tr.n
        gt = build_ground_truth(tr, depth=3 * n - 2)
        selected = [gt.history(tr.leader, t) for t in range(0, gt.depth + 1)]
        if n <= 8:
            selected += [view_of(gt, h) for t in (2 * n - 2, gt.depth) for h in gt.level(t)]
        for view in selected:
            auditor, _ = audit_view(view, gt.alpha, n)
            views += 1
            guesses += auditor.guesses
            heads += auditor.loop_heads
            worst_locked = max(worst_locked, auditor.max_locked - (n - 1))
            for v in auditor.violations:
                kinds[v["kind"]] = kinds.get(v["kind"], 0) + 1
    report(7, "guess soundness, counted values, loop-head invariants, locked levels", not kinds,
           f"{views} views, {guesses} guesses, {heads} loop heads, violations {kinds or 0}, "
           f"max locked levels {worst_locked:+d} vs n-1")


def test_criterion_8_empirical_worst_case_and_naive_witness(tmp_path, capsys):
    out = tmp_path / "corpus.csv"
    code = main(["experiment", "--corpus", "--alg", "terminating", "--summary", "-o", str(out)])
    summary = capsys.readouterr().err.splitlines()
    rows = list(csv.DictReader(out.open()))
    over = []
    worst = {}
    for line in summary:
        n, w, bound = map(int, re.match(r"terminating n=(\d+): max round (\d+) \(bound (\d+)\)", line).groups())
        worst[n] = w
        if w > bound:
            over.append(n)
    missing = [r for r in rows if r["termination_round"] == ""]
    witness = search_naive_failure(seed=0, n_range=(3, 8), round_budget=10_000)
    wit_ok = False
    if witness is not None:
        gt = build_ground_truth(witness.trace)
        out_w = stabilizing_count(gt.history(witness.process, witness.round))
        wit_ok = (isinstance(out_w, Inventory) and out_w.total != witness.trace.n
                  and witness.round < 2 * witness.trace.n - 2 and witness.trace.n <= 8)
    ok = code == 0 and not over and not missing and wit_ok
    wdesc = (f"witness n={witness.trace.n} round {witness.round} total {witness.output.total}"
             if witness else "no witness")
    report(8, "empirical worst termination <= 3n-2 and naive-failure witness", ok,
           f"max termination round per n {dict(sorted(worst.items()))}; {wdesc}")
