import dataclasses

import pytest

from anondyn import counting
from anondyn.counting import StabilizingCounting, TerminatingCounting, terminating_run
from anondyn.generators import gen_lower_bound_gn, gen_random_connected, gen_static_complete
from anondyn.history import HNode, build_ground_truth
from anondyn.model import ProcessInput
from anondyn.oracle import (
    audit_view,
    brute_force_partition,
    ground_truth_problems,
    leader_histories_match,
    verify_counting_run,
    verify_ground_truth,
)


def _trace():
    return gen_random_connected(6, 6, extra_edge_budget=2, loop_and_parallel_prob=0.4, seed=17, values=("a", "b"))


def test_partition_at_round_zero_is_by_input():
    tr = _trace()
    by_input = {}
    for p, x in tr.assignment.items():
        by_input.setdefault(x, set()).add(p)
    assert brute_force_partition(tr, 0) == frozenset(frozenset(c) for c in by_input.values())


def test_complete_graph_partition_is_constant():
    tr = gen_static_complete(6, ("a", "b"), 5)
    parts = {brute_force_partition(tr, t) for t in range(6)}
    assert len(parts) == 1


def test_ground_truth_passes():
    tr = _trace()
    assert verify_ground_truth(build_ground_truth(tr), tr)


def _replace_deepest(gt, old, new):
    levels = list(gt.levels)
    levels[-1] = tuple(sorted(new if h == old else h for h in levels[-1]))
    rho = list(gt.rho)
    rho[-1] = {p: new if h == old else h for p, h in rho[-1].items()}
    alpha = dict(gt.alpha)
    alpha[new] = alpha.pop(old)
    return dataclasses.replace(gt, levels=tuple(levels), rho=tuple(rho), alpha=alpha)


def _victim(gt):
    return next(h for h in gt.level(gt.depth) if h.red)


def test_mutated_red_multiplicity_detected():
    tr = _trace()
    gt = build_ground_truth(tr)
    old = _victim(gt)
    red = dict(old.red)
    first = next(iter(red))
    red[first] += 1
    assert not verify_ground_truth(_replace_deepest(gt, old, HNode(old.parent, old.label, red)), tr)


def test_mutated_label_detected():
    tr = _trace()
    gt = build_ground_truth(tr)
    old = _victim(gt)
    new = HNode(old.parent, ProcessInput(old.label.leader, "zz"), old.red)
    assert not verify_ground_truth(_replace_deepest(gt, old, new), tr)


def test_mutated_parent_detected():
    tr = _trace()
    gt = build_ground_truth(tr)
    old = _victim(gt)
    other = next(h for h in gt.level(gt.depth - 1) if h != old.parent)
    assert not verify_ground_truth(_replace_deepest(gt, old, HNode(other, old.label, old.red)), tr)


def test_mutated_anonymity_detected():
    tr = _trace()
    gt = build_ground_truth(tr)
    alpha = dict(gt.alpha)
    alpha[_victim(gt)] += 1
    problems = ground_truth_problems(dataclasses.replace(gt, alpha=alpha), tr)
    assert any("anonymity" in p for p in problems)


def test_clean_runs_have_no_violations():
    tr = gen_random_connected(6, 16, loop_and_parallel_prob=0.3, seed=2)
    for alg in (StabilizingCounting(), TerminatingCounting()):
        report = verify_counting_run(tr, alg, audit=True)
        assert report["violations"] == [] and report["correct"]


def test_gn_report():
    report = verify_counting_run(gen_lower_bound_gn(5, 13), TerminatingCounting(), family="gn")
    assert report["violations"] == []
    assert 2 * 5 - 4 <= report["termination_round"] <= 3 * 5 - 2


def _uncached():
    return TerminatingCounting(count_fn=lambda v: terminating_run(v).output)


def test_undercounting_guess_is_reported(monkeypatch):
    original = counting.compute_guess
    monkeypatch.setattr(counting, "compute_guess", lambda *a: max(1, original(*a) - 1))
    flagged = 0
    for seed in range(30):
        tr = gen_random_connected(2 + seed % 7, 3 * (2 + seed % 7), loop_and_parallel_prob=0.3, seed=seed)
        report = verify_counting_run(tr, _uncached(), audit=True)
        flagged += bool(report["violations"])
    assert flagged > 0


def test_floor_guess_never_undercounts(monkeypatch):
    # a(v) * m <= sum a(u_i) m_i with integer a(v), so rounding down is still sound
    def floor_guess(view, state, v, u):
        vp = v.parent
        return sum(state.a[c] * c.red_mult(vp) for c in view.children[u]) // v.red_mult(u)

    monkeypatch.setattr(counting, "compute_guess", floor_guess)
    for seed in range(20):
        n = 3 + seed % 6
        tr = gen_random_connected(n, 2 * n, loop_and_parallel_prob=0.3, seed=seed)
        gt = build_ground_truth(tr)
        for t in range(gt.depth + 1):
            auditor, _ = audit_view(gt.history(1, t), gt.alpha, n)
            assert not [v for v in auditor.violations if v["kind"] == "guess-below-anonymity"]


def test_leader_histories_match_raw_states():
    a, b = gen_lower_bound_gn(6, 8), gen_lower_bound_gn(7, 8)
    assert leader_histories_match(a, b, 7)
    assert not leader_histories_match(a, b, 8)
    with pytest.raises(ValueError):
        leader_histories_match(a, b, 9)
