import pytest

from anondyn.generators import (
    GeneratorSpec,
    ParameterError,
    gen_cycle_to_path,
    gen_lower_bound_gn,
    gen_random_connected,
    gen_static_complete,
    search_naive_failure,
)
from anondyn.counting import stabilizing_count
from anondyn.history import build_ground_truth
from anondyn.model import Inventory, inventory, MultigraphSnapshot, validate_connectivity


def test_gn_snapshots():
    tr = gen_lower_bound_gn(6, 6)
    path = [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6)]
    assert tr.snapshot(1) == MultigraphSnapshot.from_list(6, path + [(2, 6)])
    assert tr.snapshot(4) == MultigraphSnapshot.from_list(6, path)
    assert all(validate_connectivity(s) for s in tr.snapshots)
    assert tr.leader == 1
    with pytest.raises(ParameterError):
        gen_lower_bound_gn(3, 4)


def test_cycle_to_path_snapshots():
    tr = gen_cycle_to_path(8, 4, 5)
    cycle = [(j, j + 1) for j in range(1, 8)] + [(1, 8)]
    assert tr.snapshot(1) == MultigraphSnapshot.from_list(8, cycle)
    assert tr.snapshot(3) == MultigraphSnapshot.from_list(8, cycle)
    path = [(j, j + 1) for j in range(1, 8) if j != 4] + [(4, 8)]
    assert tr.snapshot(4) == MultigraphSnapshot.from_list(8, path)
    assert all(validate_connectivity(s) for s in tr.snapshots)
    with pytest.raises(ParameterError):
        gen_cycle_to_path(4, 4, 3)


def test_static_complete():
    tr = gen_static_complete(3, ("a", "b"), 2)
    assert tr.snapshot(1).edges == {(1, 2): 1, (1, 3): 1, (2, 3): 1}
    assert len(build_ground_truth(tr).level(0)) == 3


@pytest.mark.parametrize("seed", range(10))
def test_random_is_seeded_and_connected(seed):
    a = gen_random_connected(7, 8, 3, 0.5, seed)
    b = gen_random_connected(7, 8, 3, 0.5, seed)
    assert a.snapshots == b.snapshots and a.assignment == b.assignment
    assert all(validate_connectivity(s) for s in a.snapshots)


def test_random_uses_multigraph_features():
    tr = gen_random_connected(6, 30, 3, 0.5, seed=1)
    edges = [(e, m) for s in tr.snapshots for e, m in s.edges.items()]
    assert any(u == v for (u, v), _ in edges)
    assert any(m > 1 for _, m in edges)


def test_spec_build_errors():
    with pytest.raises(ParameterError):
        GeneratorSpec("cycle-to-path", 5).build()
    with pytest.raises(ParameterError):
        GeneratorSpec("nope", 5).build()


def test_naive_failure_witness():
    w = search_naive_failure(seed=0, n_range=(3, 8), round_budget=10_000)
    assert w is not None and w.trace.n <= 8
    gt = build_ground_truth(w.trace)
    out = stabilizing_count(gt.history(w.process, w.round))
    assert isinstance(out, Inventory) and out.total != w.trace.n and w.round < 2 * w.trace.n - 2
    final = 2 * w.trace.n - 2
    assert w.trace.rounds == final
    for p in range(1, w.trace.n + 1):
        assert stabilizing_count(gt.history(p, final)) == inventory(w.trace.assignment)
