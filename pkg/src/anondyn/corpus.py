"""Fixed trace corpora used by the test-suite, ``verify`` and ``experiment``."""

from __future__ import annotations

from typing import Iterator

from .generators import gen_cycle_to_path, gen_lower_bound_gn, gen_random_connected, gen_static_complete
from .model import DynamicNetworkTrace

RANDOM_SEEDS = 200


def _random(seed: int, n: int, rounds: int) -> DynamicNetworkTrace:
    return gen_random_connected(
        n,
        rounds,
        extra_edge_budget=seed % 4,
        loop_and_parallel_prob=0.3 if seed % 2 else 0.0,
        seed=seed,
        values=("a", "b") if seed % 3 else ("a",),
    )


def small_random_n(seed: int) -> int:
    return 2 + seed % 7


def oracle_corpus(rounds: int = 12) -> Iterator[tuple[str, DynamicNetworkTrace]]:
    """All four families plus 200 seeded random traces, n in 2..8."""
    for n in range(4, 9):
        yield "gn", gen_lower_bound_gn(n, rounds)
    for n in range(2, 9):
        for m in range(1, n):
            yield "cycle-to-path", gen_cycle_to_path(n, m, rounds)
    for n in range(2, 9):
        yield "complete", gen_static_complete(n, ("x",), rounds)
        yield "complete", gen_static_complete(n, ("a", "b"), rounds)
    for seed in range(RANDOM_SEEDS):
        yield "random", _random(seed, small_random_n(seed), rounds)


def counting_corpus(max_n: int = 16, slack: int = 2) -> Iterator[tuple[str, DynamicNetworkTrace]]:
    """Traces with n in 2..max_n, each long enough to observe round 3n-2."""

    def length(n: int) -> int:
        return 3 * n - 2 + slack

    for n in range(4, max_n + 1):
        yield "gn", gen_lower_bound_gn(n, length(n))
    for m in range(1, max_n // 2 + 1):
        for n in (2 * m, 2 * m + 1):
            if n <= max_n and m < n:
                yield "cycle-to-path", gen_cycle_to_path(n, m, length(n))
    for n in range(3, max_n + 1, 3):
        for m in (1, n - 1):
            yield "cycle-to-path", gen_cycle_to_path(n, m, length(n))
    for n in range(2, max_n + 1):
        yield "complete", gen_static_complete(n, ("x",), length(n))
        yield "complete", gen_static_complete(n, ("a", "b", "c"), length(n))
    for seed in range(RANDOM_SEEDS):
        n = small_random_n(seed)
        yield "random", _random(seed, n, length(n))
    for seed in range(RANDOM_SEEDS, RANDOM_SEEDS + 4 * max(0, max_n - 8)):
        n = 9 + (seed - RANDOM_SEEDS) % max(1, max_n - 8)
        yield "random", _random(seed, n, length(n))
