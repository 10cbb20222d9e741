"""Shared fixtures and the brute-force finite-window oracle.

The oracle materialises the repeating graph explicitly over a bounded time
window as adjacency dictionaries and answers ancestry, descendant, path
and trek queries by exhaustive enumeration.  Tests compare the library's
bounded searches against it.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from svarid.graph import LagStructure, Vertex


class WindowGraph:
    """Explicit materialisation of a lag structure over times [lo, hi]."""

    def __init__(self, g: LagStructure, lo: int, hi: int):
        self.g = g
        self.lo = lo
        self.hi = hi
        self.vertices = [
            Vertex(series, t) for series in range(1, g.d + 1) for t in range(lo, hi + 1)
        ]
        self.parents: dict[Vertex, set[Vertex]] = {v: set() for v in self.vertices}
        self.children: dict[Vertex, set[Vertex]] = {v: set() for v in self.vertices}
        for v in self.vertices:
            for (target, source), lags in g.lags.items():
                if target != v.series:
                    continue
                for h in lags:
                    w = Vertex(source, v.time - h)
                    if lo <= w.time <= hi:
                        self.parents[v].add(w)
                        self.children[w].add(v)

    def ancestors(self, v: Vertex) -> set[Vertex]:
        out = {v}
        frontier = [v]
        while frontier:
            u = frontier.pop()
            for w in self.parents[u]:
                if w not in out:
                    out.add(w)
                    frontier.append(w)
        return out

    def descendants(self, v: Vertex) -> set[Vertex]:
        out = {v}
        frontier = [v]
        while frontier:
            u = frontier.pop()
            for w in self.children[u]:
                if w not in out:
                    out.add(w)
                    frontier.append(w)
        return out

    def directed_paths(self, a: Vertex, b: Vertex) -> list[tuple[Vertex, ...]]:
        """All simple directed paths from a to b inside the window."""
        paths = []
        stack = [(a,)]
        while stack:
            path = stack.pop()
            v = path[-1]
            if v == b:
                paths.append(path)
                continue
            for w in sorted(self.children[v]):
                if w not in path:
                    stack.append(path + (w,))
        return paths

    def forb_an_oracle(
        self, b_u: frozenset[Vertex], f_obs: frozenset[Vertex], y: Vertex
    ) -> frozenset[Vertex]:
        """Forbidden-ancestor set straight from its definition: latent
        ancestry of the latent parents, minus the latent ancestry of the
        blocking set (latent vertices only have latent ancestors)."""
        starts = set()
        for v in set(f_obs) | {y}:
            starts |= {w for w in self.parents[v] if self.g.is_latent(w.series)}
        an_part: set[Vertex] = set()
        for q in starts:
            an_part |= self.ancestors(q)
        an_bu: set[Vertex] = set()
        for b in b_u:
            an_bu |= self.ancestors(b)
        return frozenset(f_obs) | {y} | (an_part - an_bu)

    def blocked_oracle(self, q: Vertex, b_u: frozenset[Vertex]) -> bool:
        """All nontrivial directed paths into q from latent vertices below
        t_inf(b_u) pass through b_u (checked by path enumeration).
        Membership q in b_u counts as blocked, mirroring the query contract."""
        if q in b_u:
            return True
        threshold = min((v.time for v in b_u), default=float("inf"))
        for v in self.vertices:
            if not self.g.is_latent(v.series) or v.time >= threshold or v == q:
                continue
            for path in self.directed_paths(v, q):
                if not any(w in b_u for w in path[1:-1]):
                    return False
        return True

    def treks(self, v1: Vertex, v2: Vertex) -> list[tuple[tuple[Vertex, ...], tuple[Vertex, ...]]]:
        """All treks inside the window as (path top->v1, path top->v2)."""
        out = []
        for top in self.vertices:
            for left in self.directed_paths(top, v1):
                for right in self.directed_paths(top, v2):
                    out.append((left, right))
        return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_lag_structure(rng: np.random.Generator, d_u=1, d_o=2, max_lag=4) -> LagStructure:
    """Small random structure for property tests (always valid)."""
    d = d_u + d_o
    lags = {}
    for target in range(1, d + 1):
        for source in range(1, d + 1):
            if target <= d_u and source > d_u:
                continue  # no observed -> latent edges
            pool = list(range(1, max_lag + 1)) if target == source else list(range(0, max_lag + 1))
            if target <= d_u < source:
                continue
            count = int(rng.integers(0, 3))
            if count:
                chosen = rng.choice(pool, size=min(count, len(pool)), replace=False)
                lags[(target, source)] = tuple(int(x) for x in chosen)
    # Contemporaneous cycles are impossible here only if we prune; drop
    # lag-0 entries that would close a cycle, checked by construction.
    while True:
        try:
            return LagStructure(d_u=d_u, d_o=d_o, lags=lags)
        except Exception:
            removed = False
            for key in list(lags):
                if 0 in lags[key]:
                    rest = tuple(h for h in lags[key] if h != 0)
                    if rest:
                        lags[key] = rest
                    else:
                        del lags[key]
                    removed = True
                    break
            if not removed:
                raise
