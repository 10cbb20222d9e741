"""Lag-structure graphs over multivariate time series.

The causal graph of a structural VAR has one vertex per (series, time) pair
and repeats its edge pattern at every time step, so the whole infinite graph
is determined by a finite table of lags per ordered series pair.  This module
stores that table and answers every graphical query needed by the
identification machinery (parents, ancestry blocking, forbidden-ancestor
sets, residue classes, descendant tests) through bounded searches.  The
infinite graph is never materialized.

Times are signed integers relative to a symbolic reference t = 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Literal, NamedTuple

ParentKind = Literal["any", "observed", "latent"]

#: Vertices a bounded search may expand per call, as a multiple of (p+1)*d.
DEFAULT_SEARCH_FACTOR = 10


class GraphError(ValueError):
    """A lag structure or query violates the model assumptions."""


class SearchWindowExceeded(RuntimeError):
    """A bounded graph search exceeded its expansion cap.

    This signals a violated precondition (e.g. unbounded latent ancestry)
    rather than an answer.
    """


class Vertex(NamedTuple):
    """A (series, time) point of the repeating graph; series is 1-based."""

    series: int
    time: int

    def shifted(self, s: int) -> "Vertex":
        return Vertex(self.series, self.time + s)


def t_inf(vertices: Iterable[Vertex]) -> float:
    """Smallest time index of a vertex set; +inf for the empty set."""
    return min((v.time for v in vertices), default=math.inf)


def t_sup(vertices: Iterable[Vertex]) -> float:
    """Largest time index of a vertex set; -inf for the empty set."""
    return max((v.time for v in vertices), default=-math.inf)


def shift_all(vertices: Iterable[Vertex], s: int) -> frozenset[Vertex]:
    return frozenset(v.shifted(s) for v in vertices)


@dataclass(frozen=True)
class LagStructure:
    """Finite lag table defining a repeating time-series graph.

    ``lags[(target, source)]`` lists the lags ``h`` for which an edge
    ``source_{t-h} -> target_t`` exists at every ``t``.  Series ``1..d_u``
    are latent, ``d_u+1..d_u+d_o`` observed; the first observed series is
    the target series (alias name ``"Y"``).

    Construction validates the standing model assumptions: no
    contemporaneous self-edge, acyclic contemporaneous edges, and no edge
    from an observed series into a latent one.
    """

    d_u: int
    d_o: int
    lags: dict[tuple[int, int], tuple[int, ...]]

    def __post_init__(self) -> None:
        if self.d_o < 1:
            raise GraphError("need at least one observed series")
        if self.d_u < 0:
            raise GraphError("d_u must be non-negative")
        clean: dict[tuple[int, int], tuple[int, ...]] = {}
        for (target, source), hs in self.lags.items():
            if not (1 <= target <= self.d and 1 <= source <= self.d):
                raise GraphError(f"series pair {(target, source)} out of range 1..{self.d}")
            hs = tuple(sorted(set(int(h) for h in hs)))
            if not hs:
                continue
            if hs[0] < 0:
                raise GraphError(f"negative lag for pair {(target, source)}")
            if target == source and hs[0] == 0:
                raise GraphError(f"contemporaneous self-edge on series {target}")
            if self.is_latent(target) and not self.is_latent(source):
                raise GraphError(
                    f"edge from observed series {source} into latent series {target}"
                )
            clean[(target, source)] = hs
        object.__setattr__(self, "lags", clean)
        children: dict[int, list[tuple[int, int]]] = {k: [] for k in range(1, self.d + 1)}
        for (target, source), hs in clean.items():
            for h in hs:
                children[source].append((target, h))
        for k in children:
            children[k].sort()
        object.__setattr__(self, "_children", children)
        object.__setattr__(self, "_lag0_order", self._toposort_lag0())

    # ------------------------------------------------------------------
    # basic structure
    # ------------------------------------------------------------------

    @property
    def d(self) -> int:
        return self.d_u + self.d_o

    @property
    def p(self) -> int:
        """Model order: the largest declared lag (0 when edgeless)."""
        return max((hs[-1] for hs in self.lags.values()), default=0)

    def is_latent(self, series: int) -> bool:
        return 1 <= series <= self.d_u

    def series_name(self, series: int) -> str:
        if self.is_latent(series):
            return f"U{series}"
        return f"O{series - self.d_u}"

    def parse_series(self, name: str) -> int:
        """Inverse of :meth:`series_name`; also accepts the alias ``"Y"``."""
        name = name.strip()
        if name == "Y":
            return self.d_u + 1
        kind, idx = name[:1], name[1:]
        try:
            i = int(idx)
        except ValueError:
            raise GraphError(f"cannot parse series name {name!r}") from None
        if kind == "U" and 1 <= i <= self.d_u:
            return i
        if kind == "O" and 1 <= i <= self.d_o:
            return self.d_u + i
        raise GraphError(f"unknown series name {name!r}")

    def vertex_name(self, v: Vertex) -> str:
        return f"{self.series_name(v.series)}[{v.time:+d}]"

    def lags_between(self, target: int, source: int) -> tuple[int, ...]:
        return self.lags.get((target, source), ())

    def self_lags(self, series: int) -> tuple[int, ...]:
        return self.lags_between(series, series)

    def observed_series(self) -> tuple[int, ...]:
        return tuple(range(self.d_u + 1, self.d + 1))

    def latent_series(self) -> tuple[int, ...]:
        return tuple(range(1, self.d_u + 1))

    def _toposort_lag0(self) -> tuple[int, ...]:
        """Topological order of the contemporaneous edges; errors on a cycle."""
        out: dict[int, list[int]] = {k: [] for k in range(1, self.d + 1)}
        indeg = {k: 0 for k in range(1, self.d + 1)}
        for (target, source), hs in self.lags.items():
            if 0 in hs:
                out[source].append(target)
                indeg[target] += 1
        ready = sorted(k for k, n in indeg.items() if n == 0)
        order: list[int] = []
        while ready:
            k = ready.pop(0)
            order.append(k)
            for m in out[k]:
                indeg[m] -= 1
                if indeg[m] == 0:
                    ready.append(m)
            ready.sort()
        if len(order) != self.d:
            raise GraphError("contemporaneous edges contain a directed cycle")
        return tuple(order)

    @property
    def lag0_order(self) -> tuple[int, ...]:
        return self._lag0_order  # type: ignore[attr-defined]

    def _kind_ok(self, series: int, kind: ParentKind) -> bool:
        if kind == "any":
            return True
        if kind == "latent":
            return self.is_latent(series)
        return not self.is_latent(series)

    # ------------------------------------------------------------------
    # local queries
    # ------------------------------------------------------------------

    def parents(self, v: Vertex, kind: ParentKind = "any") -> frozenset[Vertex]:
        """All vertices with an edge into ``v``, optionally kind-filtered."""
        self._check_vertex(v)
        out = []
        for (target, source), hs in self.lags.items():
            if target != v.series or not self._kind_ok(source, kind):
                continue
            out.extend(Vertex(source, v.time - h) for h in hs)
        return frozenset(out)

    def parents_of_set(self, vs: Iterable[Vertex], kind: ParentKind = "any") -> frozenset[Vertex]:
        acc: set[Vertex] = set()
        for v in vs:
            acc |= self.parents(v, kind)
        return frozenset(acc)

    def parent_at(self, v: Vertex, source: int, lag: int) -> Vertex:
        """The unique parent of ``v`` reached through a (source, lag) edge."""
        if lag not in self.lags_between(v.series, source):
            raise GraphError(
                f"no lag-{lag} edge from {self.series_name(source)} into "
                f"{self.series_name(v.series)}"
            )
        return Vertex(source, v.time - lag)

    def children(self, v: Vertex, kind: ParentKind = "any") -> frozenset[Vertex]:
        self._check_vertex(v)
        kids = self._children[v.series]  # type: ignore[attr-defined]
        return frozenset(
            Vertex(target, v.time + h) for target, h in kids if self._kind_ok(target, kind)
        )

    def _check_vertex(self, v: Vertex) -> None:
        if not 1 <= v.series <= self.d:
            raise GraphError(f"vertex series {v.series} out of range 1..{self.d}")

    def _cap(self, cap: int | None) -> int:
        if cap is not None:
            return cap
        return DEFAULT_SEARCH_FACTOR * (self.p + 1) * self.d

    # ------------------------------------------------------------------
    # residue classes
    # ------------------------------------------------------------------

    def same_residue_class(self, series: int, lag: int, t1: int, t2: int) -> bool:
        """Whether two same-series vertices are linked by a chain of one self-lag.

        Two vertices of a series belong to the same ``lag``-residue class
        exactly when ``lag`` divides their time difference.  Undefined (an
        error) for series without self-lags.
        """
        slags = self.self_lags(series)
        if not slags:
            raise GraphError(f"no residue classes: series {self.series_name(series)} has no self-lags")
        if lag not in slags:
            raise GraphError(
                f"{lag} is not a self-lag of series {self.series_name(series)} (has {slags})"
            )
        return (t1 - t2) % lag == 0

    # ------------------------------------------------------------------
    # descendant tests
    # ------------------------------------------------------------------

    def is_descendant(self, a: Vertex, b: Vertex, cap: int | None = None) -> bool:
        """True iff ``b`` is a descendant of ``a`` (reflexively).

        Forward search from ``a``; finite because edges never decrease time
        and contemporaneous edges are acyclic, so only the slab of vertices
        with time in ``[t(a), t(b)]`` can be visited.
        """
        self._check_vertex(a)
        self._check_vertex(b)
        if a == b:
            return True
        if b.time < a.time:
            return False
        limit = max(self._cap(cap), self.d * (b.time - a.time + 1))
        seen = {a}
        stack = [a]
        while stack:
            v = stack.pop()
            for w in self.children(v):
                if w.time > b.time or w in seen:
                    continue
                if w == b:
                    return True
                seen.add(w)
                if len(seen) > limit:
                    raise SearchWindowExceeded(
                        f"descendant search from {self.vertex_name(a)} exceeded {limit} vertices"
                    )
                stack.append(w)
        return False

    def first_descendant_time(self, sources: Iterable[Vertex], series: int) -> int | None:
        """Earliest time at which ``series`` holds a descendant of ``sources``.

        Returns None when no vertex of the series ever descends from the set.
        The search slab is ``[t_inf(sources), t_sup(sources) + d*p]``: a
        shortest first-touch path never revisits a series, so it makes at
        most d hops of at most p steps each.
        """
        sources = list(sources)
        if not sources:
            return None
        hi = int(t_sup(sources)) + self.d * self.p
        best: int | None = None
        for s in sources:
            if s.series == series:
                best = s.time if best is None else min(best, s.time)
        seen = set(sources)
        stack = list(sources)
        while stack:
            v = stack.pop()
            for w in self.children(v):
                if w.time > hi or w in seen:
                    continue
                if w.series == series and (best is None or w.time < best):
                    best = w.time
                seen.add(w)
                stack.append(w)
        return best

    # ------------------------------------------------------------------
    # latent ancestry
    # ------------------------------------------------------------------

    def latent_ancestry_blocked(
        self, q: Vertex, b_u: frozenset[Vertex] | set[Vertex], cap: int | None = None
    ) -> bool:
        """Whether ``b_u`` blocks all deep-past latent ancestry of ``q``.

        True iff every directed path into ``q`` that starts at a latent
        vertex with time strictly below ``t_inf(b_u)`` passes through a
        member of ``b_u``.  Membership ``q in b_u`` counts as blocked (the
        caller's alternative condition).  Backward search over latent
        parents, never expanding through ``b_u``; latent vertices have no
        observed parents, so the search stays latent.
        """
        if not self.is_latent(q.series):
            raise GraphError(f"{self.vertex_name(q)} is not latent")
        for b in b_u:
            if not self.is_latent(b.series):
                raise GraphError(f"blocking set contains observed vertex {self.vertex_name(b)}")
        if q in b_u:
            return True
        threshold = t_inf(b_u)
        limit = self._cap(cap)
        seen = {q}
        stack = [q]
        while stack:
            v = stack.pop()
            for w in self.parents(v, "latent"):
                if w in b_u or w in seen:
                    continue
                if w.time < threshold:
                    return False
                seen.add(w)
                if len(seen) > limit:
                    raise SearchWindowExceeded(
                        f"ancestry search from {self.vertex_name(q)} exceeded {limit} vertices"
                    )
                stack.append(w)
        return True

    def forb_an(
        self,
        b_u: frozenset[Vertex] | set[Vertex],
        f_obs: frozenset[Vertex] | set[Vertex],
        y: Vertex,
        cap: int | None = None,
    ) -> frozenset[Vertex]:
        """Forbidden-ancestor set: ``f_obs``, ``y``, and the latent ancestry
        of their latent parents that is not already ancestry of ``b_u``.

        Requires the blocking conditions on ``b_u`` (else the latent part
        would be infinite); raises ``GraphError('unbounded latent
        ancestry')`` when they fail.
        """
        if self.is_latent(y.series):
            raise GraphError("target vertex must be observed")
        for f in f_obs:
            if self.is_latent(f.series):
                raise GraphError("f_obs must contain observed vertices only")
        b_u = frozenset(b_u)
        starts = self.parents_of_set(set(f_obs) | {y}, "latent")
        for q in starts:
            if not self.latent_ancestry_blocked(q, b_u, cap=cap):
                raise GraphError(
                    f"unbounded latent ancestry: {self.vertex_name(q)} not blocked by b_u"
                )
        limit = self._cap(cap)
        seen: set[Vertex] = set(q for q in starts if q not in b_u)
        stack = list(seen)
        while stack:
            v = stack.pop()
            for w in self.parents(v, "latent"):
                if w in b_u or w in seen:
                    continue
                seen.add(w)
                if len(seen) > limit:
                    raise SearchWindowExceeded(
                        f"forbidden-ancestor search exceeded {limit} vertices"
                    )
                stack.append(w)
        latent_part = {
            w for w in seen if not any(self.is_descendant(w, b) for b in b_u)
        }
        return frozenset(f_obs) | {y} | latent_part

    # ------------------------------------------------------------------
    # tau
    # ------------------------------------------------------------------

    def valid_tau(
        self, forb: frozenset[Vertex] | set[Vertex], series: int, t_ref: int, tight: bool = False
    ) -> int:
        """A shift tau such that no ``series`` vertex at time <= t_ref - tau
        descends from ``forb``.

        The default is the sound conservative choice ``t_ref - t_inf(forb)
        + 1`` (edges never point backward in time).  With ``tight=True`` a
        forward reachability search returns the smallest valid value.
        """
        if self.is_latent(series):
            raise GraphError("tau is defined for observed series only")
        forb = frozenset(forb)
        if not forb:
            raise GraphError("forbidden set must be non-empty")
        if not tight:
            return t_ref - int(t_inf(forb)) + 1
        first = self.first_descendant_time(forb, series)
        if first is None:
            # Series never descends from forb; any tau is sound.
            return t_ref - (int(t_sup(forb)) + self.d * self.p)
        return t_ref - first + 1

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------

    def to_json(self) -> dict:
        edges = [
            {
                "target": self.series_name(target),
                "source": self.series_name(source),
                "lags": list(hs),
            }
            for (target, source), hs in sorted(self.lags.items())
        ]
        return {"d_U": self.d_u, "d_O": self.d_o, "p": self.p, "edges": edges}

    @classmethod
    def from_json(cls, data: dict) -> "LagStructure":
        d_u = int(data["d_U"])
        d_o = int(data["d_O"])
        probe = cls(d_u=d_u, d_o=d_o, lags={})
        lags: dict[tuple[int, int], tuple[int, ...]] = {}
        for edge in data.get("edges", []):
            target = probe.parse_series(edge["target"])
            source = probe.parse_series(edge["source"])
            hs = tuple(int(h) for h in edge["lags"])
            if (target, source) in lags:
                raise GraphError(f"duplicate edge entry for {(edge['target'], edge['source'])}")
            lags[(target, source)] = hs
        g = cls(d_u=d_u, d_o=d_o, lags=lags)
        if "p" in data and int(data["p"]) != g.p:
            raise GraphError(f"declared order p={data['p']} but lags imply p={g.p}")
        return g

    @classmethod
    def from_json_str(cls, text: str) -> "LagStructure":
        return cls.from_json(json.loads(text))
