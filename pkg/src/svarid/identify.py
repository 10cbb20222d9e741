"""Identification machinery for direct effects under latent confounding.

Given a lag structure, these routines decide whether the direct effects of
the observed parents of the target vertex can be read off a linear system
in observed autocovariances, and construct that system: a row set R, a
column set C (target parents, a finite "future" observed set F_obs, and its
parents), and the map from solution components to direct effects.

The graphical conditions come in two layers: the abstract certificate
checks (ancestry blocking by a latent basis set B_U, disjointness,
non-descendance of R from the forbidden ancestors, uniqueness of a
path-system monomial from B_U to F_obs), and the lag-based residue-class
conditions (C1)-(C6.2) that imply the abstract ones and are decidable by
integer arithmetic.  A brute-force sweep over placements of F_obs turns
the lag-based layer into an identification search for the single-latent
case.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple

from .graph import LagStructure, Vertex, t_inf, t_sup

EdgeType = tuple[int, int, int]  # (lag, target series, source series)


class PathSystem(NamedTuple):
    """A system of vertex-disjoint directed paths with the sign of the
    source-to-target assignment permutation."""

    paths: tuple[tuple[Vertex, ...], ...]
    sign: int


class IdentificationError(ValueError):
    """A construction's precondition failed; the message names the condition."""


class EnumerationBudgetExceeded(RuntimeError):
    """Path-system enumeration grew past the configured budget; undecided."""


class CoeffColumn(NamedTuple):
    """Solution component semantics: column ``column`` of C carries the
    direct effect of the lag-``lag`` edge from ``source`` into the target
    series (zero when the column is a declared superset extra)."""

    column: int
    lag: int
    source: int
    superset: bool = False


@dataclass(frozen=True)
class EstimatorSpec:
    """A solvable system layout: rows R, ordered columns C, and the
    coefficient map identifying which solution components are effects."""

    target: Vertex
    r: tuple[Vertex, ...]
    c: tuple[Vertex, ...]
    coeff_map: tuple[CoeffColumn, ...]
    provenance: str = ""

    def __post_init__(self) -> None:
        if len(self.r) != len(self.c):
            raise IdentificationError(f"|R| = {len(self.r)} but |C| = {len(self.c)}")
        if len(set(self.r)) != len(self.r) or len(set(self.c)) != len(self.c):
            raise IdentificationError("R and C must not contain repeated vertices")
        for col in self.coeff_map:
            if not 0 <= col.column < len(self.c):
                raise IdentificationError(f"coeff_map column {col.column} out of range")

    @property
    def size(self) -> int:
        return len(self.r)

    def max_lag_span(self) -> int:
        times = [v.time for v in self.r + self.c + (self.target,)]
        return max(times) - min(times)

    def shifted(self, s: int) -> "EstimatorSpec":
        return replace(
            self,
            target=self.target.shifted(s),
            r=tuple(v.shifted(s) for v in self.r),
            c=tuple(v.shifted(s) for v in self.c),
        )

    def to_json(self, graph: LagStructure) -> dict:
        def vx(v: Vertex) -> dict:
            return {"series": graph.series_name(v.series), "time": v.time}

        return {
            "target": vx(self.target),
            "r": [vx(v) for v in self.r],
            "c": [vx(v) for v in self.c],
            "coeff_map": [
                {
                    "column": col.column,
                    "lag": col.lag,
                    "source": graph.series_name(col.source),
                    "superset": col.superset,
                }
                for col in self.coeff_map
            ],
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, graph: LagStructure, data: dict) -> "EstimatorSpec":
        def vx(d: dict) -> Vertex:
            return Vertex(graph.parse_series(d["series"]), int(d["time"]))

        return cls(
            target=vx(data["target"]),
            r=tuple(vx(v) for v in data["r"]),
            c=tuple(vx(v) for v in data["c"]),
            coeff_map=tuple(
                CoeffColumn(
                    column=int(c["column"]),
                    lag=int(c["lag"]),
                    source=graph.parse_series(c["source"]),
                    superset=bool(c.get("superset", False)),
                )
                for c in data["coeff_map"]
            ),
            provenance=data.get("provenance", ""),
        )


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    witness: str = ""


@dataclass(frozen=True)
class Certificate:
    """The sets underpinning a spec: latent basis B_U, observed future
    F_obs, plus the sweep coordinates that produced them (when any)."""

    b_u: frozenset[Vertex]
    f_obs: frozenset[Vertex]
    target: Vertex
    delta: int | None = None
    anchor: int | None = None
    checks: tuple[CheckResult, ...] = ()

    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self, graph: LagStructure) -> dict:
        def vx(v: Vertex) -> dict:
            return {"series": graph.series_name(v.series), "time": v.time}

        return {
            "b_u": [vx(v) for v in sorted(self.b_u)],
            "f_obs": [vx(v) for v in sorted(self.f_obs)],
            "target": vx(self.target),
            "delta": self.delta,
            "anchor_series": None if self.anchor is None else graph.series_name(self.anchor),
            "checks": [
                {"name": c.name, "passed": c.passed, "witness": c.witness}
                for c in self.checks
            ],
        }


# ----------------------------------------------------------------------
# column layout
# ----------------------------------------------------------------------


def derive_columns(
    g: LagStructure,
    y: Vertex,
    f_obs: Iterable[Vertex],
    extra_y_parents: tuple[Vertex, ...] = (),
    extra_f_parents: tuple[Vertex, ...] = (),
) -> tuple[tuple[Vertex, ...], tuple[CoeffColumn, ...]]:
    """Column set C = pa_obs(y) [+extras], then F_obs, then pa_obs(F_obs).

    Returns the ordered columns and the coefficient map over the first
    segment.  Extras widen the parent sets (their solution components are
    zero) and are flagged as superset columns.
    """
    pa_y = sorted(g.parents(y, "observed"), key=lambda v: (v.series, -v.time))
    true_pa_y = set(pa_y)
    seg1 = list(pa_y)
    for v in extra_y_parents:
        if v not in true_pa_y:
            seg1.append(v)
    f_sorted = sorted(set(f_obs), key=lambda v: (v.series, v.time))
    pa_f = set(g.parents_of_set(f_sorted, "observed")) | set(extra_f_parents)
    seg3 = sorted(pa_f - set(f_sorted), key=lambda v: (v.series, v.time))
    future = set(f_sorted) | pa_f
    overlap = future & (set(seg1) | {y})
    if overlap:
        names = ", ".join(g.vertex_name(v) for v in sorted(overlap))
        raise IdentificationError(f"column segments overlap ({names}); condition 3 fails")
    c = tuple(seg1) + tuple(f_sorted) + tuple(seg3)
    coeff_map = tuple(
        CoeffColumn(
            column=i,
            lag=y.time - v.time,
            source=v.series,
            superset=v not in true_pa_y,
        )
        for i, v in enumerate(seg1)
    )
    return c, coeff_map


# ----------------------------------------------------------------------
# certificate-level checks
# ----------------------------------------------------------------------


def construct_bu_fobs(
    g: LagStructure, anchor: int, delta: int, y: Vertex
) -> tuple[frozenset[Vertex], frozenset[Vertex]]:
    """Single-latent basis construction.

    F_obs is a run of ``l_max`` consecutive anchor-series vertices starting
    at t(y) + delta, where l_max is the largest latent self-lag; B_U is the
    run of ``l_max`` latent vertices starting at the earliest latent parent
    of {y} + F_obs.  Requires exactly one latent series with self-lags and
    an edge into the anchor series.
    """
    if g.d_u != 1:
        raise IdentificationError("use general checks: construction requires d_U = 1")
    l_self = g.self_lags(1)
    if not l_self:
        raise IdentificationError("latent series has no self-lags")
    if g.is_latent(anchor):
        raise IdentificationError("anchor must be an observed series")
    if not g.lags_between(anchor, 1):
        raise IdentificationError(
            f"no confounding edge from U1 into {g.series_name(anchor)}"
        )
    l_max = l_self[-1]
    f_obs = frozenset(Vertex(anchor, y.time + delta + k) for k in range(l_max))
    pa_lat = g.parents(y, "latent") | g.parents_of_set(f_obs, "latent")
    t0 = int(t_inf(pa_lat))
    b_u = frozenset(Vertex(1, t0 + k) for k in range(l_max))
    return b_u, f_obs


def blocking_checks(g: LagStructure, cert: Certificate) -> list[CheckResult]:
    """Conditions 1, 2a, 2b: sizes match and B_U blocks the deep-past latent
    ancestry of the latent parents of the target and of F_obs."""
    out = [
        CheckResult(
            "size",
            len(cert.f_obs) == len(cert.b_u),
            f"|F_obs|={len(cert.f_obs)}, |B_U|={len(cert.b_u)}",
        )
    ]
    for label, vertices in (
        ("target-parents-blocked", g.parents(cert.target, "latent")),
        ("future-parents-blocked", g.parents_of_set(cert.f_obs, "latent")),
    ):
        bad = [
            q
            for q in sorted(vertices)
            if q not in cert.b_u and not g.latent_ancestry_blocked(q, cert.b_u)
        ]
        out.append(
            CheckResult(
                label,
                not bad,
                "" if not bad else "unblocked: " + ", ".join(g.vertex_name(q) for q in bad),
            )
        )
    return out


def disjointness_check(g: LagStructure, cert: Certificate) -> CheckResult:
    """Condition 3: the future block and its observed parents avoid the
    target and its observed parents."""
    future = set(cert.f_obs) | set(g.parents_of_set(cert.f_obs, "observed"))
    now = {cert.target} | set(g.parents(cert.target, "observed"))
    overlap = future & now
    return CheckResult(
        "disjointness",
        not overlap,
        "" if not overlap else "overlap: " + ", ".join(g.vertex_name(v) for v in sorted(overlap)),
    )


def non_descendance_check(
    g: LagStructure, cert: Certificate, r: Iterable[Vertex]
) -> CheckResult:
    """Condition 4: no row vertex descends from the forbidden-ancestor set."""
    forb = g.forb_an(cert.b_u, cert.f_obs, cert.target)
    bad = [
        (f, v)
        for v in sorted(set(r))
        for f in sorted(forb)
        if g.is_descendant(f, v)
    ]
    return CheckResult(
        "non-descendance",
        not bad,
        "" if not bad else "; ".join(
            f"{g.vertex_name(v)} descends from {g.vertex_name(f)}" for f, v in bad
        ),
    )


# ----------------------------------------------------------------------
# path-system uniqueness (finite check of the basis condition)
# ----------------------------------------------------------------------


def _reduced_graph(
    g: LagStructure, b_u: frozenset[Vertex], f_obs: frozenset[Vertex]
) -> dict[Vertex, list[tuple[Vertex, EdgeType]]]:
    """Finite graph on which path systems from B_U to F_obs live: latent
    vertices inside the window spanned by B_U and the latent parents of
    F_obs, all latent edges between them except those internal to B_U, and
    the direct latent-parent edges into F_obs."""
    pa_lat_f = g.parents_of_set(f_obs, "latent")
    window = set(b_u) | set(pa_lat_f)
    lo, hi = int(t_inf(window)), int(t_sup(window))
    nodes = [
        Vertex(series, t)
        for series in g.latent_series()
        for t in range(lo, hi + 1)
    ]
    adj: dict[Vertex, list[tuple[Vertex, EdgeType]]] = {v: [] for v in nodes}
    for v in nodes:
        for w in g.children(v, "latent"):
            if w in adj and not (v in b_u and w in b_u):
                adj[v].append((w, (w.time - v.time, w.series, v.series)))
    for f in sorted(f_obs):
        adj[f] = []
        for q in sorted(pa_lat_f):
            if (f.time - q.time) in g.lags_between(f.series, q.series):
                adj[q].append((f, (f.time - q.time, f.series, q.series)))
    for v in adj:
        adj[v].sort()
    return adj


def check_upsilon_uniqueness(
    g: LagStructure,
    b_u: frozenset[Vertex],
    f_obs: frozenset[Vertex],
    max_systems: int = 10**6,
) -> tuple[bool, PathSystem | None]:
    """Condition 2c: does some vertex-disjoint system of latent-interior
    directed paths B_U -> F_obs have a monomial no other system matches?

    Monomials are compared as multisets of edge types (lag, target series,
    source series): distinct edge types carry algebraically independent
    coefficients, so two products coincide as functions exactly when the
    multisets do.  Enumerates every system on the finite reduced graph;
    raises when the count passes ``max_systems`` (undecided at desk scale).
    """
    b_u = frozenset(b_u)
    f_obs = frozenset(f_obs)
    if len(b_u) != len(f_obs):
        raise IdentificationError("B_U and F_obs must have equal size")
    if not b_u:
        return True, PathSystem(paths=(), sign=1)
    adj = _reduced_graph(g, b_u, f_obs)
    sources = sorted(b_u)
    targets = sorted(f_obs)

    def paths_from(src: Vertex) -> dict[Vertex, list[tuple[tuple[Vertex, ...], tuple[EdgeType, ...]]]]:
        """All simple directed paths src -> each target, with edge types."""
        found: dict[Vertex, list[tuple[tuple[Vertex, ...], tuple[EdgeType, ...]]]] = {
            t: [] for t in targets
        }
        stack = [((src,), ())]
        while stack:
            verts, edges = stack.pop()
            v = verts[-1]
            if v in f_obs:
                found[v].append((verts, edges))
                continue
            for w, etype in adj.get(v, []):
                if w in verts:
                    continue
                stack.append((verts + (w,), edges + (etype,)))
        return found

    all_paths = {src: paths_from(src) for src in sources}
    target_pos = {tgt: i for i, tgt in enumerate(targets)}
    signature_counts: Counter[tuple[EdgeType, ...]] = Counter()
    witness: dict[tuple[EdgeType, ...], PathSystem] = {}
    count = 0

    def permutation_sign(perm: list[int]) -> int:
        sign = 1
        seen = [False] * len(perm)
        for start in range(len(perm)):
            if seen[start]:
                continue
            length = 0
            j = start
            while not seen[j]:
                seen[j] = True
                j = perm[j]
                length += 1
            if length % 2 == 0:
                sign = -sign
        return sign

    def extend(i: int, used: set[Vertex], acc_paths: list[tuple[Vertex, ...]],
               acc_edges: list[EdgeType], remaining: set[Vertex]) -> None:
        nonlocal count
        if i == len(sources):
            count += 1
            if count > max_systems:
                raise EnumerationBudgetExceeded(
                    f"more than {max_systems} path systems; undecided at desk scale"
                )
            sig = tuple(sorted(acc_edges))
            signature_counts[sig] += 1
            if sig not in witness:
                perm = [target_pos[path[-1]] for path in acc_paths]
                witness[sig] = PathSystem(paths=tuple(acc_paths), sign=permutation_sign(perm))
            return
        src = sources[i]
        for tgt in sorted(remaining):
            for verts, edges in all_paths[src][tgt]:
                if any(v in used for v in verts):
                    continue
                extend(
                    i + 1,
                    used | set(verts),
                    acc_paths + [verts],
                    acc_edges + list(edges),
                    remaining - {tgt},
                )

    extend(0, set(), [], [], set(targets))
    for sig, n in signature_counts.items():
        if n == 1:
            return True, witness[sig]
    return False, None


# ----------------------------------------------------------------------
# lag-based conditions (C1)-(C6.2)
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SeriesWitness:
    """Per-series choices behind a passing lag-based check."""

    lag: int | None = None                 # residue lag for C^(1) matching
    linking: tuple[int, int] | None = None  # (latent series, lag) into C^(2)
    latent_lag: int | None = None           # residue lag on the linked latent series


@dataclass
class ConditionReport:
    results: list[CheckResult] = field(default_factory=list)
    series_witness: dict[int, SeriesWitness] = field(default_factory=dict)
    latent_lags: dict[int, int] = field(default_factory=dict)
    p_set: frozenset[Vertex] = frozenset()
    q_set: frozenset[Vertex] = frozenset()
    taus: dict[int, int] = field(default_factory=dict)

    def passed(self, *names: str) -> bool:
        wanted = set(names)
        return all(r.passed for r in self.results if not wanted or r.name in wanted)

    def failures(self) -> list[CheckResult]:
        return [r for r in self.results if not r.passed]


def _split_by_series(g: LagStructure, vs: Iterable[Vertex]) -> dict[int, list[Vertex]]:
    out: dict[int, list[Vertex]] = {}
    for v in sorted(vs):
        out.setdefault(v.series, []).append(v)
    return out


def default_taus(
    g: LagStructure, cert: Certificate, tight: bool = True
) -> dict[int, int]:
    """Per-series shifts from the certificate's forbidden-ancestor set.

    The identification layer defaults to the tightened (reachability-based)
    variant: smaller shifts keep lag spans short and make the residue
    condition easier; both variants are sound and nothing downstream
    assumes minimality.
    """
    forb = g.forb_an(cert.b_u, cert.f_obs, cert.target)
    return {
        i: g.valid_tau(forb, i, cert.target.time, tight=tight)
        for i in g.observed_series()
    }


def check_conditions_c(
    g: LagStructure,
    cert: Certificate,
    r_partition: tuple[Iterable[Vertex], Iterable[Vertex]] | None = None,
    taus: dict[int, int] | None = None,
    extra_y_parents: tuple[Vertex, ...] = (),
    extra_f_parents: tuple[Vertex, ...] = (),
) -> ConditionReport:
    """Evaluate the residue-class conditions for the column set implied by
    the certificate.

    Without a partition only the partition-free prerequisites are checked
    (C2, C5.1, C6, C6.1); with a partition R = R1 + R2 the full list
    (C1)-(C6.2) is evaluated.  Per-series residue lags are chosen as the
    largest lag passing C2 (and, with a partition, C3/C4); linking edges
    and latent residue lags are searched deterministically.
    """
    report = ConditionReport()
    t_ref = cert.target.time
    try:
        c, _ = derive_columns(g, cert.target, cert.f_obs, extra_y_parents, extra_f_parents)
    except IdentificationError as exc:
        report.results.append(CheckResult("columns", False, str(exc)))
        return report
    c2_all = set(cert.f_obs)
    c1 = _split_by_series(g, [v for v in c if v not in c2_all])
    c2 = _split_by_series(g, cert.f_obs)
    report.taus = dict(taus) if taus is not None else default_taus(g, cert)
    r1 = r2 = None
    if r_partition is not None:
        r1 = _split_by_series(g, r_partition[0])
        r2 = _split_by_series(g, r_partition[1])
        ok = True
        detail = []
        for i in g.observed_series():
            n11, n12 = len(c1.get(i, [])), len(r1.get(i, []))
            n21, n22 = len(c2.get(i, [])), len(r2.get(i, []))
            if n11 != n12 or n21 != n22:
                ok = False
                detail.append(
                    f"{g.series_name(i)}: |C1|={n11} |R1|={n12} |C2|={n21} |R2|={n22}"
                )
        report.results.append(CheckResult("C1", ok, "; ".join(detail)))

    def recent_window(tau: int, lag: int) -> tuple[int, int]:
        return t_ref - tau - (lag - 1), t_ref - tau

    for i in g.observed_series():
        c1_i = c1.get(i, [])
        if not c1_i:
            continue
        tau = report.taus[i]
        passing_c2: list[int] = []
        passing_joint: list[int] = []
        for lag in g.self_lags(i):
            lo, _ = recent_window(tau, lag)
            recent = [v for v in c1_i if v.time >= lo]
            classes = {v.time % lag for v in recent}
            if len(classes) != len(recent):
                continue
            passing_c2.append(lag)
            if r_partition is not None:
                r1_i = r1.get(i, []) if r1 else []
                ok3 = all(
                    sum(
                        1
                        for rv in r1_i
                        if lo <= rv.time <= t_ref - tau and rv.time % lag == v.time % lag
                    )
                    == 1
                    for v in recent
                )
                old = [v for v in c1_i if v.time <= t_ref - tau - lag]
                ok4 = all(v in r1_i for v in old)
                if ok3 and ok4:
                    passing_joint.append(lag)
        chosen = passing_joint if r_partition is not None else passing_c2
        if chosen:
            report.series_witness[i] = SeriesWitness(lag=chosen[-1])
        report.results.append(
            CheckResult(
                f"C2[{g.series_name(i)}]",
                bool(passing_c2),
                f"lag={passing_c2[-1] if passing_c2 else None}, tau={tau}",
            )
        )
        if r_partition is not None:
            report.results.append(
                CheckResult(
                    f"C3+C4[{g.series_name(i)}]",
                    bool(passing_joint),
                    f"lag={passing_joint[-1] if passing_joint else None}",
                )
            )

    for i in g.observed_series():
        c1_i, c2_i = c1.get(i, []), c2.get(i, [])
        if c1_i and c2_i:
            ok = max(v.time for v in c1_i) < min(v.time for v in c2_i)
            report.results.append(
                CheckResult(
                    f"C5.1[{g.series_name(i)}]",
                    ok,
                    f"sup C1={max(v.time for v in c1_i)}, inf C2={min(v.time for v in c2_i)}",
                )
            )
        if r_partition is not None:
            r1_i = r1.get(i, []) if r1 else []
            r2_i = r2.get(i, []) if r2 else []
            if r1_i and r2_i:
                ok = max(v.time for v in r2_i) < min(v.time for v in r1_i)
                report.results.append(CheckResult(f"C5.2[{g.series_name(i)}]", ok, ""))

    # C6/C6.1/C6.2: linking edges into the future block and latent residue
    # classes.  Search the (small) product of per-series linking options.
    linked_series = [i for i in g.observed_series() if c2.get(i)]
    options: dict[int, list[tuple[int, int]]] = {}
    for i in linked_series:
        opts = [
            (k, w)
            for k in g.latent_series()
            for w in g.lags_between(i, k)
        ]
        options[i] = opts
        report.results.append(
            CheckResult(
                f"C6[{g.series_name(i)}]",
                bool(opts),
                f"{len(opts)} linking edge(s)",
            )
        )
    if all(options.get(i) for i in linked_series):
        Combo = tuple[dict[int, tuple[int, int]], dict[int, int], frozenset, frozenset]
        best_alone: Combo | None = None
        best_joint: Combo | None = None
        for combo in itertools.product(*(options[i] for i in linked_series)):
            linking = dict(zip(linked_series, combo))
            p_set: set[Vertex] = set()
            for i in linked_series:
                k, w = linking[i]
                p_set |= {Vertex(k, v.time - w) for v in c2[i]}
            latent_lags: dict[int, int] = {}
            ok = True
            for k in sorted({v.series for v in p_set}):
                pk = [v for v in p_set if v.series == k]
                cands = [
                    lag
                    for lag in g.self_lags(k)
                    if len({v.time % lag for v in pk}) == len(pk)
                ]
                if not cands:
                    ok = False
                    break
                latent_lags[k] = cands[-1]
            if not ok:
                continue
            q_set: set[Vertex] = set()
            if r_partition is not None:
                ok62 = True
                for i in linked_series:
                    k, w = linking[i]
                    q_set |= {Vertex(k, v.time - w) for v in (r2.get(i, []) if r2 else [])}
                for k, lag in latent_lags.items():
                    pk = [v for v in p_set if v.series == k]
                    qk = [v for v in q_set if v.series == k]
                    for v in pk:
                        if sum(1 for q in qk if (q.time - v.time) % lag == 0) != 1:
                            ok62 = False
                if not ok62:
                    if best_alone is None:
                        best_alone = (linking, latent_lags, frozenset(p_set), frozenset(q_set))
                    continue
            best_joint = (linking, latent_lags, frozenset(p_set), frozenset(q_set))
            break
        if linked_series:
            chosen = best_joint if best_joint is not None else best_alone
            if chosen is not None:
                linking, latent_lags, p_set_f, q_set_f = chosen
                for i in linked_series:
                    w = report.series_witness.get(i, SeriesWitness())
                    report.series_witness[i] = replace(
                        w, linking=linking[i], latent_lag=latent_lags[linking[i][0]]
                    )
                report.latent_lags = latent_lags
                report.p_set = p_set_f
                report.q_set = q_set_f
            report.results.append(
                CheckResult(
                    "C6.1",
                    chosen is not None,
                    "" if chosen is None else "latent lags " + str(report.latent_lags),
                )
            )
            if r_partition is not None:
                report.results.append(CheckResult("C6.2", best_joint is not None, ""))
    return report


# ----------------------------------------------------------------------
# R construction
# ----------------------------------------------------------------------


def construct_r(
    g: LagStructure,
    cert: Certificate,
    taus: dict[int, int] | None = None,
    extra_y_parents: tuple[Vertex, ...] = (),
    extra_f_parents: tuple[Vertex, ...] = (),
) -> EstimatorSpec:
    """Build the row set from residue-class matching.

    For each observed series, recent C-columns outside the future block are
    matched to the unique same-class vertex inside the length-``lag``
    window ending at t - tau, old ones are copied verbatim, and the future
    block is shifted into the past by the smallest multiple of the latent
    residue lag that clears both the window and tau.  Raises naming the
    first failed precondition.
    """
    report = check_conditions_c(
        g, cert, taus=taus, extra_y_parents=extra_y_parents, extra_f_parents=extra_f_parents
    )
    for check in report.failures():
        raise IdentificationError(f"precondition failed: {check.name} ({check.witness})")
    for check in blocking_checks(g, cert) + [disjointness_check(g, cert)]:
        if not check.passed:
            raise IdentificationError(f"precondition failed: {check.name} ({check.witness})")
    t_ref = cert.target.time
    c, coeff_map = derive_columns(
        g, cert.target, cert.f_obs, extra_y_parents, extra_f_parents
    )
    c2_all = set(cert.f_obs)
    c1 = _split_by_series(g, [v for v in c if v not in c2_all])
    c2 = _split_by_series(g, cert.f_obs)
    r1: list[Vertex] = []
    r2: list[Vertex] = []
    for i in g.observed_series():
        c1_i = c1.get(i, [])
        if c1_i:
            tau = report.taus[i]
            lag = report.series_witness[i].lag
            assert lag is not None
            lo, hi = t_ref - tau - (lag - 1), t_ref - tau
            for v in c1_i:
                if v.time >= lo:
                    r1.append(Vertex(i, hi - ((hi - v.time) % lag)))
                else:
                    r1.append(v)
        c2_i = c2.get(i, [])
        if c2_i:
            witness = report.series_witness.get(i)
            if witness is None or witness.latent_lag is None:
                raise IdentificationError("precondition failed: C6.1")
            step = witness.latent_lag
            r1_times = [v.time for v in r1 if v.series == i]
            bound = min(r1_times, default=t_ref - report.taus[i] + 1) - 1
            bound = min(bound, t_ref - report.taus[i])
            need = max(v.time for v in c2_i) - bound
            shift = ((need + step - 1) // step) * step
            if shift <= 0:
                shift = step
            r2.extend(Vertex(i, v.time - shift) for v in c2_i)
    r = tuple(r1) + tuple(r2)
    if len(set(r)) != len(r):
        raise IdentificationError("row construction produced duplicate vertices")
    spec = EstimatorSpec(
        target=cert.target,
        r=r,
        c=c,
        coeff_map=coeff_map,
        provenance="lag-construction",
    )
    full = check_conditions_c(
        g,
        cert,
        r_partition=(tuple(r1), tuple(r2)),
        taus=report.taus,
        extra_y_parents=extra_y_parents,
        extra_f_parents=extra_f_parents,
    )
    bad = full.failures()
    if bad:
        raise IdentificationError(
            f"constructed rows violate {bad[0].name} ({bad[0].witness})"
        )
    nd = non_descendance_check(g, cert, r)
    if not nd.passed:
        raise IdentificationError(f"constructed rows violate {nd.name}: {nd.witness}")
    return spec


# ----------------------------------------------------------------------
# brute-force sweep over future-block placements
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SweepHit:
    certificate: Certificate
    spec: EstimatorSpec


def delta_sweep(
    g: LagStructure,
    delta_range: tuple[int, int],
    y: Vertex | None = None,
    anchors: Iterable[int] | None = None,
    verify_upsilon: bool = False,
    tight_tau: bool = True,
) -> list[SweepHit]:
    """Try every future-block placement (delta, anchor series) and return
    those passing all checks, each with its constructed row set.

    Requires the single-latent setting with latent self-dependence and at
    least one confounded observed series; raises otherwise.  The returned
    list is sorted by (delta, anchor) and may be empty.
    """
    if g.d_u != 1:
        raise IdentificationError("use general checks: sweep requires d_U = 1")
    if not g.self_lags(1):
        raise IdentificationError("latent series has no self-lags")
    eligible = [i for i in g.observed_series() if g.lags_between(i, 1)]
    if not eligible:
        raise IdentificationError("no confounding edge from the latent series")
    if y is None:
        y = Vertex(g.d_u + 1, 0)
    if anchors is None:
        anchors = eligible
    else:
        anchors = [a for a in anchors]
        for a in anchors:
            if a not in eligible:
                raise IdentificationError(
                    f"anchor {g.series_name(a)} has no edge from the latent series"
                )
    lo, hi = delta_range
    hits: list[SweepHit] = []
    for delta in range(lo, hi + 1):
        for anchor in sorted(anchors):
            try:
                b_u, f_obs = construct_bu_fobs(g, anchor, delta, y)
            except IdentificationError:
                continue
            cert = Certificate(b_u=b_u, f_obs=f_obs, target=y, delta=delta, anchor=anchor)
            checks = list(blocking_checks(g, cert))
            checks.append(disjointness_check(g, cert))
            if not all(c.passed for c in checks):
                continue
            report = check_conditions_c(g, cert, taus=default_taus(g, cert, tight=tight_tau))
            checks.extend(report.results)
            if report.failures():
                continue
            if verify_upsilon:
                ok, _ = check_upsilon_uniqueness(g, b_u, f_obs)
                checks.append(CheckResult("upsilon-unique", ok))
                if not ok:
                    continue
            try:
                spec = construct_r(g, cert, taus=report.taus)
            except IdentificationError:
                continue
            checks.append(non_descendance_check(g, cert, spec.r))
            checks.append(
                CheckResult("square", len(spec.r) == len(spec.c), f"n={len(spec.r)}")
            )
            cert = replace(cert, checks=tuple(checks))
            if cert.passed():
                hits.append(SweepHit(certificate=cert, spec=spec))
    return hits


def select_spec(hits: list[SweepHit]) -> SweepHit:
    """Default selection: smallest covariance-lag footprint, ties by delta."""
    if not hits:
        raise IdentificationError("no identification found")
    return min(
        hits,
        key=lambda h: (h.spec.max_lag_span(), h.certificate.delta, h.certificate.anchor),
    )
