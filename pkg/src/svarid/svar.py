"""SVAR parameter handling, simulation, and autocovariances.

The model is S_t = A0 S_t + A1 S_{t-1} + ... + Ap S_{t-p} + eps_t with
i.i.d. mean-zero noise and diagonal covariance.  Exact population
autocovariances come from the companion-form Lyapunov equation and the
Yule-Walker recursion; they serve as the oracle everything else is checked
against.  Truncated trek sums and the parent decomposition of covariances
give two independent numerical cross-checks of that oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .graph import GraphError, LagStructure, Vertex

NoiseSampler = Callable[[np.random.Generator, tuple[int, ...]], np.ndarray]


class NumericalError(RuntimeError):
    """An operation left its numerical validity domain (instability, singularity)."""


@dataclass(frozen=True)
class SvarParams:
    """Coefficient matrices keyed by lag plus diagonal noise variances.

    ``coeffs[h][j-1, k-1]`` is the effect of series k at time t-h on series
    j at time t.  The nonzero pattern must match the graph exactly: every
    declared edge carries a nonzero coefficient, and nothing else does.
    """

    graph: LagStructure
    coeffs: dict[int, np.ndarray]
    noise_var: np.ndarray

    def __post_init__(self) -> None:
        d = self.graph.d
        clean: dict[int, np.ndarray] = {}
        for h, mat in self.coeffs.items():
            mat = np.asarray(mat, dtype=float)
            if mat.shape != (d, d):
                raise GraphError(f"coefficient matrix for lag {h} must be {d}x{d}")
            clean[int(h)] = mat
        nv = np.asarray(self.noise_var, dtype=float).reshape(-1)
        if nv.shape != (d,):
            raise GraphError(f"noise_var must have length {d}")
        if np.any(nv < 0):
            raise GraphError("noise variances must be non-negative")
        for j in range(1, d + 1):
            for k in range(1, d + 1):
                declared = set(self.graph.lags_between(j, k))
                for h in range(0, max(declared, default=-1) + 1):
                    val = clean.get(h, np.zeros((d, d)))[j - 1, k - 1]
                    if h in declared and val == 0.0:
                        raise GraphError(
                            f"declared lag-{h} edge {self.graph.series_name(k)}->"
                            f"{self.graph.series_name(j)} has zero coefficient"
                        )
                for h, mat in clean.items():
                    if h not in declared and mat[j - 1, k - 1] != 0.0:
                        raise GraphError(
                            f"nonzero coefficient at undeclared lag-{h} edge "
                            f"{self.graph.series_name(k)}->{self.graph.series_name(j)}"
                        )
        for mat in clean.values():
            mat.setflags(write=False)
        nv.setflags(write=False)
        object.__setattr__(self, "coeffs", clean)
        object.__setattr__(self, "noise_var", nv)

    def coeff_matrix(self, h: int) -> np.ndarray:
        d = self.graph.d
        return self.coeffs.get(h, np.zeros((d, d)))

    def coefficient(self, target: int, source: int, lag: int) -> float:
        return float(self.coeff_matrix(lag)[target - 1, source - 1])

    def edge_coefficient(self, child: Vertex, parent: Vertex) -> float:
        return self.coefficient(child.series, parent.series, child.time - parent.time)

    def to_json(self) -> dict:
        return {
            "graph": self.graph.to_json(),
            "coeffs": {
                str(h): self.coeff_matrix(h).tolist() for h in sorted(self.coeffs)
            },
            "noise_var": self.noise_var.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "SvarParams":
        graph = LagStructure.from_json(data["graph"])
        coeffs = {int(h): np.asarray(m, dtype=float) for h, m in data["coeffs"].items()}
        return cls(graph=graph, coeffs=coeffs, noise_var=np.asarray(data["noise_var"]))


@dataclass(frozen=True)
class CompanionForm:
    """Reduced-form matrices B(h) = (I - A0)^-1 A(h) and the block companion."""

    b0: np.ndarray                # (I - A0)^-1
    reduced: dict[int, np.ndarray]  # h >= 1
    big_b: np.ndarray             # (d*p, d*p); empty for p = 0


def companion(params: SvarParams) -> CompanionForm:
    d = params.graph.d
    p = params.graph.p
    i_minus_a0 = np.eye(d) - params.coeff_matrix(0)
    b0 = np.linalg.inv(i_minus_a0)
    reduced = {h: b0 @ params.coeff_matrix(h) for h in range(1, p + 1)}
    if p == 0:
        big_b = np.zeros((0, 0))
    else:
        big_b = np.zeros((d * p, d * p))
        for h in range(1, p + 1):
            big_b[:d, (h - 1) * d : h * d] = reduced[h]
        if p > 1:
            big_b[d:, : d * (p - 1)] = np.eye(d * (p - 1))
    return CompanionForm(b0=b0, reduced=reduced, big_b=big_b)


def spectral_margin(params: SvarParams) -> float:
    """Max modulus of the companion eigenvalues; stable iff < 1."""
    form = companion(params)
    if form.big_b.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(form.big_b))))


def simulate(
    params: SvarParams,
    t_len: int,
    burnin: int = 1000,
    seed: int | np.random.SeedSequence | None = None,
    n_replicates: int | None = None,
    noise: NoiseSampler | None = None,
) -> np.ndarray:
    """Draw one (or a batch of) length-``t_len`` realisations.

    Returns shape (t_len, d), or (n_replicates, t_len, d) when a batch is
    requested.  Noise is i.i.d. standard normal scaled by the declared
    standard deviations unless a unit-variance sampler is supplied.  The
    pre-sample state is zero and ``burnin`` leading steps are discarded.
    Deterministic in ``seed``.
    """
    if burnin < 0:
        raise ValueError("burnin must be non-negative")
    margin = spectral_margin(params)
    if margin >= 1.0:
        raise NumericalError(f"unstable parameters (spectral margin {margin:.6g})")
    d = params.graph.d
    p = params.graph.p
    reps = 1 if n_replicates is None else int(n_replicates)
    rng = np.random.default_rng(seed)
    total = burnin + t_len
    draw = noise if noise is not None else (lambda r, size: r.standard_normal(size))
    eps = draw(rng, (reps, total, d)) * np.sqrt(params.noise_var)
    form = companion(params)
    # Contemporaneous system solved exactly through (I - A0)^-1 (the lag-0
    # DAG is acyclic, so this equals per-series substitution in topological
    # order); the noise transform is applied in one pass.
    shocks = eps @ form.b0.T
    x = np.zeros((reps, p + total, d))
    b_t = [form.reduced[h].T for h in range(1, p + 1)]
    for step in range(total):
        t = p + step
        acc = shocks[:, step]
        for h in range(1, p + 1):
            acc = acc + x[:, t - h] @ b_t[h - 1]
        x[:, t] = acc
    out = x[:, p + burnin :, :]
    if n_replicates is None:
        return out[0]
    return out


@dataclass(frozen=True)
class CovarianceTable:
    """Autocovariance matrices Gamma(h) = E[S_t S_{t-h}^T] for h = 0..h_max."""

    gammas: np.ndarray  # (h_max + 1, d, d)
    exact: bool
    sample_size: int | None = None

    @property
    def h_max(self) -> int:
        return self.gammas.shape[0] - 1

    @property
    def d(self) -> int:
        return self.gammas.shape[1]

    def gamma(self, h: int) -> np.ndarray:
        """Gamma(h) for any signed h, using Gamma(-h) = Gamma(h)^T."""
        if abs(h) > self.h_max:
            raise NumericalError(f"lag {h} outside table range 0..{self.h_max}")
        if h >= 0:
            return self.gammas[h]
        return self.gammas[-h].T

    def cov(self, v1: Vertex, v2: Vertex) -> float:
        return float(self.gamma(v1.time - v2.time)[v1.series - 1, v2.series - 1])


def exact_autocov(
    params: SvarParams, h_max: int, dense_limit: int = 40, tol: float = 1e-8
) -> CovarianceTable:
    """Population autocovariances of a stable process.

    Solves the companion-form Lyapunov fixed point Gamma~ = B Gamma~ B^T +
    Sigma~ (direct vectorised solve for d*p <= dense_limit, doubling
    iteration beyond) and extends past the companion block with the
    Yule-Walker recursion Gamma(h) = sum_i B(i) Gamma(h-i).
    """
    margin = spectral_margin(params)
    if margin >= 1.0:
        raise NumericalError(f"unstable parameters (spectral margin {margin:.6g})")
    d = params.graph.d
    p = params.graph.p
    form = companion(params)
    inner = form.b0 @ np.diag(params.noise_var) @ form.b0.T
    if p == 0:
        gammas = np.zeros((h_max + 1, d, d))
        gammas[0] = inner
        return CovarianceTable(gammas=gammas, exact=True)
    dp = d * p
    sig = np.zeros((dp, dp))
    sig[:d, :d] = inner
    big = form.big_b
    if dp <= dense_limit:
        lhs = np.eye(dp * dp) - np.kron(big, big)
        try:
            vec = np.linalg.solve(lhs, sig.reshape(-1, order="F"))
        except np.linalg.LinAlgError as exc:  # unreachable when stable; defensive
            raise NumericalError("singular Lyapunov system") from exc
        gamma_big = vec.reshape((dp, dp), order="F")
    else:
        gamma_big = sig.copy()
        power = big.copy()
        for _ in range(200):
            if np.max(np.abs(power)) <= 1e-17:
                break
            gamma_big = gamma_big + power @ gamma_big @ power.T
            power = power @ power
        else:  # margin^(2^200) underflows long before this; defensive
            raise NumericalError("Lyapunov doubling iteration did not converge")
    resid = np.max(np.abs(gamma_big - big @ gamma_big @ big.T - sig))
    scale = max(1.0, np.max(np.abs(gamma_big)))
    if resid > tol * scale:
        raise NumericalError(f"Lyapunov solve residual {resid:.3g} exceeds tolerance")
    gammas = np.zeros((h_max + 1, d, d))
    # Block (0, h) of Gamma~ holds E[S_t S_{t-h}^T] = Gamma(h).
    for h in range(min(p, h_max + 1)):
        gammas[h] = gamma_big[:d, h * d : (h + 1) * d]
    for h in range(p, h_max + 1):
        acc = np.zeros((d, d))
        for i in range(1, p + 1):
            acc += form.reduced[i] @ gammas_at(gammas, h - i)
        gammas[h] = acc
    return CovarianceTable(gammas=gammas, exact=True)


def gammas_at(gammas: np.ndarray, h: int) -> np.ndarray:
    if h >= 0:
        return gammas[h]
    return gammas[-h].T


def sample_autocov(data: np.ndarray, h: int, demean: bool = False) -> np.ndarray:
    """Lag-h sample autocovariance (1/(T-h)) sum_t S_t S_{t-h}^T."""
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise ValueError("data must be a (T, d) matrix")
    t_len = x.shape[0]
    if not 0 <= h < t_len:
        raise ValueError(f"need 0 <= h < T, got h={h}, T={t_len}")
    if demean:
        x = x - x.mean(axis=0)
    return (x[h:].T @ x[: t_len - h]) / (t_len - h)


def sample_autocov_table(data: np.ndarray, h_max: int, demean: bool = False) -> CovarianceTable:
    x = np.asarray(data, dtype=float)
    gammas = np.stack([sample_autocov(x, h, demean=demean) for h in range(h_max + 1)])
    return CovarianceTable(gammas=gammas, exact=False, sample_size=x.shape[0])


# ----------------------------------------------------------------------
# trek sums
# ----------------------------------------------------------------------


class Trek(NamedTuple):
    """A collider-free walk between two vertices.

    ``left`` runs from the top vertex to the source, ``right`` from the top
    to the target; both are directed paths, so no vertex on either side has
    a smaller time index than the top.
    """

    left: tuple[Vertex, ...]
    right: tuple[Vertex, ...]

    @property
    def top(self) -> Vertex:
        return self.left[0]

    def monomial(self, params: "SvarParams") -> float:
        value = params.noise_var[self.top.series - 1]
        for side in (self.left, self.right):
            for parent, child in zip(side, side[1:]):
                value *= params.edge_coefficient(child, parent)
        return float(value)


def iter_treks(params: SvarParams, v1: Vertex, v2: Vertex, depth: int):
    """Yield every trek between v1 and v2 whose top vertex lies within
    ``depth`` steps of min(t(v1), t(v2)).  Test-oracle path: the production
    sum factorises per top instead of enumerating."""
    g = params.graph
    floor = min(v1.time, v2.time) - depth

    def paths_down(start: Vertex, target: Vertex):
        stack = [(start,)]
        while stack:
            path = stack.pop()
            v = path[-1]
            if v == target:
                yield path
                continue
            for w in sorted(g.children(v)):
                if w.time <= target.time:
                    stack.append(path + (w,))

    for series in range(1, g.d + 1):
        for t in range(floor, min(v1.time, v2.time) + 1):
            top = Vertex(series, t)
            lefts = list(paths_down(top, v1))
            if not lefts:
                continue
            for right in paths_down(top, v2):
                for left in lefts:
                    yield Trek(left=left, right=right)


def _path_monomial_sums(
    params: SvarParams, target: Vertex, t_floor: int
) -> dict[Vertex, float]:
    """Sum of directed-path monomials into ``target`` from every vertex with
    time in [t_floor, t(target)] (the trivial path contributes 1 at the
    target itself)."""
    g = params.graph
    memo: dict[Vertex, float] = {}
    order: list[Vertex] = []
    # Iterative DFS so deep windows cannot hit the recursion limit.
    stack: list[tuple[Vertex, bool]] = [(target, False)]
    seen: set[Vertex] = set()
    while stack:
        v, expanded = stack.pop()
        if expanded:
            order.append(v)
            continue
        if v in seen:
            continue
        seen.add(v)
        stack.append((v, True))
        for w in g.parents(v):
            if w.time >= t_floor and w not in seen:
                stack.append((w, False))
    # DFS postorder over parents is a topological order (target last);
    # path sums need descendants first, so fill the memo in reverse.
    for v in reversed(order):
        total = 1.0 if v == target else 0.0
        for w in g.children(v):
            if w.time <= target.time and w in memo:
                total += params.edge_coefficient(w, v) * memo[w]
        memo[v] = total
    # memo only covers ancestors of target; other vertices sum to 0.
    return memo


def trek_sum_truncated(params: SvarParams, v1: Vertex, v2: Vertex, depth: int) -> float:
    """Sum of trek monomials over all treks whose top vertex has time within
    ``depth`` steps of min(t(v1), t(v2)).

    Converges (absolutely) to the covariance of (v1, v2) as depth grows,
    for stable parameters.  A trek splits into two directed paths from its
    top vertex, so the sum factorises per top into a product of
    path-monomial sums times the top's noise variance.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    g = params.graph
    tmin = min(v1.time, v2.time)
    floor = tmin - depth
    left = _path_monomial_sums(params, v1, floor)
    right = _path_monomial_sums(params, v2, floor)
    total = 0.0
    for series in range(1, g.d + 1):
        var = params.noise_var[series - 1]
        if var == 0.0:
            continue
        for t in range(floor, tmin + 1):
            top = Vertex(series, t)
            a = left.get(top, 0.0)
            if a == 0.0:
                continue
            b = right.get(top, 0.0)
            if b == 0.0:
                continue
            total += var * a * b
    return total


def parent_decomposition_residual(
    params: SvarParams,
    a: Vertex,
    b: Vertex,
    cov: CovarianceTable,
    superset: tuple[Vertex, ...] = (),
) -> float:
    """|Gamma_ab - sum over parents q of b of A_bq Gamma_aq|.

    Zero (to solver precision) on exact covariances whenever ``a`` is not a
    descendant of ``b``.  Extra vertices in ``superset`` enter with their
    (zero) coefficients, so a parent superset never changes the value.
    """
    g = params.graph
    if g.is_descendant(b, a):
        raise GraphError(
            f"{g.vertex_name(a)} is a descendant of {g.vertex_name(b)}; "
            "parent decomposition requires non-descendance"
        )
    total = cov.cov(a, b)
    for q in set(g.parents(b)) | set(superset):
        coef = params.edge_coefficient(b, q)
        if coef != 0.0:
            total -= coef * cov.cov(a, q)
    return abs(total)


# ----------------------------------------------------------------------
# random parameter draws
# ----------------------------------------------------------------------


def draw_coefficients(
    graph: LagStructure,
    rng: np.random.Generator,
    low: float = 0.1,
    high: float = 0.9,
    noise_var: np.ndarray | None = None,
) -> SvarParams:
    """Independent uniform +-[low, high] coefficients on every declared edge."""
    d = graph.d
    coeffs: dict[int, np.ndarray] = {}
    for (target, source), hs in sorted(graph.lags.items()):
        for h in hs:
            mat = coeffs.setdefault(h, np.zeros((d, d)))
            mag = rng.uniform(low, high)
            sign = 1.0 if rng.random() < 0.5 else -1.0
            mat[target - 1, source - 1] = sign * mag
    nv = np.ones(d) if noise_var is None else np.asarray(noise_var, dtype=float)
    return SvarParams(graph=graph, coeffs=coeffs, noise_var=nv)


def draw_stable_params(
    graph: LagStructure,
    rng: np.random.Generator,
    low: float = 0.1,
    high: float = 0.9,
    max_margin: float = 0.9,
    max_tries: int = 10_000,
    noise_var: np.ndarray | None = None,
) -> SvarParams:
    """Rejection-sample coefficients until the spectral margin is within bounds."""
    for _ in range(max_tries):
        params = draw_coefficients(graph, rng, low=low, high=high, noise_var=noise_var)
        if spectral_margin(params) <= max_margin:
            return params
    raise NumericalError(f"no stable draw within {max_tries} tries (margin {max_margin})")
