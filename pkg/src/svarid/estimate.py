"""Building and solving covariance linear systems for direct effects.

A spec fixes rows R, columns C and the target vertex; any covariance
provider (exact population tables or sample estimates) fills the matrix
Gamma_{R,C} and right-hand side Gamma_{R,y}.  Solving yields the direct
effects named by the spec's coefficient map.  Uncertainty for a single
realisation comes from a moving-block bootstrap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .graph import Vertex
from .identify import EstimatorSpec
from .svar import CovarianceTable, NumericalError, SvarParams, exact_autocov, sample_autocov


class IllConditionedError(NumericalError):
    """The covariance system is numerically singular; genericity or the
    spec's validity conditions appear violated."""


class CovarianceProvider(Protocol):
    def cov(self, v1: Vertex, v2: Vertex) -> float: ...


@dataclass
class ExactCovarianceProvider:
    """Population covariances of a stable parameter set, extended on demand."""

    params: SvarParams
    h_max: int = 0
    _table: CovarianceTable | None = None

    def _ensure(self, h: int) -> CovarianceTable:
        if self._table is None or h > self._table.h_max:
            self.h_max = max(h, self.h_max, 1)
            self._table = exact_autocov(self.params, self.h_max)
        return self._table

    def cov(self, v1: Vertex, v2: Vertex) -> float:
        table = self._ensure(abs(v1.time - v2.time))
        return table.cov(v1, v2)


@dataclass
class SampleCovarianceProvider:
    """Sample covariances of a data matrix whose columns are named series.

    ``series_of_column[j]`` gives the 1-based series index of data column
    j; vertices of other series are unavailable and raise.
    """

    data: np.ndarray
    series_of_column: tuple[int, ...]
    demean: bool = True
    _cache: dict[int, np.ndarray] = field(default_factory=dict)
    _centered: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2:
            raise ValueError("data must be a (T, n_columns) matrix")
        if self.data.shape[1] != len(self.series_of_column):
            raise ValueError("series_of_column must name every data column")
        self._col = {s: j for j, s in enumerate(self.series_of_column)}
        if len(self._col) != len(self.series_of_column):
            raise ValueError("duplicate series in series_of_column")

    @property
    def t_len(self) -> int:
        return self.data.shape[0]

    def _gamma(self, h: int) -> np.ndarray:
        if h not in self._cache:
            if self._centered is None:
                x = self.data
                self._centered = x - x.mean(axis=0) if self.demean else x
            self._cache[h] = sample_autocov(self._centered, h, demean=False)
        return self._cache[h]

    def cov(self, v1: Vertex, v2: Vertex) -> float:
        try:
            i, j = self._col[v1.series], self._col[v2.series]
        except KeyError as exc:
            raise NumericalError(f"series {exc} not present in the data columns") from None
        h = v1.time - v2.time
        if abs(h) >= self.t_len:
            raise NumericalError(f"lag {h} not estimable from T={self.t_len} observations")
        if h >= 0:
            return float(self._gamma(h)[i, j])
        return float(self._gamma(-h)[j, i])


@dataclass(frozen=True)
class LinearSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    spec: EstimatorSpec


@dataclass(frozen=True)
class EffectEstimate:
    """Solved direct effects plus the full solution and its conditioning."""

    coefficients: dict[tuple[int, int], float]  # (lag, source series) -> value
    solution: np.ndarray
    condition_number: float
    spec: EstimatorSpec
    provenance: str = ""

    def coefficient(self, lag: int, source: int) -> float:
        return self.coefficients[(lag, source)]

    def to_json(self, graph) -> dict:
        target_name = graph.series_name(self.spec.target.series)
        return {
            "coefficients": {
                f"A[{lag}][{target_name}][{graph.series_name(source)}]": value
                for (lag, source), value in sorted(self.coefficients.items())
            },
            "solution": self.solution.tolist(),
            "condition_number": self.condition_number,
            "provenance": self.provenance,
        }


def build_system(provider: CovarianceProvider, spec: EstimatorSpec) -> LinearSystem:
    n = spec.size
    matrix = np.empty((n, n))
    rhs = np.empty(n)
    for i, r in enumerate(spec.r):
        rhs[i] = provider.cov(r, spec.target)
        for j, c in enumerate(spec.c):
            matrix[i, j] = provider.cov(r, c)
    return LinearSystem(matrix=matrix, rhs=rhs, spec=spec)


def solve_effects(
    system: LinearSystem, cond_threshold: float = 1e12, provenance: str = ""
) -> EffectEstimate:
    matrix = system.matrix
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError("system must be square")
    cond = float(np.linalg.cond(matrix))
    if not np.isfinite(cond) or cond > cond_threshold:
        raise IllConditionedError(
            f"covariance system numerically singular (cond {cond:.3g} > {cond_threshold:.3g}); "
            "genericity or spec validity appears violated"
        )
    solution = np.linalg.solve(matrix, system.rhs)
    coefficients = {
        (col.lag, col.source): float(solution[col.column]) for col in system.spec.coeff_map
    }
    return EffectEstimate(
        coefficients=coefficients,
        solution=solution,
        condition_number=cond,
        spec=system.spec,
        provenance=provenance,
    )


def check_data_matrix(data: np.ndarray, spec: EstimatorSpec | None = None) -> np.ndarray:
    """Validate and coerce a (T, columns) float matrix; with a spec, require
    enough observations to estimate every needed lag."""
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"data must be a (T, d) matrix with T >= 2, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("data contains non-finite values")
    if spec is not None and x.shape[0] <= spec.max_lag_span():
        raise ValueError(
            f"T={x.shape[0]} too small for the spec's lag span {spec.max_lag_span()}"
        )
    return x


def estimate_from_data(
    data: np.ndarray,
    spec: EstimatorSpec,
    series_of_column: Sequence[int],
    demean: bool = True,
    cond_threshold: float = 1e12,
) -> EffectEstimate:
    x = check_data_matrix(data, spec)
    provider = SampleCovarianceProvider(
        data=x, series_of_column=tuple(series_of_column), demean=demean
    )
    system = build_system(provider, spec)
    return solve_effects(
        system, cond_threshold=cond_threshold, provenance=f"sample(T={x.shape[0]})"
    )


@dataclass(frozen=True)
class BootstrapResult:
    estimates: np.ndarray          # (n_ok, n_coeffs), coeff_map order
    coeff_keys: tuple[tuple[int, int], ...]
    failures: int
    block_len: int

    def quantiles(self, lo: float = 2.5, hi: float = 97.5) -> dict[tuple[int, int], tuple[float, float]]:
        out = {}
        for j, key in enumerate(self.coeff_keys):
            col = self.estimates[:, j]
            out[key] = (float(np.percentile(col, lo)), float(np.percentile(col, hi)))
        return out


def block_bootstrap(
    data: np.ndarray,
    spec: EstimatorSpec,
    series_of_column: Sequence[int],
    block_len: int,
    replicates: int,
    seed: int | None = None,
    demean: bool = True,
    cond_threshold: float = 1e12,
) -> BootstrapResult:
    """Moving-block resampling: contiguous blocks drawn uniformly from
    [0, T - block_len], concatenated and trimmed to length T, re-estimated
    per replicate.  Failed replicates are dropped and counted.
    """
    x = check_data_matrix(data, spec)
    t_len = x.shape[0]
    if not 1 <= block_len <= t_len:
        raise ValueError(f"block_len must be in [1, T={t_len}]")
    keys = tuple((col.lag, col.source) for col in spec.coeff_map)
    n_blocks = -(-t_len // block_len)
    streams = np.random.SeedSequence(seed).spawn(replicates)
    rows = []
    failures = 0
    for stream in streams:
        rng = np.random.default_rng(stream)
        starts = rng.integers(0, t_len - block_len + 1, size=n_blocks)
        pieces = [x[s : s + block_len] for s in starts]
        resampled = np.concatenate(pieces, axis=0)[:t_len]
        try:
            est = estimate_from_data(
                resampled, spec, series_of_column, demean=demean, cond_threshold=cond_threshold
            )
        except (NumericalError, ValueError):
            failures += 1
            continue
        rows.append([est.coefficients[k] for k in keys])
    estimates = np.asarray(rows, dtype=float).reshape(len(rows), len(keys))
    return BootstrapResult(
        estimates=estimates, coeff_keys=keys, failures=failures, block_len=block_len
    )


class DirectEffectEstimator:
    """Estimator-style front end: fit a data matrix, read effects off
    attributes.

    Parameters are the spec, the column-to-series naming, demeaning, and
    the conditioning threshold; ``fit`` computes ``coefficients_``,
    ``solution_`` and ``condition_number_``.  Implements get_params /
    set_params so it composes with scikit-learn style tooling.
    """

    def __init__(
        self,
        spec: EstimatorSpec,
        series_of_column: Sequence[int] | None = None,
        demean: bool = True,
        cond_threshold: float = 1e12,
    ) -> None:
        self.spec = spec
        self.series_of_column = series_of_column
        self.demean = demean
        self.cond_threshold = cond_threshold

    def get_params(self, deep: bool = True) -> dict:
        return {
            "spec": self.spec,
            "series_of_column": self.series_of_column,
            "demean": self.demean,
            "cond_threshold": self.cond_threshold,
        }

    def set_params(self, **params) -> "DirectEffectEstimator":
        for key, value in params.items():
            if key not in self.get_params():
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    def fit(self, X: np.ndarray, y=None) -> "DirectEffectEstimator":
        x = check_data_matrix(X, self.spec)
        columns = self.series_of_column
        if columns is None:
            # Default: columns are the spec's series sorted ascending.
            needed = sorted({v.series for v in self.spec.r + self.spec.c + (self.spec.target,)})
            if len(needed) != x.shape[1]:
                raise ValueError(
                    f"cannot infer column series: spec uses {len(needed)} series "
                    f"but data has {x.shape[1]} columns"
                )
            columns = needed
        est = estimate_from_data(
            x, self.spec, columns, demean=self.demean, cond_threshold=self.cond_threshold
        )
        self.coefficients_ = est.coefficients
        self.solution_ = est.solution
        self.condition_number_ = est.condition_number
        self.estimate_ = est
        return self
