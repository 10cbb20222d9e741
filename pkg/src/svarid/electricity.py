"""Semi-synthetic electricity-market study.

A supply-demand market with latent wind generation and latent demand
shocks, in three variants that differ in how demand carries over time:

* variant 1: demand feeds back through its own lag,
* variant 2: a latent base-demand process carries the feedback,
* variant 3: demand reacts to the lagged price instead.

The target quantity is the instantaneous price elasticity of demand (the
direct effect of price on demand).  A bank of covariance estimators,
each a row/column layout over price and demand vertices only, estimates it
without observing wind or the demand shocks; per variant only some layouts
are valid.

Each variant maps to a structural VAR with the latent drivers as explicit
component series (noise carriers for the i.i.d. shocks), which gives exact
population covariances for validity checks.  Simulation follows the market
equations verbatim, including intercepts, so estimation must demean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimate import (
    ExactCovarianceProvider,
    build_system,
    estimate_from_data,
    solve_effects,
)
from .graph import LagStructure, Vertex
from .identify import CoeffColumn, EstimatorSpec
from .svar import NumericalError, SvarParams


@dataclass(frozen=True)
class ElectricityModel:
    """Market parameters; defaults follow the semi-synthetic study setup."""

    variant: int = 1
    beta_p: float = -100.0    # price -> demand, the target effect
    beta_p1: float = 50.0     # lagged price -> demand (variant 3)
    beta_d1: float = 0.7      # lagged demand -> demand (variant 1)
    beta_b1: float = 0.9      # base-demand persistence (variant 2)
    gamma_p: float = 500.0    # price -> supply
    gamma_w: float = 1.0      # wind -> supply
    s0: float = 25_000.0
    d0: float = 50_000.0
    b0: float = 0.0
    sigma_d: float = 2_000.0            # sd of the demand shock
    sigma_s: float = 1.0                # sd of the supply shock
    sigma_ab: float = 2_000.0 / math.sqrt(2.0)  # sd of each demand component (variant 2)
    wind_ar: tuple[float, ...] = (0.7, 0.2)
    sigma_w: float = 2_000.0            # sd of the wind innovation

    def __post_init__(self) -> None:
        if self.variant not in (1, 2, 3):
            raise ValueError("variant must be 1, 2 or 3")
        if self.beta_p == self.gamma_p:
            raise ValueError("beta_p - gamma_p must be nonzero")

    @property
    def delta(self) -> float:
        return self.beta_p - self.gamma_p

    @property
    def wind_lags(self) -> tuple[int, ...]:
        return tuple(h + 1 for h, a in enumerate(self.wind_ar) if a != 0.0)

    # ------------------------------------------------------------------
    # structural form
    # ------------------------------------------------------------------

    def series_index(self) -> dict[str, int]:
        """1-based series indices of the latent drivers and observables."""
        if self.variant == 2:
            return {"W": 1, "A": 2, "G": 3, "B": 4, "D": 5, "P": 6}
        return {"W": 1, "V": 2, "D": 3, "P": 4}

    def to_svar_params(self) -> SvarParams:
        """The centred structural VAR with latent shock carriers.

        Demand and, in variant 2, the base-demand process have zero own
        noise: their randomness enters entirely through the carriers, which
        is what makes the shocks latent confounders.
        """
        idx = self.series_index()
        w, d_s, p_s = idx["W"], idx["D"], idx["P"]
        dlt = self.delta
        if self.variant == 2:
            d_u, d_o = 4, 2
            a_s, g_s, b_s = idx["A"], idx["G"], idx["B"]
            dim = 6
            lags = {
                (b_s, b_s): (1,),
                (b_s, g_s): (0,),
                (d_s, p_s): (0,),
                (d_s, b_s): (1,),
                (d_s, a_s): (0,),
                (d_s, g_s): (0,),
                (p_s, w): (0,),
                (p_s, b_s): (1,),
                (p_s, a_s): (0,),
                (p_s, g_s): (0,),
            }
            entries = {
                (0, b_s, g_s): 1.0,
                (1, b_s, b_s): self.beta_b1,
                (0, d_s, p_s): self.beta_p,
                (1, d_s, b_s): self.beta_b1,
                (0, d_s, a_s): 1.0,
                (0, d_s, g_s): 1.0,
                (0, p_s, w): self.gamma_w / dlt,
                (1, p_s, b_s): self.beta_b1 / dlt,
                (0, p_s, a_s): -1.0 / dlt,
                (0, p_s, g_s): -1.0 / dlt,
            }
            noise = np.zeros(dim)
            noise[w - 1] = self.sigma_w**2
            noise[a_s - 1] = self.sigma_ab**2
            noise[g_s - 1] = self.sigma_ab**2
            noise[p_s - 1] = (self.sigma_s / dlt) ** 2
        else:
            d_u, d_o = 2, 2
            v_s = idx["V"]
            dim = 4
            lags = {
                (d_s, p_s): (0,),
                (d_s, v_s): (0,),
                (p_s, w): (0,),
                (p_s, v_s): (0,),
            }
            entries = {
                (0, d_s, p_s): self.beta_p,
                (0, d_s, v_s): 1.0,
                (0, p_s, w): self.gamma_w / dlt,
                (0, p_s, v_s): -1.0 / dlt,
            }
            if self.variant == 1:
                lags[(d_s, d_s)] = (1,)
                lags[(p_s, d_s)] = (1,)
                entries[(1, d_s, d_s)] = self.beta_d1
                entries[(1, p_s, d_s)] = -self.beta_d1 / dlt
            else:  # variant 3: demand reacts to lagged price
                lags[(d_s, p_s)] = (0, 1)
                lags[(p_s, p_s)] = (1,)
                entries[(1, d_s, p_s)] = self.beta_p1
                entries[(1, p_s, p_s)] = -self.beta_p1 / dlt
            noise = np.zeros(dim)
            noise[w - 1] = self.sigma_w**2
            noise[v_s - 1] = self.sigma_d**2
            noise[p_s - 1] = (self.sigma_s / dlt) ** 2
        for h, a in enumerate(self.wind_ar):
            if a != 0.0:
                lags.setdefault((w, w), ())
                lags[(w, w)] = tuple(sorted(set(lags[(w, w)]) | {h + 1}))
                entries[(h + 1, w, w)] = a
        graph = LagStructure(d_u=d_u, d_o=d_o, lags=lags)
        coeffs: dict[int, np.ndarray] = {}
        for (h, tgt, src), value in entries.items():
            coeffs.setdefault(h, np.zeros((dim, dim)))[tgt - 1, src - 1] = value
        return SvarParams(graph=graph, coeffs=coeffs, noise_var=noise)

    # ------------------------------------------------------------------
    # simulation (market equations verbatim, with intercepts)
    # ------------------------------------------------------------------

    def simulate(
        self, t_len: int, reps: int = 1, seed: int | None = None, burnin: int = 1000
    ) -> np.ndarray:
        """Simulate (reps, t_len, 2) observed series, columns (P, D)."""
        rng = np.random.default_rng(seed)
        total = burnin + t_len
        q = len(self.wind_ar)
        dlt = self.delta
        w = np.zeros((reps, total + q))
        eps_w = rng.normal(0.0, self.sigma_w, size=(reps, total))
        ar = np.asarray(self.wind_ar)
        for t in range(total):
            acc = eps_w[:, t].copy()
            for h in range(1, q + 1):
                acc += ar[h - 1] * w[:, q + t - h]
            w[:, q + t] = acc
        w = w[:, q:]
        u_s = rng.normal(0.0, self.sigma_s, size=(reps, total))
        p = np.zeros((reps, total + 1))
        d = np.zeros((reps, total + 1))
        base = (self.s0 - self.d0) / dlt
        if self.variant == 2:
            u_a = rng.normal(0.0, self.sigma_ab, size=(reps, total))
            u_b = rng.normal(0.0, self.sigma_ab, size=(reps, total))
            b = np.zeros((reps, total + 1))
            for t in range(total):
                u_d = u_a[:, t] + u_b[:, t]
                p[:, t + 1] = (
                    base
                    + self.gamma_w / dlt * w[:, t]
                    + self.beta_b1 / dlt * b[:, t]
                    + (u_s[:, t] - u_d) / dlt
                )
                d[:, t + 1] = self.d0 + self.beta_p * p[:, t + 1] + self.beta_b1 * b[:, t] + u_d
                b[:, t + 1] = self.b0 + self.beta_b1 * b[:, t] + u_b[:, t]
        else:
            u_d = rng.normal(0.0, self.sigma_d, size=(reps, total))
            for t in range(total):
                if self.variant == 1:
                    carry_p = -self.beta_d1 / dlt * d[:, t]
                    carry_d = self.beta_d1 * d[:, t]
                else:
                    carry_p = -self.beta_p1 / dlt * p[:, t]
                    carry_d = self.beta_p1 * p[:, t]
                p[:, t + 1] = (
                    base
                    + self.gamma_w / dlt * w[:, t]
                    + carry_p
                    + (u_s[:, t] - u_d[:, t]) / dlt
                )
                d[:, t + 1] = self.d0 + self.beta_p * p[:, t + 1] + carry_d + u_d[:, t]
        out = np.stack([p[:, 1 + burnin :], d[:, 1 + burnin :]], axis=-1)
        return out


# ----------------------------------------------------------------------
# estimator bank
# ----------------------------------------------------------------------

#: Row/column layouts over (series letter, time offset); the beta column
#: is the position of the contemporaneous price column.  ``wind_lag`` is
#: the smallest wind self-lag each layout presumes to exist.
_ROWS: dict[int, dict] = {
    1: {
        "r": (("P", -1), ("P", -2)),
        "c": (("P", 0), ("D", -1)),
        "beta_col": 0,
        "wind_lag": 1,
        "valid": frozenset({1}),
    },
    2: {
        "r": (("P", -1), ("P", -2)),
        "c": (("P", -1), ("P", 0)),
        "beta_col": 1,
        "wind_lag": 1,
        "valid": frozenset({3}),
    },
    3: {
        "r": (("P", -1), ("P", -2), ("P", -3)),
        "c": (("P", -1), ("P", 0), ("D", -1)),
        "beta_col": 1,
        "wind_lag": 1,
        "valid": frozenset({1, 3}),
    },
    4: {
        "r": (("P", -1), ("P", -3), ("P", -4)),
        "c": (("P", 0), ("D", 1), ("P", 1)),
        "beta_col": 0,
        "wind_lag": 2,
        "valid": frozenset({2}),
    },
    5: {
        "r": (("P", -1), ("P", -2), ("P", -3), ("P", -4), ("P", -5)),
        "c": (("P", -1), ("D", -1), ("P", 0), ("D", 2), ("P", 2)),
        "beta_col": 2,
        "wind_lag": 4,
        "valid": frozenset({1, 2, 3}),
    },
}

ESTIMATOR_ROWS = tuple(sorted(_ROWS))


def estimator_validity() -> dict[tuple[int, int], bool]:
    """(row, variant) -> whether the layout is valid for that variant."""
    return {
        (row, variant): variant in _ROWS[row]["valid"]
        for row in ESTIMATOR_ROWS
        for variant in (1, 2, 3)
    }


def required_wind_lag(row: int) -> int:
    return _ROWS[row]["wind_lag"]


def row_spec(row: int, model: ElectricityModel) -> EstimatorSpec:
    """Instantiate an estimator layout against a model's series indices."""
    if row not in _ROWS:
        raise KeyError(f"unknown estimator row {row}; choose from {ESTIMATOR_ROWS}")
    if required_wind_lag(row) not in model.wind_lags:
        raise ValueError(
            f"estimator row {row} presumes a wind self-lag {required_wind_lag(row)}, "
            f"but the wind process has lags {model.wind_lags}"
        )
    layout = _ROWS[row]
    idx = model.series_index()

    def vx(spec: tuple[str, int]) -> Vertex:
        return Vertex(idx[spec[0]], spec[1])

    c = tuple(vx(s) for s in layout["c"])
    return EstimatorSpec(
        target=Vertex(idx["D"], 0),
        r=tuple(vx(s) for s in layout["r"]),
        c=c,
        coeff_map=(CoeffColumn(layout["beta_col"], 0, idx["P"]),),
        provenance=f"electricity:row{row}",
    )


def population_beta(model: ElectricityModel, row: int, cond_threshold: float = 1e12) -> float:
    """Exact-covariance value the estimator converges to under this model."""
    params = model.to_svar_params()
    spec = row_spec(row, model)
    provider = ExactCovarianceProvider(params)
    est = solve_effects(build_system(provider, spec), cond_threshold=cond_threshold)
    return est.coefficient(0, model.series_index()["P"])


@dataclass(frozen=True)
class SemisynthResult:
    estimates: np.ndarray
    failures: int

    @property
    def q025(self) -> float:
        return float(np.percentile(self.estimates, 2.5))

    @property
    def q975(self) -> float:
        return float(np.percentile(self.estimates, 97.5))


def semisynthetic_quantiles(
    model: ElectricityModel,
    row: int,
    t_len: int = 27_072,
    repetitions: int = 1000,
    seed: int | None = None,
    demean: bool = True,
) -> SemisynthResult:
    """Repeated-simulation estimate distribution for one (model, row) pair."""
    spec = row_spec(row, model)
    idx = model.series_index()
    columns = (idx["P"], idx["D"])
    data = model.simulate(t_len, reps=repetitions, seed=seed)
    estimates = []
    failures = 0
    for rep in range(repetitions):
        try:
            est = estimate_from_data(data[rep], spec, columns, demean=demean)
        except (NumericalError, ValueError):
            failures += 1
            continue
        estimates.append(est.coefficient(0, idx["P"]))
    return SemisynthResult(estimates=np.asarray(estimates), failures=failures)
