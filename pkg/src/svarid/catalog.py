"""Built-in demonstration graphs with known-good estimator layouts.

Each entry bundles a lag structure, the certificate sets that make the
target's direct effects identifiable, and the concrete row/column layout
whose solution carries those effects.  They double as regression anchors:
solving each system with exact covariances must recover the generating
coefficients for any stable parameter draw.

Entries (series named U*/O*, with O1 the target series Y):

``selfdep``
    One latent, one observed series; the observed self-dependence at lag 3
    is the effect of interest.  Parametrisable self-lag (> 1).
``crosslag``
    One latent with self-lags {1, 2}, two observed series; identifies a
    lag-5 cross effect and the lag-1 self effect.
``feedback``
    One latent, two observed series with a feedback edge between them;
    identifies one cross and two self effects.
``twolatent``
    Two dependent latent series; the certificate is specified manually
    (no single-latent construction applies).  Identifies a lag-5 cross and
    the lag-2 self effect.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import LagStructure, Vertex
from .identify import Certificate, CoeffColumn, EstimatorSpec


@dataclass(frozen=True)
class WorkedExample:
    name: str
    graph: LagStructure
    spec: EstimatorSpec
    certificate: Certificate
    headline: tuple[CoeffColumn, ...]  # the effects the example showcases


def selfdep(self_lag: int = 3) -> WorkedExample:
    if self_lag <= 1:
        raise ValueError("selfdep requires an observed self-lag > 1")
    l = self_lag
    g = LagStructure(d_u=1, d_o=1, lags={(1, 1): (1,), (2, 2): (l,), (2, 1): (1,)})
    y = Vertex(2, 0)
    spec = EstimatorSpec(
        target=y,
        r=(Vertex(2, -l), Vertex(2, -l + 1), Vertex(2, -l - 1)),
        c=(Vertex(2, -l), Vertex(2, l + 1), Vertex(2, 1)),
        coeff_map=(CoeffColumn(0, l, 2),),
        provenance="catalog:selfdep",
    )
    cert = Certificate(
        b_u=frozenset({Vertex(1, -1)}),
        f_obs=frozenset({Vertex(2, l + 1)}),
        target=y,
        delta=l + 1,
        anchor=2,
    )
    return WorkedExample("selfdep", g, spec, cert, spec.coeff_map)


def crosslag() -> WorkedExample:
    g = LagStructure(
        d_u=1,
        d_o=2,
        lags={
            (1, 1): (1, 2),
            (2, 2): (1,),
            (3, 3): (1,),
            (2, 3): (5,),
            (2, 1): (2, 3),
            (3, 1): (1, 2),
        },
    )
    y = Vertex(2, 0)
    spec = EstimatorSpec(
        target=y,
        r=(Vertex(3, -5), Vertex(2, -2), Vertex(3, -3), Vertex(3, -6), Vertex(3, -7)),
        c=(Vertex(3, -5), Vertex(2, -1), Vertex(3, 2), Vertex(3, 3), Vertex(3, 1)),
        coeff_map=(CoeffColumn(0, 5, 3), CoeffColumn(1, 1, 2)),
        provenance="catalog:crosslag",
    )
    cert = Certificate(
        b_u=frozenset({Vertex(1, -3), Vertex(1, -2)}),
        f_obs=frozenset({Vertex(3, 2), Vertex(3, 3)}),
        target=y,
        delta=2,
        anchor=3,
    )
    return WorkedExample("crosslag", g, spec, cert, spec.coeff_map)


def feedback() -> WorkedExample:
    g = LagStructure(
        d_u=1,
        d_o=2,
        lags={
            (1, 1): (1,),
            (2, 2): (1, 3),
            (3, 3): (2,),
            (2, 3): (3,),
            (3, 2): (1,),
            (2, 1): (1, 2),
            (3, 1): (4, 5),
        },
    )
    y = Vertex(2, 0)
    spec = EstimatorSpec(
        target=y,
        r=(
            Vertex(3, -3),
            Vertex(2, -5),
            Vertex(2, -4),
            Vertex(2, -3),
            Vertex(3, -2),
            Vertex(3, -4),
        ),
        c=(
            Vertex(3, -3),
            Vertex(2, -1),
            Vertex(2, -3),
            Vertex(3, 2),
            Vertex(3, 0),
            Vertex(2, 1),
        ),
        coeff_map=(CoeffColumn(0, 3, 3), CoeffColumn(1, 1, 2), CoeffColumn(2, 3, 2)),
        provenance="catalog:feedback",
    )
    cert = Certificate(
        b_u=frozenset({Vertex(1, -3)}),
        f_obs=frozenset({Vertex(3, 2)}),
        target=y,
        delta=2,
        anchor=3,
    )
    return WorkedExample("feedback", g, spec, cert, spec.coeff_map)


def twolatent() -> WorkedExample:
    g = LagStructure(
        d_u=2,
        d_o=2,
        lags={
            (1, 1): (1,),
            (2, 2): (1,),
            (2, 1): (1,),
            (3, 3): (2,),
            (4, 4): (2,),
            (3, 4): (5,),
            (3, 2): (2, 3),
            (4, 1): (1, 2),
        },
    )
    y = Vertex(3, 0)
    spec = EstimatorSpec(
        target=y,
        r=(
            Vertex(3, -4),
            Vertex(3, -3),
            Vertex(3, -2),
            Vertex(4, -6),
            Vertex(4, -5),
            Vertex(4, -4),
            Vertex(4, -3),
        ),
        c=(
            Vertex(4, -5),
            Vertex(3, -2),
            Vertex(3, 3),
            Vertex(4, 3),
            Vertex(3, 1),
            Vertex(4, -2),
            Vertex(4, 1),
        ),
        coeff_map=(CoeffColumn(0, 5, 4), CoeffColumn(1, 2, 3)),
        provenance="catalog:twolatent",
    )
    cert = Certificate(
        b_u=frozenset({Vertex(1, -3), Vertex(2, -3)}),
        f_obs=frozenset({Vertex(3, 3), Vertex(4, 3)}),
        target=y,
    )
    return WorkedExample("twolatent", g, spec, cert, spec.coeff_map)


EXAMPLES = {
    "selfdep": selfdep,
    "crosslag": crosslag,
    "feedback": feedback,
    "twolatent": twolatent,
}


def worked_example(name: str) -> WorkedExample:
    try:
        factory = EXAMPLES[name]
    except KeyError:
        raise KeyError(f"unknown example {name!r}; choose from {sorted(EXAMPLES)}") from None
    return factory()
