"""Batch command-line front end.

Subcommands cover simulation, exact covariances, identification,
estimation, bootstrap intervals, and the three experiment suites.  Every
run writes its artifacts plus a manifest echoing the resolved
configuration; reruns with the same configuration and seed produce
byte-identical artifacts (timestamps live only in the manifest).

Exit codes: 0 success, 2 configuration/schema violation, 3 numerical
failure.  Errors are also written as a machine-readable record.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import EXAMPLES
from .electricity import (
    ESTIMATOR_ROWS,
    ElectricityModel,
    estimator_validity,
    population_beta,
    row_spec,
    semisynthetic_quantiles,
)
from .estimate import block_bootstrap, estimate_from_data
from .experiments import (
    RandomGraphProtocol,
    convergence_study,
    draw_instances,
    replicate_example,
)
from .graph import GraphError, LagStructure
from .identify import EstimatorSpec, IdentificationError, delta_sweep, select_spec
from .svar import NumericalError, SvarParams, exact_autocov, simulate

CONFIG_ERROR = 2
NUMERICAL_ERROR = 3


class ConfigError(ValueError):
    pass


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("SVARID_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"SVARID_SEED={env!r} is not an integer") from None
    return 0


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path: Path, rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(rows)


def _write_manifest(out: Path, command: str, config: dict) -> None:
    _write_json(
        out / "manifest.json",
        {
            "command": command,
            "config": config,
            "version": __version__,
            "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        },
    )


def _read_data_csv(path: str, graph_hint: LagStructure | None = None) -> tuple[np.ndarray, list[str]]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(x) for x in row] for row in reader if row]
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    except (ValueError, StopIteration) as exc:
        raise ConfigError(f"malformed data CSV {path}: {exc}") from None
    return np.asarray(rows, dtype=float), [h.strip() for h in header]


def _data_columns_to_series(graph: LagStructure, names: list[str]) -> tuple[int, ...]:
    try:
        return tuple(graph.parse_series(name) for name in names)
    except GraphError as exc:
        raise ConfigError(str(exc)) from None


def _parse_delta(text: str) -> tuple[int, int]:
    try:
        lo_s, hi_s = text.split("..", maxsplit=1)
        lo, hi = int(lo_s), int(hi_s)
    except ValueError:
        raise ConfigError(f"--delta expects 'LO..HI', got {text!r}") from None
    # lo > hi is a legal empty sweep: no placements, empty hit list.
    return lo, hi


def _parse_grid(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise ConfigError(f"--t-grid expects comma-separated integers, got {text!r}") from None


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------


def _cmd_simulate(args) -> None:
    params = SvarParams.from_json(_load_json(args.params))
    seed = _resolve_seed(args.seed)
    data = simulate(params, args.t, burnin=args.burnin, seed=seed)
    g = params.graph
    header = [g.series_name(i) for i in range(1, g.d + 1)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "data.csv", [header] + [[repr(float(v)) for v in row] for row in data])
    _write_manifest(
        out,
        "simulate",
        {"params": args.params, "t": args.t, "burnin": args.burnin, "seed": seed},
    )


def _cmd_exact_cov(args) -> None:
    params = SvarParams.from_json(_load_json(args.params))
    table = exact_autocov(params, args.h_max)
    g = params.graph
    rows = [["h", "target", "source", "value"]]
    for h in range(table.h_max + 1):
        gamma = table.gamma(h)
        for i in range(1, g.d + 1):
            for j in range(1, g.d + 1):
                rows.append([h, g.series_name(i), g.series_name(j), repr(float(gamma[i - 1, j - 1]))])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "covariance.csv", rows)
    _write_manifest(out, "exact-cov", {"params": args.params, "h_max": args.h_max})


def _cmd_identify(args) -> None:
    graph = LagStructure.from_json(_load_json(args.graph))
    delta = _parse_delta(args.delta)
    hits = delta_sweep(
        graph, delta, verify_upsilon=args.verify_upsilon, tight_tau=not args.conservative_tau
    )
    payload = {
        "delta_range": list(delta),
        "hits": [
            {
                "certificate": hit.certificate.to_json(graph),
                "spec": hit.spec.to_json(graph),
            }
            for hit in hits
        ],
    }
    if hits:
        chosen = select_spec(hits)
        payload["selected"] = {
            "certificate": chosen.certificate.to_json(graph),
            "spec": chosen.spec.to_json(graph),
        }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "identification.json", payload)
    _write_manifest(
        out,
        "identify",
        {
            "graph": args.graph,
            "delta": args.delta,
            "verify_upsilon": args.verify_upsilon,
            "conservative_tau": args.conservative_tau,
        },
    )


def _cmd_estimate(args) -> None:
    graph = LagStructure.from_json(_load_json(args.graph))
    spec = EstimatorSpec.from_json(graph, _load_json(args.spec))
    data, names = _read_data_csv(args.data)
    columns = _data_columns_to_series(graph, names)
    est = estimate_from_data(data, spec, columns, demean=args.demean)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "estimate.json", est.to_json(graph))
    _write_manifest(
        out,
        "estimate",
        {"graph": args.graph, "spec": args.spec, "data": args.data, "demean": args.demean},
    )


def _cmd_bootstrap(args) -> None:
    graph = LagStructure.from_json(_load_json(args.graph))
    spec = EstimatorSpec.from_json(graph, _load_json(args.spec))
    data, names = _read_data_csv(args.data)
    columns = _data_columns_to_series(graph, names)
    seed = _resolve_seed(args.seed)
    result = block_bootstrap(
        data,
        spec,
        columns,
        block_len=args.block_len,
        replicates=args.reps,
        seed=seed,
        demean=args.demean,
    )
    target = graph.series_name(spec.target.series)
    quantiles = {
        f"A[{lag}][{target}][{graph.series_name(source)}]": list(bounds)
        for (lag, source), bounds in result.quantiles().items()
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(
        out / "bootstrap.json",
        {
            "replicates": args.reps,
            "block_len": args.block_len,
            "failures": result.failures,
            "quantiles_2.5_97.5": quantiles,
        },
    )
    header = [
        f"A[{lag}][{target}][{graph.series_name(source)}]" for lag, source in result.coeff_keys
    ]
    _write_csv(
        out / "replicates.csv",
        [header] + [[repr(float(v)) for v in row] for row in result.estimates],
    )
    _write_manifest(
        out,
        "bootstrap",
        {
            "graph": args.graph,
            "spec": args.spec,
            "data": args.data,
            "block_len": args.block_len,
            "reps": args.reps,
            "seed": seed,
            "demean": args.demean,
        },
    )


def _cmd_experiment_random(args) -> None:
    seed = _resolve_seed(args.seed)
    fields = {"param_draws": args.param_draws}
    if args.config:
        raw = _load_json(args.config)
        raw = {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}
        try:
            protocol = RandomGraphProtocol(**{**raw, **fields})
        except TypeError as exc:
            raise ConfigError(f"protocol config invalid: {exc}") from None
    else:
        protocol = RandomGraphProtocol(**fields)
    instances, rejected = draw_instances(protocol, args.graphs, seed=seed)
    t_grid = _parse_grid(args.t_grid)
    study = convergence_study(
        instances, t_grid, seed=seed + 1, demean=args.demean, workers=args.threads
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "results.csv", study.to_csv_rows())
    _write_json(
        out / "summary.json",
        {
            "instances": len(instances),
            "rejected_structures": rejected,
            "failures": study.failures,
            "pooled_median_abs_error": {str(k): v for k, v in study.pooled_median().items()},
            "fraction_median_above_1": {str(k): v for k, v in study.fraction_above(1.0).items()},
        },
    )
    _write_manifest(
        out,
        "experiment-random",
        {
            "graphs": args.graphs,
            "param_draws": args.param_draws,
            "t_grid": args.t_grid,
            "seed": seed,
            "demean": args.demean,
        },
    )


def _cmd_replicate_example(args) -> None:
    if args.name not in EXAMPLES:
        raise ConfigError(f"unknown example {args.name!r}; choose from {sorted(EXAMPLES)}")
    seed = _resolve_seed(args.seed)
    t_grid = _parse_grid(args.t_grid)
    study = replicate_example(args.name, t_grid, args.params, seed=seed, demean=args.demean)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "results.csv", study.to_csv_rows())
    _write_json(
        out / "summary.json",
        {
            "example": args.name,
            "failures": study.failures,
            "pooled_median_abs_error": {str(k): v for k, v in study.pooled_median().items()},
        },
    )
    _write_manifest(
        out,
        "replicate-example",
        {
            "name": args.name,
            "t_grid": args.t_grid,
            "params": args.params,
            "seed": seed,
            "demean": args.demean,
        },
    )


def _cmd_electricity(args) -> None:
    config = _load_json(args.config)
    try:
        variant = int(config["model"])
        row = int(config["estimator_row"])
        model_kwargs = dict(config.get("parameters", {}))
        t_len = int(config.get("t", 27_072))
        reps = int(config.get("repetitions", 1000))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"electricity config invalid: {exc}") from None
    if "wind_ar_csv" in model_kwargs:
        path = model_kwargs.pop("wind_ar_csv")
        try:
            with open(path, "r", encoding="utf-8") as fh:
                coeffs = [float(line.strip().split(",")[0]) for line in fh if line.strip()]
        except (FileNotFoundError, ValueError) as exc:
            raise ConfigError(f"wind coefficient CSV invalid: {exc}") from None
        model_kwargs["wind_ar"] = tuple(coeffs)
    if "wind_ar" in model_kwargs:
        model_kwargs["wind_ar"] = tuple(model_kwargs["wind_ar"])
    if row not in ESTIMATOR_ROWS:
        raise ConfigError(f"estimator_row must be one of {ESTIMATOR_ROWS}")
    seed = _resolve_seed(args.seed)
    try:
        model = ElectricityModel(variant=variant, **model_kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"electricity model invalid: {exc}") from None
    result = semisynthetic_quantiles(model, row, t_len=t_len, repetitions=reps, seed=seed)
    pop = population_beta(model, row)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(
        out / "quantiles.json",
        {
            "model": variant,
            "estimator_row": row,
            "valid_per_table": estimator_validity()[(row, variant)],
            "t": t_len,
            "repetitions": reps,
            "failures": result.failures,
            "q2.5": result.q025,
            "q97.5": result.q975,
            "population_estimate": pop,
            "true_beta_p": model.beta_p,
        },
    )
    _write_csv(
        out / "replicates.csv",
        [["estimate"]] + [[repr(float(v))] for v in result.estimates],
    )
    _write_manifest(
        out, "electricity", {"config": args.config, "seed": seed, "t": t_len, "reps": reps}
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svarid",
        description="Direct-effect identification and estimation for confounded SVAR series",
    )
    parser.add_argument("--version", action="version", version=f"svarid {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a parameterised process to CSV")
    sim.add_argument("--params", required=True)
    sim.add_argument("--t", type=int, required=True)
    sim.add_argument("--burnin", type=int, default=1000)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=_cmd_simulate)

    cov = sub.add_parser("exact-cov", help="population autocovariances to CSV")
    cov.add_argument("--params", required=True)
    cov.add_argument("--h-max", type=int, default=10)
    cov.add_argument("--out", required=True)
    cov.set_defaults(func=_cmd_exact_cov)

    ident = sub.add_parser("identify", help="sweep future-block placements on a graph")
    ident.add_argument("--graph", required=True)
    ident.add_argument("--delta", required=True, help="range LO..HI")
    ident.add_argument("--verify-upsilon", action="store_true")
    ident.add_argument(
        "--conservative-tau",
        action="store_true",
        help="use the conservative shift rule instead of reachability tightening",
    )
    ident.add_argument("--out", required=True)
    ident.set_defaults(func=_cmd_identify)

    est = sub.add_parser("estimate", help="solve a spec against data")
    est.add_argument("--graph", required=True)
    est.add_argument("--spec", required=True)
    est.add_argument("--data", required=True)
    est.add_argument("--demean", action=argparse.BooleanOptionalAction, default=True)
    est.add_argument("--out", required=True)
    est.set_defaults(func=_cmd_estimate)

    boot = sub.add_parser("bootstrap", help="moving-block bootstrap intervals")
    boot.add_argument("--graph", required=True)
    boot.add_argument("--spec", required=True)
    boot.add_argument("--data", required=True)
    boot.add_argument("--block-len", type=int, default=500)
    boot.add_argument("--reps", type=int, default=1000)
    boot.add_argument("--seed", type=int, default=None)
    boot.add_argument("--demean", action=argparse.BooleanOptionalAction, default=True)
    boot.add_argument("--out", required=True)
    boot.set_defaults(func=_cmd_bootstrap)

    rand = sub.add_parser("experiment-random", help="random-graph convergence study")
    rand.add_argument("--config", default=None, help="JSON overriding the sampling protocol")
    rand.add_argument("--graphs", type=int, default=100)
    rand.add_argument("--param-draws", type=int, default=10)
    rand.add_argument("--t-grid", default="100,1000,10000,100000")
    rand.add_argument("--seed", type=int, default=None)
    rand.add_argument("--demean", action=argparse.BooleanOptionalAction, default=False)
    rand.add_argument("--out", required=True)
    rand.set_defaults(func=_cmd_experiment_random)

    repl = sub.add_parser("replicate-example", help="convergence run on a built-in example")
    repl.add_argument("--name", required=True, choices=sorted(EXAMPLES))
    repl.add_argument("--t-grid", default="100,1000,10000,100000")
    repl.add_argument("--params", type=int, default=100)
    repl.add_argument("--seed", type=int, default=None)
    repl.add_argument("--demean", action=argparse.BooleanOptionalAction, default=False)
    repl.add_argument("--out", required=True)
    repl.set_defaults(func=_cmd_replicate_example)

    elec = sub.add_parser("electricity", help="semi-synthetic market study")
    elec.add_argument("--config", required=True)
    elec.add_argument("--seed", type=int, default=None)
    elec.add_argument("--out", required=True)
    elec.set_defaults(func=_cmd_electricity)

    # Accepted for interface compatibility; current commands run single-threaded.
    parser.add_argument("--threads", type=int, default=1)
    return parser


def _error_record(out_dir: str | None, kind: str, message: str) -> None:
    record = {"error": {"type": kind, "message": message}}
    sys.stderr.write(json.dumps(record) + "\n")
    if out_dir:
        try:
            path = Path(out_dir)
            path.mkdir(parents=True, exist_ok=True)
            _write_json(path / "error.json", record)
        except OSError:
            pass


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out_dir = getattr(args, "out", None)
    try:
        args.func(args)
    except (ConfigError, GraphError) as exc:
        _error_record(out_dir, "config", str(exc))
        return CONFIG_ERROR
    except (NumericalError, IdentificationError) as exc:
        _error_record(out_dir, "numerical", str(exc))
        return NUMERICAL_ERROR
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
