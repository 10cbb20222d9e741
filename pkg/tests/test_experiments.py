"""Random-graph study pipeline and the semi-synthetic market study."""

from __future__ import annotations

import numpy as np
import pytest

from svarid.electricity import (
    ESTIMATOR_ROWS,
    ElectricityModel,
    estimator_validity,
    population_beta,
    required_wind_lag,
    row_spec,
    semisynthetic_quantiles,
)
from svarid.estimate import IllConditionedError
from svarid.experiments import (
    RandomGraphProtocol,
    RejectionReport,
    cross_effect_column,
    convergence_study,
    draw_instances,
    draw_random_instance,
    draw_structure,
    replicate_example,
)
from svarid.svar import spectral_margin


class TestRandomGraphProtocol:
    def test_structure_draw_respects_protocol(self, rng):
        proto = RandomGraphProtocol()
        for _ in range(20):
            g = draw_structure(proto, rng)
            assert g.d_u == 1 and g.d_o == 2
            assert g.lags_between(2, 3)  # the cross edge always exists
            assert not g.lags_between(3, 2)
            for pair, lags in g.lags.items():
                target, source = pair
                pool = proto.self_lag_pool if target == source else proto.cross_lag_pool
                assert set(lags) <= set(pool)
                assert len(set(lags)) == len(lags)

    def test_instance_draw_deterministic(self):
        proto = RandomGraphProtocol(param_draws=2)
        a = draw_random_instance(proto, seed=77)
        b = draw_random_instance(proto, seed=77)
        assert not isinstance(a, RejectionReport)
        assert a.graph.lags == b.graph.lags
        for pa, pb in zip(a.params, b.params):
            for h in pa.coeffs:
                assert np.array_equal(pa.coeff_matrix(h), pb.coeff_matrix(h))

    def test_instances_stable_within_margin(self):
        proto = RandomGraphProtocol(param_draws=3)
        instances, _ = draw_instances(proto, 5, seed=3)
        assert instances
        for inst in instances:
            for params in inst.params:
                assert spectral_margin(params) <= proto.max_margin

    def test_rejection_report_when_budget_exhausted(self):
        proto = RandomGraphProtocol(param_draws=2)
        report = draw_random_instance(proto, seed=1, max_structures=0)
        assert isinstance(report, RejectionReport)
        assert "no identifiable structure" in report.reason

    def test_cross_effect_column_present(self):
        proto = RandomGraphProtocol(param_draws=1)
        instances, _ = draw_instances(proto, 3, seed=11)
        for inst in instances:
            lag, source = cross_effect_column(inst.graph, inst.spec)
            assert source == 3
            assert lag == inst.graph.lags_between(2, 3)[0]


class TestConvergenceStudy:
    def test_rows_schema_and_determinism(self):
        proto = RandomGraphProtocol(param_draws=2)
        instances, _ = draw_instances(proto, 3, seed=21)
        res1 = convergence_study(instances, [200, 2000], seed=5)
        res2 = convergence_study(instances, [200, 2000], seed=5)
        assert res1.to_csv_rows() == res2.to_csv_rows()
        assert res1.rows[0].coefficient.startswith("A[")
        med = res1.median_errors()
        assert all((i, t) in med for i in range(3) for t in (200, 2000))

    def test_worker_count_does_not_change_results(self):
        proto = RandomGraphProtocol(param_draws=2)
        instances, _ = draw_instances(proto, 3, seed=21)
        serial = convergence_study(instances, [200, 2000], seed=5, workers=1)
        parallel = convergence_study(instances, [200, 2000], seed=5, workers=2)
        assert serial.to_csv_rows() == parallel.to_csv_rows()

    def test_errors_shrink_with_t(self):
        proto = RandomGraphProtocol(param_draws=3)
        instances, _ = draw_instances(proto, 6, seed=31)
        res = convergence_study(instances, [200, 2000, 20_000], seed=6)
        pooled = res.pooled_median()
        assert pooled[200] > pooled[2000] > pooled[20_000]

    def test_replicate_example_all_names(self):
        # Two decades of series length separate the medians cleanly even at
        # this reduced draw count.
        for name in ("selfdep", "crosslag", "feedback", "twolatent"):
            res = replicate_example(name, [150, 15_000], n_params=8, seed=8)
            pooled = res.pooled_median()
            assert pooled[150] > pooled[15_000], name
            assert res.failures == 0

    def test_twolatent_estimates_both_headline_effects(self):
        res = replicate_example("twolatent", [400], n_params=2, seed=9)
        names = {row.coefficient for row in res.rows}
        assert names == {"A[5][O1][O2]", "A[2][O1][O1]"}


class TestElectricityModels:
    def test_structural_form_is_stable(self):
        for variant in (1, 2, 3):
            model = ElectricityModel(variant=variant)
            margin = spectral_margin(model.to_svar_params())
            assert margin < 1.0

    def test_validity_table_reproduced_in_population(self):
        # Every checkmark is population-exact; every cross is biased by
        # more than 0.1 or yields a singular system (loud failure).
        for (row, variant), valid in sorted(estimator_validity().items()):
            wind = (0.4, 0.2, 0.0, 0.2) if required_wind_lag(row) > 2 else (0.7, 0.2)
            model = ElectricityModel(variant=variant, wind_ar=wind)
            if valid:
                beta = population_beta(model, row)
                assert beta == pytest.approx(model.beta_p, abs=1e-6), (row, variant)
            else:
                try:
                    beta = population_beta(model, row)
                except IllConditionedError:
                    continue
                assert abs(beta - model.beta_p) > 0.1, (row, variant)

    def test_row5_requires_lag4_wind(self):
        model = ElectricityModel(variant=1)
        with pytest.raises(ValueError, match="wind self-lag"):
            row_spec(5, model)

    def test_simulation_matches_structural_covariances(self):
        # The verbatim market recursion and the structural VAR mapping
        # describe the same process: compare observed covariances.
        from svarid.svar import exact_autocov, sample_autocov

        model = ElectricityModel(variant=2, sigma_w=500.0)
        params = model.to_svar_params()
        idx = model.series_index()
        table = exact_autocov(params, 2)
        data = model.simulate(120_000, reps=1, seed=99)[0]
        data = data - data.mean(axis=0)
        for h in (0, 1, 2):
            got = sample_autocov(data, h)
            for a, name_a in enumerate(("P", "D")):
                for b, name_b in enumerate(("P", "D")):
                    t_idx = (idx[name_a] - 1, idx[name_b] - 1)
                    want = table.gamma(h)[t_idx]
                    scale = np.sqrt(
                        table.gamma(0)[t_idx[0], t_idx[0]] * table.gamma(0)[t_idx[1], t_idx[1]]
                    )
                    assert abs(got[a, b] - want) < 0.15 * scale, (h, name_a, name_b)

    def test_semisynthetic_interval_brackets_truth(self):
        model = ElectricityModel(variant=1, sigma_w=100_000.0)
        result = semisynthetic_quantiles(model, 1, t_len=8000, repetitions=40, seed=13)
        assert result.failures == 0
        assert result.q025 < model.beta_p < result.q975

    def test_simulation_deterministic(self):
        model = ElectricityModel(variant=3)
        a = model.simulate(500, reps=2, seed=4)
        b = model.simulate(500, reps=2, seed=4)
        assert np.array_equal(a, b)

    def test_beta_gamma_degeneracy_rejected(self):
        with pytest.raises(ValueError, match="nonzero"):
            ElectricityModel(variant=1, beta_p=500.0, gamma_p=500.0)
