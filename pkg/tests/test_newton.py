"""Outer driver: step schedule, phases, warm starts, curvature diagnostics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subnewton.baselines import FistaConfig, fista_solve
from subnewton.data import generate_synthetic
from subnewton.errors import NumericsError
from subnewton.inner import InnerConfig
from subnewton.newton import (
    OuterConfig,
    inner_target,
    phase1_step,
    selfconcordance_check,
    solve,
    zeta,
    zeta_star,
)
from subnewton.objectives import Regularizer, RidgeSplit, SmoothLoss, full_objective

from oracles import dense_hessian, dense_model


class TestScalarGauges:
    def test_known_values(self):
        # 0.5 - ln 1.5 and -0.5 - ln 0.5, hand-checked
        assert zeta(0.5) == pytest.approx(0.094534891892, rel=1e-9)
        assert zeta_star(0.5) == pytest.approx(0.193147180560, rel=1e-9)
        assert zeta(0.0) == 0.0
        assert zeta_star(0.0) == 0.0

    def test_domains(self):
        with pytest.raises(ValueError):
            zeta(-1e-9)
        with pytest.raises(ValueError):
            zeta_star(-1e-9)
        with pytest.raises(ValueError):
            zeta_star(1.0)

    @given(x=st.floats(1e-6, 0.95))
    @settings(max_examples=80, deadline=None)
    def test_bracket_around_quadratic(self, x):
        # zeta <= x^2/2 <= zeta_star on the shared domain
        assert zeta(x) <= x * x / 2 + 1e-15
        assert zeta_star(x) >= x * x / 2 - 1e-15


class TestStepSchedule:
    def test_damped_step_value(self):
        assert phase1_step(0.9, 0.1, 1.0) == pytest.approx(0.434010343260, rel=1e-9)

    def test_damped_step_limits(self):
        # vanishing decrement: eta -> theta - beta
        assert phase1_step(0.9, 0.05, 0.0) == pytest.approx(0.85)
        # huge decrement: eta -> sqrt(1 - beta) / lam, so eta * lam stays bounded
        lam = 1e6
        assert phase1_step(0.9, 0.05, lam) * lam == pytest.approx(
            math.sqrt(0.95), rel=1e-5
        )

    def test_damped_step_validation(self):
        with pytest.raises(ValueError):
            phase1_step(1.2, 0.1, 1.0)
        with pytest.raises(ValueError):
            phase1_step(0.5, 0.6, 1.0)
        with pytest.raises(ValueError):
            phase1_step(0.9, 0.1, -1.0)

    def test_inner_target_values(self):
        target, eps = inner_target(0.9, 0.2, 0.05)
        assert target == pytest.approx(0.019518001459, rel=1e-9)
        assert eps == math.inf  # no spectral info given
        # theta=0.9, lam chosen so the dual target is exactly 0.1
        lam = 0.1 * math.sqrt(1.0) / (1.0 - 0.9)
        target, eps = inner_target(0.9, lam, 0.0, L=2.0, mu=1.0)
        assert target == pytest.approx(0.1, rel=1e-12)
        assert eps == pytest.approx(3.3333333333e-3, rel=1e-9)

    def test_inner_target_exact_conditioning(self):
        target, eps = inner_target(0.9, 1.0, 0.1, L=1.0, mu=1.0)
        assert eps == math.inf
        assert target == pytest.approx(0.1 / math.sqrt(1.1))

    def test_exact_solve_request_has_zero_target(self):
        target, _ = inner_target(1.0, 5.0, 0.05)
        assert target == 0.0


class TestOuterConfigValidation:
    def test_beta_range(self):
        with pytest.raises(ValueError, match="beta"):
            OuterConfig(beta=0.4)
        with pytest.raises(ValueError, match="beta"):
            OuterConfig(beta=0.0)

    def test_beta_below_theta(self):
        with pytest.raises(ValueError, match="theta"):
            OuterConfig(theta=0.2, beta=0.3)

    def test_misc_positivity(self):
        with pytest.raises(ValueError):
            OuterConfig(lambda_bar=0.0)
        with pytest.raises(ValueError):
            OuterConfig(eps_tol=0.0)
        with pytest.raises(ValueError):
            OuterConfig(max_outer=0)


def desk_problem(seed=11, n=300, d=8):
    data = generate_synthetic(n, d, density=0.5, label_noise=0.1, seed=seed)
    loss = SmoothLoss(kind="logistic")
    reg = Regularizer(kind="l1", lam1=1e-3, lam2=0.0)
    ridge = RidgeSplit(gamma=1e-2)
    return data, loss, reg, ridge


class TestSolve:
    def test_deterministic_given_seed(self):
        data, loss, reg, ridge = desk_problem()
        cfg = OuterConfig(seed=3, eps_tol=1e-8, max_outer=40)
        w1, rec1 = solve(data, loss, reg, ridge, cfg)
        w2, rec2 = solve(data, loss, reg, ridge, cfg)
        assert np.array_equal(w1, w2)
        assert [r.lambda_tilde for r in rec1] == [r.lambda_tilde for r in rec2]
        assert [r.F for r in rec1] == [r.F for r in rec2]

    def test_converges_and_certifies_gap(self):
        data, loss, reg, ridge = desk_problem()
        cfg = OuterConfig(seed=3, eps_tol=1e-8, max_outer=40)
        w, records = solve(data, loss, reg, ridge, cfg)
        assert len(records) < 40
        last = records[-1]
        assert last.lambda_tilde**2 / (1.0 - cfg.beta) <= cfg.eps_tol

        ref_cfg = FistaConfig(max_iters=60000, map_tol=1e-12)
        w_ref, _ = fista_solve(data, loss, reg, ridge, ref_cfg)
        gap = full_objective(data, loss, reg, ridge, w) - full_objective(
            data, loss, reg, ridge, w_ref
        )
        assert gap <= 2e-8

    def test_objective_monotone_united_with_phases(self):
        data, loss, reg, ridge = desk_problem()
        cfg = OuterConfig(seed=3, eps_tol=1e-10, max_outer=40)
        _, records = solve(data, loss, reg, ridge, cfg)
        values = [r.F for r in records]
        assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
        phases = [r.phase for r in records]
        assert phases[-1] == "II"
        # once the decrement enters the quadratic region it stays there
        first = phases.index("II")
        assert all(p == "II" for p in phases[first:])
        for r in records:
            if r.phase == "I":
                assert r.eta == phase1_step(cfg.theta, cfg.beta, r.lambda_tilde)
            else:
                assert r.eta == 1.0

    def test_warm_start_is_scaled_previous_direction(self):
        data, loss, reg, ridge = desk_problem()
        infos = []
        cfg = OuterConfig(seed=5, eps_tol=1e-9, max_outer=30, iteration_hook=infos.append)
        solve(data, loss, reg, ridge, cfg)
        assert len(infos) >= 3
        assert np.array_equal(infos[0].v_init, np.zeros(data.d))
        for prev, cur in zip(infos, infos[1:]):
            expected = (1.0 - prev.eta) * prev.v
            np.testing.assert_allclose(cur.v_init, expected, atol=1e-12)

    def test_trace_counters_accumulate(self):
        data, loss, reg, ridge = desk_problem()
        cfg = OuterConfig(seed=3, eps_tol=1e-8, max_outer=40)
        _, records = solve(data, loss, reg, ridge, cfg)
        evals = [r.comp_grad_evals for r in records]
        assert evals == sorted(evals)
        assert records[0].comp_grad_evals >= data.n
        assert [r.full_grad_evals for r in records] == list(range(1, len(records) + 1))
        assert all(r.wall_ms >= 0 for r in records)

    def test_exact_hessian_model_is_the_true_curvature(self):
        data, loss, reg, ridge = desk_problem(n=120, d=5)
        infos = []
        cfg = OuterConfig(
            theta=1.0,
            beta=1e-3,
            seed=0,
            eps_tol=1e-10,
            max_outer=30,
            exact_hessian=True,
            inner=InnerConfig(mode="certificate", epochs=40, target_rel=1.0),
            iteration_hook=infos.append,
        )
        w, records = solve(data, loss, reg, ridge, cfg)
        assert records[-1].lambda_tilde**2 <= 1e-10
        for info in infos[:3]:
            np.testing.assert_allclose(
                dense_model(info.Q),
                dense_hessian(data, loss, ridge, info.Q.anchor),
                rtol=1e-12,
                atol=1e-14,
            )

    def test_nonfinite_objective_aborts_with_context(self):
        data, loss, reg, ridge = desk_problem(n=50, d=4)
        data = type(data).from_rows(
            [[(j, v) for j, v in zip(*data.row(i))] for i in range(data.n)],
            np.where(data.labels > 0, 1.0, -1.0) * 1e200,
            d=data.d,
        )
        sq = SmoothLoss(kind="squared")
        cfg = OuterConfig(seed=0, max_outer=5)
        with np.errstate(over="ignore"), pytest.raises(
            NumericsError, match="non-finite"
        ) as exc_info:
            solve(data, sq, reg, ridge, cfg, w0=np.full(data.d, 1e200))
        assert exc_info.value.records == []

    def test_w0_dimension_checked(self):
        data, loss, reg, ridge = desk_problem(n=40, d=4)
        with pytest.raises(ValueError, match="dimension"):
            solve(data, loss, reg, ridge, OuterConfig(), w0=np.zeros(7))


class TestSelfConcordance:
    def test_radius_and_trials_validated(self):
        data, loss, _, ridge = desk_problem(n=40, d=4)
        with pytest.raises(ValueError, match="radius"):
            selfconcordance_check(data, loss, ridge, radius=1.0)
        with pytest.raises(ValueError, match="radius"):
            selfconcordance_check(data, loss, ridge, radius=0.0)
        with pytest.raises(ValueError, match="trials"):
            selfconcordance_check(data, loss, ridge, trials=0)

    def test_logistic_passes_clean(self):
        data = generate_synthetic(60, 5, density=0.8, label_noise=0.1, seed=2)
        loss = SmoothLoss(kind="logistic")
        ridge = RidgeSplit(gamma=0.5)
        report = selfconcordance_check(data, loss, ridge, trials=40, seed=0)
        assert report.trials == 40
        assert report.violations == 0
        assert report.hessian_violations == 0
        assert report.gradient_violations == 0
        assert report.value_violations == 0

    def test_scale_matches_data_radius(self):
        data = generate_synthetic(60, 5, density=0.8, label_noise=0.1, seed=2)
        loss = SmoothLoss(kind="logistic")
        ridge = RidgeSplit(gamma=0.5)
        report = selfconcordance_check(data, loss, ridge, trials=1, seed=0)
        assert report.scale == pytest.approx(
            report.row_norm_max**2 / (4.0 * ridge.gamma), rel=1e-12
        )
