import math

import numpy as np
import pytest

from erba import (
    Criterion,
    Engine,
    RadialKernel,
    ReductionConfig,
    SampledData,
    StopReason,
    default_tolerance,
    fit,
    gram_inverse,
    partition,
    run,
    score_folds,
    step,
)
from erba.reduction import ReductionState, Removed, Stopped

from conftest import random_nodes


def smooth_data(rng, n, d=2):
    X = random_nodes(rng, n, d, sep=0.02)
    return SampledData(X, np.exp(-((X - 0.3) ** 2).sum(axis=1)))


class TestConfig:
    def test_defaults(self):
        cfg = ReductionConfig(rho=4, tau=1.0)
        assert cfg.min_nodes == 9
        assert cfg.criterion is Criterion.RESIDUAL

    @pytest.mark.parametrize(
        "kwargs", [dict(rho=0), dict(tau=-1.0), dict(rho=3, min_nodes=3), dict(workers=0)]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ReductionConfig(**kwargs)


class TestPartition:
    def test_exact(self, rng):
        plan = partition(6, 3, rng)
        assert plan.sizes == (3, 3)
        assert sorted(np.concatenate(plan.folds)) == list(range(6))

    def test_remainder(self, rng):
        assert partition(7, 3, rng).sizes == (4, 3)

    def test_paper_grid(self, rng):
        plan = partition(625, 3, rng)
        assert plan.ell == 208
        assert sorted(plan.sizes) == [3] * 207 + [4]
        assert sorted(np.concatenate(plan.folds)) == list(range(625))

    def test_more_leftovers_than_folds(self, rng):
        plan = partition(29, 6, rng)
        assert plan.sizes == (8, 7, 7, 7)
        assert sorted(np.concatenate(plan.folds)) == list(range(29))

    def test_too_few(self, rng):
        with pytest.raises(ValueError):
            partition(2, 3, rng)

    def test_seeded(self):
        a = partition(50, 4, np.random.default_rng(3))
        b = partition(50, 4, np.random.default_rng(3))
        for p, q in zip(a.folds, b.folds):
            np.testing.assert_array_equal(p, q)


class TestScoreFolds:
    def test_zero_residual(self, matern, rng):
        data = SampledData(random_nodes(rng, 12, 2), np.zeros(12))
        model = fit(matern, data)
        plan = partition(12, 3, rng)
        for engine in Engine:
            np.testing.assert_array_equal(score_folds(model, plan, "residual", engine), 0.0)

    def test_two_node_power(self, matern, rng):
        X = np.array([[0.0, 0.0], [0.3, 0.4]])
        model = fit(matern, SampledData(X, [1.0, 2.0]))
        plan = partition(2, 1, rng)
        expected = math.sqrt(1 - math.exp(-0.5) ** 2)
        for engine in Engine:
            np.testing.assert_allclose(score_folds(model, plan, "power", engine), expected, rtol=1e-12)

    @pytest.mark.parametrize("criterion", list(Criterion))
    def test_engines_agree(self, criterion, matern, rng):
        data = smooth_data(rng, 20)
        model = fit(matern, data)
        plan = partition(20, 3, rng)
        fast = score_folds(model, plan, criterion, Engine.FAST)
        naive = score_folds(model, plan, criterion, Engine.NAIVE)
        np.testing.assert_allclose(fast, naive, rtol=1e-6)

    def test_threaded_naive_identical(self, matern, rng):
        data = smooth_data(rng, 30)
        model = fit(matern, data)
        plan = partition(30, 2, rng)
        serial = score_folds(model, plan, "power", "naive", workers=1)
        threaded = score_folds(model, plan, "power", "naive", workers=4)
        np.testing.assert_array_equal(serial, threaded)


class TestStep:
    def test_stops_when_all_scores_exceed(self, matern, rng):
        state = ReductionState.start(matern, smooth_data(rng, 15))
        out = step(state, ReductionConfig("power", tau=1e-9), np.random.default_rng(0))
        assert isinstance(out, Stopped)
        assert out.reason is StopReason.TOLERANCE_EXCEEDED
        assert out.state is state
        assert out.record.removed == ()

    def test_removes_lowest_fold(self, matern, rng):
        state = ReductionState.start(matern, smooth_data(rng, 15))
        out = step(state, ReductionConfig("residual", tau=1e3), np.random.default_rng(0))
        assert isinstance(out, Removed)
        assert out.record.j_star == int(np.argmin(out.record.scores))
        assert out.state.n == 15 - len(out.indices)
        assert not set(out.indices) & set(out.state.indices)

    def test_tie_break_lowest_index(self, matern, rng):
        state = ReductionState.start(matern, SampledData(random_nodes(rng, 12, 2), np.zeros(12)))
        out = step(state, ReductionConfig("residual", tau=1.0), np.random.default_rng(0))
        assert out.record.j_star == 0

    def test_engine_decisions_identical(self, matern, rng):
        data = smooth_data(rng, 50)
        outs = []
        for engine in Engine:
            state = ReductionState.start(matern, data)
            cfg = ReductionConfig("residual", engine, rho=3, tau=1.0)
            outs.append(step(state, cfg, np.random.default_rng(11)))
        assert outs[0].j_star == outs[1].j_star
        np.testing.assert_array_equal(outs[0].indices, outs[1].indices)


class TestRun:
    def test_zero_function_runs_to_floor(self, matern, rng):
        data = SampledData(random_nodes(rng, 40, 2), np.zeros(40))
        trace = run(data, matern, ReductionConfig("residual", rho=3, tau=1e-12))
        assert trace.stop_reason is StopReason.MIN_NODES_REACHED
        assert trace.final_size < 7
        assert trace.steps[-1].removed == ()

    def test_huge_tau(self, matern, rng):
        trace = run(smooth_data(rng, 30), matern, ReductionConfig("power", rho=2, tau=1e9))
        assert trace.stop_reason is StopReason.MIN_NODES_REACHED

    def test_tiny_tau_keeps_everything(self, matern, rng):
        data = SampledData(rng.uniform(size=(25, 2)), rng.normal(size=25))
        trace = run(data, matern, ReductionConfig("residual", rho=3, tau=1e-12))
        assert trace.stop_reason is StopReason.TOLERANCE_EXCEEDED
        assert len(trace.steps) == 1
        np.testing.assert_array_equal(trace.final_indices, np.arange(25))

    def test_max_steps(self, matern, rng):
        trace = run(smooth_data(rng, 40), matern, ReductionConfig("power", tau=1e9, max_steps=2))
        assert trace.stop_reason is StopReason.MAX_STEPS_REACHED
        assert [len(s.removed) > 0 for s in trace.steps] == [True, True, False]

    def test_needs_enough_nodes(self, matern, rng):
        with pytest.raises(ValueError):
            run(smooth_data(rng, 7), matern, ReductionConfig(rho=3, tau=1.0))

    def test_degenerate_fold_stops(self, rng, monkeypatch):
        from erba import era, reduction

        def boom(*args, **kwargs):
            raise era.DegenerateFoldError(5)

        monkeypatch.setattr(reduction.era, "fold_powers_fast", boom)
        trace = run(smooth_data(rng, 20), RadialKernel(), ReductionConfig("power", tau=1.0))
        assert trace.stop_reason is StopReason.DEGENERATE_FOLD
        assert trace.steps[-1].j_star == 5

    @pytest.mark.parametrize("criterion", list(Criterion))
    def test_engines_same_removals(self, criterion, matern, rng):
        data = smooth_data(rng, 60)
        tau = 5e-4 if criterion is Criterion.RESIDUAL else 0.3
        traces = [
            run(data, matern, ReductionConfig(criterion, engine, rho=3, tau=tau, seed=4))
            for engine in Engine
        ]
        assert [s.removed for s in traces[0].steps] == [s.removed for s in traces[1].steps]
        np.testing.assert_array_equal(traces[0].final_indices, traces[1].final_indices)


class TestDefaultTolerance:
    def test_residual(self):
        assert default_tolerance("residual", e_x=9.69e-5) == pytest.approx(1.938e-4)

    def test_zero_power(self):
        assert default_tolerance("power", power_values=np.zeros(3600), m_side=60) == 0.0

    def test_zero_tau_stops_immediately(self, matern, rng):
        trace = run(smooth_data(rng, 20), matern, ReductionConfig("power", tau=0.0))
        assert trace.stop_reason is StopReason.TOLERANCE_EXCEEDED
        assert trace.final_size == 20

    def test_power_formula(self):
        P = np.full(3600, 0.5)
        assert default_tolerance("power", power_values=P, m_side=60) == pytest.approx(2 * 30 / 60)

    def test_missing(self):
        with pytest.raises(ValueError):
            default_tolerance("residual")
        with pytest.raises(ValueError):
            default_tolerance("power", power_values=np.ones(4))
