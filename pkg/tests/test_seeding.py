"""Seed generators, preselection, and cursor-trace ingestion."""

import numpy as np
import pytest

from qmoves.problems import evaluate_fidelity, make_problem, make_problem_ms
from qmoves.seeding import (CursorTrace, SeedProvenance, binned_random_seed,
                            frequency_random_seed, preselect, random_seed,
                            trace_to_control)


@pytest.fixture(scope="module")
def bhw():
    return make_problem_ms("bhw", 0.02)


@pytest.fixture(scope="module")
def shakeup():
    return make_problem_ms("shakeup", 0.05)


class TestRandomSeed:
    def test_bounds_and_endpoints(self, bhw):
        rng = np.random.default_rng(0)
        for _ in range(5):
            ctrl = random_seed(bhw, rng)
            ctrl.check_bounds()
            assert np.array_equal(ctrl.values[0], [-1.0, -130.0])
            assert np.array_equal(ctrl.values[-1], [-1.0, -130.0])

    def test_per_step_exceedance_probability(self, bhw):
        # P(u1 > 1) = 0.25 for uniform draws on [-2, 2]; 29 consecutive such
        # steps are essentially unreachable for uncorrelated draws
        rng = np.random.default_rng(1)
        draws = np.concatenate([random_seed(bhw, rng).values[1:-1, 0]
                                for _ in range(400)])
        p = np.mean(draws > 1.0)
        assert p == pytest.approx(0.25, abs=0.01)
        assert 0.25**29 < 1e-17

    def test_empirical_mean_near_midpoint(self, bhw):
        rng = np.random.default_rng(2)
        draws = np.concatenate([random_seed(bhw, rng).values[1:-1, 0]
                                for _ in range(2000)])
        sigma = (4.0 / np.sqrt(12.0)) / np.sqrt(draws.size)
        assert abs(draws.mean() - 0.0) < 3 * sigma

    def test_reproducible_with_fixed_stream(self, bhw):
        a = random_seed(bhw, np.random.default_rng(3))
        b = random_seed(bhw, np.random.default_rng(3))
        assert np.array_equal(a.values, b.values)


class TestBinnedRandomSeed:
    def test_single_bin_is_constant(self, bhw):
        ctrl = binned_random_seed(bhw, 1, np.random.default_rng(4))
        interior = ctrl.values[1:-1, 0]
        assert np.all(interior == interior[0])

    def test_full_resolution_matches_random_seed_distribution(self, bhw):
        a = binned_random_seed(bhw, bhw.n_t, np.random.default_rng(5))
        assert len(np.unique(a.values[1:-1, 0])) == bhw.n_t - 2

    def test_two_bins_half_probability(self, bhw):
        rng = np.random.default_rng(6)
        hits = sum(binned_random_seed(bhw, 2, rng).values[2, 0] > 1.0
                   for _ in range(4000))
        assert hits / 4000 == pytest.approx(0.25, abs=0.025)

    def test_piecewise_constant_structure(self, bhw):
        ctrl = binned_random_seed(bhw, 4, np.random.default_rng(7))
        assert len(np.unique(ctrl.values[1:-1, 0])) <= 4 + 1

    def test_invalid_nb(self, bhw):
        with pytest.raises(ValueError):
            binned_random_seed(bhw, 0, np.random.default_rng(8))


class TestPreselect:
    def test_takes_argmax(self, shakeup):
        rng = np.random.default_rng(9)
        seeds = [random_seed(shakeup, rng) for _ in range(6)]
        fids = [evaluate_fidelity(shakeup, s) for s in seeds]
        best = preselect(seeds, 1, problem=shakeup)
        assert best[0] is seeds[int(np.argmax(fids))]

    def test_descending_and_stable(self):
        seeds = ["a", "b", "c", "d"]
        picked = preselect(seeds, 4, fidelities=[0.5, 0.9, 0.5, 0.1])
        assert picked == ["b", "a", "c", "d"]

    def test_n_larger_than_pool_returns_all(self):
        picked = preselect(["a", "b"], 10, fidelities=[0.1, 0.2])
        assert picked == ["b", "a"]

    def test_single_propagation_per_seed(self, shakeup, monkeypatch):
        import qmoves.seeding as seeding

        calls = {"n": 0}
        real = seeding.evaluate_fidelity

        def counting(problem, ctrl):
            calls["n"] += 1
            return real(problem, ctrl)

        monkeypatch.setattr(seeding, "evaluate_fidelity", counting)
        rng = np.random.default_rng(10)
        seeds = [random_seed(shakeup, rng) for _ in range(5)]
        preselect(seeds, 2, problem=shakeup)
        assert calls["n"] == len(seeds)


class TestCursorTrace:
    def test_validation(self):
        with pytest.raises(ValueError):
            CursorTrace("bhw", 0.1, ts=[], x=[], y=[])
        with pytest.raises(ValueError):
            CursorTrace("bhw", 0.1, ts=[0.0, 0.0], x=[0.5, 0.5], y=[0.5, 0.5])
        with pytest.raises(ValueError):
            CursorTrace("bhw", 0.1, ts=[0.0, 0.1], x=[0.5, 1.5], y=[0.5, 0.5])

    def test_stationary_cursor_maps_to_mid_bounds(self, bhw):
        n = 64
        trace = CursorTrace("bhw", bhw.T_ms, ts=np.linspace(0, bhw.T_ms, n),
                            x=np.full(n, 0.5), y=np.full(n, 0.5))
        ctrl = trace_to_control(trace, bhw)
        assert np.allclose(ctrl.values[1:-1, 0], 0.0, atol=1e-12)   # mid of [-2, 2]
        assert np.allclose(ctrl.values[1:-1, 1], -75.0, atol=1e-12)  # mid of [-150, 0]

    def test_grid_aligned_trace_resamples_identically(self, bhw):
        step_ms = bhw.T_ms / (bhw.n_t - 1)
        ts = np.arange(bhw.n_t) * step_ms
        rng = np.random.default_rng(11)
        x = rng.uniform(0, 1, bhw.n_t)
        trace = CursorTrace("bhw", bhw.T_ms, ts=ts, x=x, y=np.full(bhw.n_t, 0.25))
        ctrl = trace_to_control(trace, bhw)
        expected = -2.0 + 4.0 * x
        assert np.max(np.abs(ctrl.values[1:-1, 0] - expected[1:-1])) < 1e-9

    def test_diagonal_sweep_linear_ramp(self, bhw):
        n = 4096
        ts = np.linspace(0, bhw.T_ms, n)
        trace = CursorTrace("bhw", bhw.T_ms, ts=ts, x=np.linspace(0, 1, n),
                            y=np.linspace(0, 1, n))
        ctrl = trace_to_control(trace, bhw)
        frac = np.arange(bhw.n_t) / (bhw.n_t - 1)
        exp_u1 = -2.0 + 4.0 * frac
        assert np.max(np.abs(ctrl.values[1:-1, 0] - exp_u1[1:-1])) < 1e-9

    def test_duration_mismatch_rejected(self, bhw):
        trace = CursorTrace("bhw", bhw.T_ms, ts=np.linspace(0, bhw.T_ms * 0.8, 50),
                            x=np.full(50, 0.5), y=np.full(50, 0.5))
        with pytest.raises(ValueError):
            trace_to_control(trace, bhw)

    def test_level_mismatch_rejected(self, bhw):
        trace = CursorTrace("shakeup", bhw.T_ms, ts=np.linspace(0, bhw.T_ms, 50),
                            x=np.full(50, 0.5), y=np.full(50, 0.5))
        with pytest.raises(ValueError):
            trace_to_control(trace, bhw)


class TestFrequencySeed:
    def test_valid_and_smooth(self):
        problem = make_problem_ms("shakeup", 0.5)
        ctrl = frequency_random_seed(problem, np.random.default_rng(12))
        ctrl.check_bounds()
        jumps = np.abs(np.diff(ctrl.values[1:-1, 0]))
        assert np.max(jumps) < 0.15


class TestProvenance:
    def test_round_trip(self):
        p = SeedProvenance(kind="rs_binned", n_b=4, source="x", preselected=True)
        q = SeedProvenance.from_dict(p.to_dict())
        assert q == p
