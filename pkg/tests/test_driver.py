import numpy as np
import pytest

from conftest import breakdown_starts, random_qep
from soarqep.driver import SolverConfig, solve
from soarqep.operator import QepProblem
from soarqep.oracles import dense_qep_spectrum


class TestConfig:
    def test_bad_split(self):
        with pytest.raises(ValueError, match="0 < m < k"):
            SolverConfig(m=5, k=5).validate()
        with pytest.raises(ValueError, match="0 < m < k"):
            SolverConfig(m=0, k=4).validate()

    def test_bad_variant_and_mode(self):
        with pytest.raises(ValueError, match="variant"):
            SolverConfig(m=2, k=4, variant="soar").validate()
        with pytest.raises(ValueError, match="mode"):
            SolverConfig(m=2, k=4, mode="invert").validate()

    def test_shift_invert_needs_sigma(self):
        with pytest.raises(ValueError, match="sigma"):
            SolverConfig(m=2, k=4, mode="shift-invert").validate()

    def test_tolerance_ordering(self):
        with pytest.raises(ValueError, match="tol"):
            SolverConfig(m=2, k=4, ctol=1e-8, tol=1e-10).validate()
        SolverConfig(m=2, k=4, ctol=1e-10, tol=1e-8).validate()

    def test_shift_count_defaults_and_bounds(self):
        cfg = SolverConfig(m=3, k=10)
        assert cfg.num_shifts == 7 and cfg.retained == 3
        cfg = SolverConfig(m=6, k=40, p=15)
        assert cfg.retained == 25
        cfg.validate()
        with pytest.raises(ValueError, match="k - p"):
            SolverConfig(m=6, k=10, p=10).validate()
        with pytest.raises(ValueError, match="k - p"):
            SolverConfig(m=6, k=10, p=5).validate()


class TestShiftInvert:
    def test_converges_to_nearest_eigenvalues(self, rng):
        n = 40
        prob = random_qep(rng, n)
        sigma = 0.3 + 0.2j
        cfg = SolverConfig(m=4, k=16, mode="shift-invert", sigma=sigma,
                           ctol=1e-10, max_restarts=30, seed=7)
        rep = solve(prob, cfg)
        assert rep.all_converged
        assert len(rep.converged) == 4
        lams, _ = dense_qep_spectrum(prob.M, prob.C, prob.K)
        finite = lams[np.isfinite(lams)]
        nearest = sorted(finite, key=lambda t: abs(t - sigma))[:4]
        got = sorted(rep.converged, key=lambda c: abs(c.lam - sigma))
        for c, want in zip(got, nearest):
            assert abs(c.lam - want) < 1e-8 * max(1.0, abs(want))

    def test_residuals_verified_directly(self, rng):
        n = 30
        prob = random_qep(rng, n)
        cfg = SolverConfig(m=3, k=12, mode="shift-invert", sigma=-0.5,
                           ctol=1e-9, max_restarts=30, seed=3)
        rep = solve(prob, cfg)
        assert rep.all_converged
        M, C, K = prob.M.toarray(), prob.C.toarray(), prob.K.toarray()
        for c in rep.converged:
            direct = np.linalg.norm(
                (c.lam ** 2 * M + c.lam * C + K) @ c.x) / prob.norm_sum
            assert direct <= 2.0 * cfg.ctol

    def test_m_equals_k_minus_one(self, rng):
        prob = random_qep(rng, 20)
        cfg = SolverConfig(m=7, k=8, mode="shift-invert", sigma=0.1,
                           ctol=1e-8, max_restarts=60, seed=1)
        rep = solve(prob, cfg)   # p = 1: restarting still makes progress
        assert rep.restarts_used <= 60
        assert len(rep.residual_history) == rep.restarts_used + 1


class TestVariants:
    def test_irsoar_first_cycle_not_worse(self, rng):
        prob = random_qep(rng, 30)
        base = dict(m=4, k=12, mode="shift-invert", sigma=0.2,
                    max_restarts=1, ctol=1e-30, seed=5)
        rep_i = solve(prob, SolverConfig(variant="imsoar", **base))
        rep_r = solve(prob, SolverConfig(variant="irsoar", **base))
        # identical first subspace: refined residual cannot exceed Ritz
        assert rep_r.residual_history[0] <= rep_i.residual_history[0] + 1e-14

    def test_seeded_runs_bitwise_identical(self, rng):
        prob = random_qep(rng, 25)
        cfg = dict(m=3, k=10, mode="shift-invert", sigma=0.4, ctol=1e-9,
                   max_restarts=20, seed=11)
        a = solve(prob, SolverConfig(**cfg))
        b = solve(prob, SolverConfig(**cfg))
        assert a.residual_history == b.residual_history
        assert a.restarts_used == b.restarts_used
        for ca, cb in zip(a.converged, b.converged):
            assert ca.lam == cb.lam
            assert np.array_equal(ca.x, cb.x)


class TestBreakdown:
    def test_breakdown_finalization(self, rng):
        prob = random_qep(rng, 10)
        u1, u2 = breakdown_starts(prob, 6)
        cfg = SolverConfig(m=3, k=10, ctol=1e-10, tol=1e-10, max_restarts=5,
                           u1=u1, u2=u2)
        rep = solve(prob, cfg)
        assert rep.breakdown is not None
        assert rep.breakdown[0] == 0      # first cycle
        assert len(rep.converged) >= 6    # all invariant-subspace pairs
        for c in rep.converged:
            assert c.from_breakdown
            assert c.rel_residual <= 1e-10
        assert rep.bound_diagnostics     # Petrov bound values reported

    def test_breakdown_pairs_match_oracle(self, rng):
        prob = random_qep(rng, 8)
        u1, u2 = breakdown_starts(prob, 4)
        rep = solve(prob, SolverConfig(m=2, k=8, ctol=1e-10, tol=1e-10,
                                       u1=u1, u2=u2))
        lams, _ = dense_qep_spectrum(prob.M, prob.C, prob.K)
        finite = lams[np.isfinite(lams)]
        for c in rep.converged:
            assert min(abs(c.lam - finite)) < 1e-8 * max(1.0, abs(c.lam))


class TestNonConvergence:
    def test_partial_report_after_budget(self, rng):
        # an impossible tolerance: the loop must stop at max_restarts and
        # still hand back whatever did converge, without raising
        prob = random_qep(rng, 20)
        cfg = SolverConfig(m=3, k=8, mode="shift-invert", sigma=0.3,
                           ctol=1e-300, max_restarts=3, seed=2)
        rep = solve(prob, cfg)
        assert not rep.all_converged
        assert rep.restarts_used == 3
        assert len(rep.residual_history) == 4
        assert rep.converged == []

    def test_history_rows_match_cycles(self, rng):
        prob = random_qep(rng, 25)
        cfg = SolverConfig(m=3, k=10, mode="shift-invert", sigma=0.25,
                           ctol=1e-9, max_restarts=25, seed=4)
        rep = solve(prob, cfg)
        assert len(rep.residual_history) == rep.restarts_used + 1
        assert len(rep.deflation_history) == rep.restarts_used + 1
