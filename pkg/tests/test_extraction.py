import numpy as np
import pytest

from conftest import breakdown_starts, random_qep
from soarqep.extraction import (extract_refined, extract_ritz, project,
                                residual_bound)
from soarqep.msoar import init_state, run_msoar
from soarqep.operator import QepProblem, build_operator


def _run(rng, prob, k, mode="direct", sigma=None, u1=None, u2=None,
         tol=1e-12):
    op = build_operator(prob, mode=mode, sigma=sigma)
    u1 = u1 if u1 is not None else rng.standard_normal(prob.n)
    u2 = u2 if u2 is not None else rng.standard_normal(prob.n)
    st = run_msoar(init_state(op, u1, u2), op, k, tol)
    return op, st


class TestProject:
    def test_projection_matches_direct(self, rng):
        prob = random_qep(rng, 25)
        op, st = _run(rng, prob, 6)
        proj = project(st, op)
        Qt = proj.Q_tilde
        assert np.allclose(proj.M_k, Qt.conj().T @ prob.M.toarray() @ Qt,
                           atol=1e-12)
        assert np.allclose(proj.K_k, Qt.conj().T @ prob.K.toarray() @ Qt,
                           atol=1e-12)

    def test_hermitian_structure_preserved(self, rng):
        n = 18
        def herm():
            X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            return X + X.conj().T
        prob = QepProblem.from_matrices(herm() + 5 * n * np.eye(n), herm(),
                                        herm())
        op, st = _run(rng, prob, 5)
        proj = project(st, op)
        for A in (proj.M_k, proj.C_k, proj.K_k):
            assert np.linalg.norm(A - A.conj().T) < 1e-12 * np.linalg.norm(A)


class TestRitz:
    def test_selection_largest_magnitude(self, rng):
        prob = random_qep(rng, 30)
        op, st = _run(rng, prob, 8)
        ritz = extract_ritz(project(st, op), op, 4)
        sel = [abs(ritz.pairs[i].theta) for i in ritz.selection]
        rest = [abs(p.theta) for i, p in enumerate(ritz.pairs)
                if p.finite and i not in ritz.selection]
        assert min(sel) >= max(rest) - 1e-12

    def test_residuals_are_true_relative_residuals(self, rng):
        prob = random_qep(rng, 24)
        op, st = _run(rng, prob, 6)
        proj = project(st, op)
        ritz = extract_ritz(proj, op, 3)
        M, C, K = (prob.M.toarray(), prob.C.toarray(), prob.K.toarray())
        for i in ritz.selection:
            e = ritz.pairs[i]
            y = proj.Q_tilde @ e.g
            direct = np.linalg.norm((e.lam ** 2 * M + e.lam * C + K) @ y)
            assert e.rel_residual == pytest.approx(direct / prob.norm_sum,
                                                   rel=1e-10)

    def test_breakdown_run_gives_exact_pairs(self, rng):
        prob = random_qep(rng, 8)
        u1, u2 = breakdown_starts(prob, 5)
        op, st = _run(rng, prob, 8, u1=u1, u2=u2)
        assert st.breakdown
        ritz = extract_ritz(project(st, op), op, 2)
        finite = [p for p in ritz.pairs if p.finite]
        assert len(finite) >= 5
        assert sorted(p.rel_residual for p in finite)[4] < 1e-10

    def test_stacked_residual_identity(self, rng):
        # || H v - theta v || for v = [theta y; y]/sqrt(|theta|^2+1) equals
        # the QEP residual norm divided by sqrt(|theta|^2+1), M = I case
        n = 14
        C = rng.standard_normal((n, n))
        K = rng.standard_normal((n, n))
        prob = QepProblem.from_matrices(np.eye(n), C, K)
        op, st = _run(rng, prob, 5)
        proj = project(st, op)
        ritz = extract_ritz(proj, op, 2)
        from soarqep.oracles import build_h
        H = build_h(op).H
        i = ritz.selection[0]
        e = ritz.pairs[i]
        y = proj.Q_tilde @ e.g
        v = np.concatenate([e.theta * y, y]) / np.sqrt(abs(e.theta) ** 2 + 1)
        lhs = np.linalg.norm(H @ v - e.theta * v)
        qep = np.linalg.norm((e.theta ** 2 * np.eye(n) + e.theta * C + K) @ y)
        assert lhs == pytest.approx(qep / np.sqrt(abs(e.theta) ** 2 + 1),
                                    rel=1e-10)


class TestRefined:
    def test_refined_never_worse(self, rng):
        for trial in range(6):
            prob = random_qep(rng, int(rng.integers(15, 35)))
            op, st = _run(rng, prob, int(rng.integers(5, 9)))
            proj = project(st, op)
            ritz = extract_refined(proj, op, extract_ritz(proj, op, 4))
            for i in ritz.selection:
                assert (ritz.refined[i].rel_residual
                        <= ritz.pairs[i].rel_residual + 1e-14)

    def test_sigma_min_matches_direct_svd(self, rng):
        prob = random_qep(rng, 22)
        op, st = _run(rng, prob, 6)
        proj = project(st, op)
        ritz = extract_refined(proj, op, extract_ritz(proj, op, 3))
        for i in ritz.selection:
            t = ritz.pairs[i].theta
            S = t ** 2 * proj.W1 + t * proj.W2 + proj.W3
            svals = np.linalg.svd(S, compute_uv=False)
            gap = (svals[-2] - svals[-1]) / max(svals[0], 1e-300)
            if gap > 1e-6:
                assert ritz.refined[i].sigma_min == pytest.approx(
                    svals[-1], rel=1e-8, abs=1e-8)

    def test_full_space_refined_is_global_minimum(self, rng):
        # k tilde = n: the refined vector minimizes over the whole space
        n = 6
        prob = random_qep(rng, n)
        op, st = _run(rng, prob, n)
        proj = project(st, op)
        assert proj.ktilde == n
        ritz = extract_refined(proj, op, extract_ritz(proj, op, 2))
        M, C, K = (prob.M.toarray(), prob.C.toarray(), prob.K.toarray())
        for i in ritz.selection:
            t = ritz.pairs[i].theta
            svals = np.linalg.svd(t ** 2 * M + t * C + K, compute_uv=False)
            # the cross-product route only resolves sigma_min down to about
            # sqrt(machine eps) relative to the largest singular value
            assert (ritz.refined[i].sigma_min
                    <= svals[-1] * (1 + 1e-8) + 1e-6 * svals[0])


class TestBound:
    def test_zero_cases(self, rng):
        prob = random_qep(rng, 12)
        op, st = _run(rng, prob, 5)
        s = np.zeros(5, dtype=complex)
        s[0] = 1.0    # e_1: last component zero, bound vanishes
        assert residual_bound(st, 1.0 + 0j, s, prob.norms1[0]) == 0.0
        assert residual_bound(st, 1.0 + 0j, np.ones(5) / np.sqrt(5),
                              prob.norms1[0], t_sub=0.0) == 0.0

    def test_bound_vs_true_residual_when_assumption_holds(self, rng):
        # when the Ritz pair beats the Petrov pair targeting the same value
        # (pencil residual comparison), the bound covers the Ritz residual
        n = 30
        prob = random_qep(rng, n)
        op, st = _run(rng, prob, 8)
        proj = project(st, op)
        ritz = extract_ritz(proj, op, 8)
        nus, S = np.linalg.eig(st.T)
        M, C, K = (prob.M.toarray(), prob.C.toarray(), prob.K.toarray())

        def pencil_residual(mu, top, bottom):
            z = np.concatenate([top, bottom])
            z = z / np.linalg.norm(z)
            upper = -C @ z[:n] - K @ z[n:] - mu * (M @ z[:n])
            lower = z[:n] - mu * z[n:]
            return np.linalg.norm(np.concatenate([upper, lower]))

        checked = 0
        for idx in range(len(nus)):
            nu = nus[idx]
            s = S[:, idx] / np.linalg.norm(S[:, idx])
            cands = [p for p in ritz.pairs if p.finite]
            p = min(cands, key=lambda q: abs(q.theta - nu))
            y = proj.Q_tilde @ p.g
            r_ritz = pencil_residual(p.theta, p.theta * y, y)
            w = np.vstack([st.Q[:, :st.k], st.P[:, :st.k]]) @ s
            r_nu = pencil_residual(nu, w[:n], w[n:])
            if r_ritz <= r_nu:    # the comparison the bound rests on
                bound = residual_bound(st, p.theta, s, prob.norms1[0])
                direct = np.linalg.norm(
                    (p.theta ** 2 * M + p.theta * C + K) @ y)
                assert direct <= bound * (1 + 1e-8) + 1e-12
                checked += 1
        assert checked > 0
