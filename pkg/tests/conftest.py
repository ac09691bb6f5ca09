"""Shared builders for the test suite.

The engineered problems target specific recurrence events: a guaranteed
deflation at step 1, repeated deflations from a rank-deficient second
operator, and a guaranteed breakdown from starting vectors spanned by a few
exact eigenvectors.
"""

import numpy as np
import pytest

from soarqep.operator import QepProblem, build_operator
from soarqep.oracles import dense_qep_spectrum


def random_qep(rng, n, complex_data=False):
    """Well-conditioned dense QEP with a mass matrix near the identity."""
    def mat():
        X = rng.standard_normal((n, n))
        if complex_data:
            X = X + 1j * rng.standard_normal((n, n))
        return X
    M = np.eye(n) + 0.1 * mat()
    return QepProblem.from_matrices(M, mat(), mat())


def deflation_at_step1(rng, n, alpha=0.8):
    """QEP plus starts with A u1 + B u2 = alpha u1, so step 1 stops with a
    deflation and the run then continues normally (B is full rank)."""
    u1 = rng.standard_normal(n)
    u2 = rng.standard_normal(n)
    A = rng.standard_normal((n, n))
    B0 = rng.standard_normal((n, n))
    w = alpha * u1 - A @ u1
    P = np.eye(n) - np.outer(u2, u2) / (u2 @ u2)
    B = np.outer(w, u2) / (u2 @ u2) + B0 @ P
    # monic QEP with M = I has A = -C, B = -K
    return QepProblem.from_matrices(np.eye(n), -A, -B), u1, u2


def rank_deficient_qep(rng, n, rank=1):
    """A = 0 and B of low rank: the r-sequence dies after `rank`+1 steps and
    the run then produces deflations until the stored directions saturate."""
    U = rng.standard_normal((n, rank))
    V = rng.standard_normal((n, rank))
    return QepProblem.from_matrices(np.eye(n), np.zeros((n, n)), -(U @ V.T))


def breakdown_starts(problem, d, rng=None, which="largest"):
    """Starting vectors inside the span of d exact stacked eigenvectors, so
    the stacked Krylov space is invariant and the run must break down."""
    lams, X = dense_qep_spectrum(problem.M, problem.C, problem.K)
    finite = np.isfinite(lams)
    order = np.argsort(np.abs(np.where(finite, lams, 0.0)))
    idx = [i for i in order if finite[i]]
    idx = idx[-d:] if which == "largest" else idx[:d]
    idx = np.asarray(idx)
    u1 = (X[:, idx] * lams[idx]).sum(axis=1)
    u2 = X[:, idx].sum(axis=1)
    return u1, u2


def stacked_residual(op, state):
    """Frobenius norm of H [Q_k; P_k] - [Q_{k+1}; P_{k+1}] T_hat."""
    from soarqep.oracles import build_h

    H = build_h(op).H
    S = np.vstack([state.Q, state.P])
    k = state.k
    return float(np.linalg.norm(H @ S[:, :k] - S @ state.T_hat))


def decomposition_tolerance(state, base=1e-10):
    return base * (1.0 + np.linalg.norm(state.T_hat)) * (1.0 + max(state.p_norms))


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
