"""Brute-force verification backends for the test suite.

Dense O(n^3) reference paths: explicit linearization H = [A B; I 0],
standard Arnoldi on H, and the full QEP spectrum via the companion pencil.
They call nothing from the solver layers except apply_ab, so agreement is
meaningful.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .operator import apply_ab


class SizeGuardError(ValueError):
    """The dense reference path was asked for a problem too large."""


@dataclass
class DenseLinearization:
    H: np.ndarray   # 2n x 2n, [A B; I 0] with exact lower blocks


def build_h(op, max_dim=1000):
    """Materialize H column by column through the matrix-free operator."""
    n = op.n
    if 2 * n > max_dim:
        raise SizeGuardError("2n = %d exceeds the dense guard %d" % (2 * n, max_dim))
    H = np.zeros((2 * n, 2 * n), dtype=complex)
    e = np.zeros(n, dtype=complex)
    z = np.zeros(n, dtype=complex)
    for j in range(n):
        e[j] = 1.0
        H[:n, j] = apply_ab(op, e, z)       # column j of A
        H[:n, n + j] = apply_ab(op, z, e)   # column j of B
        e[j] = 0.0
    H[n:, :n] = np.eye(n)
    return DenseLinearization(H=H)


def arnoldi_on_h(H, v, k):
    """Standard Arnoldi with full reorthogonalization.

    Returns (V, Hess, trail): V holds the k+1 orthonormal basis vectors
    (fewer on breakdown), Hess is the square upper-Hessenberg projection of
    the completed steps, and trail lists the subdiagonal norms h_{j+1,j}
    including the final one.
    """
    H = np.asarray(H, dtype=complex)
    v = np.asarray(v, dtype=complex)
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise ValueError("starting vector must be nonzero")
    V = [v / nrm]
    Hc = []
    trail = []
    for j in range(k):
        w = H @ V[j]
        Vm = np.column_stack(V)
        h = Vm.conj().T @ w
        w = w - Vm @ h
        h2 = Vm.conj().T @ w
        w = w - Vm @ h2
        h = h + h2
        beta = np.linalg.norm(w)
        col = np.zeros(j + 2, dtype=complex)
        col[: j + 1] = h
        col[j + 1] = beta
        Hc.append(col)
        trail.append(float(beta))
        if beta <= 1e-14 * np.linalg.norm(H @ V[j]):
            break
        V.append(w / beta)
    kk = len(Hc)
    Hess = np.zeros((kk, kk), dtype=complex)
    for j, col in enumerate(Hc):
        Hess[: min(j + 2, kk), j] = col[: min(j + 2, kk)]
    return np.column_stack(V), Hess, trail


def dense_qep_spectrum(M, C, K, max_n=500):
    """Full 2n-eigenpair spectrum of a dense QEP via the companion pencil.

    Returns (lams, X) with X columns the unit eigenvectors; infinite
    eigenvalues appear as inf entries with the corresponding X column taken
    from the leading block.
    """
    M = np.asarray(M, dtype=complex) if not hasattr(M, "toarray") else M.toarray()
    C = np.asarray(C, dtype=complex) if not hasattr(C, "toarray") else C.toarray()
    K = np.asarray(K, dtype=complex) if not hasattr(K, "toarray") else K.toarray()
    n = M.shape[0]
    if n > max_n:
        raise SizeGuardError("n = %d exceeds the dense guard %d" % (n, max_n))
    A = np.zeros((2 * n, 2 * n), dtype=complex)
    B = np.zeros((2 * n, 2 * n), dtype=complex)
    A[:n, :n] = -C
    A[:n, n:] = -K
    A[n:, :n] = np.eye(n)
    B[:n, :n] = M
    B[n:, n:] = np.eye(n)
    w, vr = scipy.linalg.eig(A, B, right=True)
    lams = np.empty(2 * n, dtype=complex)
    X = np.zeros((n, 2 * n), dtype=complex)
    for i in range(2 * n):
        finite = bool(np.isfinite(w[i]))
        lams[i] = w[i] if finite else complex(np.inf)
        x = vr[:n, i] if (not finite or abs(w[i]) >= 1.0) else vr[n:, i]
        xn = np.linalg.norm(x)
        if xn == 0.0:
            x = vr[n:, i] if (not finite or abs(w[i]) >= 1.0) else vr[:n, i]
            xn = np.linalg.norm(x)
        X[:, i] = x / xn
    return lams, X
