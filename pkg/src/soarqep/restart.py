"""Implicit restarting of an MSOAR decomposition.

Contracts a k-step decomposition to m = k - p steps with p shifted-QR sweeps
on T_k, repairs any deflation-induced zero columns through a rank-revealing
QR of the row-pruned rotation matrix, and selects exact or refined shifts
from the QEP projected onto the orthogonal complement of the wanted vectors.
"""

import copy
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .kernels import hessenberg_shifted_qr, qr_unit_diagonal, solve_projected_qep
from .msoar import SoarState, run_msoar


class RepairError(RuntimeError):
    """Deflation repair produced a structurally invalid decomposition."""


@dataclass
class ShiftSet:
    shifts: list
    provenance: str            # "exact" | "refined"
    candidates: list = field(default_factory=list)


@dataclass
class RestartReport:
    m_retained: int
    deflations_repaired: int
    new_residual_subdiag: float
    filter_check: float = None


def _conjugate_pair_columns(Z, thetas):
    """Replace conjugate-pair columns by their normalized real/imag parts."""
    Z = Z.copy()
    m = Z.shape[1]
    i = 0
    while i + 1 < m:
        ti, tj = thetas[i], thetas[i + 1]
        if abs(ti.imag) > 1e-10 and abs(ti - np.conj(tj)) <= 1e-10 * max(1.0, abs(ti)):
            re = Z[:, i].real + 0j
            im = Z[:, i].imag + 0j
            rn, imn = np.linalg.norm(re), np.linalg.norm(im)
            if rn > 0 and imn > 0:
                Z[:, i] = re / rn
                Z[:, i + 1] = im / imn
                i += 2
                continue
        i += 1
    return Z


def select_shifts(proj, vectors, p, mode="direct", wanted_thetas=None,
                  provenance="exact", is_real=False):
    """Shifts from the complement of the wanted directions inside the subspace.

    QR of the matrix of wanted primitive vectors gives an orthonormal basis
    U_perp of the complement; the p-dimensional projected QEP over it yields
    2p candidates, all approximations to unwanted eigenvalues.  Direct mode
    keeps the p candidates farthest (max-min distance) from the wanted Ritz
    values; shift-invert mode keeps the p with smallest magnitude, i.e. the
    original eigenvalues farthest from the target.
    """
    ktilde = proj.M_k.shape[0]
    wanted_thetas = list(wanted_thetas or [])

    if vectors is None or (hasattr(vectors, "shape") and vectors.shape[1] == 0):
        m_eff = 0
        U_perp = np.eye(ktilde, dtype=complex)[:, :p]
    else:
        Z = np.asarray(vectors, dtype=complex)
        if is_real and wanted_thetas:
            Z = _conjugate_pair_columns(Z, wanted_thetas)
        # drop numerically dependent columns before the complement QR
        _, Rp, piv = scipy.linalg.qr(Z, mode="economic", pivoting=True)
        diag = np.abs(np.diag(Rp))
        keep = int(np.sum(diag > 1e-12 * max(diag.max(), np.finfo(float).tiny)))
        if keep < Z.shape[1]:
            warnings.warn("wanted primitive vectors numerically dependent; "
                          "dropping %d column(s)" % (Z.shape[1] - keep),
                          RuntimeWarning)
            Z = Z[:, sorted(piv[:keep])]
        m_eff = Z.shape[1]
        Qc, _ = np.linalg.qr(Z, mode="complete")
        U_perp = Qc[:, m_eff: m_eff + p]

    Mp = U_perp.conj().T @ proj.M_k @ U_perp
    Cp = U_perp.conj().T @ proj.C_k @ U_perp
    Kp = U_perp.conj().T @ proj.K_k @ U_perp
    cands = [c.theta for c in solve_projected_qep(Mp, Cp, Kp)
             if c.finite and abs(c.theta) <= 1e12]

    if mode == "shift-invert":
        ranked = sorted(cands, key=lambda t: (abs(t), t.real, t.imag))
    elif wanted_thetas:
        def score(t):
            return min(abs(t - w) for w in wanted_thetas)
        ranked = sorted(cands, key=lambda t: (-score(t), t.real, t.imag))
    else:
        ranked = sorted(cands, key=lambda t: (-abs(t), t.real, t.imag))
    shifts = ranked[:p]
    # applied in order of increasing magnitude for reproducibility
    shifts = sorted(shifts, key=lambda t: (abs(t), t.real, t.imag))
    return ShiftSet(shifts=shifts, provenance=provenance, candidates=cands)


def _right_tri_solve(X, R):
    """X @ inv(R) for upper-triangular R."""
    return scipy.linalg.solve_triangular(R.T, X.T, lower=True).T


def contract(state, shifts, m, tol=1e-10):
    """Shrink a k-step decomposition to m steps with the given shifts.

    Without deflation this is the plain shifted-QR update; with zero columns
    in Q the row-pruned rotation is refactored (QR with forced unit diagonal
    at dependent columns) so the retained basis is orthonormal again.
    Returns (new_state, RestartReport).
    """
    if state.breakdown:
        raise RuntimeError("cannot restart past breakdown")
    mu = list(shifts.shifts) if isinstance(shifts, ShiftSet) else list(shifts)
    p = len(mu)
    k = state.k
    if k != m + p:
        raise ValueError("need k = m + p (k=%d, m=%d, p=%d)" % (k, m, p))
    if p == 0:
        new = copy.deepcopy(state)
        beta = float(np.linalg.norm(np.concatenate([state.q_cols[k], state.p_cols[k]])))
        return new, RestartReport(m_retained=m, deflations_repaired=0,
                                  new_residual_subdiag=beta)

    T_k = state.T
    V, T_plus = hessenberg_shifted_qr(T_k, mu)
    t_k1k = state.T_hat[k, k - 1]
    q_tail = state.q_cols[k]
    p_tail = state.p_cols[k]
    Qmat = state.Q[:, :k]
    Pmat = state.P[:, :k]

    zero_cols = [j for j in state.deflation_steps if j <= k - 1]
    repaired = 0
    carried = []

    if not zero_cols:
        QV = Qmat @ V
        PV = Pmat @ V
        newQ = QV[:, :m]
        newP = PV[:, :m]
        Tm = T_plus[:m, :m]
        tcoef = T_plus[m, m - 1]
        scale_tail = t_k1k * V[k - 1, m - 1]
        f_q = tcoef * QV[:, m] + scale_tail * q_tail
        f_p = tcoef * PV[:, m] + scale_tail * p_tail
    else:
        keep = [i for i in range(k) if i not in zero_cols]
        Qhat = Qmat[:, keep]
        Vhat = V[keep, :]
        U, R = qr_unit_diagonal(Vhat)
        QU = Qhat @ U
        VRinv = _right_tri_solve(V, R)
        PVR = Pmat @ VRinv
        S = _right_tri_solve(R @ T_plus, R)
        newQ = QU[:, :m]
        newP = PVR[:, :m]
        Tm = S[:m, :m]
        tcoef = S[m, m - 1]
        beta_t = t_k1k * V[k - 1, m - 1] / R[m - 1, m - 1]
        f_q = tcoef * QU[:, m] + beta_t * q_tail
        f_p = tcoef * PVR[:, m] + beta_t * p_tail
        carried = [i for i in range(m) if np.linalg.norm(U[:, i]) == 0.0]
        repaired = len(zero_cols) - len(carried)

    beta = float(np.sqrt(np.linalg.norm(f_q) ** 2 + np.linalg.norm(f_p) ** 2))
    t_new = float(np.linalg.norm(f_q))

    new = SoarState(n=state.n)
    new.q_cols = [np.ascontiguousarray(newQ[:, i]) for i in range(m)]
    new.p_cols = [np.ascontiguousarray(newP[:, i]) for i in range(m)]
    boundary_deflation = False
    if t_new > 1e-14 * max(beta, 1.0):
        new.q_cols.append(f_q / t_new)
        new.p_cols.append(f_p / t_new)
        t_sub = t_new
    else:
        # the retained residual has no new basis direction: boundary deflation
        boundary_deflation = True
        new.q_cols.append(np.zeros(state.n, dtype=complex))
        new.p_cols.append(f_p)
        t_sub = 1.0
    for j in range(m):
        col = np.zeros(j + 2, dtype=complex)
        col[: min(j + 2, m)] = Tm[: min(j + 2, m), j]
        if j == m - 1:
            col[m] = t_sub
        new.t_cols.append(col)
    new.k = m
    new.deflation_steps = [i for i in carried if i >= 1]
    new.deflation_dirs = []
    for i in new.deflation_steps:
        d = newP[:, i]
        dn = np.linalg.norm(d)
        new.deflation_dirs.append(d / dn if dn > 0 else d)
    if boundary_deflation:
        new.deflation_steps.append(m)
        fp_n = np.linalg.norm(f_p)
        new.deflation_dirs.append(f_p / fp_n if fp_n > 0 else f_p.copy())

    Qnz = new.nonzero_q()[:, : m]
    check = np.linalg.norm(Qnz.conj().T @ new.q_cols[m]) if not boundary_deflation else 0.0
    if check > 1e-8:
        raise RepairError("retained basis not orthogonal to the residual "
                          "direction (%.2e)" % check)

    return new, RestartReport(m_retained=m, deflations_repaired=repaired,
                              new_residual_subdiag=beta)


def expand(state, op, k_target, tol):
    """Continue the recurrence on a contracted state up to k_target steps."""
    return run_msoar(state, op, k_target, tol)


def verify_filter(state_before, state_after, shifts, op):
    """Cosine distance between the restarted start vector and the filtered one.

    Applies psi(H) = prod(H - mu_j I) to the stacked old start explicitly
    (dense, small problems only) and compares directions.
    """
    from .oracles import build_h

    H = build_h(op).H
    v_old = np.concatenate([state_before.q_cols[0], state_before.p_cols[0]])
    v_new = np.concatenate([state_after.q_cols[0], state_after.p_cols[0]])
    w = v_old.copy()
    mu = shifts.shifts if isinstance(shifts, ShiftSet) else shifts
    for m_j in mu:
        w = H @ w - m_j * w
    denom = np.linalg.norm(w) * np.linalg.norm(v_new)
    if denom == 0.0:
        return 1.0
    return float(1.0 - abs(np.vdot(w, v_new)) / denom)
