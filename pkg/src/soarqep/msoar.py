"""The modified second-order Arnoldi (MSOAR) recurrence.

Builds the decomposition

    [A B; I 0] [Q_k; P_k] = [Q_{k+1}; P_{k+1}] T_hat_k

with an orthonormal Q (zero columns at deflation steps), an auxiliary chain
P and a (k+1)-by-k Hessenberg T_hat.  A step whose new direction falls below
the drop tolerance is classified as numerical deflation (the auxiliary chain
still grows) or numerical breakdown (the subspace is invariant and the run
stops).
"""

from dataclasses import dataclass, field

import numpy as np

from .kernels import orthogonalize_with_refinement
from .operator import apply_ab


class ZeroStartError(ValueError):
    """The primary starting vector is zero."""


CONTINUE = "continue"
DEFLATION = "deflation"
BREAKDOWN = "breakdown"


@dataclass
class StepOutcome:
    kind: str
    t_next: float           # ||r|| before any reset
    p_residual_norm: float = None  # residual of the deflation membership test


@dataclass
class SoarState:
    n: int
    q_cols: list = field(default_factory=list)   # columns q_1 .. q_{k+1}
    p_cols: list = field(default_factory=list)   # columns p_1 .. p_{k+1}
    t_cols: list = field(default_factory=list)   # column j holds t_{1..j+1, j}
    k: int = 0
    deflation_steps: list = field(default_factory=list)  # steps j with q_{j+1} = 0
    deflation_dirs: list = field(default_factory=list)   # unit f_1 .. f_l
    breakdown: bool = False
    breakdown_step: int = None
    breakdown_t: float = None    # measured t_{k+1,k} at breakdown, before reset

    @property
    def Q(self):
        """n x (k+1) matrix of basis columns (zero at deflation steps)."""
        return np.column_stack(self.q_cols)

    @property
    def P(self):
        return np.column_stack(self.p_cols)

    @property
    def T_hat(self):
        """(k+1) x k Hessenberg matrix of recurrence coefficients."""
        T = np.zeros((self.k + 1, self.k), dtype=complex)
        for j, col in enumerate(self.t_cols):
            T[: j + 2, j] = col
        return T

    @property
    def T(self):
        """Square k x k leading part of T_hat."""
        return self.T_hat[: self.k, :]

    @property
    def p_norms(self):
        return [float(np.linalg.norm(p)) for p in self.p_cols]

    def nonzero_q(self):
        """Matrix of the nonzero columns of Q_{k+1}."""
        cols = [q for q in self.q_cols if np.linalg.norm(q) > 0.0]
        return np.column_stack(cols)


def init_state(op, u1, u2):
    """Start the recurrence with q_1 = u1/||u1||, p_1 = u2/||u1||."""
    u1 = np.asarray(u1, dtype=complex)
    u2 = np.asarray(u2, dtype=complex)
    nrm = np.linalg.norm(u1)
    if nrm == 0.0:
        raise ZeroStartError("u1 must be nonzero")
    state = SoarState(n=op.n)
    state.q_cols.append(u1 / nrm)
    state.p_cols.append(u2 / nrm)
    return state


def _membership_residual(vec, state):
    """Residual norm of the numerical-deflation test of the step classifier.

    A premature stop is breakdown exactly when the stacked vector [r; s]
    (with r numerically zero) depends on the previous stacked columns, which
    reduces to s lying in the span of the p's stored at earlier zero-q steps,
    i.e. the recorded deflation directions.  At the first stop that span is
    empty and the test degenerates to ||s||, so a first stop with nonzero s
    is always deflation; a genuinely invariant subspace drives s itself to
    zero and classifies as breakdown.
    """
    if not state.deflation_dirs:
        return float(np.linalg.norm(vec)), vec
    F = np.column_stack(state.deflation_dirs)
    # the f's are unit but not mutually orthogonal; orthonormalize first
    basis, _ = np.linalg.qr(F)
    _, p, pn = orthogonalize_with_refinement(vec, basis)
    return pn, p


def msoar_step(state, op, tol):
    """One MSOAR step; classifies the outcome and mutates the state."""
    if state.breakdown:
        raise RuntimeError("cannot step past breakdown")
    j = state.k + 1
    q_j = state.q_cols[j - 1]
    p_j = state.p_cols[j - 1]
    r = apply_ab(op, q_j, p_j)
    s = q_j.copy()

    Q = state.Q
    P = state.P
    t_col = np.zeros(j, dtype=complex)
    prev_norm = float(np.linalg.norm(r))
    for _ in range(3):
        c = Q.conj().T @ r
        r = r - Q @ c
        s = s - P @ c
        t_col += c
        rn = float(np.linalg.norm(r))
        if rn >= prev_norm / np.sqrt(2.0) or rn == 0.0:
            break
        prev_norm = rn
    t_next = float(np.linalg.norm(r))

    scale = op.work_norm_sum
    if scale == 0.0:
        scale = 1.0
    full = np.zeros(j + 1, dtype=complex)
    full[:j] = t_col

    if t_next / scale > tol:
        full[j] = t_next
        state.t_cols.append(full)
        state.q_cols.append(r / t_next)
        state.p_cols.append(s / t_next)
        state.k += 1
        return StepOutcome(kind=CONTINUE, t_next=t_next)

    # premature stop: numerical deflation or breakdown, decided by whether s
    # depends on the earlier stored deflation directions
    pn, _ = _membership_residual(s, state)
    sn = np.linalg.norm(s)
    state.deflation_dirs.append((s / sn) if sn > 0.0 else s.copy())

    full[j] = 1.0
    state.t_cols.append(full)
    state.q_cols.append(np.zeros(state.n, dtype=complex))
    state.p_cols.append(s)
    state.k += 1
    state.deflation_steps.append(j)

    if pn > tol:
        return StepOutcome(kind=DEFLATION, t_next=t_next, p_residual_norm=pn)

    # breakdown: the final column keeps the deflation shape but is not a
    # deflation event of the run
    state.deflation_steps.pop()
    state.deflation_dirs.pop()
    state.breakdown = True
    state.breakdown_step = j
    state.breakdown_t = t_next
    return StepOutcome(kind=BREAKDOWN, t_next=t_next, p_residual_norm=pn)


def run_msoar(state, op, k_target, tol):
    """Iterate msoar_step to k_target steps or breakdown."""
    while state.k < k_target and not state.breakdown:
        msoar_step(state, op, tol)
    return state


def extraction_basis(state, include_tail=True, tail_tol=1e-8):
    """Orthonormal basis handed to the projection: the nonzero columns of
    Q_{k+1} plus the orthogonalized p_1 direction when it sticks out of their
    span (the finalization column of the recurrence)."""
    Qt = state.nonzero_q()
    if include_tail:
        p1 = state.p_cols[0]
        p1n = np.linalg.norm(p1)
        if p1n > 0.0:
            _, r, rn = orthogonalize_with_refinement(p1, Qt)
            if rn > tail_tol * p1n:
                Qt = np.column_stack([Qt, r / rn])
    return Qt


def estimate_ck(state, theta, norm_M):
    """Monitored estimate of the residual-bound coefficient.

    (|theta|^2 + 1)^{1/2} (||M||_1^2 + ||p_{k+1}||^2)^{1/2}
        / (1 + (1/k) sum_j ||p_j||^2)^{1/2},
    computable during the recurrence without the Petrov eigenvector.
    """
    if state.k < 1:
        raise ValueError("need at least one completed step")
    pn = state.p_norms
    p_last = pn[state.k]                    # ||p_{k+1}||
    mean_sq = sum(x * x for x in pn[: state.k]) / state.k
    return float(np.sqrt(abs(theta) ** 2 + 1.0)
                 * np.sqrt(norm_M ** 2 + p_last ** 2)
                 / np.sqrt(1.0 + mean_sq))
