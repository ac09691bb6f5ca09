"""Top-level restarted solver loop.

One cycle: run the recurrence out to k steps (or breakdown), project, extract
Ritz (and refined) pairs, test the m wanted residuals against ctol; if not
done, pick p shifts from the complement QEP and contract back to m steps.
The imsoar variant converges on Ritz data and selects exact shifts; irsoar
converges on refined data and selects refined shifts.
"""

from dataclasses import dataclass, field

import numpy as np

from .extraction import extract_refined, extract_ritz, project, residual_bound
from .msoar import init_state, run_msoar
from .operator import build_operator
from .restart import ShiftSet, contract, select_shifts


@dataclass
class SolverConfig:
    m: int                     # number of wanted eigenpairs
    k: int                     # subspace dimension per cycle
    p: int = None              # shifts per restart (default k - m)
    mode: str = "direct"
    sigma: complex = None
    variant: str = "imsoar"
    ctol: float = 1e-10
    tol: float = None          # deflation/breakdown drop tolerance
    max_restarts: int = 100
    u1: np.ndarray = None
    u2: np.ndarray = None
    seed: int = 0

    @property
    def num_shifts(self):
        return self.p if self.p is not None else self.k - self.m

    @property
    def retained(self):
        # dimension kept after a contraction
        return self.k - self.num_shifts

    def validate(self):
        if not (0 < self.m < self.k):
            raise ValueError("need 0 < m < k (m=%d, k=%d)" % (self.m, self.k))
        if not (1 <= self.num_shifts and self.m <= self.retained):
            raise ValueError("need 1 <= m <= k - p (m=%d, k=%d, p=%d)"
                             % (self.m, self.k, self.num_shifts))
        if self.variant not in ("imsoar", "irsoar"):
            raise ValueError("unknown variant %r" % self.variant)
        if self.mode not in ("direct", "shift-invert"):
            raise ValueError("unknown mode %r" % self.mode)
        if self.mode == "shift-invert" and self.sigma is None:
            raise ValueError("shift-invert mode requires sigma")
        if self.max_restarts < 1:
            raise ValueError("max_restarts must be at least 1")
        if self.ctol <= 0:
            raise ValueError("ctol must be positive")
        if self.tol is not None and self.tol < self.ctol:
            raise ValueError("tol must be at least ctol")


@dataclass
class ConvergedPair:
    lam: complex
    x: np.ndarray
    rel_residual: float
    from_breakdown: bool = False


@dataclass
class SolverReport:
    converged: list
    restarts_used: int
    residual_history: list         # per-cycle max wanted relative residual
    deflation_history: list        # per-cycle deflation count
    breakdown: tuple = None        # (restart index, step) or None
    bound_diagnostics: list = field(default_factory=list)
    all_converged: bool = False


def check_convergence(ritz, variant, ctol):
    """Max of the m wanted relative residuals and whether all pass ctol."""
    res = ritz.wanted_residuals(variant)
    if not res:
        return False, float("inf")
    mx = max(res)
    return bool(np.isfinite(mx) and mx <= ctol), float(mx)


def _wanted_pairs(proj, ritz, variant, ctol, breakdown=False):
    """Materialize ConvergedPair objects for the wanted entries passing ctol."""
    out = []
    for i in ritz.selection:
        if variant == "irsoar" and i in ritz.refined:
            e = ritz.refined[i]
            vec, lam, rel = e.z, e.lam, e.rel_residual
        else:
            e = ritz.pairs[i]
            vec, lam, rel = e.g, e.lam, e.rel_residual
        if rel <= ctol:
            x = proj.Q_tilde @ vec
            x = x / np.linalg.norm(x)
            out.append(ConvergedPair(lam=lam, x=x, rel_residual=rel,
                                     from_breakdown=breakdown))
    return out


def _breakdown_pairs(proj, ritz, ctol):
    """All pairs delivered at breakdown whose residuals pass ctol."""
    out = []
    for e in ritz.pairs:
        if e.finite and e.rel_residual <= ctol:
            x = proj.Q_tilde @ e.g
            x = x / np.linalg.norm(x)
            out.append(ConvergedPair(lam=e.lam, x=x, rel_residual=e.rel_residual,
                                     from_breakdown=True))
    return out


def _breakdown_diagnostics(state, op):
    """Residual-bound values for the Petrov pairs of T_k at breakdown."""
    k = state.k
    if k < 1:
        return []
    nus, S = np.linalg.eig(state.T)
    diags = []
    for i in range(k):
        s = S[:, i] / np.linalg.norm(S[:, i])
        b = residual_bound(state, nus[i], s, op.work_norms1[0])
        diags.append({"theta": complex(nus[i]),
                      "bound": float(b),
                      "rel_bound": float(b / op.work_norm_sum)})
    return diags


def _shift_vectors(ritz, variant, ktilde):
    cols = []
    thetas = []
    for i in ritz.selection:
        if variant == "irsoar" and i in ritz.refined:
            cols.append(ritz.refined[i].z)
        else:
            cols.append(ritz.pairs[i].g)
        thetas.append(ritz.pairs[i].theta)
    if not cols:
        return np.zeros((ktilde, 0), dtype=complex), thetas
    return np.column_stack(cols), thetas


def _supplement_shifts(shift_set, ritz, p):
    """Pad a short shift set with unwanted finite Ritz values."""
    if len(shift_set.shifts) >= p:
        return shift_set
    have = list(shift_set.shifts)
    wanted = set(ritz.selection)
    spares = sorted((e.theta for i, e in enumerate(ritz.pairs)
                     if e.finite and i not in wanted),
                    key=lambda t: (abs(t), t.real, t.imag))
    for t in spares:
        if len(have) >= p:
            break
        if all(abs(t - h) > 0 for h in have):
            have.append(t)
    if len(have) < p:
        raise RuntimeError("could not assemble %d shifts" % p)
    return ShiftSet(shifts=sorted(have, key=lambda t: (abs(t), t.real, t.imag)),
                    provenance=shift_set.provenance,
                    candidates=shift_set.candidates)


def solve(problem, config):
    """Run the restarted solver on a QepProblem; never raises on stagnation."""
    config.validate()
    op = build_operator(problem, mode=config.mode, sigma=config.sigma)
    tol = config.tol if config.tol is not None else config.ctol

    rng = np.random.default_rng(config.seed)
    u1 = config.u1 if config.u1 is not None else rng.random(problem.n)
    u2 = config.u2 if config.u2 is not None else u1
    state = init_state(op, u1, u2)

    shifts_real = problem.is_real and (
        config.mode == "direct" or complex(config.sigma).imag == 0.0)

    report = SolverReport(converged=[], restarts_used=0,
                          residual_history=[], deflation_history=[])

    for cycle in range(config.max_restarts + 1):
        run_msoar(state, op, config.k, tol)
        proj = project(state, op)
        ritz = extract_ritz(proj, op, config.m)
        if config.variant == "irsoar":
            extract_refined(proj, op, ritz)

        done, max_res = check_convergence(ritz, config.variant, config.ctol)
        report.residual_history.append(max_res)
        report.deflation_history.append(len(state.deflation_steps))

        if state.breakdown:
            report.breakdown = (cycle, state.breakdown_step)
            report.converged = _breakdown_pairs(proj, ritz, config.ctol)
            report.bound_diagnostics = _breakdown_diagnostics(state, op)
            report.all_converged = done
            return report

        if done:
            report.converged = _wanted_pairs(proj, ritz, config.variant, config.ctol)
            report.all_converged = True
            return report

        if cycle == config.max_restarts:
            report.converged = _wanted_pairs(proj, ritz, config.variant, config.ctol)
            return report

        vectors, thetas = _shift_vectors(ritz, config.variant, proj.ktilde)
        shift_set = select_shifts(proj, vectors, config.num_shifts,
                                  mode=config.mode, wanted_thetas=thetas,
                                  provenance="refined" if config.variant == "irsoar" else "exact",
                                  is_real=shifts_real)
        shift_set = _supplement_shifts(shift_set, ritz, config.num_shifts)
        state, _ = contract(state, shift_set, config.retained, tol=tol)
        report.restarts_used += 1

    return report
