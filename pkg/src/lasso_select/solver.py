"""Weighted l1-penalized least squares by cyclic coordinate descent.

The estimator minimizes (1/n)||Y - F lam||^2 + 2 sum_j w_j |lam_j| with
data-dependent weights w_j = r * ||f_j||_n. The default route rescales
columns so the problem becomes a unit-weight lasso in theta = 2 w lam,
solves it with exact coordinate-wise soft-thresholding, and maps back;
a direct weighted descent in lam is kept as an independent route.
Every returned solution carries a subdifferential (KKT) certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .dictionary import empirical_norms
from .errors import ConvergenceError, DegenerateColumn

__all__ = [
    "PenaltySpec",
    "SolverOptions",
    "KktReport",
    "LassoSolution",
    "EventB",
    "compute_penalty",
    "rescale_problem",
    "penalized_objective",
    "solve_weighted_lasso",
    "support",
    "kkt_check",
    "solve_restricted",
    "event_b",
]

EPS_NORM = 1e-10


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty scale r and per-coordinate weights w_j = r * ||f_j||_n."""

    r: float
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r}")

    @property
    def levels(self) -> np.ndarray:
        """KKT comparison levels 2 w_j."""
        return 2.0 * self.weights

    def value(self, lam: np.ndarray) -> float:
        """Penalty term 2 sum_j w_j |lam_j|."""
        return float(2.0 * self.weights @ np.abs(lam))


def compute_penalty(col_norms, r: float, eps_norm: float = EPS_NORM) -> PenaltySpec:
    """Build the penalty from empirical column norms; refuse near-zero columns."""
    norms = np.asarray(col_norms, dtype=float)
    if np.any(norms < eps_norm):
        j = int(np.argmax(norms < eps_norm))
        raise DegenerateColumn(
            f"column {j} has empirical norm {norms[j]!r} < {eps_norm}", index=j)
    return PenaltySpec(r=float(r), weights=r * norms)


def rescale_problem(F, pen: PenaltySpec):
    """Return (F1, A_diag) with A_diag = 2 w and F1 = F A^-1, so F lam = F1 (A lam)."""
    F = np.asarray(F, dtype=float)
    A_diag = 2.0 * pen.weights
    if np.any(A_diag <= 0):
        j = int(np.argmax(A_diag <= 0))
        raise DegenerateColumn(f"weight {j} is not positive", index=j)
    return F / A_diag[None, :], A_diag


def penalized_objective(F, Y, lam, pen: PenaltySpec) -> float:
    F = np.asarray(F, dtype=float)
    resid = np.asarray(Y, dtype=float) - F @ lam
    return float(resid @ resid) / F.shape[0] + pen.value(lam)


@dataclass(frozen=True)
class SolverOptions:
    max_sweeps: int = 100_000
    tol: float = 1e-10          # max coordinate change per sweep
    zero_tol: float = 1e-12     # support extraction threshold
    kkt_tol: float = 1e-6
    method: str = "rescaled"    # "rescaled" or "direct"

    def describe(self) -> dict:
        return {"max_sweeps": self.max_sweeps, "tol": self.tol,
                "zero_tol": self.zero_tol, "kkt_tol": self.kkt_tol,
                "method": self.method}


@dataclass(frozen=True)
class KktReport:
    """Evaluation of the subdifferential optimality conditions.

    For each coordinate, grad_k = (2/n) <Y - F lam, f_k>. Active coordinates
    must satisfy |grad_k| = 2 w_k, inactive ones |grad_k| <= 2 w_k.
    Violations are normalized by the level 2 w_k.
    """

    active_indices: np.ndarray
    active_residuals: np.ndarray     # |grad_k| - 2 w_k, signed
    inactive_indices: np.ndarray
    inactive_slacks: np.ndarray      # 2 w_k - |grad_k|
    max_violation: float             # normalized, over all coordinates
    worst_index: int | None
    tol: float
    passed: bool

    def describe(self) -> dict:
        return {
            "passed": self.passed,
            "max_violation": self.max_violation,
            "worst_index": self.worst_index,
            "tol": self.tol,
            "active": {int(j): float(v) for j, v in
                       zip(self.active_indices, self.active_residuals)},
            "inactive": {int(j): float(v) for j, v in
                         zip(self.inactive_indices, self.inactive_slacks)},
        }


@dataclass(frozen=True)
class LassoSolution:
    lambda_hat: np.ndarray
    theta_hat: np.ndarray
    support: frozenset
    objective: float
    sweeps: int
    kkt: KktReport
    method: str

    def describe(self) -> dict:
        return {
            "lambda_hat": [float(v) for v in self.lambda_hat],
            "theta_hat": [float(v) for v in self.theta_hat],
            "support": sorted(self.support),
            "objective": self.objective,
            "sweeps": self.sweeps,
            "method": self.method,
            "kkt": self.kkt.describe(),
        }


def _cyclic_descent(G, Y, weights, max_sweeps, tol):
    """Minimize (1/n)||Y - G x||^2 + 2 sum_j weights[j] |x_j| from x = 0.

    Exact coordinate minimization: x_j <- soft(<g_j, r_partial>, n w_j) / ||g_j||^2.
    Returns (x, sweeps, converged). The penalized objective is checked to be
    nonincreasing after every sweep.
    """
    n, M = G.shape
    col_sq = np.einsum("ij,ij->j", G, G)
    thresholds = n * np.asarray(weights, dtype=float)
    x = np.zeros(M)
    resid = Y.astype(float).copy()
    prev_obj = float(resid @ resid) / n
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_delta = 0.0
        for j in range(M):
            cj = col_sq[j]
            if cj == 0.0:
                continue
            old = x[j]
            z = G[:, j] @ resid + cj * old
            az = abs(z) - thresholds[j]
            new = (np.sign(z) * az / cj) if az > 0.0 else 0.0
            if new != old:
                resid -= (new - old) * G[:, j]
                x[j] = new
                delta = abs(new - old)
                if delta > max_delta:
                    max_delta = delta
        obj = float(resid @ resid) / n + 2.0 * float(thresholds @ np.abs(x)) / n
        assert obj <= prev_obj + 1e-12 * max(1.0, abs(prev_obj)), \
            f"objective increased on sweep {sweeps}: {prev_obj!r} -> {obj!r}"
        prev_obj = obj
        if max_delta < tol:
            return x, sweeps, True
    return x, sweeps, False


def solve_weighted_lasso(F, Y, pen: PenaltySpec, opts: SolverOptions | None = None
                         ) -> LassoSolution:
    """Solve the weighted lasso; raises ConvergenceError with the best iterate
    attached if the sweep budget runs out or the certificate fails."""
    opts = opts or SolverOptions()
    F = np.asarray(F, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n, M = F.shape
    if Y.shape != (n,):
        raise ValueError(f"Y has shape {Y.shape}, expected ({n},)")
    if pen.weights.shape != (M,):
        raise ValueError(f"penalty has {pen.weights.size} weights, expected {M}")

    if opts.method == "rescaled":
        F1, A_diag = rescale_problem(F, pen)
        theta, sweeps, converged = _cyclic_descent(
            F1, Y, np.full(M, 0.5), opts.max_sweeps, opts.tol)
        lam = theta / A_diag
    elif opts.method == "direct":
        if np.any(pen.weights <= 0):
            j = int(np.argmax(pen.weights <= 0))
            raise DegenerateColumn(f"weight {j} is not positive", index=j)
        lam, sweeps, converged = _cyclic_descent(
            F, Y, pen.weights, opts.max_sweeps, opts.tol)
        theta = 2.0 * pen.weights * lam
    else:
        raise ValueError(f"unknown method {opts.method!r}")

    kkt = kkt_check(lam, F, Y, pen, tol=opts.kkt_tol)
    solution = LassoSolution(
        lambda_hat=lam,
        theta_hat=theta,
        support=support(lam, opts.zero_tol),
        objective=penalized_objective(F, Y, lam, pen),
        sweeps=sweeps,
        kkt=kkt,
        method=opts.method,
    )
    if not converged:
        raise ConvergenceError(
            f"no convergence after {sweeps} sweeps (tol {opts.tol}); best "
            f"iterate has certificate violation {kkt.max_violation:.3e}",
            best=solution)
    if not kkt.passed:
        raise ConvergenceError(
            f"optimality certificate failed: max violation {kkt.max_violation!r} "
            f"> {opts.kkt_tol}", best=solution)
    return solution


def support(lambda_hat, zero_tol: float = 1e-12) -> frozenset:
    """Indices with |lam_j| > zero_tol."""
    if zero_tol < 0:
        raise ValueError("zero_tol must be >= 0")
    lam = np.asarray(lambda_hat, dtype=float)
    return frozenset(int(j) for j in np.nonzero(np.abs(lam) > zero_tol)[0])


def kkt_check(lambda_hat, F, Y, pen: PenaltySpec, tol: float = 1e-6) -> KktReport:
    """Recompute the subdifferential conditions independently of the solver."""
    F = np.asarray(F, dtype=float)
    Y = np.asarray(Y, dtype=float)
    lam = np.asarray(lambda_hat, dtype=float)
    n = F.shape[0]
    grad = (2.0 / n) * (F.T @ (Y - F @ lam))
    levels = pen.levels
    active = lam != 0.0
    inactive = ~active

    active_idx = np.nonzero(active)[0]
    inactive_idx = np.nonzero(inactive)[0]
    active_res = np.abs(grad[active]) - levels[active]
    inactive_slack = levels[inactive] - np.abs(grad[inactive])

    with np.errstate(divide="ignore", invalid="ignore"):
        viol = np.zeros(lam.size)
        viol[active] = np.abs(active_res) / levels[active]
        viol[inactive] = np.maximum(0.0, -inactive_slack) / levels[inactive]
    viol = np.nan_to_num(viol, nan=np.inf)
    if viol.size:
        worst = int(np.argmax(viol))
        max_violation = float(viol[worst])
    else:
        worst, max_violation = None, 0.0
    return KktReport(
        active_indices=active_idx,
        active_residuals=active_res,
        inactive_indices=inactive_idx,
        inactive_slacks=inactive_slack,
        max_violation=max_violation,
        worst_index=worst,
        tol=tol,
        passed=max_violation <= tol,
    )


def solve_restricted(F, Y, pen: PenaltySpec, I_star: Iterable[int],
                     opts: SolverOptions | None = None) -> np.ndarray:
    """Weighted lasso over the columns in I_star only, embedded back into R^M
    with zeros elsewhere."""
    F = np.asarray(F, dtype=float)
    idx = sorted(int(j) for j in I_star)
    if not idx:
        raise ValueError("I_star must be nonempty")
    if idx[0] < 0 or idx[-1] >= F.shape[1]:
        raise IndexError(f"index out of range in I_star: {idx}")
    sub_pen = PenaltySpec(r=pen.r, weights=pen.weights[idx])
    sub = solve_weighted_lasso(F[:, idx], Y, sub_pen, opts)
    lam = np.zeros(F.shape[1])
    lam[idx] = sub.lambda_hat
    return lam


class EventB(NamedTuple):
    """Strict dual feasibility of the restricted solution off the target set."""

    holds: bool
    margins: dict


def event_b(lambda_tilde, F, Y, r: float, I_star: Iterable[int]) -> EventB:
    """Check |(2/n) <Y - F lam_tilde, f_k>| < 2 r ||f_k||_n for every k
    outside I_star; margins are the strict-inequality slacks."""
    F = np.asarray(F, dtype=float)
    Y = np.asarray(Y, dtype=float)
    lam = np.asarray(lambda_tilde, dtype=float)
    n, M = F.shape
    inside = np.zeros(M, dtype=bool)
    inside[list(I_star)] = True
    if np.any(lam[~inside] != 0.0):
        raise ValueError("lambda_tilde must vanish outside I_star")
    corr = (2.0 / n) * (F.T @ (Y - F @ lam))
    levels = 2.0 * r * empirical_norms(F)
    margins = {int(k): float(levels[k] - abs(corr[k]))
               for k in np.nonzero(~inside)[0]}
    holds = all(m > 0.0 for m in margins.values())
    return EventB(holds=holds, margins=margins)
