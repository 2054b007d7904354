"""Population oracle for the sparsest approximation within an L2 ball.

Given exact population moments, enumerate supports by increasing size and
find the smallest support whose best linear fit lands within squared
distance C_f * r^2 of the regression function. Exhaustive by design: the
result is ground truth for desk-scale verification, not a production
selector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, NamedTuple

import numpy as np

from .errors import EmptyLambda, ExhaustiveLimit, SingularSubset

__all__ = [
    "TargetSpec",
    "SubsetFit",
    "MinSignalCheck",
    "ball_tolerance",
    "approximation_error",
    "best_subset_fit",
    "target_set",
    "check_min_signal",
]

MAX_EXHAUSTIVE_DEFAULT = 20


def ball_tolerance(f_sq: float) -> float:
    """Membership slack guarding float equality at the ball boundary."""
    return 1e-12 * max(1.0, f_sq)


@dataclass(frozen=True)
class TargetSpec:
    """The selection target: sparsest coefficient vector inside the ball.

    mu_star holds the nonzero coefficients in increasing index order;
    min_signal is +inf when the target support is empty. sup_gap is the
    sup-norm distance ||f - f*||_inf when the caller has computed it.
    """

    C_f: float
    r: float
    lambda_star: np.ndarray
    mu_star: np.ndarray
    I_star: frozenset
    k_star: int
    approx_error: float
    min_signal: float
    sup_gap: float | None = None
    n_singular_skipped: int = 0

    @property
    def radius(self) -> float:
        """Squared-distance budget C_f * r^2."""
        return self.C_f * self.r * self.r

    def describe(self) -> dict:
        return {
            "C_f": self.C_f,
            "r": self.r,
            "lambda_star": [float(v) for v in self.lambda_star],
            "mu_star": [float(v) for v in self.mu_star],
            "I_star": sorted(self.I_star),
            "k_star": self.k_star,
            "approx_error": self.approx_error,
            "min_signal": self.min_signal,
            "sup_gap": self.sup_gap,
            "n_singular_skipped": self.n_singular_skipped,
        }


def approximation_error(lam, gram, cross, f_sq: float) -> float:
    """Squared L2 distance ||sum_j lam_j f_j - f||^2 expanded in moments."""
    lam = np.asarray(lam, dtype=float)
    gram = np.asarray(gram, dtype=float)
    cross = np.asarray(cross, dtype=float)
    return float(lam @ gram @ lam - 2.0 * (lam @ cross) + f_sq)


class SubsetFit(NamedTuple):
    subset: tuple
    coefs: np.ndarray
    error: float


def best_subset_fit(subset: Iterable[int], gram, cross, f_sq: float) -> SubsetFit:
    """Best coefficients supported on subset, via the restricted normal equations."""
    gram = np.asarray(gram, dtype=float)
    cross = np.asarray(cross, dtype=float)
    S = tuple(sorted(int(j) for j in subset))
    if not S:
        return SubsetFit(subset=(), coefs=np.zeros(0), error=float(f_sq))
    sub_gram = gram[np.ix_(S, S)]
    try:
        coefs = np.linalg.solve(sub_gram, cross[list(S)])
    except np.linalg.LinAlgError:
        raise SingularSubset(f"singular Gram submatrix on {S}") from None
    if not np.all(np.isfinite(coefs)):
        raise SingularSubset(f"non-finite solve on {S}")
    lam = np.zeros(cross.size)
    lam[list(S)] = coefs
    return SubsetFit(subset=S, coefs=coefs,
                     error=approximation_error(lam, gram, cross, f_sq))


def target_set(gram, cross, f_sq: float, C_f: float, r: float,
               max_exhaustive: int = MAX_EXHAUSTIVE_DEFAULT) -> TargetSpec:
    """Enumerate supports by increasing cardinality until one fits the ball.

    Among supports of the minimal qualifying size, the one with minimal
    error wins; exact error ties go to the lexicographically smallest index
    set. Singular submatrices are skipped and counted.
    """
    gram = np.asarray(gram, dtype=float)
    cross = np.asarray(cross, dtype=float)
    M = cross.size
    if M > max_exhaustive:
        raise ExhaustiveLimit(
            f"M = {M} exceeds the exhaustive cap {max_exhaustive}; "
            "raise max_exhaustive explicitly to proceed")
    if not (C_f > 0 and r > 0):
        raise ValueError(f"C_f and r must be positive, got {C_f}, {r}")

    radius = C_f * r * r
    eps = ball_tolerance(f_sq)
    skipped = 0
    for k in range(M + 1):
        best = None
        for S in combinations(range(M), k):
            try:
                fit = best_subset_fit(S, gram, cross, f_sq)
            except SingularSubset:
                skipped += 1
                continue
            if fit.error <= radius + eps and (best is None or fit.error < best.error):
                best = fit
        if best is not None:
            lam = np.zeros(M)
            lam[list(best.subset)] = best.coefs
            min_signal = float(np.min(np.abs(best.coefs))) if k else math.inf
            return TargetSpec(
                C_f=float(C_f), r=float(r),
                lambda_star=lam,
                mu_star=np.asarray(best.coefs, dtype=float),
                I_star=frozenset(best.subset),
                k_star=k,
                approx_error=best.error,
                min_signal=min_signal,
                n_singular_skipped=skipped,
            )
    raise EmptyLambda(
        f"no coefficient vector of any sparsity reaches squared distance {radius!r}")


class MinSignalCheck(NamedTuple):
    holds: bool
    margin: float


def check_min_signal(target: TargetSpec, B: float) -> MinSignalCheck:
    """Strict minimum-signal test min_j |lambda*_j| > B * r; vacuous when the
    target support is empty."""
    if target.k_star == 0:
        return MinSignalCheck(holds=True, margin=math.inf)
    margin = target.min_signal - B * target.r
    return MinSignalCheck(holds=target.min_signal > B * target.r, margin=margin)
