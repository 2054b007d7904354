"""Assumption audits, tuning sequences, and explicit probability tail bounds.

The tail bounds are reported as functions of user-supplied constants, never
as guarantees: the universal constants they contain are unspecified, so all
of them default to 1 and are overridable. Values are clipped to 1 for
reporting (probability semantics); raw values are available with clip=False.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .dictionary import DiscreteMeasure, Scenario, Sample, evaluate_design, \
    population_moments
from .errors import ConfigError, DegenerateGram, GammaCapExceeded, UnsupportedMeasure
from .oracle import TargetSpec, approximation_error, ball_tolerance

__all__ = [
    "DEFAULT_COHERENCE_CONST",
    "CoherenceReport",
    "TuningConfig",
    "BoundParams",
    "ClauseCheck",
    "BoundednessReport",
    "EstimationTails",
    "EventTails",
    "BoundRow",
    "correlations",
    "check_coherence",
    "check_boundedness",
    "in_coherent_ball",
    "tuning_sequence",
    "bernstein_tail",
    "l1_tail_bound",
    "estimation_tail_bounds",
    "event_tail_bounds",
    "bound_table",
]

# allowable coherence constant; sharper choices are out of scope
DEFAULT_COHERENCE_CONST = 1.0 / 45.0


def correlations(gram) -> np.ndarray:
    """Normalized Gram matrix rho[i,j] = gram[i,j]/sqrt(gram[i,i]*gram[j,j])."""
    gram = np.asarray(gram, dtype=float)
    diag = np.diag(gram)
    if np.any(diag <= 0):
        i = int(np.argmax(diag <= 0))
        raise DegenerateGram(f"gram diagonal entry {i} is {diag[i]!r}")
    scale = np.sqrt(diag)
    rho = gram / np.outer(scale, scale)
    rho = np.clip(rho, -1.0, 1.0)
    np.fill_diagonal(rho, 1.0)
    return rho


@dataclass(frozen=True)
class CoherenceReport:
    """Mutual coherence restricted to rows indexed by the target set."""

    rho: np.ndarray
    I_star: frozenset
    max_on_target: float
    threshold: float
    C: float
    holds: bool

    def describe(self) -> dict:
        return {"I_star": sorted(self.I_star), "max_on_target": self.max_on_target,
                "threshold": self.threshold, "C": self.C, "holds": self.holds}


def check_coherence(rho, I_star, C: float = DEFAULT_COHERENCE_CONST) -> CoherenceReport:
    """Check max_{i in I*} max_{j != i} |rho[i,j]| <= C / |I*|.

    The inner max ranges over every other index, inside or outside the
    target set; correlations between off-target functions are unconstrained.
    """
    rho = np.asarray(rho, dtype=float)
    idx = sorted(int(i) for i in I_star)
    if not idx:
        raise ValueError("I_star must be nonempty")
    k_star = len(idx)
    off = np.abs(rho[idx, :]).copy()
    off[np.arange(k_star), idx] = 0.0  # drop the unit diagonal entries
    max_on_target = float(off.max()) if rho.shape[1] > 1 else 0.0
    threshold = C / k_star
    return CoherenceReport(rho=rho, I_star=frozenset(idx),
                           max_on_target=max_on_target, threshold=threshold,
                           C=C, holds=max_on_target <= threshold)


@dataclass(frozen=True)
class ClauseCheck:
    """One audited constant: measured value against its declared bound.

    passed is None when the declared bound is unknown or the clause is not
    measurable from the given inputs; exact marks values computed from
    moments rather than observed maxima (empirical lower bounds only).
    """

    name: str
    measured: float
    declared: float | None
    passed: bool | None
    exact: bool

    def describe(self) -> dict:
        return {"name": self.name, "measured": self.measured,
                "declared": self.declared, "passed": self.passed,
                "exact": self.exact}


@dataclass(frozen=True)
class BoundednessReport:
    clauses: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses if c.passed is not None)

    def clause(self, name: str) -> ClauseCheck:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)

    def describe(self) -> dict:
        return {"passed": self.passed,
                "clauses": [c.describe() for c in self.clauses]}


def _leq(measured: float, declared: float) -> bool:
    return measured <= declared + 1e-12 * max(1.0, abs(declared))


def check_boundedness(scenario: Scenario, target: TargetSpec | None = None,
                      sample: Sample | None = None) -> BoundednessReport:
    """Audit the declared sup-norm and moment bounds of a scenario.

    On discrete measures every constant is exact; otherwise a sample must be
    given and sup-norm clauses report observed maxima, which only lower-bound
    the true sups.
    """
    dic = scenario.dictionary
    measure = scenario.measure
    exact = isinstance(measure, DiscreteMeasure)
    if exact:
        points = measure.points
        weights = measure.weights
    elif sample is not None:
        points, weights = sample.X, None
    else:
        raise UnsupportedMeasure(
            "sup-norm audit needs a discrete measure or a sample")

    Fv = evaluate_design(dic, points)
    fv = np.asarray(scenario.f(points), dtype=float)
    clauses = []

    sup = float(np.max(np.abs(Fv)))
    clauses.append(ClauseCheck("sup_norms", sup, dic.sup_bound,
                               _leq(sup, dic.sup_bound), exact))

    try:
        moments = population_moments(scenario)
    except UnsupportedMeasure:
        moments = None
    if moments is not None:
        floor = float(np.sqrt(np.min(np.diag(moments.gram))))
        clauses.append(ClauseCheck("norm_floor", floor, dic.norm_floor,
                                   floor >= dic.norm_floor - 1e-12, True))
    else:
        floor = float(np.min(sample.col_norms))
        clauses.append(ClauseCheck("norm_floor", floor, dic.norm_floor,
                                   None, False))

    Fsq = Fv * Fv
    if exact:
        fourth = float(np.max((Fsq * weights[:, None]).T @ Fsq))
    else:
        fourth = float(np.max(Fsq.T @ Fsq) / Fsq.shape[0])
    clauses.append(ClauseCheck("fourth_moments", fourth, dic.fourth_moment_bound,
                               _leq(fourth, dic.fourth_moment_bound), exact))

    f_sup = float(np.max(np.abs(fv)))
    clauses.append(ClauseCheck("f_sup", f_sup, scenario.f_sup_bound,
                               _leq(f_sup, scenario.f_sup_bound), exact))

    if target is not None:
        gap = float(np.max(np.abs(fv - Fv @ target.lambda_star)))
        declared = target.sup_gap
        clauses.append(ClauseCheck("approx_gap_sup", gap, declared,
                                   _leq(gap, declared) if declared is not None else None,
                                   exact))
    return BoundednessReport(clauses=tuple(clauses))


def in_coherent_ball(lam, gram, cross, f_sq: float, radius: float,
                     C: float = DEFAULT_COHERENCE_CONST) -> bool:
    """Ball membership plus low coherence on the vector's own support.

    Applying this with the moments of a restricted dictionary realizes the
    analogous membership test for restricted coefficient vectors.
    """
    lam = np.asarray(lam, dtype=float)
    err = approximation_error(lam, gram, cross, f_sq)
    if err > radius + ball_tolerance(f_sq):
        return False
    J = np.nonzero(lam)[0]
    if J.size == 0:
        return True
    report = check_coherence(correlations(gram), J, C=C)
    return report.holds


@dataclass(frozen=True)
class TuningConfig:
    """Penalty scale specification r = A * (log(M n)/n)^power.

    regime "sqrt" uses power 1/2, "quarter" uses power 1/4. gamma_cap, when
    set, enforces the polynomial growth restriction M <= n^gamma.
    """

    A: float
    regime: str
    M: int
    n: int | None = None
    gamma_cap: float | None = None

    def __post_init__(self):
        if self.regime not in ("sqrt", "quarter"):
            raise ConfigError(f"unknown tuning regime {self.regime!r}")
        if not self.A > 0:
            raise ConfigError("A must be positive")
        if self.M < 1:
            raise ConfigError("M must be >= 1")

    def describe(self) -> dict:
        return {"A": self.A, "regime": self.regime, "M": self.M,
                "n": self.n, "gamma_cap": self.gamma_cap}


def tuning_sequence(cfg: TuningConfig) -> float:
    """Evaluate the penalty scale for the configured (n, M)."""
    if cfg.n is None:
        raise ConfigError("tuning config has no sample size n")
    n, M = cfg.n, cfg.M
    if n < 2:
        raise ConfigError("n must be >= 2")
    if cfg.gamma_cap is not None and M > n ** cfg.gamma_cap:
        raise GammaCapExceeded(
            f"M = {M} exceeds n^gamma = {n ** cfg.gamma_cap!r} (n = {n}, "
            f"gamma = {cfg.gamma_cap})")
    base = math.log(M * n) / n
    if cfg.regime == "sqrt":
        return cfg.A * math.sqrt(base)
    return cfg.A * base ** 0.25


def bernstein_tail(w2: float, d: float, eps: float, n: int) -> float:
    """One-sided tail exp(-n eps^2 / (2 (w2 + d eps))) for sums of independent
    variables with moment growth controlled by (w2, d)."""
    if not (w2 > 0 and d > 0 and eps >= 0 and n >= 1):
        raise ValueError("need w2 > 0, d > 0, eps >= 0, n >= 1")
    return math.exp(-n * eps * eps / (2.0 * (w2 + d * eps)))


@dataclass(frozen=True)
class BoundParams:
    """Constant inputs for the tail bounds.

    b bounds the noise exponential moment; L, c0, L0 bound the dictionary,
    L1 the regression function, L_star the approximation gap sup-norm, and
    L_of_lambda the sup-norm ||f - sum lam_j f_j|| for the vector under
    study. c1, c2, B1, B2, D are unspecified universal constants, default 1.
    """

    b: float = 1.0
    L: float = 1.0
    c0: float = 1.0
    L0: float = 1.0
    L1: float = 1.0
    L_star: float = 1.0
    L_of_lambda: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    B1: float = 1.0
    B2: float = 1.0
    D: float = 1.0
    C_f: float = 1.0
    C: float = DEFAULT_COHERENCE_CONST

    def __post_init__(self):
        for name in ("b", "L", "c0", "L0", "L1", "L_star", "L_of_lambda",
                     "B1", "B2", "D", "C_f", "C"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("c1", "c2"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")

    @property
    def approx_margin(self) -> float:
        """Derived margin c0^2/(64 L^2) - C_f; the approximation-gap bound is
        vacuous unless this is positive."""
        return self.c0 ** 2 / (64.0 * self.L ** 2) - self.C_f

    def delta(self, r: float) -> float:
        """Inner-product concentration slack 2 C L^2 r, recomputed on access."""
        return 2.0 * self.C * self.L ** 2 * r

    def describe(self) -> dict:
        return {name: getattr(self, name) for name in
                ("b", "L", "c0", "L0", "L1", "L_star", "L_of_lambda",
                 "c1", "c2", "B1", "B2", "D", "C_f", "C")}


def _clip(value: float, clip: bool) -> float:
    return min(1.0, value) if clip else value


def _l1_tail(params: BoundParams, count: int, k: int, r: float, n: int) -> float:
    mins = min(r * r / params.L0,
               r / params.L ** 2,
               1.0 / (params.L0 * k * k),
               1.0 / (params.L ** 2 * k))
    first = 14.0 * count * count * math.exp(-params.c1 * n * mins)
    second = math.exp(-params.c2 * (k / params.L_of_lambda ** 2) * n * r * r)
    return first + second


def l1_tail_bound(params: BoundParams, k: int, r: float, n: int, M: int,
                  clip: bool = True) -> float:
    """Bound on the probability that the l1 estimation error of the penalized
    estimator exceeds its oracle level, for a k-sparse comparison vector."""
    if not (k >= 1 and r > 0 and n >= 1 and M >= 1):
        raise ValueError("need k >= 1, r > 0, n >= 1, M >= 1")
    return _clip(_l1_tail(params, count=M, k=k, r=r, n=n), clip)


class EstimationTails(NamedTuple):
    """coordinate: per-coordinate error tail for the full-dictionary estimate;
    restricted: l1 error tail for the estimate restricted to the target set."""

    coordinate: float
    restricted: float


def estimation_tail_bounds(params: BoundParams, k_star: int, r: float, n: int,
                           M: int, clip: bool = True) -> EstimationTails:
    if not (k_star >= 1 and r > 0 and n >= 1 and M >= 1):
        raise ValueError("need k_star >= 1, r > 0, n >= 1, M >= 1")
    coordinate = _l1_tail(params, count=M, k=k_star, r=r, n=n)
    restricted = _l1_tail(params, count=k_star, k=k_star, r=r, n=n)
    return EstimationTails(coordinate=_clip(coordinate, clip),
                           restricted=_clip(restricted, clip))


class EventTails(NamedTuple):
    """Tail bounds for the proof events, summed over off-target coordinates.

    noise_corr: noise/column correlation event; col_norm: empirical column
    norm event; inner_product: empirical inner-product concentration event;
    approx_gap: the average approximation-residual event. approx_margin is
    the derived constant whose positivity the last bound requires.
    """

    noise_corr: float
    col_norm: float
    inner_product: float
    approx_gap: float
    approx_margin: float


def event_tail_bounds(params: BoundParams, r: float, n: int, M: int,
                      clip: bool = True) -> EventTails:
    if not (r > 0 and n >= 1 and M >= 1):
        raise ValueError("need r > 0, n >= 1, M >= 1")
    M2 = float(M) * M
    nr2 = n * r * r
    norm_term = math.exp(-n * params.c0 ** 2 / (12.0 * params.L ** 2))

    noise_corr = 2.0 * M2 * (
        math.exp(-nr2 / (16.0 * params.b))
        + math.exp(-n * r * params.c0 / (8.0 * math.sqrt(2.0) * params.L))
        + norm_term)
    col_norm = M2 * norm_term
    inner_product = 2.0 * M2 * (
        math.exp(-params.C ** 2 * params.L ** 4 * nr2 / params.L0)
        + math.exp(-params.C * params.L * n * r / 2.0))

    margin = params.approx_margin
    if margin > 0:
        approx_gap = M * (math.exp(-params.C_f * margin ** 2 / 4.0 * nr2)
                          + math.exp(-margin / (4.0 * params.L_star) * nr2))
    else:
        warnings.warn(
            f"approximation margin c0^2/(64 L^2) - C_f = {margin!r} is not "
            "positive; the approximation-gap bound is vacuous", stacklevel=2)
        approx_gap = 1.0 if clip else math.inf
    return EventTails(
        noise_corr=_clip(noise_corr, clip),
        col_norm=_clip(col_norm, clip),
        inner_product=_clip(inner_product, clip),
        approx_gap=_clip(approx_gap, clip) if margin > 0 else approx_gap,
        approx_margin=margin,
    )


@dataclass(frozen=True)
class BoundRow:
    """All tail bounds at one grid point, clipped for reporting, raws retained."""

    n: int
    r: float
    coordinate_tail: float
    restricted_tail: float
    noise_corr: float
    col_norm: float
    inner_product: float
    approx_gap: float
    raw: dict

    def describe(self) -> dict:
        return {"n": self.n, "r": self.r,
                "coordinate_tail": self.coordinate_tail,
                "restricted_tail": self.restricted_tail,
                "noise_corr": self.noise_corr, "col_norm": self.col_norm,
                "inner_product": self.inner_product,
                "approx_gap": self.approx_gap, "raw": dict(self.raw)}


def bound_table(params: BoundParams, tuning: TuningConfig, n_grid, M: int,
                k_star: int) -> list:
    """Evaluate every tail bound along a grid of sample sizes."""
    rows = []
    for n in n_grid:
        r = tuning_sequence(replace(tuning, n=int(n), M=M))
        est = estimation_tail_bounds(params, k_star, r, int(n), M)
        ev = event_tail_bounds(params, r, int(n), M)
        raw_est = estimation_tail_bounds(params, k_star, r, int(n), M, clip=False)
        raw_ev = event_tail_bounds(params, r, int(n), M, clip=False)
        rows.append(BoundRow(
            n=int(n), r=r,
            coordinate_tail=est.coordinate, restricted_tail=est.restricted,
            noise_corr=ev.noise_corr, col_norm=ev.col_norm,
            inner_product=ev.inner_product, approx_gap=ev.approx_gap,
            raw={"coordinate_tail": raw_est.coordinate,
                 "restricted_tail": raw_est.restricted,
                 "noise_corr": raw_ev.noise_corr,
                 "col_norm": raw_ev.col_norm,
                 "inner_product": raw_ev.inner_product,
                 "approx_gap": raw_ev.approx_gap},
        ))
    return rows
