"""Seeded Monte Carlo experiments certifying selection consistency.

Each replicate samples a scenario, solves the weighted lasso, compares the
recovered support with the population target, and records the proof-event
diagnostics. Results are a pure function of the configuration: seeds are
assigned by replicate index, independent of scheduling, so parallel runs
are bit-stable.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .dictionary import Moments, Scenario, population_moments, sample_scenario
from .diagnostics import DEFAULT_COHERENCE_CONST, TuningConfig, tuning_sequence
from .errors import ConfigError, ConvergenceError, ExperimentError
from .oracle import TargetSpec
from .solver import SolverOptions, compute_penalty, event_b, solve_restricted, \
    solve_weighted_lasso

__all__ = [
    "THREADS_ENV_VAR",
    "CSV_HEADER",
    "ALL_EVENTS",
    "ExperimentConfig",
    "ReplicateResult",
    "SizeAggregate",
    "ExperimentResult",
    "wilson_interval",
    "run_replicate",
    "run_experiment",
    "consistency_curve",
    "aggregate_csv",
    "persist_results",
    "load_results",
]

THREADS_ENV_VAR = "LASSO_SELECT_THREADS"
CSV_HEADER = "n,r,kstar_r,p_exact,p_miss,p_false,ci_lo,ci_hi"
ALL_EVENTS = frozenset({"B", "E1", "E2", "E3"})

_Z95 = 1.959963984540054


def wilson_interval(successes: int, trials: int, z: float = _Z95):
    """Wilson score interval; well behaved at empirical probabilities 0 and 1."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1.0 - p) / trials
                                   + z2 / (4.0 * trials * trials))
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a selection experiment depends on.

    The target must be precomputed from exact population moments; B is the
    minimum-signal constant whose margin the audit reports. record_events
    selects which proof events each replicate evaluates.
    """

    scenario: Scenario
    target: TargetSpec
    tuning: TuningConfig
    n_grid: tuple
    replicates: int
    base_seed: int
    B: float = 1.0
    solver: SolverOptions = SolverOptions()
    record_events: frozenset = ALL_EVENTS
    coherence_const: float = DEFAULT_COHERENCE_CONST
    l1_ratio_ceiling: float = 10.0

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if any(b <= a for a, b in zip(grid, grid[1:])) or not grid:
            raise ConfigError("n_grid must be nonempty and strictly increasing")
        events = frozenset(self.record_events)
        unknown = events - ALL_EVENTS
        if unknown:
            raise ConfigError(f"unknown event name(s): {sorted(unknown)}")
        object.__setattr__(self, "n_grid", grid)
        object.__setattr__(self, "record_events", events)

    @cached_property
    def moments(self) -> Moments:
        return population_moments(self.scenario)

    def describe(self) -> dict:
        return {
            "scenario": self.scenario.describe(),
            "target": self.target.describe(),
            "tuning": self.tuning.describe(),
            "n_grid": list(self.n_grid),
            "replicates": self.replicates,
            "base_seed": self.base_seed,
            "B": self.B,
            "solver": self.solver.describe(),
            "record_events": sorted(self.record_events),
            "coherence_const": self.coherence_const,
            "l1_ratio_ceiling": self.l1_ratio_ceiling,
        }


@dataclass(frozen=True)
class ReplicateResult:
    """Outcome of one seeded replicate.

    exact_recovery, miss and false_inclusion partition support mismatch:
    exact_recovery iff neither miss nor false_inclusion. Event fields are
    None when not recorded (E1 also needs the noise, so simulation only).
    e2_alt_all is the variant of the column-norm event thresholded by the
    overall ||f||^2 instead of the column's own norm.
    """

    seed: int
    n: int
    I_hat: frozenset
    exact_recovery: bool
    miss: bool
    false_inclusion: bool
    l1_error: float
    l1_ratio: float
    kkt_pass: bool
    sweeps: int
    full_rank_G: bool
    event_B: bool | None = None
    e1_all: bool | None = None
    e2_all: bool | None = None
    e2_alt_all: bool | None = None
    e3_all: bool | None = None

    def describe(self) -> dict:
        return {
            "seed": self.seed, "n": self.n, "I_hat": sorted(self.I_hat),
            "exact_recovery": self.exact_recovery, "miss": self.miss,
            "false_inclusion": self.false_inclusion,
            "l1_error": self.l1_error, "l1_ratio": self.l1_ratio,
            "kkt_pass": self.kkt_pass, "sweeps": self.sweeps,
            "full_rank_G": self.full_rank_G, "event_B": self.event_B,
            "e1_all": self.e1_all, "e2_all": self.e2_all,
            "e2_alt_all": self.e2_alt_all, "e3_all": self.e3_all,
        }


def run_replicate(cfg: ExperimentConfig, n: int, seed: int) -> ReplicateResult:
    """One seeded replicate; deterministic in (cfg, n, seed)."""
    sample = sample_scenario(cfg.scenario, n, seed)
    r = tuning_sequence(replace(cfg.tuning, n=n))
    pen = compute_penalty(sample.col_norms, r)
    sol = solve_weighted_lasso(sample.F, sample.Y, pen, cfg.solver)

    target = cfg.target
    I_star = target.I_star
    I_hat = sol.support
    miss = not I_star <= I_hat
    false_inclusion = not I_hat <= I_star
    lam_err = np.abs(sol.lambda_hat - target.lambda_star)
    l1_error = float(lam_err.sum())
    denom = target.k_star * r
    l1_ratio = l1_error / denom if denom > 0 else (0.0 if l1_error == 0 else math.inf)

    off_target = sorted(set(range(sample.F.shape[1])) - I_star)
    ev_B = e1 = e2 = e2_alt = e3 = None

    if "B" in cfg.record_events:
        if I_star:
            lam_tilde = solve_restricted(sample.F, sample.Y, pen, I_star, cfg.solver)
        else:
            lam_tilde = np.zeros(sample.F.shape[1])
        ev_B = event_b(lam_tilde, sample.F, sample.Y, r, I_star).holds

    if "E1" in cfg.record_events and sample.W is not None:
        noise_corr = np.abs(sample.F[:, off_target].T @ sample.W) / n
        e1 = bool(np.all(noise_corr < r * sample.col_norms[off_target] / 2.0))

    need_moments = {"E2", "E3"} & cfg.record_events
    if need_moments:
        moments = cfg.moments
        if "E2" in cfg.record_events:
            pop_sq = np.diag(moments.gram)[off_target]
            emp_sq = sample.col_norms[off_target] ** 2
            e2 = bool(np.all(emp_sq >= pop_sq / 4.0))
            e2_alt = bool(np.all(emp_sq >= moments.f_sq / 4.0))
        if "E3" in cfg.record_events:
            if I_star and off_target:
                tgt = sorted(I_star)
                emp_inner = sample.F[:, tgt].T @ sample.F[:, off_target] / n
                pop_inner = moments.gram[np.ix_(tgt, off_target)]
                slack = cfg.coherence_const * 2.0 \
                    * cfg.scenario.dictionary.sup_bound ** 2 * r
                e3 = bool(np.all(np.abs(emp_inner)
                                 <= 2.0 * np.abs(pop_inner) + slack))
            else:
                e3 = True

    return ReplicateResult(
        seed=seed, n=n, I_hat=I_hat,
        exact_recovery=not miss and not false_inclusion,
        miss=miss, false_inclusion=false_inclusion,
        l1_error=l1_error, l1_ratio=l1_ratio,
        kkt_pass=sol.kkt.passed, sweeps=sol.sweeps,
        full_rank_G=sample.full_rank_G,
        event_B=ev_B, e1_all=e1, e2_all=e2, e2_alt_all=e2_alt, e3_all=e3,
    )


@dataclass(frozen=True)
class SizeAggregate:
    """Empirical selection statistics at one sample size."""

    n: int
    r: float
    kstar_r: float
    requested: int
    failed: int
    effective: int
    n_exact: int
    n_miss: int
    n_false: int
    p_exact: float
    p_miss: float
    p_false: float
    ci_exact: tuple
    ci_miss: tuple
    ci_false: tuple
    mean_l1_ratio: float
    kkt_pass_rate: float
    freq_event_B: float | None
    freq_e1: float | None
    freq_e2: float | None
    freq_e2_alt: float | None
    freq_e3: float | None

    def describe(self) -> dict:
        return {
            "n": self.n, "r": self.r, "kstar_r": self.kstar_r,
            "requested": self.requested, "failed": self.failed,
            "effective": self.effective,
            "n_exact": self.n_exact, "n_miss": self.n_miss,
            "n_false": self.n_false,
            "p_exact": self.p_exact, "p_miss": self.p_miss,
            "p_false": self.p_false,
            "ci_exact": list(self.ci_exact), "ci_miss": list(self.ci_miss),
            "ci_false": list(self.ci_false),
            "mean_l1_ratio": self.mean_l1_ratio,
            "kkt_pass_rate": self.kkt_pass_rate,
            "freq_event_B": self.freq_event_B, "freq_e1": self.freq_e1,
            "freq_e2": self.freq_e2, "freq_e2_alt": self.freq_e2_alt,
            "freq_e3": self.freq_e3,
        }


@dataclass(frozen=True)
class ExperimentResult:
    config: dict
    aggregates: tuple
    replicates: tuple
    wall_clock: float

    def to_json_dict(self) -> dict:
        # wall clock deliberately excluded: identical configs must persist
        # to byte-identical files
        return {
            "config": self.config,
            "aggregates": [a.describe() for a in self.aggregates],
            "replicates": [r.describe() for r in self.replicates],
        }


def _worker_count() -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        raise ConfigError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from None


def _freq(values) -> float | None:
    vals = [v for v in values if v is not None]
    if not vals:
        return None
    return sum(bool(v) for v in vals) / len(vals)


def _aggregate(cfg: ExperimentConfig, n: int, results: list, failed: int
               ) -> SizeAggregate:
    eff = len(results)
    if eff == 0:
        raise ExperimentError(f"all {cfg.replicates} replicates failed at n = {n}")
    n_exact = sum(r.exact_recovery for r in results)
    n_miss = sum(r.miss for r in results)
    n_false = sum(r.false_inclusion for r in results)
    n_mismatch = sum(r.miss or r.false_inclusion for r in results)
    assert n_exact == eff - n_mismatch, "support mismatch partition violated"
    r_val = tuning_sequence(replace(cfg.tuning, n=n))
    return SizeAggregate(
        n=n, r=r_val, kstar_r=cfg.target.k_star * r_val,
        requested=cfg.replicates, failed=failed, effective=eff,
        n_exact=n_exact, n_miss=n_miss, n_false=n_false,
        p_exact=n_exact / eff, p_miss=n_miss / eff, p_false=n_false / eff,
        ci_exact=wilson_interval(n_exact, eff),
        ci_miss=wilson_interval(n_miss, eff),
        ci_false=wilson_interval(n_false, eff),
        mean_l1_ratio=float(np.mean([r.l1_ratio for r in results])),
        kkt_pass_rate=sum(r.kkt_pass for r in results) / eff,
        freq_event_B=_freq(r.event_B for r in results),
        freq_e1=_freq(r.e1_all for r in results),
        freq_e2=_freq(r.e2_all for r in results),
        freq_e2_alt=_freq(r.e2_alt_all for r in results),
        freq_e3=_freq(r.e3_all for r in results),
    )


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run the full grid; seeds are base_seed + global replicate index."""
    start = time.perf_counter()
    if {"E2", "E3"} & cfg.record_events:
        cfg.moments  # materialize once before any worker threads start

    jobs = []
    for ni, n in enumerate(cfg.n_grid):
        for rep in range(cfg.replicates):
            jobs.append((n, cfg.base_seed + ni * cfg.replicates + rep))

    def work(job):
        n, seed = job
        try:
            return run_replicate(cfg, n, seed)
        except ConvergenceError:
            return (n, seed)  # failure marker

    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(work, jobs))
    else:
        outcomes = [work(j) for j in jobs]

    aggregates = []
    replicates = []
    for ni, n in enumerate(cfg.n_grid):
        chunk = outcomes[ni * cfg.replicates:(ni + 1) * cfg.replicates]
        good = [r for r in chunk if isinstance(r, ReplicateResult)]
        aggregates.append(_aggregate(cfg, n, good, failed=len(chunk) - len(good)))
        replicates.extend(good)

    return ExperimentResult(
        config=cfg.describe(),
        aggregates=tuple(aggregates),
        replicates=tuple(replicates),
        wall_clock=time.perf_counter() - start,
    )


def consistency_curve(cfg: ExperimentConfig) -> tuple:
    """Recovery probability alongside the k* r product at every grid size,
    so the vanishing of k* r is visible next to the probabilities."""
    return run_experiment(cfg).aggregates


def _fmt(value: float) -> str:
    return format(value, ".12g")


def aggregate_csv(aggregates) -> str:
    """Fixed-header CSV of the aggregate table, 12 significant digits."""
    lines = [CSV_HEADER]
    for a in aggregates:
        lines.append(",".join([
            str(a.n), _fmt(a.r), _fmt(a.kstar_r), _fmt(a.p_exact),
            _fmt(a.p_miss), _fmt(a.p_false),
            _fmt(a.ci_exact[0]), _fmt(a.ci_exact[1]),
        ]))
    return "\n".join(lines) + "\n"


def persist_results(result: ExperimentResult, base_path):
    """Write {base}.json (full fidelity) and {base}.csv (aggregate table).

    The JSON round-trips: loading it reproduces the aggregate table exactly.
    Returns (json_path, csv_path).
    """
    base = Path(base_path)
    base.parent.mkdir(parents=True, exist_ok=True)
    json_path = base.with_suffix(".json")
    csv_path = base.with_suffix(".csv")
    json_path.write_text(
        json.dumps(result.to_json_dict(), indent=2, allow_nan=True) + "\n",
        encoding="utf-8")
    csv_path.write_text(aggregate_csv(result.aggregates), encoding="utf-8")
    return json_path, csv_path


def load_results(json_path) -> dict:
    """Parse a persisted result file back into plain dictionaries."""
    return json.loads(Path(json_path).read_text(encoding="utf-8"))
