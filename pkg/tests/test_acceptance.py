"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete. Expensive artifacts (the randomized problem bank
and the reference Monte Carlo experiment) are session fixtures shared
across criteria.
"""

import json
import math
import time
from itertools import combinations

import mpmath as mp
import numpy as np
import pytest

import lasso_select as ls
from lasso_select.cli import dispatch
from conftest import NOISE_MENU, bounded_gaussian_design, orthonormal_design, \
    rademacher_scenario, sparse_truth

mp.mp.dps = 40


def report(num, desc, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    print(f"[criterion {num:2d}] {tag}  {desc}{'  ' + detail if detail else ''}")
    assert ok, f"criterion {num}: {desc} {detail}"


def soft(z, w):
    return np.sign(z) * np.maximum(np.abs(z) - w, 0.0)


# --------------------------------------------------------- shared fixtures

@pytest.fixture(scope="session")
def problem_bank():
    """200 randomized solved problems over the full (n, M, noise) menu,
    each with an event-B probe against a random candidate support."""
    rng = np.random.default_rng(4242)
    cells = [(n, M) for n in (50, 200) for M in (10, 100)]
    bank = []
    start = time.perf_counter()
    for i in range(200):
        n, M = cells[i % len(cells)]
        noise = NOISE_MENU[i % len(NOISE_MENU)]
        F = bounded_gaussian_design(rng, n, M)
        lam_true = sparse_truth(rng, M, 3)
        W = noise.sample(rng, n)
        Y = F @ lam_true + W
        r = ls.tuning_sequence(ls.TuningConfig(A=1.0, regime="sqrt", M=M, n=n))
        pen = ls.compute_penalty(ls.empirical_norms(F), r)
        sol = ls.solve_weighted_lasso(F, Y, pen)

        candidate = frozenset(int(j) for j in rng.choice(M, 3, replace=False))
        lam_tilde = ls.solve_restricted(F, Y, pen, candidate)
        ev = ls.event_b(lam_tilde, F, Y, r, candidate)
        bank.append({
            "F": F, "Y": Y, "pen": pen, "sol": sol,
            "kkt_fresh": ls.kkt_check(sol.lambda_hat, F, Y, pen, tol=1e-6),
            "candidate": candidate, "event_b": ev.holds,
        })
    return {"bank": bank, "elapsed": time.perf_counter() - start}


def reference_experiment_config():
    sc = rademacher_scenario(M=50, signal=(1.0, 1.0, 1.0),
                             noise=ls.UniformNoise(1.0))
    mom = ls.population_moments(sc)
    r_target = ls.tuning_sequence(ls.TuningConfig(A=1.0, regime="sqrt",
                                                  M=50, n=100))
    target = ls.target_set(mom.gram, mom.cross, mom.f_sq, C_f=1.0,
                           r=r_target, max_exhaustive=50)
    return ls.ExperimentConfig(
        scenario=sc, target=target,
        tuning=ls.TuningConfig(A=1.0, regime="sqrt", M=50),
        n_grid=(100, 400, 1600), replicates=200, base_seed=20260809, B=1.0)


@pytest.fixture(scope="session")
def reference_run():
    cfg = reference_experiment_config()
    start = time.perf_counter()
    result = ls.run_experiment(cfg)
    return {"cfg": cfg, "result": result,
            "elapsed": time.perf_counter() - start}


@pytest.fixture(scope="session")
def noisy_small_run():
    """A deliberately hard small experiment so misses and false inclusions
    actually occur in the decomposition-identity check."""
    sc = rademacher_scenario(M=12, signal=(0.35, -0.3),
                             noise=ls.LaplaceNoise(0.8))
    mom = ls.population_moments(sc)
    target = ls.target_set(mom.gram, mom.cross, mom.f_sq, C_f=1.0, r=0.45)
    cfg = ls.ExperimentConfig(
        scenario=sc, target=target,
        tuning=ls.TuningConfig(A=1.0, regime="sqrt", M=12),
        n_grid=(30, 60), replicates=60, base_seed=555)
    return ls.run_experiment(cfg)


# ---------------------------------------------------------------- criteria

def test_criterion_1_kkt_certification(problem_bank):
    bank, elapsed = problem_bank["bank"], problem_bank["elapsed"]
    all_pass = all(p["kkt_fresh"].passed for p in bank)
    worst = max(p["kkt_fresh"].max_violation for p in bank)
    ok = all_pass and len(bank) == 200 and elapsed < 60.0
    report(1, "independent optimality certificate on 200 randomized problems",
           ok, f"worst violation {worst:.2e}, elapsed {elapsed:.1f}s")


def test_criterion_2_orthonormal_closed_form():
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    worst = 0.0
    for i in range(50):
        n = int(rng.choice([36, 64, 100]))
        M = int(rng.integers(4, min(n // 3, 21)))
        F = orthonormal_design(rng, n, M)
        lam_true = sparse_truth(rng, M, min(3, M))
        Y = F @ lam_true + rng.normal(size=n) * 0.5
        r = float(rng.uniform(0.05, 0.5))
        pen = ls.compute_penalty(ls.empirical_norms(F), r)
        sol = ls.solve_weighted_lasso(F, Y, pen)
        closed = soft(F.T @ Y / n, pen.weights)
        worst = max(worst, float(np.max(np.abs(sol.lambda_hat - closed))))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-8 and elapsed < 5.0
    report(2, "coordinate-wise soft-threshold closed form on orthonormal designs",
           ok, f"worst gap {worst:.2e}, elapsed {elapsed:.1f}s")


def test_criterion_3_rescaling_equivalence():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(50):
        n = int(rng.choice([40, 90]))
        M = int(rng.integers(5, 25))
        F = bounded_gaussian_design(rng, n, M, scale=float(rng.uniform(0.5, 3)))
        Y = F @ sparse_truth(rng, M, 3) + rng.normal(size=n) * 0.7
        pen = ls.compute_penalty(ls.empirical_norms(F), float(rng.uniform(0.05, 0.6)))
        a = ls.solve_weighted_lasso(F, Y, pen, ls.SolverOptions(method="rescaled"))
        b = ls.solve_weighted_lasso(F, Y, pen, ls.SolverOptions(method="direct"))
        worst = max(worst, float(np.max(np.abs(a.lambda_hat - b.lambda_hat))))
    ok = worst < 1e-8
    report(3, "theta-rescaled route equals direct weighted descent", ok,
           f"worst gap {worst:.2e}")


def test_criterion_4_oracle_exactness():
    rng = np.random.default_rng(23)
    checked_subsets = 0
    for _ in range(30):
        M = int(rng.integers(5, 13))
        S = M + 8
        V = rng.uniform(-1, 1, size=(S, M))
        w = rng.uniform(0.2, 1.0, size=S)
        w /= w.sum()
        w[-1] += 1.0 - w.sum()
        k_true = int(rng.integers(1, 4))
        coeffs = np.zeros(M)
        idx = rng.choice(M, size=k_true, replace=False)
        coeffs[idx] = rng.uniform(0.8, 2.0, size=k_true) * rng.choice([-1, 1], k_true)
        fv = V @ coeffs
        gram = (V * w[:, None]).T @ V
        gram = 0.5 * (gram + gram.T)
        cross = V.T @ (w * fv)
        f_sq = float(w @ (fv * fv))

        # independent oracle: weighted least squares residual per subset
        sw = np.sqrt(w)

        def lstsq_error(subset):
            if not subset:
                return f_sq
            A = sw[:, None] * V[:, list(subset)]
            c, *_ = np.linalg.lstsq(A, sw * fv, rcond=None)
            res = sw * fv - A @ c
            return float(res @ res)

        def min_error_at(k):
            return min(lstsq_error(Ss) for Ss in combinations(range(M), k))

        prev = min_error_at(k_true - 1) if k_true > 1 else lstsq_error(())
        assert prev > 1e-6
        radius = prev / 2.0
        eps = 1e-12 * max(1.0, f_sq)

        target = ls.target_set(gram, cross, f_sq, C_f=1.0, r=math.sqrt(radius))

        k_indep = next(k for k in range(M + 1) if min_error_at(k) <= radius + eps)
        assert target.k_star == k_indep == k_true
        for Ss in combinations(range(M), target.k_star - 1):
            assert lstsq_error(Ss) > radius + eps
        for _ in range(5):
            size = int(rng.integers(1, min(M, 4)))
            Ss = tuple(sorted(int(j) for j in rng.choice(M, size, replace=False)))
            fit = ls.best_subset_fit(Ss, gram, cross, f_sq)
            assert abs(fit.error - lstsq_error(Ss)) <= 1e-10 * max(1.0, f_sq)
            checked_subsets += 1
    report(4, "exhaustive target matches independent re-enumeration", True,
           f"30 instances, {checked_subsets} subset fits cross-checked")


def test_criterion_5_empirical_selection_consistency(reference_run):
    cfg, result = reference_run["cfg"], reference_run["result"]
    elapsed = reference_run["elapsed"]

    # audited preconditions of the reference scenario
    mom = ls.population_moments(cfg.scenario)
    coherence = ls.check_coherence(ls.correlations(mom.gram), cfg.target.I_star)
    assert coherence.max_on_target <= 1.0 / 135.0
    assert cfg.target.k_star == 3 and cfg.target.min_signal == 1.0
    for n in cfg.n_grid:
        r_n = ls.tuning_sequence(ls.TuningConfig(A=1.0, regime="sqrt", M=50, n=n))
        assert cfg.B * r_n < cfg.target.min_signal

    aggs = result.aggregates
    final = aggs[-1]
    nondecreasing = all(
        b.p_exact >= a.p_exact
        or (max(a.ci_exact[0], b.ci_exact[0]) <= min(a.ci_exact[1], b.ci_exact[1]))
        for a, b in zip(aggs, aggs[1:]))
    kkt_all = all(a.kkt_pass_rate == 1.0 for a in aggs)
    ratios_bounded = all(a.mean_l1_ratio <= cfg.l1_ratio_ceiling for a in aggs)
    curve = ", ".join(f"n={a.n}: {a.p_exact:.3f}" for a in aggs)
    ok = (final.p_exact >= 0.90 and nondecreasing and kkt_all
          and ratios_bounded and elapsed < 300.0)
    report(5, "recovery probability rises to >= 0.90 on the reference scenario",
           ok, f"{curve}, elapsed {elapsed:.0f}s")


def test_criterion_6_dual_feasibility_blocks_false_inclusion(
        problem_bank, reference_run):
    violations = 0
    held = 0
    for p in problem_bank["bank"]:
        if p["event_b"]:
            held += 1
            if not p["sol"].support <= p["candidate"]:
                violations += 1
    for rep in reference_run["result"].replicates:
        if rep.event_B:
            held += 1
            if rep.false_inclusion:
                violations += 1
    ok = violations == 0 and held > 0
    report(6, "no false inclusion on any replicate where the dual event holds",
           ok, f"{held} replicates with the event, {violations} violations")


def test_criterion_7_decomposition_identity(reference_run, noisy_small_run):
    ok = True
    detail = []
    for result in (reference_run["result"], noisy_small_run):
        for agg in result.aggregates:
            mismatch = sum(1 for rep in result.replicates
                           if rep.n == agg.n and (rep.miss or rep.false_inclusion))
            ok = ok and (agg.n_exact == agg.effective - mismatch)
            detail.append(f"n={agg.n}: {agg.n_exact}={agg.effective}-{mismatch}")
    # the hard small run must actually exercise non-exact replicates
    exercised = any(rep.miss or rep.false_inclusion
                    for rep in noisy_small_run.replicates)
    report(7, "exact-recovery counts satisfy the set-decomposition identity",
           ok and exercised, "; ".join(detail[:4]))


def test_criterion_8_bound_behavior():
    params = ls.BoundParams(b=1.0, L=1.0, c0=1.0, L0=1.0, L_star=1.0,
                            L_of_lambda=1.0, c1=1.0, c2=1.0, C_f=1e-3)
    M, k_star = 50, 3
    grid = [10**3, 10**4, 10**5, 10**6]
    rows = []
    for n in grid:
        r = ls.tuning_sequence(ls.TuningConfig(A=1.0, regime="sqrt", M=M, n=n))
        est = ls.estimation_tail_bounds(params, k_star, r, n, M, clip=False)
        ev = ls.event_tail_bounds(params, r, n, M, clip=False)
        rows.append((n, r, est.coordinate, est.restricted, ev.noise_corr,
                     ev.col_norm, ev.inner_product, ev.approx_gap))

        # independent high-precision evaluation, 10 significant digits
        rr, nn = mp.mpf(r), mp.mpf(n)
        mins = min(rr * rr, rr, mp.mpf(1) / (k_star * k_star), mp.mpf(1) / k_star)
        coord = 14 * M * M * mp.e ** (-nn * mins) + mp.e ** (-k_star * nn * rr * rr)
        restr = (14 * k_star * k_star * mp.e ** (-nn * mins)
                 + mp.e ** (-k_star * nn * rr * rr))
        i1 = 2 * M * M * (mp.e ** (-nn * rr * rr / 16)
                          + mp.e ** (-nn * rr / (8 * mp.sqrt(2)))
                          + mp.e ** (-nn / 12))
        i2 = M * M * mp.e ** (-nn / 12)
        C = mp.mpf(1) / 45
        i3 = 2 * M * M * (mp.e ** (-C ** 2 * nn * rr * rr)
                          + mp.e ** (-C * nn * rr / 2))
        margin = mp.mpf(1) / 64 - mp.mpf("1e-3")
        i4 = M * (mp.e ** (-mp.mpf("1e-3") * margin ** 2 / 4 * nn * rr * rr)
                  + mp.e ** (-margin / 4 * nn * rr * rr))
        for got, want in zip(rows[-1][2:], (coord, restr, i1, i2, i3, i4)):
            assert got == pytest.approx(float(want), rel=1e-10)

    monotone = all(
        all(b[j] <= a[j] * (1 + 1e-12) for j in range(2, 8))
        for a, b in zip(rows, rows[1:]))
    m_p_star = M * rows[-1][3]
    ok = monotone and m_p_star < 1e-3
    report(8, "tail bounds nonincreasing in n and M*p* vanishing", ok,
           f"M*p* at n=1e6: {m_p_star:.3e}")


def test_criterion_9_column_rescaling_invariance():
    rng = np.random.default_rng(31)
    worst_fit = 0.0
    for i in range(20):
        n, M = 60, 9
        F = bounded_gaussian_design(rng, n, M)
        Y = F @ sparse_truth(rng, M, 3) + rng.normal(size=n) * 0.5
        r = float(rng.uniform(0.1, 0.4))
        base = ls.solve_weighted_lasso(F, Y, ls.compute_penalty(
            ls.empirical_norms(F), r))
        c = (0.1, 10.0)[i % 2]
        j = int(rng.integers(M))
        F2 = F.copy()
        F2[:, j] *= c
        sol2 = ls.solve_weighted_lasso(F2, Y, ls.compute_penalty(
            ls.empirical_norms(F2), r))
        assert sol2.support == base.support
        worst_fit = max(worst_fit, float(np.max(np.abs(
            F2 @ sol2.lambda_hat - F @ base.lambda_hat))))
    ok = worst_fit < 1e-8
    report(9, "support and fitted values invariant to column rescaling", ok,
           f"worst fitted-value gap {worst_fit:.2e}")


def test_criterion_10_end_to_end_determinism(tmp_path):
    config = tmp_path / "exp.toml"
    config.write_text("""
[scenario.dictionary]
kind = "coordinates"
M = 8
sup_bound = 1.0
norm_floor = 1.0
fourth_moment_bound = 1.0

[scenario.f]
kind = "combination"
indices = [0, 2]
values = [1.2, -0.9]

[scenario.measure]
kind = "rademacher"
d = 8

[scenario.noise]
kind = "truncated_gaussian"
sd = 0.7
cutoff = 2.5

[scenario]
f_sup_bound = 2.1

[target]
C_f = 1.0
r = 0.32

[tuning]
A = 1.0
regime = "sqrt"

[experiment]
n_grid = [50, 120]
replicates = 25
base_seed = 991
""")
    code_a = dispatch(["simulate", "--config", str(config),
                       "--out", str(tmp_path / "a")])
    code_b = dispatch(["simulate", "--config", str(config),
                       "--out", str(tmp_path / "b")])
    bytes_a = (tmp_path / "a.json").read_bytes()
    bytes_b = (tmp_path / "b.json").read_bytes()
    ok = code_a == code_b == 0 and bytes_a == bytes_b and len(bytes_a) > 0
    # the parsed document must also carry the full schema
    doc = json.loads(bytes_a)
    ok = ok and {"config", "aggregates", "replicates"} == set(doc)
    report(10, "repeated simulate runs produce byte-identical JSON", ok,
           f"{len(bytes_a)} bytes")
