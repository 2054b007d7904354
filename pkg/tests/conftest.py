"""Shared problem generators for the test suite."""

import numpy as np
import pytest

import lasso_select as ls


def bounded_gaussian_design(rng, n, M, scale=1.0):
    """Gaussian-derived design squashed through tanh, so sup norms are <= scale."""
    return scale * np.tanh(rng.normal(size=(n, M)))


def orthonormal_design(rng, n, M):
    """Design with (1/n) F^T F = I exactly up to round-off (n >= M)."""
    q, _ = np.linalg.qr(rng.normal(size=(n, M)))
    return np.sqrt(n) * q


def sparse_truth(rng, M, k, low=0.5, high=2.0):
    lam = np.zeros(M)
    idx = rng.choice(M, size=k, replace=False)
    lam[idx] = rng.uniform(low, high, size=k) * rng.choice([-1.0, 1.0], size=k)
    return lam


NOISE_MENU = (
    ls.UniformNoise(1.0),
    ls.TruncatedGaussianNoise(sd=1.0, cutoff=3.0),
    ls.LaplaceNoise(scale=0.5),
)


def random_problem(rng, n, M, k=3, noise=None, r=None):
    """A random lasso instance: bounded design, sparse truth, menu noise."""
    noise = noise or NOISE_MENU[int(rng.integers(len(NOISE_MENU)))]
    F = bounded_gaussian_design(rng, n, M)
    lam = sparse_truth(rng, M, min(k, M))
    seed = int(rng.integers(2**31))
    W = noise.sample(np.random.default_rng(seed), n)
    Y = F @ lam + W
    if r is None:
        r = ls.tuning_sequence(ls.TuningConfig(A=1.0, regime="sqrt", M=M, n=n))
    pen = ls.compute_penalty(ls.empirical_norms(F), r)
    return F, Y, pen, lam


def rademacher_scenario(M=20, d=None, signal=(1.0, 1.0, 1.0),
                        noise=ls.UniformNoise(1.0)):
    """Orthonormal bounded scenario: coordinate dictionary under a product
    sign measure, regression function an exact sparse combination."""
    d = d or M
    dic = ls.Dictionary.coordinates(M, sup_bound=1.0, norm_floor=1.0,
                                    fourth_moment_bound=1.0)
    coeffs = np.zeros(M)
    coeffs[:len(signal)] = signal
    f = ls.LinearCombination(dic.funcs, coeffs)

    def sampler(rng, n):
        return rng.integers(0, 2, size=(n, d)).astype(float) * 2.0 - 1.0

    measure = ls.CustomMeasure(sampler=sampler,
                               moments=ls.SuppliedMoments(gram=np.eye(M)),
                               name="rademacher")
    return ls.Scenario(dictionary=dic, f=f, measure=measure, noise=noise,
                       f_sup_bound=float(np.sum(np.abs(coeffs))))


@pytest.fixture
def rng():
    return np.random.default_rng(20250809)
