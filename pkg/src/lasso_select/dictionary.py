"""Function dictionaries, regression scenarios, sampling, and dataset ingestion.

A dictionary is a finite list of real-valued functions on a common domain
X subset of R^d; a scenario pairs it with a regression function, a design
measure, and a noise model whose exponential moment is known in closed form.
All functions are vectorized: they map an (n, d) array of points to an
(n,) array of values.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.stats import norm, truncnorm

from .errors import ConfigError, DomainError, ParseError, UnsupportedMeasure

__all__ = [
    "Box",
    "coordinate",
    "polynomial",
    "PrecomputedColumn",
    "LinearCombination",
    "Dictionary",
    "DiscreteMeasure",
    "SuppliedMoments",
    "CustomMeasure",
    "UniformNoise",
    "TruncatedGaussianNoise",
    "LaplaceNoise",
    "Scenario",
    "Sample",
    "Moments",
    "CsvLayout",
    "as_points",
    "evaluate_design",
    "empirical_norms",
    "sample_scenario",
    "load_dataset",
    "population_moments",
]


def as_points(xs) -> np.ndarray:
    """Coerce input to an (n, d) float array; 1-D input becomes (n, 1)."""
    pts = np.asarray(xs, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValueError(f"points must be 1- or 2-dimensional, got shape {pts.shape}")
    return pts


# ---------------------------------------------------------------------------
# Dictionary function kinds


def coordinate(index: int) -> Callable[[np.ndarray], np.ndarray]:
    """Raw-variable selector f(x) = x[index]."""

    def f(pts: np.ndarray) -> np.ndarray:
        return pts[:, index]

    f.describe = {"kind": "coordinate", "index": int(index)}
    return f


def polynomial(coeffs: Sequence[float], var: int = 0) -> Callable[[np.ndarray], np.ndarray]:
    """Univariate polynomial sum_k coeffs[k] * x[var]**k."""
    c = np.asarray(coeffs, dtype=float)

    def f(pts: np.ndarray) -> np.ndarray:
        return np.polynomial.polynomial.polyval(pts[:, var], c)

    f.describe = {"kind": "polynomial", "coeffs": [float(v) for v in c],
                  "var": int(var)}
    return f


class PrecomputedColumn:
    """Function backed by a fixed column of values, indexed by observation row.

    Points are (row-index,) vectors; used for ingested datasets where only
    the evaluated dictionary columns are known.
    """

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        idx = np.rint(pts[:, 0]).astype(int)
        if idx.size and (idx.min() < 0 or idx.max() >= self.values.size):
            bad = int(np.argmax((idx < 0) | (idx >= self.values.size)))
            raise DomainError(f"row index out of range at point {bad}", index=bad)
        return self.values[idx]

    @property
    def describe(self):
        return {"kind": "precomputed", "values": [float(v) for v in self.values]}


class LinearCombination:
    """f(x) = sum_j coeffs[j] * funcs[j](x), with the coefficients retained.

    Retaining the coefficients lets population moments be derived exactly
    from a supplied dictionary Gram matrix.
    """

    def __init__(self, funcs: Sequence[Callable], coeffs):
        self.funcs = list(funcs)
        self.coeffs = np.asarray(coeffs, dtype=float)
        if len(self.funcs) != self.coeffs.size:
            raise ConfigError("combination needs one coefficient per function")

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        out = np.zeros(pts.shape[0])
        for c, f in zip(self.coeffs, self.funcs):
            if c != 0.0:
                out += c * np.asarray(f(pts), dtype=float)
        return out

    @property
    def describe(self):
        return {"kind": "combination", "coeffs": [float(c) for c in self.coeffs]}


def _describe_func(f) -> dict:
    d = getattr(f, "describe", None)
    if d is not None:
        return dict(d)
    name = getattr(f, "__qualname__", type(f).__name__)
    return {"kind": "callable", "name": name}


@dataclass(frozen=True)
class Box:
    """Axis-aligned box domain with inclusive bounds."""

    lower: tuple
    upper: tuple

    def violations(self, pts: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        return np.any((pts < lo) | (pts > hi), axis=1)


# ---------------------------------------------------------------------------
# Core scenario types


@dataclass(frozen=True)
class Dictionary:
    """A finite dictionary of candidate functions with declared bound constants.

    sup_bound          uniform sup-norm bound on every function
    norm_floor         lower bound on every population L2 norm
    fourth_moment_bound  bound on all mixed fourth moments E f_i^2 f_j^2
    """

    funcs: tuple
    sup_bound: float
    norm_floor: float
    fourth_moment_bound: float
    domain: Box | None = None

    def __init__(self, funcs, sup_bound, norm_floor, fourth_moment_bound, domain=None):
        if len(funcs) < 1:
            raise ConfigError("dictionary needs at least one function")
        for name, v in (
            ("sup_bound", sup_bound),
            ("norm_floor", norm_floor),
            ("fourth_moment_bound", fourth_moment_bound),
        ):
            if not v > 0:
                raise ConfigError(f"{name} must be positive, got {v}")
        object.__setattr__(self, "funcs", tuple(funcs))
        object.__setattr__(self, "sup_bound", float(sup_bound))
        object.__setattr__(self, "norm_floor", float(norm_floor))
        object.__setattr__(self, "fourth_moment_bound", float(fourth_moment_bound))
        object.__setattr__(self, "domain", domain)

    @property
    def M(self) -> int:
        return len(self.funcs)

    @classmethod
    def coordinates(cls, M, sup_bound, norm_floor, fourth_moment_bound, domain=None):
        """Identity dictionary f_j(x) = x_j for j = 0..M-1."""
        return cls([coordinate(j) for j in range(M)], sup_bound, norm_floor,
                   fourth_moment_bound, domain)

    def describe(self) -> dict:
        return {
            "M": self.M,
            "sup_bound": self.sup_bound,
            "norm_floor": self.norm_floor,
            "fourth_moment_bound": self.fourth_moment_bound,
            "funcs": [_describe_func(f) for f in self.funcs],
        }


class Moments(NamedTuple):
    """Exact population moments: Gram matrix, cross moments with f, and ||f||^2."""

    gram: np.ndarray
    cross: np.ndarray
    f_sq: float


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite discrete design measure: support points with probability weights."""

    points: np.ndarray
    weights: np.ndarray

    def __init__(self, points, weights):
        pts = as_points(points)
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size != pts.shape[0]:
            raise ConfigError("need one weight per support point")
        if np.any(w < 0):
            raise ConfigError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ConfigError(f"weights must sum to 1, got {w.sum()!r}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        idx = rng.choice(self.points.shape[0], size=n, p=self.weights)
        return self.points[idx]

    def describe(self) -> dict:
        return {
            "kind": "discrete",
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
        }


@dataclass(frozen=True)
class SuppliedMoments:
    """Caller-supplied closed-form population moments.

    cross and f_sq may be omitted when the regression function is a
    LinearCombination of the dictionary, in which case they follow from gram.
    """

    gram: np.ndarray
    cross: np.ndarray | None = None
    f_sq: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "gram", np.asarray(self.gram, dtype=float))
        if self.cross is not None:
            object.__setattr__(self, "cross", np.asarray(self.cross, dtype=float))
        if (self.cross is None) != (self.f_sq is None):
            raise ConfigError("supply cross and f_sq together or neither")


@dataclass(frozen=True)
class CustomMeasure:
    """Design measure given by a sampler and/or closed-form moments.

    sampler(rng, n) must return an (n, d) array and draw only from rng.
    """

    sampler: Callable[[np.random.Generator, int], np.ndarray] | None = None
    moments: SuppliedMoments | None = None
    name: str = "custom"

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.sampler is None:
            raise ConfigError("measure has no sampler")
        return as_points(self.sampler(rng, n))

    def describe(self) -> dict:
        return {"kind": self.name, "has_sampler": self.sampler is not None,
                "has_moments": self.moments is not None}


# ---------------------------------------------------------------------------
# Noise models: every member of the menu has a certifiable bound on E exp|W|.


@dataclass(frozen=True)
class UniformNoise:
    """Uniform on [-half_width, half_width]; half_width 0 is exact zero noise."""

    half_width: float

    def __post_init__(self):
        if self.half_width < 0:
            raise ConfigError("half_width must be >= 0")

    @property
    def b(self) -> float:
        a = self.half_width
        return (math.expm1(a)) / a if a > 0 else 1.0

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.half_width == 0.0:
            return np.zeros(n)
        return rng.uniform(-self.half_width, self.half_width, size=n)

    def describe(self) -> dict:
        return {"kind": "uniform", "half_width": self.half_width, "b": self.b}


@dataclass(frozen=True)
class TruncatedGaussianNoise:
    """Gaussian with scale sd truncated symmetrically at +-cutoff."""

    sd: float
    cutoff: float

    def __post_init__(self):
        if not (self.sd > 0 and self.cutoff > 0):
            raise ConfigError("sd and cutoff must be positive")

    @property
    def b(self) -> float:
        # E exp|W| for the symmetric truncation, in closed form
        s, t = self.sd, self.cutoff
        z = 2.0 * norm.cdf(t / s) - 1.0
        return float(2.0 * math.exp(s * s / 2.0)
                     * (norm.cdf((t - s * s) / s) - norm.cdf(-s)) / z)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        a = -self.cutoff / self.sd
        return truncnorm.rvs(a, -a, scale=self.sd, size=n, random_state=rng)

    def describe(self) -> dict:
        return {"kind": "truncated_gaussian", "sd": self.sd,
                "cutoff": self.cutoff, "b": self.b}


@dataclass(frozen=True)
class LaplaceNoise:
    """Laplace with scale < 1, so that E exp|W| = 1/(1 - scale) is finite."""

    scale: float

    def __post_init__(self):
        if not 0 < self.scale < 1:
            raise ConfigError("Laplace scale must lie in (0, 1)")

    @property
    def b(self) -> float:
        return 1.0 / (1.0 - self.scale)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.laplace(0.0, self.scale, size=n)

    def describe(self) -> dict:
        return {"kind": "laplace", "scale": self.scale, "b": self.b}


@dataclass(frozen=True)
class Scenario:
    """A dictionary plus the data-generating triple (f, design measure, noise)."""

    dictionary: Dictionary
    f: Callable[[np.ndarray], np.ndarray]
    measure: DiscreteMeasure | CustomMeasure
    noise: UniformNoise | TruncatedGaussianNoise | LaplaceNoise
    f_sup_bound: float = math.inf

    def describe(self) -> dict:
        return {
            "dictionary": self.dictionary.describe(),
            "f": _describe_func(self.f),
            "measure": self.measure.describe(),
            "noise": self.noise.describe(),
            "f_sup_bound": self.f_sup_bound,
        }


@dataclass(frozen=True)
class Sample:
    """A realized design: points, responses, optional noise, evaluated columns.

    W is None for ingested data. full_rank_G records whether the design
    matrix has rank min(n, M). Arrays are treated as immutable.
    """

    n: int
    X: np.ndarray
    Y: np.ndarray
    W: np.ndarray | None
    F: np.ndarray
    col_norms: np.ndarray
    full_rank_G: bool


# ---------------------------------------------------------------------------
# Operations


def evaluate_design(dictionary: Dictionary, xs) -> np.ndarray:
    """Evaluate every dictionary function at every point: F[i, j] = f_j(x_i)."""
    pts = as_points(xs)
    if dictionary.domain is not None:
        bad = dictionary.domain.violations(pts)
        if bad.any():
            i = int(np.argmax(bad))
            raise DomainError(f"point {i} outside the dictionary domain", index=i)
    cols = [np.asarray(f(pts), dtype=float) for f in dictionary.funcs]
    return np.column_stack(cols)


def empirical_norms(F: np.ndarray) -> np.ndarray:
    """Root mean square of each column: sqrt((1/n) sum_i F[i,j]^2)."""
    F = np.asarray(F, dtype=float)
    if F.size == 0:
        raise ValueError("empty design matrix")
    return np.sqrt(np.mean(F * F, axis=0))


def sample_scenario(scenario: Scenario, n: int, seed: int) -> Sample:
    """Draw an iid sample of size n; identical seeds give identical samples."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    measure = scenario.measure
    if not hasattr(measure, "sample"):
        raise ConfigError(f"measure {type(measure).__name__} cannot be sampled")
    X = measure.sample(rng, n)
    W = scenario.noise.sample(rng, n)
    Y = np.asarray(scenario.f(X), dtype=float) + W
    F = evaluate_design(scenario.dictionary, X)
    norms = empirical_norms(F)
    full_rank = int(np.linalg.matrix_rank(F)) == min(n, scenario.dictionary.M)
    return Sample(n=n, X=X, Y=Y, W=W, F=F, col_norms=norms, full_rank_G=full_rank)


@dataclass(frozen=True)
class CsvLayout:
    """Column layout of an ingested CSV.

    Exactly one of covariates / dictionary_columns may be given; with
    neither, every non-response column is a raw covariate. Raw covariates
    induce an identity dictionary; dictionary_columns are taken as already
    evaluated functions (precomputed-column mode).
    """

    response: str
    covariates: tuple | None = None
    dictionary_columns: tuple | None = None

    def __post_init__(self):
        if self.covariates is not None and self.dictionary_columns is not None:
            raise ConfigError("give covariates or dictionary_columns, not both")


def _read_csv_rows(source):
    if isinstance(source, (str, Path)):
        raw = Path(source).read_bytes()
    elif isinstance(source, bytes):
        raw = source
    else:
        raw = source.read()
        if isinstance(raw, str):
            raw = raw.encode("utf-8")
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8: {exc}") from None
    return list(csv.reader(io.StringIO(text)))


def load_dataset(source, layout: CsvLayout) -> Sample:
    """Ingest a CSV with a header row into a Sample (noise unknown, W = None)."""
    rows = _read_csv_rows(source)
    if not rows or rows == [[]]:
        raise ParseError("empty file")
    header = [h.strip() for h in rows[0]]
    data_rows = [r for r in rows[1:] if r != []]
    if not data_rows:
        raise ParseError("no data rows")

    def col_index(name):
        try:
            return header.index(name)
        except ValueError:
            raise ParseError(f"missing column {name!r}", column=name) from None

    y_idx = col_index(layout.response)
    if layout.dictionary_columns is not None:
        feat_names = list(layout.dictionary_columns)
        precomputed_mode = True
    elif layout.covariates is not None:
        feat_names = list(layout.covariates)
        precomputed_mode = False
    else:
        feat_names = [h for h in header if h != layout.response]
        precomputed_mode = False
    if not feat_names:
        raise ParseError("no feature columns named")
    feat_idx = [col_index(name) for name in feat_names]

    n = len(data_rows)
    Y = np.empty(n)
    V = np.empty((n, len(feat_names)))
    for i, row in enumerate(data_rows):
        line = i + 2  # 1-based, header is line 1
        if len(row) != len(header):
            raise ParseError(f"row {line} has {len(row)} cells, expected {len(header)}",
                             row=line)

        def cell(j, name):
            try:
                v = float(row[j])
            except ValueError:
                raise ParseError(f"non-numeric cell at row {line}, column {name!r}: "
                                 f"{row[j]!r}", row=line, column=name) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite cell at row {line}, column {name!r}: "
                                 f"{row[j]!r}", row=line, column=name)
            return v

        Y[i] = cell(y_idx, layout.response)
        for k, (j, name) in enumerate(zip(feat_idx, feat_names)):
            V[i, k] = cell(j, name)

    M = V.shape[1]
    if precomputed_mode:
        funcs = [PrecomputedColumn(V[:, j]) for j in range(M)]
        X = np.arange(n, dtype=float)[:, None]
        domain = Box((0.0,), (float(n - 1),))
    else:
        funcs = [coordinate(j) for j in range(M)]
        X = V
        domain = None

    # data-derived bound constants; declared bounds are unknown for real data
    norms = empirical_norms(V)
    sup = float(np.max(np.abs(V))) or 1.0
    floor = float(np.min(norms))
    if floor <= 0.0:
        floor = np.finfo(float).tiny
    Vsq = V * V
    fourth = float(np.max(Vsq.T @ Vsq) / n) or 1.0
    dictionary = Dictionary(funcs, sup_bound=sup, norm_floor=floor,
                            fourth_moment_bound=fourth, domain=domain)

    F = evaluate_design(dictionary, X)
    full_rank = int(np.linalg.matrix_rank(F)) == min(n, M)
    return Sample(n=n, X=X, Y=Y, W=None, F=F, col_norms=empirical_norms(F),
                  full_rank_G=full_rank)


def population_moments(scenario: Scenario) -> Moments:
    """Exact Gram, cross moments and ||f||^2 under the design measure.

    Computed as exact weighted sums on discrete measures; otherwise the
    measure must supply closed-form moments (cross/f_sq derivable when f is
    a LinearCombination of the dictionary).
    """
    measure = scenario.measure
    if isinstance(measure, DiscreteMeasure):
        Fs = evaluate_design(scenario.dictionary, measure.points)
        fv = np.asarray(scenario.f(measure.points), dtype=float)
        w = measure.weights
        gram = (Fs * w[:, None]).T @ Fs
        gram = 0.5 * (gram + gram.T)
        cross = Fs.T @ (w * fv)
        f_sq = float(w @ (fv * fv))
        return Moments(gram=gram, cross=cross, f_sq=f_sq)

    supplied = getattr(measure, "moments", None)
    if supplied is not None:
        gram = np.asarray(supplied.gram, dtype=float)
        M = scenario.dictionary.M
        if gram.shape != (M, M):
            raise ConfigError(f"supplied gram has shape {gram.shape}, expected {(M, M)}")
        if supplied.cross is not None:
            return Moments(gram=gram, cross=np.asarray(supplied.cross, dtype=float),
                           f_sq=float(supplied.f_sq))
        f = scenario.f
        if isinstance(f, LinearCombination) and f.coeffs.size == M:
            cross = gram @ f.coeffs
            f_sq = float(f.coeffs @ cross)
            return Moments(gram=gram, cross=cross, f_sq=f_sq)
        raise UnsupportedMeasure(
            "measure supplies only a Gram matrix and f is not a dictionary combination")

    raise UnsupportedMeasure(
        f"no closed-form moments available for {type(measure).__name__}")
