"""Declarative construction of scenarios, targets, and experiments.

Config documents are plain dictionaries, typically loaded from TOML (human
authored) or JSON (machine written). Every builder validates eagerly and
raises ConfigError with the offending key.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .dictionary import Box, CustomMeasure, Dictionary, DiscreteMeasure, \
    LinearCombination, PrecomputedColumn, Scenario, SuppliedMoments, \
    LaplaceNoise, TruncatedGaussianNoise, UniformNoise, coordinate, polynomial, \
    population_moments
from .diagnostics import BoundParams, TuningConfig
from .errors import ConfigError
from .harness import ExperimentConfig
from .oracle import TargetSpec, target_set
from .solver import SolverOptions

__all__ = [
    "load_config",
    "dictionary_from_spec",
    "scenario_from_spec",
    "target_from_spec",
    "tuning_from_spec",
    "solver_from_spec",
    "experiment_from_spec",
    "bound_params_from_spec",
]


def load_config(path) -> dict:
    """Load a TOML or JSON config document by extension."""
    p = Path(path)
    suffix = p.suffix.lower()
    if suffix == ".toml":
        with p.open("rb") as fh:
            return tomllib.load(fh)
    if suffix == ".json":
        return json.loads(p.read_text(encoding="utf-8"))
    raise ConfigError(f"unsupported config extension {suffix!r} (use .toml or .json)")


def _need(doc: dict, key: str, where: str):
    if key not in doc:
        raise ConfigError(f"missing key {key!r} in {where}")
    return doc[key]


def dictionary_from_spec(doc: dict) -> Dictionary:
    kind = _need(doc, "kind", "dictionary")
    sup = _need(doc, "sup_bound", "dictionary")
    floor = _need(doc, "norm_floor", "dictionary")
    fourth = _need(doc, "fourth_moment_bound", "dictionary")
    domain = None
    if "domain" in doc:
        domain = Box(tuple(doc["domain"]["lower"]), tuple(doc["domain"]["upper"]))
    if kind == "coordinates":
        funcs = [coordinate(j) for j in range(int(_need(doc, "M", "dictionary")))]
    elif kind == "polynomials":
        funcs = [polynomial(c, var=int(doc.get("var", 0)))
                 for c in _need(doc, "coeffs", "dictionary")]
    elif kind == "precomputed":
        funcs = [PrecomputedColumn(col) for col in _need(doc, "columns", "dictionary")]
    else:
        raise ConfigError(f"unknown dictionary kind {kind!r}")
    return Dictionary(funcs, sup_bound=float(sup), norm_floor=float(floor),
                      fourth_moment_bound=float(fourth), domain=domain)


def _f_from_spec(doc: dict, dictionary: Dictionary):
    kind = _need(doc, "kind", "f")
    if kind == "combination":
        if "coeffs" in doc:
            coeffs = np.asarray(doc["coeffs"], dtype=float)
        else:
            coeffs = np.zeros(dictionary.M)
            for i, v in zip(_need(doc, "indices", "f"), _need(doc, "values", "f")):
                coeffs[int(i)] = float(v)
        if coeffs.size != dictionary.M:
            raise ConfigError(
                f"f.coeffs has length {coeffs.size}, dictionary has {dictionary.M}")
        return LinearCombination(dictionary.funcs, coeffs)
    if kind == "polynomial":
        return polynomial(doc["coeffs"], var=int(doc.get("var", 0)))
    if kind == "coordinate":
        return coordinate(int(doc["index"]))
    raise ConfigError(f"unknown f kind {kind!r}")


def _rademacher_sampler(d: int):
    def sampler(rng, n):
        return rng.integers(0, 2, size=(n, d)).astype(float) * 2.0 - 1.0
    return sampler


def _measure_from_spec(doc: dict, dictionary: Dictionary):
    kind = _need(doc, "kind", "measure")
    if kind == "discrete":
        return DiscreteMeasure(doc["points"], doc["weights"])
    if kind == "rademacher":
        d = int(_need(doc, "d", "measure"))
        if dictionary.M > d:
            raise ConfigError(f"rademacher dimension {d} < dictionary size "
                              f"{dictionary.M}")
        return CustomMeasure(sampler=_rademacher_sampler(d),
                             moments=SuppliedMoments(gram=np.eye(dictionary.M)),
                             name="rademacher")
    if kind == "supplied":
        cross = doc.get("cross")
        f_sq = doc.get("f_sq")
        return CustomMeasure(sampler=None,
                             moments=SuppliedMoments(gram=np.asarray(doc["gram"]),
                                                     cross=cross, f_sq=f_sq),
                             name="supplied")
    raise ConfigError(f"unknown measure kind {kind!r}")


def _noise_from_spec(doc: dict):
    kind = _need(doc, "kind", "noise")
    if kind == "uniform":
        return UniformNoise(float(_need(doc, "half_width", "noise")))
    if kind == "truncated_gaussian":
        return TruncatedGaussianNoise(float(_need(doc, "sd", "noise")),
                                      float(_need(doc, "cutoff", "noise")))
    if kind == "laplace":
        return LaplaceNoise(float(_need(doc, "scale", "noise")))
    raise ConfigError(f"unknown noise kind {kind!r}")


def scenario_from_spec(doc: dict) -> Scenario:
    dictionary = dictionary_from_spec(_need(doc, "dictionary", "scenario"))
    return Scenario(
        dictionary=dictionary,
        f=_f_from_spec(_need(doc, "f", "scenario"), dictionary),
        measure=_measure_from_spec(_need(doc, "measure", "scenario"), dictionary),
        noise=_noise_from_spec(_need(doc, "noise", "scenario")),
        f_sup_bound=float(doc.get("f_sup_bound", np.inf)),
    )


def target_from_spec(doc: dict, scenario: Scenario) -> TargetSpec:
    """Compute the target via the population oracle at the configured radius."""
    moments = population_moments(scenario)
    kwargs = {}
    if "max_exhaustive" in doc:
        kwargs["max_exhaustive"] = int(doc["max_exhaustive"])
    return target_set(moments.gram, moments.cross, moments.f_sq,
                      C_f=float(_need(doc, "C_f", "target")),
                      r=float(_need(doc, "r", "target")), **kwargs)


def tuning_from_spec(doc: dict, M: int) -> TuningConfig:
    return TuningConfig(
        A=float(_need(doc, "A", "tuning")),
        regime=str(_need(doc, "regime", "tuning")),
        M=int(doc.get("M", M)),
        n=int(doc["n"]) if "n" in doc else None,
        gamma_cap=float(doc["gamma_cap"]) if "gamma_cap" in doc else None,
    )


def solver_from_spec(doc: dict | None) -> SolverOptions:
    doc = doc or {}
    defaults = SolverOptions()
    return SolverOptions(
        max_sweeps=int(doc.get("max_sweeps", defaults.max_sweeps)),
        tol=float(doc.get("tol", defaults.tol)),
        zero_tol=float(doc.get("zero_tol", defaults.zero_tol)),
        kkt_tol=float(doc.get("kkt_tol", defaults.kkt_tol)),
        method=str(doc.get("method", defaults.method)),
    )


def experiment_from_spec(doc: dict) -> ExperimentConfig:
    scenario = scenario_from_spec(_need(doc, "scenario", "config"))
    target = target_from_spec(_need(doc, "target", "config"), scenario)
    exp = _need(doc, "experiment", "config")
    cfg = ExperimentConfig(
        scenario=scenario,
        target=target,
        tuning=tuning_from_spec(_need(doc, "tuning", "config"),
                                M=scenario.dictionary.M),
        n_grid=tuple(int(n) for n in _need(exp, "n_grid", "experiment")),
        replicates=int(_need(exp, "replicates", "experiment")),
        base_seed=int(_need(exp, "base_seed", "experiment")),
        B=float(exp.get("B", 1.0)),
        solver=solver_from_spec(doc.get("solver")),
        coherence_const=float(exp.get("coherence_const", 1.0 / 45.0)),
        l1_ratio_ceiling=float(exp.get("l1_ratio_ceiling", 10.0)),
    )
    if "record_events" in exp:
        cfg = ExperimentConfig(
            scenario=cfg.scenario, target=cfg.target, tuning=cfg.tuning,
            n_grid=cfg.n_grid, replicates=cfg.replicates,
            base_seed=cfg.base_seed, B=cfg.B, solver=cfg.solver,
            record_events=frozenset(exp["record_events"]),
            coherence_const=cfg.coherence_const,
            l1_ratio_ceiling=cfg.l1_ratio_ceiling,
        )
    return cfg


def bound_params_from_spec(doc: dict) -> BoundParams:
    defaults = BoundParams()
    known = {f for f in defaults.describe()}
    extra = set(doc) - known
    if extra:
        raise ConfigError(f"unknown bound parameter(s): {sorted(extra)}")
    return BoundParams(**{k: float(v) for k, v in doc.items()})
