"""Simulated coherent-system experiments scored against known truth.

A scenario fixes a structure, a lifetime law per component, the sample size
and the masking proportion. Each replicate simulates a dataset, fits every
component and scores the posterior-mean reliability curve by its mean
absolute error against the true curve.
"""
from __future__ import annotations

import io
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .datafile import SystemDataset
from .distributions import SimDistribution, Weibull2, from_moments
from .inference import (FAST_PROFILE, FULL_PROFILE, PriorSpec, RawChain, SamplerConfig, Variant,
                        run_chain)
from .posterior import PosteriorSample, default_grid, posterior_mean_reliability, thin_chain
from .structures import SystemStructure, classify_components, masked_candidate_set, parse_structure, series

__all__ = [
    "ScenarioSpec",
    "MaeReport",
    "ComponentFit",
    "simulate_dataset",
    "mae",
    "fit_component",
    "fit_dataset",
    "run_scenario",
    "component_seed",
    "system1",
    "system2",
    "system3",
    "study_grid",
    "hard_drive_like_dataset",
    "MASKED_SETS_ONLY_DEAD",
]

# masked sets hold only failed components, so no masked entry is right-censored
MASKED_SETS_ONLY_DEAD = Variant(symmetric=True, zero=(False, True, False))


@dataclass
class ScenarioSpec:
    structure: SystemStructure
    distributions: list
    n: int
    p: float
    seed: int = 0
    sampler: SamplerConfig = FULL_PROFILE
    variant: Variant = MASKED_SETS_ONLY_DEAD
    priors: PriorSpec = field(default_factory=PriorSpec)
    grid_points: int = 200
    name: str = ""

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValueError("masking proportion must lie in [0, 1]")
        if self.n < 1:
            raise ValueError("sample size must be at least 1")
        if len(self.distributions) != self.structure.m:
            raise ValueError("one lifetime distribution per component is required")
        for d in self.distributions:
            if not isinstance(d, SimDistribution):
                raise TypeError(f"not a lifetime distribution: {d!r}")


def simulate_dataset(spec: ScenarioSpec, rng: np.random.Generator) -> SystemDataset:
    """Simulate ``spec.n`` systems.

    Each system is masked independently with probability ``spec.p``; a
    masked system hides the status of every member of the minimal cut set
    that failed it.
    """
    s = spec.structure
    x = np.column_stack([np.asarray(d.sample(rng, spec.n), dtype=float) for d in spec.distributions])
    is_masked = rng.random(spec.n) < spec.p
    times = np.empty(spec.n)
    true_status = np.empty((spec.n, s.m), dtype=int)
    for i in range(spec.n):
        times[i], true_status[i] = classify_components(s, x[i])
    status = true_status.copy()
    for i in np.flatnonzero(is_masked):
        cut = masked_candidate_set(s, x[i], true_status[i])
        status[i, np.asarray(cut) - 1] = 0
    return SystemDataset(times, status, lifetimes=x, true_status=true_status)


def mae(estimated, true, grid_estimated=None, grid_true=None) -> float:
    """Mean absolute difference of two curves evaluated on the same grid."""
    estimated = np.asarray(estimated, dtype=float)
    true = np.asarray(true, dtype=float)
    if estimated.shape != true.shape:
        raise ValueError(f"curves have different shapes {estimated.shape} and {true.shape}")
    if grid_estimated is not None and grid_true is not None and not np.array_equal(grid_estimated, grid_true):
        raise ValueError("curves are evaluated on different grids")
    return float(np.mean(np.abs(estimated - true)))


def component_seed(seed: int, j: int) -> int:
    """Chain seed of component ``j`` derived from a run seed."""
    return int(np.random.SeedSequence([int(seed), int(j)]).generate_state(1)[0])


@dataclass
class ComponentFit:
    component: int
    sample: PosteriorSample | None
    chain: RawChain | None
    error: str | None = None


def fit_component(dataset: SystemDataset, j: int, config: SamplerConfig, priors: PriorSpec = PriorSpec(),
                  variant: Variant = Variant(), keep_chain: bool = False) -> ComponentFit:
    data = dataset.component(j)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        chain = run_chain(data, config, priors, variant)
    return ComponentFit(j, thin_chain(chain), chain if keep_chain else chain_summary_only(chain))


def chain_summary_only(chain: RawChain) -> RawChain:
    # drop the per-iteration arrays that nobody downstream reads
    return replace(chain, d_counts=chain.d_counts[:0])


def _fit_one(args):
    dataset, j, config, priors, variant, keep_chain = args
    try:
        return fit_component(dataset, j, config, priors, variant, keep_chain)
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return ComponentFit(j, None, None, f"{type(exc).__name__}: {exc}")


def fit_dataset(dataset: SystemDataset, config: SamplerConfig, priors: PriorSpec = PriorSpec(),
                variant: Variant = Variant(), components=None, workers: int = 1,
                keep_chain: bool = False) -> list[ComponentFit]:
    """Fit each component with its own seeded chain.

    Chain seeds depend only on ``config.seed`` and the component index, so
    results do not depend on ``workers``.
    """
    components = list(range(1, dataset.m + 1)) if components is None else list(components)
    jobs = [(dataset, j, config.with_seed(component_seed(config.seed, j)), priors, variant, keep_chain)
            for j in components]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_fit_one, jobs))
    return [_fit_one(job) for job in jobs]


@dataclass
class MaeReport:
    """MAE per replicate (rows) and component (columns); NaN marks a failed fit."""

    values: np.ndarray
    failures: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    name: str = ""

    @property
    def replicates(self) -> int:
        return self.values.shape[0]

    @property
    def mean(self) -> np.ndarray:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanmean(self.values, axis=0)

    @property
    def sd(self) -> np.ndarray | None:
        if self.replicates < 2:
            return None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanstd(self.values, axis=0, ddof=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        m = self.values.shape[1]
        buf.write("replicate," + ",".join(f"c{j}" for j in range(1, m + 1)) + "\n")
        for r, row in enumerate(self.values):
            buf.write(f"{r}," + ",".join(_fmt(v) for v in row) + "\n")
        buf.write("mean," + ",".join(_fmt(v) for v in self.mean) + "\n")
        sd = self.sd
        buf.write("sd," + ",".join("NA" if sd is None else _fmt(v) for v in (sd if sd is not None else self.mean)) + "\n")
        return buf.getvalue()


def _fmt(v):
    return "NA" if np.isnan(v) else f"{v:.10g}"


def _replicate(spec: ScenarioSpec, r: int):
    seed = spec.seed + r
    rng = np.random.default_rng(seed)
    dataset = simulate_dataset(spec, rng)
    grid = default_grid(dataset.times, spec.grid_points)
    notes = []
    if dataset.n < 10:
        notes.append(f"replicate {r}: only {dataset.n} systems; estimates rest mostly on the prior")
    fits = fit_dataset(dataset, spec.sampler.with_seed(seed), spec.priors, spec.variant)
    row = np.full(spec.structure.m, np.nan)
    failures = []
    for fit in fits:
        j = fit.component
        if fit.error is not None:
            failures.append((r, j, fit.error))
            continue
        if fit.chain is not None and fit.chain.warnings:
            notes.extend(f"replicate {r}, component {j}: {w}" for w in fit.chain.warnings)
        estimate = posterior_mean_reliability(fit.sample, grid)
        truth = spec.distributions[j - 1].reliability(grid)
        row[j - 1] = mae(estimate, truth)
    return row, failures, notes


def run_scenario(spec: ScenarioSpec, replicates: int = 10, workers: int = 1) -> MaeReport:
    """Simulate, fit and score ``replicates`` datasets.

    Replicate ``r`` uses seed ``spec.seed + r`` for both the simulation and
    the chains. Failed fits are recorded, not raised.
    """
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    if workers > 1 and replicates > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate, [spec] * replicates, range(replicates)))
    else:
        results = [_replicate(spec, r) for r in range(replicates)]
    values = np.array([row for row, _, _ in results])
    failures = [f for _, fs, _ in results for f in fs]
    notes = [n for _, _, ns in results for n in ns]
    return MaeReport(values, failures, notes, spec.name)


# ---------------------------------------------------------------------------
# the simulated systems and the study grid
# ---------------------------------------------------------------------------

TWO_OUT_OF_THREE = "max(min(1,2), min(1,3), min(2,3))"
SYSTEM2_DSL = "min(max(1,2), max(min(3,4), 5))"
BRIDGE = "max(min(1,4), min(2,5), min(1,3,5), min(2,3,4))"


def system1(n: int = 300, p: float = 0.4, **kwargs) -> ScenarioSpec:
    """2-out-of-3 system: Weibull(15, 8), gamma(18, 12), lognormal(20, 10) as (mean, variance)."""
    dists = [from_moments("weibull2", 15, 8), from_moments("gamma", 18, 12), from_moments("lognormal", 20, 10)]
    return ScenarioSpec(parse_structure(TWO_OUT_OF_THREE), dists, n, p, name="system1", **kwargs)


def system2(n: int = 100, p: float = 0.3, **kwargs) -> ScenarioSpec:
    dists = [from_moments("weibull2", 12, 15), from_moments("gamma", 11, 11), from_moments("weibull3", 12, 9),
             from_moments("lognormal", 12, 7), from_moments("weibull3", 11, 14)]
    return ScenarioSpec(parse_structure(SYSTEM2_DSL), dists, n, p, name="system2", **kwargs)


def system3(n: int = 50, p: float = 0.2, **kwargs) -> ScenarioSpec:
    """Bridge system."""
    dists = [from_moments("weibull2", 4, 15), from_moments("modified_weibull", 5.6, 14.9),
             from_moments("lognormal", 6, 7), from_moments("gamma", 5, 8), from_moments("weibull3", 4, 8)]
    return ScenarioSpec(parse_structure(BRIDGE), dists, n, p, name="system3", **kwargs)


def study_grid(builder=system1, sizes=(50, 100, 300, 1000), proportions=(0.2, 0.4, 0.7), **kwargs):
    """Scenario for every sample size and masking proportion."""
    return [builder(n=n, p=p, **kwargs) for n in sizes for p in proportions]


def hard_drive_like_dataset(rng: np.random.Generator, counts=(35, 19, 52, 32, 34), params=None) -> SystemDataset:
    """Synthetic three-component series data with a prescribed cause table.

    ``counts`` gives the systems failed by components 1, 2 and 3 with the
    cause observed, then those masked on {1,3} and on {1,2,3}. Lifetimes
    come from two-parameter Weibull laws; systems are drawn until every
    cell is filled.
    """
    params = params or [(1.0, 10.0), (1.5, 10.5), (3.7, 3.6)]
    dists = [Weibull2(b, e) for b, e in params]
    s = series(3)
    # cells a failure by component j may fill
    cells = {1: [0, 3, 4], 2: [1, 4], 3: [2, 3, 4]}
    remaining = list(counts)
    rows, times = [], []
    while sum(remaining) > 0:
        x = np.array([d.sample(rng) for d in dists])
        t, delta = classify_components(s, x)
        cause = int(np.flatnonzero(delta == 1)[0]) + 1
        open_cells = [c for c in cells[cause] if remaining[c] > 0]
        if not open_cells:
            continue
        weights = np.array([remaining[c] for c in open_cells], dtype=float)
        cell = open_cells[rng.choice(len(open_cells), p=weights / weights.sum())]
        remaining[cell] -= 1
        status = delta.copy()
        if cell == 3:
            status[[0, 2]] = 0
        elif cell == 4:
            status[:] = 0
        rows.append(status)
        times.append(t)
    order = rng.permutation(len(rows))
    return SystemDataset(np.array(times)[order], np.array(rows)[order])
