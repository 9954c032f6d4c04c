"""Post-processing of sampler output: thinning, reliability curves, HPD bands."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .distributions import log_reliability
from .inference import RawChain

__all__ = [
    "PosteriorSample",
    "ReliabilityCurveSummary",
    "ConvergenceSummary",
    "thin_indices",
    "thin_chain",
    "posterior_mean_reliability",
    "reliability_draws",
    "hpd_interval",
    "curve_summary",
    "default_grid",
    "lag1_autocorr",
    "split_discrepancy",
    "convergence_stats",
    "CURVE_COLUMNS",
]

CURVE_COLUMNS = ("t", "mean", "sd", "min", "q25", "median", "q75", "max", "hpd_lo", "hpd_hi")


@dataclass
class PosteriorSample:
    """Retained draws of one component's parameters.

    ``eta`` is None for covariate models, where ``gamma`` holds the log-link
    coefficients instead. ``lambdas`` is None under symmetric masking.
    """

    beta: np.ndarray
    eta: np.ndarray | None
    mu: np.ndarray
    gamma: np.ndarray | None = None
    lambdas: np.ndarray | None = None
    seed: int | None = None
    config_digest: str | None = None

    def __len__(self):
        return self.beta.size

    @classmethod
    def from_params(cls, thetas) -> "PosteriorSample":
        """Sample from a list of ``(beta, eta, mu)`` triples."""
        arr = np.atleast_2d(np.asarray(thetas, dtype=float))
        return cls(arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy())

    def scales(self, w=None) -> np.ndarray:
        """Per-draw scale; covariate models need the covariate vector ``w``."""
        if self.gamma is None:
            return self.eta
        if w is None:
            raise ValueError("covariate model: pass the covariate vector w")
        w = np.asarray(w, dtype=float)
        if w.shape != (self.gamma.shape[1],):
            raise ValueError(f"expected {self.gamma.shape[1]} covariates, got shape {w.shape}")
        return np.exp(self.gamma @ w)


def thin_indices(length: int, burn_in: int, thin: int) -> np.ndarray:
    if thin < 1:
        raise ValueError("thin must be at least 1")
    if not 0 <= burn_in < length:
        raise ValueError(f"burn-in {burn_in} does not fit a chain of length {length}")
    return np.arange(burn_in, length, thin)


def thin_chain(chain: RawChain, burn_in: int | None = None, thin: int | None = None) -> PosteriorSample:
    """Drop the burn-in and keep every ``thin``-th state after it.

    Defaults come from the chain's sampler configuration.
    """
    burn_in = chain.config.burn_in if burn_in is None else burn_in
    thin = chain.config.thin if thin is None else thin
    idx = thin_indices(len(chain), burn_in, thin)

    def take(a):
        return None if a is None else a[idx].copy()

    return PosteriorSample(beta=take(chain.beta), eta=take(chain.eta), mu=take(chain.mu),
                           gamma=take(chain.gamma), lambdas=take(chain.lambdas),
                           seed=chain.config.seed, config_digest=chain.config.digest())


def reliability_draws(sample: PosteriorSample, grid, w=None) -> np.ndarray:
    """``R(t | theta_k)`` for every draw (rows) and grid time (columns)."""
    if len(sample) == 0:
        raise ValueError("empty posterior sample")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if np.any(grid < 0):
        raise ValueError("grid times must be non-negative")
    eta = sample.scales(w)
    return np.exp(log_reliability(grid[None, :], sample.beta[:, None], eta[:, None], sample.mu[:, None]))


def posterior_mean_reliability(sample: PosteriorSample, t, w=None):
    """Posterior mean of the reliability at ``t``: the average of ``R(t | theta_k)``."""
    out = reliability_draws(sample, t, w).mean(axis=0)
    return float(out[0]) if np.ndim(t) == 0 else out


def hpd_interval(values, level: float = 0.95) -> tuple[float, float]:
    """Shortest window of sorted draws holding ``ceil(level * n)`` of them.

    Among equally short windows the one with the smallest lower end wins.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    x = np.sort(np.asarray(values, dtype=float).ravel())
    n = x.size
    if n < 10:
        raise ValueError("an empirical HPD interval needs at least 10 draws")
    # guard against level * n landing a hair above an integer
    k = max(1, math.ceil(level * n - 1e-9))
    widths = x[k - 1:] - x[:n - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])


@dataclass
class ReliabilityCurveSummary:
    """Pointwise posterior statistics of ``R(t)`` on a time grid."""

    t: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    min: np.ndarray
    q25: np.ndarray
    median: np.ndarray
    q75: np.ndarray
    max: np.ndarray
    hpd_lo: np.ndarray
    hpd_hi: np.ndarray
    level: float = 0.95

    def columns(self) -> dict:
        return {name: getattr(self, name) for name in CURVE_COLUMNS}

    def to_csv(self, digits: int = 10) -> str:
        buf = io.StringIO()
        buf.write(",".join(CURVE_COLUMNS) + "\n")
        cols = [getattr(self, name) for name in CURVE_COLUMNS]
        for row in zip(*cols):
            buf.write(",".join(_fmt(v, digits) for v in row) + "\n")
        return buf.getvalue()


def _fmt(v, digits):
    if np.isnan(v):
        return "NA"
    return f"{v:.{digits}g}"


def curve_summary(sample: PosteriorSample, grid, level: float = 0.95, w=None) -> ReliabilityCurveSummary:
    """Min, quartiles, median, mean, max, SD and HPD band of ``R(t)`` per grid time.

    The HPD band is NaN when the sample has fewer than 10 draws.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("empty grid")
    r = reliability_draws(sample, grid, w)
    n = r.shape[0]
    # deviations from the first draw keep a constant sample exactly constant
    dev = r - r[0]
    mean = r[0] + dev.mean(axis=0)
    # pointwise means of nonincreasing curves stay nonincreasing
    assert np.all(np.diff(mean) <= 1e-12) or np.any(np.diff(grid) < 0)
    q = np.quantile(r, [0.25, 0.5, 0.75], axis=0)
    sd = dev.std(axis=0, ddof=1) if n > 1 else np.zeros(grid.size)
    if n >= 10:
        band = np.array([hpd_interval(r[:, i], level) for i in range(grid.size)])
        lo, hi = band[:, 0], band[:, 1]
    else:
        lo = hi = np.full(grid.size, np.nan)
    return ReliabilityCurveSummary(t=grid, mean=mean, sd=sd, min=r.min(axis=0), q25=q[0], median=q[1],
                                   q75=q[2], max=r.max(axis=0), hpd_lo=lo, hpd_hi=hi, level=level)


def default_grid(times, n_points: int = 200) -> np.ndarray:
    """``n_points`` equally spaced times from 0 to the 99th percentile of ``times``."""
    return np.linspace(0.0, float(np.percentile(np.asarray(times, dtype=float), 99)), n_points)


# ---------------------------------------------------------------------------
# convergence
# ---------------------------------------------------------------------------


def lag1_autocorr(x) -> float | None:
    """Lag-1 autocorrelation, or None for a constant series."""
    x = np.asarray(x, dtype=float)
    dev = x - x.mean()
    denom = float(dev @ dev)
    if x.size < 3 or denom == 0.0:
        return None
    return float(dev[:-1] @ dev[1:] / denom)


def split_discrepancy(x) -> float | None:
    """Difference of the two half-chain means in units of the overall SD."""
    x = np.asarray(x, dtype=float)
    half = x.size // 2
    a, b = x[:half], x[x.size - half:]
    sd = x.std()
    if half == 0:
        return None
    if sd == 0.0:
        return 0.0 if a.mean() == b.mean() else None
    return float(abs(a.mean() - b.mean()) / sd)


@dataclass
class ConvergenceSummary:
    acceptance_rate: float
    lag1: float | None
    split: float | None


def convergence_stats(chain: RawChain) -> dict[str, ConvergenceSummary]:
    """Per-parameter diagnostics on the retained draws; no verdict is applied.

    The acceptance rate is that of the theta block after burn-in.
    """
    if len(chain) < 100:
        raise ValueError("convergence diagnostics need at least 100 iterations")
    cfg = chain.config
    idx = thin_indices(len(chain), cfg.burn_in, cfg.thin)
    acc = float(chain.accepted[cfg.burn_in:].mean())
    series = {"beta": chain.beta, "mu": chain.mu}
    if chain.eta is not None:
        series["eta"] = chain.eta
    if chain.gamma is not None:
        for i in range(chain.gamma.shape[1]):
            series[f"gamma{i}"] = chain.gamma[:, i]
    if chain.lambdas is not None:
        for l in range(3):
            if not chain.variant.zero[l]:
                series[f"lambda{l + 1}"] = chain.lambdas[:, l]
    return {name: ConvergenceSummary(acc, lag1_autocorr(x[idx]), split_discrepancy(x[idx]))
            for name, x in series.items()}
