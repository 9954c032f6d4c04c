"""Three-parameter Weibull lifetime model and simulation lifetime families.

The Weibull functions broadcast over ``t`` and over parameter arrays, which
is how the posterior layer evaluates reliability for every draw on a grid.
All random sampling takes an explicit ``numpy.random.Generator``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special, stats

__all__ = [
    "Weibull3Params",
    "log_reliability",
    "log_density",
    "log_cdf",
    "reliability",
    "density",
    "cdf",
    "quantile",
    "sample",
    "acceleration_factor",
    "unit_reliability",
    "SimDistribution",
    "Weibull2",
    "Weibull3",
    "Gamma",
    "Lognormal",
    "ModifiedWeibull",
    "from_moments",
]


@dataclass(frozen=True)
class Weibull3Params:
    """Shape ``beta``, scale ``eta`` and location ``mu``; support is ``t > mu``."""

    beta: float
    eta: float
    mu: float = 0.0

    def __post_init__(self):
        if not (self.beta > 0 and np.isfinite(self.beta)):
            raise ValueError(f"shape must be positive, got {self.beta}")
        if not (self.eta > 0 and np.isfinite(self.eta)):
            raise ValueError(f"scale must be positive, got {self.eta}")
        if not (self.mu >= 0 and np.isfinite(self.mu)):
            raise ValueError(f"location must be non-negative, got {self.mu}")

    def as_tuple(self):
        return (self.beta, self.eta, self.mu)


def _standardized(t, beta, eta, mu):
    t = np.asarray(t, dtype=float)
    z = np.maximum((t - mu) / eta, 0.0)
    return t, z, z ** beta


def log_reliability(t, beta, eta, mu=0.0):
    """``log R(t)``; exactly 0 for ``t <= mu``."""
    _, _, zb = _standardized(t, beta, eta, mu)
    return -zb


def log_cdf(t, beta, eta, mu=0.0):
    """``log F(t)``; ``-inf`` for ``t <= mu``."""
    _, _, zb = _standardized(t, beta, eta, mu)
    with np.errstate(divide="ignore"):
        return np.log(-np.expm1(-zb))


def log_density(t, beta, eta, mu=0.0):
    """``log f(t)``; ``-inf`` for ``t <= mu`` (the support is open at ``mu``)."""
    t, z, zb = _standardized(t, beta, eta, mu)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(beta) - np.log(eta) + (beta - 1.0) * np.log(z) - zb
    return np.where(t > mu, out, -np.inf)


def reliability(theta: Weibull3Params, t):
    """``R(t) = exp(-((t - mu)/eta)**beta)`` for ``t > mu`` and 1 otherwise."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("reliability is defined for t >= 0")
    out = np.exp(log_reliability(t, *theta.as_tuple()))
    return float(out) if out.ndim == 0 else out


def cdf(theta: Weibull3Params, t):
    t = np.asarray(t, dtype=float)
    out = -np.expm1(log_reliability(t, *theta.as_tuple()))
    return float(out) if out.ndim == 0 else out


def density(theta: Weibull3Params, t):
    out = np.exp(log_density(t, *theta.as_tuple()))
    return float(out) if out.ndim == 0 else out


def quantile(theta: Weibull3Params, p):
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("quantile levels must lie in (0, 1)")
    out = theta.mu + theta.eta * (-np.log1p(-p)) ** (1.0 / theta.beta)
    return float(out) if out.ndim == 0 else out


def sample(theta: Weibull3Params, rng: np.random.Generator, size=None):
    """Inverse-CDF draws ``mu + eta * (-log(1 - U))**(1/beta)``."""
    u = rng.random(size)
    return theta.mu + theta.eta * (-np.log1p(-u)) ** (1.0 / theta.beta)


def acceleration_factor(theta: Weibull3Params) -> float:
    """Acceleration factor ``1/eta`` relative to the unit-scale Weibull.

    ``reliability(theta, t) == unit_reliability((t - mu) * phi, beta)``.
    """
    return 1.0 / theta.eta


def unit_reliability(u, beta):
    u = np.maximum(np.asarray(u, dtype=float), 0.0)
    return np.exp(-(u ** beta))


# ---------------------------------------------------------------------------
# Lifetime families used to generate simulated systems
# ---------------------------------------------------------------------------


class SimDistribution:
    """Common surface of the simulation lifetime families."""

    family = ""

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def reliability(self, t):
        raise NotImplementedError

    def cdf(self, t):
        return 1.0 - self.reliability(t)

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def variance(self) -> float:
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        args = ", ".join(f"{k}={v:.6g}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class _ScipyBacked(SimDistribution):
    def _frozen(self):
        raise NotImplementedError

    def sample(self, rng, size=None):
        return self._frozen().rvs(size=size, random_state=rng)

    def reliability(self, t):
        return self._frozen().sf(t)

    def cdf(self, t):
        return self._frozen().cdf(t)

    @property
    def mean(self):
        return float(self._frozen().mean())

    @property
    def variance(self):
        return float(self._frozen().var())


@dataclass(frozen=True, repr=False)
class Weibull3(_ScipyBacked):
    shape: float
    scale: float
    loc: float = 0.0
    family = "weibull3"

    def __post_init__(self):
        Weibull3Params(self.shape, self.scale, self.loc)

    def _frozen(self):
        return stats.weibull_min(self.shape, loc=self.loc, scale=self.scale)

    def sample(self, rng, size=None):
        return sample(self.theta, rng, size)

    def reliability(self, t):
        return np.exp(log_reliability(t, self.shape, self.scale, self.loc))

    @property
    def theta(self) -> Weibull3Params:
        return Weibull3Params(self.shape, self.scale, self.loc)

    def params(self):
        return {"shape": self.shape, "scale": self.scale, "loc": self.loc}


@dataclass(frozen=True, repr=False)
class Weibull2(Weibull3):
    family = "weibull2"

    def params(self):
        return {"shape": self.shape, "scale": self.scale}


@dataclass(frozen=True, repr=False)
class Gamma(_ScipyBacked):
    shape: float
    rate: float
    family = "gamma"

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError("gamma shape and rate must be positive")

    def _frozen(self):
        return stats.gamma(self.shape, scale=1.0 / self.rate)

    def params(self):
        return {"shape": self.shape, "rate": self.rate}


@dataclass(frozen=True, repr=False)
class Lognormal(_ScipyBacked):
    mu_log: float
    sigma: float
    family = "lognormal"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("lognormal sigma must be positive")

    def _frozen(self):
        return stats.lognorm(self.sigma, scale=np.exp(self.mu_log))

    def params(self):
        return {"mu_log": self.mu_log, "sigma": self.sigma}


@dataclass(frozen=True, repr=False)
class ModifiedWeibull(SimDistribution):
    """Reliability ``exp(-a * t**gamma * exp(lam * t))`` on ``t > 0``.

    Sampling inverts the cumulative hazard by bisection.
    """

    a: float
    gamma: float
    lam: float
    family = "modified_weibull"

    def __post_init__(self):
        if not (self.a > 0 and self.gamma >= 0 and self.lam >= 0 and self.gamma + self.lam > 0):
            raise ValueError("modified Weibull needs a > 0, gamma >= 0, lam >= 0, not both zero")

    def _log_cum_hazard(self, t):
        with np.errstate(divide="ignore"):
            return np.log(self.a) + self.gamma * np.log(t) + self.lam * t

    def reliability(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            h = np.exp(self._log_cum_hazard(np.maximum(t, 0.0)))
        return np.where(t > 0, np.exp(-h), 1.0)

    def _moment(self, k):
        # E[T^k] = k * int t^(k-1) R(t) dt
        val, _ = integrate.quad(lambda t: k * t ** (k - 1) * self.reliability(t), 0, np.inf, limit=200)
        return val

    @property
    def mean(self):
        return self._moment(1)

    @property
    def variance(self):
        return self._moment(2) - self._moment(1) ** 2

    def sample(self, rng, size=None, tol=1e-10):
        e = rng.standard_exponential(size)
        target = np.log(np.atleast_1d(e))
        lo = np.zeros_like(target)
        hi = np.ones_like(target)
        while True:
            short = self._log_cum_hazard(hi) < target
            if not short.any():
                break
            lo = np.where(short, hi, lo)
            hi = np.where(short, 2.0 * hi, hi)
        while np.max(hi - lo) > tol:
            mid = 0.5 * (lo + hi)
            below = self._log_cum_hazard(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out = 0.5 * (lo + hi)
        return float(out[0]) if size is None else out.reshape(np.shape(e))

    def params(self):
        return {"a": self.a, "gamma": self.gamma, "lam": self.lam}


def _weibull_shape_for_cv2(cv2: float) -> float:
    """Shape ``k`` with ``Gamma(1+2/k)/Gamma(1+1/k)**2 - 1 == cv2``."""

    def gap(log_k):
        k = np.exp(log_k)
        return np.expm1(special.gammaln(1 + 2 / k) - 2 * special.gammaln(1 + 1 / k)) - cv2

    return float(np.exp(optimize.brentq(gap, np.log(0.02), np.log(500.0), xtol=1e-14, rtol=1e-14)))


def _modified_weibull_from_moments(mean, variance, lam):
    target = np.array([mean, variance])

    def moments(params):
        a, g = np.exp(params)
        d = ModifiedWeibull(a, g, lam)
        m1 = d._moment(1)
        return np.array([m1, d._moment(2) - m1 ** 2])

    # start from a Weibull match with the same moments
    k = _weibull_shape_for_cv2(variance / mean ** 2)
    scale = mean / special.gamma(1 + 1 / k)
    start = np.log([scale ** -k, k])
    sol = optimize.root(lambda p: moments(p) / target - 1.0, start, method="hybr", tol=1e-12)
    if not sol.success:
        raise ValueError(f"could not match mean {mean} and variance {variance}: {sol.message}")
    a, g = np.exp(sol.x)
    return ModifiedWeibull(float(a), float(g), lam)


def from_moments(family: str, mean: float, variance: float, *, location: float | None = None,
                 location_fraction: float = 0.25, lam: float = 0.05) -> SimDistribution:
    """Distribution of ``family`` with the given mean and variance.

    Parameters
    ----------
    family : {"weibull2", "weibull3", "gamma", "lognormal", "modified_weibull"}
    mean, variance : float
        Target moments, both positive.
    location : float, optional
        Location of the three-parameter Weibull. Defaults to
        ``location_fraction * mean``; two moments cannot pin three parameters.
    lam : float
        Fixed exponential-growth rate of the modified Weibull; its other two
        parameters are solved for.

    Raises
    ------
    ValueError
        For an unknown family or an infeasible moment pair.
    """
    if not (mean > 0 and variance > 0):
        raise ValueError("mean and variance must be positive")
    family = family.lower()
    if family == "gamma":
        return Gamma(mean ** 2 / variance, mean / variance)
    if family == "lognormal":
        s2 = np.log1p(variance / mean ** 2)
        return Lognormal(float(np.log(mean) - s2 / 2), float(np.sqrt(s2)))
    if family in ("weibull", "weibull2", "weibull3"):
        loc = 0.0
        if family == "weibull3":
            loc = location_fraction * mean if location is None else float(location)
            if not 0 <= loc < mean:
                raise ValueError("Weibull location must lie in [0, mean)")
        shifted = mean - loc
        k = _weibull_shape_for_cv2(variance / shifted ** 2)
        scale = shifted / special.gamma(1 + 1 / k)
        cls = Weibull3 if family == "weibull3" else Weibull2
        return cls(k, float(scale), loc)
    if family == "modified_weibull":
        return _modified_weibull_from_moments(mean, variance, lam)
    raise ValueError(f"unknown family {family!r}")
