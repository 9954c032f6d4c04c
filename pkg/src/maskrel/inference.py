"""Augmented-data likelihood and Metropolis-within-Gibbs sampler.

Each component is fitted on its own. For component ``j`` a row of data is the
system failure time together with either an observed censoring code
(1 cause, 2 right-censored, 3 left-censored) or a masked flag. Masked rows get
a latent category ``d`` in {cause, right, left} that is redrawn every sweep.

Categories are stored as integers 0, 1, 2 for the density, reliability and
CDF factors respectively; one-hot ``d`` vectors appear only at the public
surface.
"""
from __future__ import annotations

import hashlib
import math
import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .distributions import Weibull3Params, log_cdf, log_density, log_reliability

__all__ = [
    "ComponentStatus",
    "ComponentObservation",
    "ComponentData",
    "Variant",
    "PriorSpec",
    "SamplerConfig",
    "FULL_PROFILE",
    "FAST_PROFILE",
    "ChainState",
    "RawChain",
    "log_likelihood",
    "latent_d_probs",
    "draw_latent_d",
    "draw_latent_d_symmetric",
    "draw_lambda",
    "mh_accept_prob",
    "mh_update_theta",
    "log_theta_posterior",
    "run_chain",
    "scale_from_covariates",
]

# log(1e-300): smaller factors count as exact zeros
LOG_FLOOR = float(np.log(1e-300))


@dataclass(frozen=True)
class ComponentStatus:
    """Observed censoring code ``delta`` (None when masked) and masked flag."""

    delta: int | None
    upsilon: int = 0

    def __post_init__(self):
        if self.upsilon not in (0, 1):
            raise ValueError("masked flag must be 0 or 1")
        if self.upsilon == 0 and self.delta not in (1, 2, 3):
            raise ValueError(f"unmasked status needs delta in {{1,2,3}}, got {self.delta}")
        if self.upsilon == 1 and self.delta is not None:
            raise ValueError("a masked status carries no censoring code")


@dataclass(frozen=True)
class ComponentObservation:
    t: float
    status: ComponentStatus
    covariates: tuple | None = None


@dataclass
class ComponentData:
    """Column view of one component's observations.

    ``delta`` holds 1/2/3 on observed rows and 0 on masked rows.
    """

    t: np.ndarray
    delta: np.ndarray
    w: np.ndarray | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.delta = np.asarray(self.delta, dtype=int)
        if self.t.ndim != 1 or self.t.shape != self.delta.shape:
            raise ValueError("t and delta must be 1-D arrays of equal length")
        if np.any(~np.isfinite(self.t)) or np.any(self.t <= 0):
            raise ValueError("failure times must be finite and positive")
        if np.any(~np.isin(self.delta, (0, 1, 2, 3))):
            raise ValueError("delta codes must be 0 (masked), 1, 2 or 3")
        if self.w is not None:
            self.w = np.atleast_2d(np.asarray(self.w, dtype=float))
            if self.w.shape[0] != self.t.size:
                raise ValueError("covariate matrix needs one row per observation")

    @classmethod
    def from_observations(cls, observations: Sequence[ComponentObservation]) -> "ComponentData":
        t = [o.t for o in observations]
        delta = [0 if o.status.upsilon else o.status.delta for o in observations]
        covs = [o.covariates for o in observations]
        if all(c is None for c in covs):
            w = None
        elif any(c is None for c in covs):
            raise ValueError("covariates must be given for all observations or none")
        else:
            w = np.array(covs, dtype=float)
        return cls(np.array(t), np.array(delta), w)

    @property
    def n(self) -> int:
        return self.t.size

    @property
    def masked(self) -> np.ndarray:
        return self.delta == 0

    def count(self, code: int) -> int:
        """Number of unmasked rows with censoring code ``code``."""
        return int(np.sum(self.delta == code))

    @property
    def mu_max(self) -> float:
        """Upper bound for the location: smallest time with a density or CDF term.

        Masked rows count because their latent category may be 1 or 3.
        Infinite when every row is an observed right-censoring.
        """
        bounded = self.delta != 2
        return float(self.t[bounded].min()) if bounded.any() else np.inf


@dataclass(frozen=True)
class Variant:
    """Masking-probability constraints.

    ``symmetric`` ties all non-zero masking probabilities together, which
    removes them from the sampler. ``zero`` marks probabilities fixed at 0
    (index 0, 1, 2 for cause, right-censored, left-censored).
    """

    symmetric: bool = False
    zero: tuple = (False, False, False)

    def __post_init__(self):
        zero = tuple(bool(z) for z in self.zero)
        if len(zero) != 3:
            raise ValueError("zero flags need three entries")
        if all(zero):
            raise ValueError("at least one masking probability must be non-zero")
        object.__setattr__(self, "zero", zero)

    @property
    def allowed(self) -> np.ndarray:
        return ~np.array(self.zero)


@dataclass(frozen=True)
class PriorSpec:
    """Independent priors: Gamma(shape, rate) on shape, scale and location,
    Normal(0, gamma_sd) on log-link coefficients, Uniform(0, 1) on masking
    probabilities."""

    beta: tuple = (0.001, 0.001)
    eta: tuple = (0.001, 0.001)
    mu: tuple = (0.001, 0.001)
    gamma_sd: float = 10.0

    def __post_init__(self):
        for name in ("beta", "eta", "mu"):
            a, b = getattr(self, name)
            if not (a > 0 and b > 0):
                raise ValueError(f"gamma prior for {name} needs positive shape and rate")
        if not self.gamma_sd > 0:
            raise ValueError("gamma_sd must be positive")


@dataclass(frozen=True)
class SamplerConfig:
    n_iter: int = 30000
    burn_in: int = 10000
    thin: int = 20
    proposal_sd: tuple = (0.1, 0.1, 0.5)
    adapt: bool = True
    seed: int = 0
    fix_location: bool = False

    def __post_init__(self):
        if self.n_iter < 1:
            raise ValueError("n_iter must be positive")
        if not 0 <= self.burn_in < self.n_iter:
            raise ValueError("burn_in must lie in [0, n_iter)")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")

    @property
    def n_posterior(self) -> int:
        return len(range(self.burn_in, self.n_iter, self.thin))

    def with_seed(self, seed: int) -> "SamplerConfig":
        return SamplerConfig(**{**asdict(self), "seed": int(seed)})

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


FULL_PROFILE = SamplerConfig(n_iter=30000, burn_in=10000, thin=20)
FAST_PROFILE = SamplerConfig(n_iter=6000, burn_in=1000, thin=5)


@dataclass
class ChainState:
    beta: float
    eta: float | None
    mu: float
    gamma: np.ndarray | None
    lambdas: np.ndarray | None
    d: np.ndarray
    b: int = 0

    @property
    def theta(self) -> Weibull3Params:
        return Weibull3Params(self.beta, self.eta, self.mu)


@dataclass
class RawChain:
    """Every sampler state in order, one row per iteration."""

    beta: np.ndarray
    eta: np.ndarray | None
    mu: np.ndarray
    gamma: np.ndarray | None
    lambdas: np.ndarray | None
    accepted: np.ndarray
    d_counts: np.ndarray
    config: SamplerConfig
    variant: Variant
    mu_max: float
    proposal_cov: np.ndarray
    final: ChainState
    warnings: list = field(default_factory=list)

    def __len__(self):
        return self.beta.size


# ---------------------------------------------------------------------------
# likelihood
# ---------------------------------------------------------------------------


def scale_from_covariates(gamma, w):
    """Scale through the log link, ``exp(w @ gamma)``; ``w`` may hold many rows."""
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != gamma.size:
        raise ValueError(f"{gamma.size} coefficients but {w.shape[-1]} covariates")
    out = np.exp(w @ gamma)
    return float(out) if np.ndim(out) == 0 else out


def _category_logs(t, beta, eta, mu):
    """(n, 3) array of log f, log R, log F with the numerical floor applied."""
    out = np.stack([log_density(t, beta, eta, mu),
                    log_reliability(t, beta, eta, mu),
                    log_cdf(t, beta, eta, mu)], axis=-1)
    out[out < LOG_FLOOR] = -np.inf
    return out


class _Rows:
    """Times grouped by the factor they contribute: density, reliability, CDF.

    ``w`` is aligned with ``t`` when the scale follows covariates.
    """

    __slots__ = ("t", "w", "n0", "n01", "min0", "min2")

    def __init__(self, parts_t, parts_w=None):
        self.t = np.concatenate(parts_t)
        self.w = None if parts_w is None else np.concatenate(parts_w)
        self.n0 = parts_t[0].size
        self.n01 = self.n0 + parts_t[1].size
        self.min0 = parts_t[0].min() if self.n0 else np.inf
        self.min2 = parts_t[2].min() if self.t.size > self.n01 else np.inf

    @classmethod
    def from_categories(cls, t, cat, w=None):
        parts_t = [t[cat == k] for k in range(3)]
        parts_w = None if w is None else [w[cat == k] for k in range(3)]
        return cls(parts_t, parts_w)

    def loglik(self, beta, mu, eta=None, gamma=None):
        """Sum of the selected log factors; ``-inf`` outside the support or
        when a factor drops below the floor."""
        if mu >= self.min0 or mu >= self.min2:
            return -np.inf
        n0, n01 = self.n0, self.n01
        if gamma is None:
            z = (self.t - mu) / eta
            log_eta_sum = n0 * math.log(eta)
        else:
            lin = self.w @ gamma
            z = (self.t - mu) * np.exp(-lin)
            log_eta_sum = float(lin[:n0].sum())
        if n01 > n0:
            np.maximum(z[n0:n01], 0.0, out=z[n0:n01])
        # overflow to inf is caught by the floor checks below
        with np.errstate(over="ignore"):
            zb = z ** beta
        total = 0.0
        if n0:
            terms = (beta - 1.0) * np.log(z[:n0]) - zb[:n0]
            if terms.min() + math.log(beta) < LOG_FLOOR + (log_eta_sum / n0 if gamma is None else 0.0):
                # recheck per row only when the cheap bound trips
                row_log_eta = math.log(eta) if gamma is None else lin[:n0]
                if np.min(terms + math.log(beta) - row_log_eta) < LOG_FLOOR:
                    return -np.inf
            total += n0 * math.log(beta) - log_eta_sum + float(terms.sum())
        if n01 > n0:
            zb1 = zb[n0:n01]
            if zb1.max() > -LOG_FLOOR:
                return -np.inf
            total -= float(zb1.sum())
        if zb.size > n01:
            terms = np.log(-np.expm1(-zb[n01:]))
            if terms.min() < LOG_FLOOR:
                return -np.inf
            total += float(terms.sum())
        return total


def _one_hot_to_cat(d):
    d = np.atleast_2d(np.asarray(d))
    if d.shape[1] != 3 or np.any(d.sum(axis=1) != 1) or np.any((d != 0) & (d != 1)):
        raise ValueError("each latent d must be one-hot over three categories")
    return np.argmax(d, axis=1)


def _row_scales(data: ComponentData, theta):
    if isinstance(theta, Weibull3Params):
        return theta.beta, theta.eta, theta.mu
    beta, gamma, mu = theta
    return beta, scale_from_covariates(gamma, data.w), mu


def log_likelihood(theta, lambdas, d, data: ComponentData) -> float:
    """Augmented-data log-likelihood of one component.

    Parameters
    ----------
    theta : Weibull3Params or (beta, gamma, mu)
        The second form applies the log link to ``data.w``.
    lambdas : sequence of 3 floats
        Masking probabilities for cause, right- and left-censored components.
    d : array (n_masked, 3)
        One-hot latent categories for the masked rows, in row order.
    data : ComponentData

    Returns
    -------
    float
        ``-inf`` when any selected factor vanishes.
    """
    lam = np.asarray(lambdas, dtype=float)
    n_masked = int(data.masked.sum())
    if d is None:
        if n_masked:
            raise ValueError("latent d is required for masked observations")
        d = np.zeros((0, 3))
    d = np.asarray(d)
    if n_masked and np.atleast_2d(d).shape[0] != n_masked:
        raise ValueError(f"expected latent d for {n_masked} masked rows, got {np.atleast_2d(d).shape[0]}")
    beta, eta, mu = _row_scales(data, theta)
    logs = _category_logs(data.t, beta, eta, mu)
    with np.errstate(divide="ignore"):
        log_lam = np.log(lam)
        log_1m_lam = np.log1p(-lam)

    observed = ~data.masked
    obs_cat = data.delta[observed] - 1
    obs_logs = logs[observed]
    total = np.sum(obs_logs[np.arange(obs_cat.size), obs_cat]) + np.sum(log_1m_lam[obs_cat])
    if n_masked:
        cat = _one_hot_to_cat(d)
        m_logs = logs[data.masked]
        total += np.sum(m_logs[np.arange(cat.size), cat]) + np.sum(log_lam[cat])
    return float(total) if np.isfinite(total) else -np.inf


# ---------------------------------------------------------------------------
# latent categories and masking probabilities
# ---------------------------------------------------------------------------


def _probs_from_logw(logw):
    top = logw.max(axis=1, keepdims=True)
    if np.any(~np.isfinite(top)):
        raise ValueError("latent category weights are all zero; location at or above a masked time?")
    w = np.exp(logw - top)
    return w / w.sum(axis=1, keepdims=True)


def latent_d_probs(theta: Weibull3Params, lambdas, t, eta=None) -> np.ndarray:
    """Full-conditional category probabilities for masked rows at times ``t``.

    Proportional to ``(lambda1 f, lambda2 R, lambda3 F)``. ``eta`` overrides
    the scale row by row (covariate models).

    Raises
    ------
    ValueError
        When all three weights vanish for some row.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    scale = theta.eta if eta is None else eta
    with np.errstate(divide="ignore"):
        logw = _category_logs(t, theta.beta, scale, theta.mu) + np.log(np.asarray(lambdas, dtype=float))
    return _probs_from_logw(logw)


def _draw_categories(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(p, axis=1)
    # the last positive category absorbs rounding so zero-probability ones are never drawn
    last = 2 - np.argmax(p[:, ::-1] > 0, axis=1)
    cum[np.arange(3)[None, :] >= last[:, None]] = np.inf
    u = rng.random(p.shape[0])
    return np.argmax(u[:, None] < cum, axis=1)


def _as_one_hot(cat, scalar):
    out = np.zeros((cat.size, 3), dtype=int)
    out[np.arange(cat.size), cat] = 1
    return out[0] if scalar else out


def draw_latent_d(theta: Weibull3Params, lambdas, t, rng: np.random.Generator, eta=None):
    """One-hot latent category draw(s) for masked rows at time(s) ``t``."""
    cat = _draw_categories(latent_d_probs(theta, lambdas, t, eta), rng)
    return _as_one_hot(cat, np.ndim(t) == 0)


def draw_latent_d_symmetric(theta: Weibull3Params, t, rng: np.random.Generator,
                            allowed=(True, True, True), eta=None):
    """Latent draw when all non-zero masking probabilities are equal.

    The common probability cancels, leaving weights ``(f, R, F)`` restricted
    to the ``allowed`` categories.
    """
    weights = np.asarray(allowed, dtype=float)
    cat = _draw_categories(latent_d_probs(theta, weights, t, eta), rng)
    return _as_one_hot(cat, np.ndim(t) == 0)


def draw_lambda(d_sum: int, n_observed: int, rng: np.random.Generator) -> float:
    """Masking probability given ``d_sum`` masked rows in its category and
    ``n_observed`` unmasked rows with that censoring code:
    ``Beta(d_sum + 1, n_observed + 1)``."""
    if d_sum < 0 or n_observed < 0:
        raise ValueError("counts must be non-negative")
    return float(rng.beta(d_sum + 1, n_observed + 1))


# ---------------------------------------------------------------------------
# theta block
# ---------------------------------------------------------------------------


def _gamma_logpdf(x, shape, rate):
    return shape * math.log(rate) - math.lgamma(shape) + (shape - 1.0) * math.log(x) - rate * x


def _log_sigmoid(c):
    # log(1 / (1 + exp(-c))) without overflow
    return -(max(-c, 0.0) + math.log1p(math.exp(-abs(c))))


class _ThetaTarget:
    """Log conditional posterior of the theta block in unconstrained coordinates.

    Coordinates are ``log beta``, then ``log eta`` (or the log-link
    coefficients), then ``logit(mu / mu_max)`` unless the location is fixed
    at zero. Includes the Jacobian of the map back to the natural scale.
    """

    def __init__(self, data: ComponentData, priors: PriorSpec, mu_max: float, fix_location: bool):
        self.data = data
        self.priors = priors
        self.mu_max = mu_max
        self.log_mu_max = math.log(mu_max) if np.isfinite(mu_max) else np.inf
        self.fix_location = fix_location
        self.k = 0 if data.w is None else data.w.shape[1]
        self._gauss_const = -self.k * math.log(priors.gamma_sd * math.sqrt(2 * math.pi))

    @property
    def dim(self):
        return 1 + max(self.k, 1) + (0 if self.fix_location else 1)

    def to_theta(self, u):
        """(beta, eta, gamma, mu); ``eta`` is None under covariates and ``gamma`` otherwise."""
        beta = math.exp(u[0])
        if self.k:
            gamma = np.array(u[1:1 + self.k], dtype=float)
            eta = None
        else:
            gamma = None
            eta = math.exp(u[1])
        mu = 0.0 if self.fix_location else self.mu_max * math.exp(_log_sigmoid(u[-1]))
        return beta, eta, gamma, mu

    def to_coords(self, beta, eta, gamma, mu):
        u = [math.log(beta)]
        u += list(gamma) if self.k else [math.log(eta)]
        if not self.fix_location:
            u.append(float(special.logit(mu / self.mu_max)))
        return np.array(u, dtype=float)

    def log_prior_jacobian(self, u):
        p = self.priors
        u0 = float(u[0])
        beta = math.exp(u0)
        out = _gamma_logpdf(beta, *p.beta) + u0
        if self.k:
            g = np.asarray(u[1:1 + self.k]) / p.gamma_sd
            out += self._gauss_const - 0.5 * float(g @ g)
        else:
            u1 = float(u[1])
            out += _gamma_logpdf(math.exp(u1), *p.eta) + u1
        if not self.fix_location:
            c = float(u[-1])
            log_s = _log_sigmoid(c)
            log_1ms = _log_sigmoid(-c)
            log_mu = self.log_mu_max + log_s
            a, b = p.mu
            out += (a * math.log(b) - math.lgamma(a) + (a - 1.0) * log_mu - b * math.exp(log_mu)
                    + self.log_mu_max + log_s + log_1ms)
        return out

    def __call__(self, u, rows: _Rows):
        if not np.all(np.isfinite(u)) or abs(u[0]) > 700 or (not self.k and abs(u[1]) > 700):
            return -np.inf
        beta, eta, gamma, mu = self.to_theta(u)
        if not mu < self.mu_max:
            return -np.inf
        ll = rows.loglik(beta, mu, eta, gamma)
        if ll == -np.inf:
            return ll
        lp = self.log_prior_jacobian(u)
        return ll + lp if np.isfinite(lp) else -np.inf


def mh_accept_prob(log_post_current: float, log_post_proposed: float) -> float:
    """Metropolis acceptance probability for a symmetric proposal."""
    if not np.isfinite(log_post_proposed):
        return 0.0
    if not np.isfinite(log_post_current):
        return 1.0
    return float(np.exp(min(0.0, log_post_proposed - log_post_current)))


def _row_categories(data: ComponentData, masked_cat: np.ndarray) -> np.ndarray:
    cat = data.delta - 1
    cat[data.masked] = masked_cat
    return cat


def log_theta_posterior(theta, data: ComponentData, d_cat=None, priors: PriorSpec = PriorSpec(),
                        mu_max: float | None = None):
    """Unnormalized log conditional density of ``(beta, eta, mu)`` on the
    natural scale, given the masked rows' latent categories ``d_cat``.

    Masking-probability factors are constant in theta and left out.
    """
    beta, eta, mu = theta.as_tuple() if isinstance(theta, Weibull3Params) else theta
    mu_max = data.mu_max if mu_max is None else mu_max
    if not (beta > 0 and eta > 0 and 0 <= mu < mu_max):
        return -np.inf
    masked_cat = np.zeros(int(data.masked.sum()), dtype=int) if d_cat is None else np.asarray(d_cat)
    rows = _Rows.from_categories(data.t, _row_categories(data, masked_cat))
    ll = rows.loglik(beta, mu, eta)
    lp = _gamma_logpdf(beta, *priors.beta) + _gamma_logpdf(eta, *priors.eta)
    if mu > 0:
        lp += _gamma_logpdf(mu, *priors.mu)
    return float(ll + lp)


def _mh_step(target, u, logp, rows, chol, rng):
    proposal = u + chol @ rng.standard_normal(u.size)
    logp_new = target(proposal, rows)
    if math.log(rng.random()) < logp_new - logp:
        return proposal, True, logp_new
    return u, False, logp


def mh_update_theta(state: ChainState, data: ComponentData, priors: PriorSpec, proposal_chol,
                    rng: np.random.Generator, mu_max: float | None = None, fix_location: bool = False):
    """One random-walk Metropolis update of the theta block.

    Parameters
    ----------
    state : ChainState
        Current state; ``state.d`` holds the masked rows' categories (0, 1, 2).
    proposal_chol : array (dim, dim)
        Cholesky factor of the Gaussian proposal covariance in the
        unconstrained coordinates.

    Returns
    -------
    (beta, eta, gamma, mu), accepted
    """
    mu_max = data.mu_max if mu_max is None else mu_max
    target = _ThetaTarget(data, priors, mu_max, fix_location)
    rows = _Rows.from_categories(data.t, _row_categories(data, state.d), data.w)
    u = target.to_coords(state.beta, state.eta, state.gamma, state.mu)
    new_u, accepted, _ = _mh_step(target, u, target(u, rows), rows, np.asarray(proposal_chol), rng)
    return target.to_theta(new_u), accepted


# ---------------------------------------------------------------------------
# the sampler
# ---------------------------------------------------------------------------


class _Adapter:
    """Burn-in tuning of the random-walk proposal.

    The scale factor is nudged every batch toward 23-45% acceptance and,
    once enough draws exist, the covariance follows the empirical covariance
    of the recent burn-in draws. Nothing changes after burn-in.
    """

    batch = 50
    target_lo, target_hi = 0.23, 0.45

    def __init__(self, initial_sd, dim):
        self.dim = dim
        self.base = np.diag(np.asarray(initial_sd, dtype=float) ** 2)
        self.log_scale = 0.0
        self.n_batches = 0
        self.history = []
        self.chol = np.linalg.cholesky(self.base)

    def update(self, draws, accepts):
        self.n_batches += 1
        rate = np.mean(accepts)
        step = max(0.05, 1.0 / np.sqrt(self.n_batches))
        if rate < self.target_lo:
            self.log_scale -= step
        elif rate > self.target_hi:
            self.log_scale += step
        self.history.append(np.asarray(draws))
        pooled = np.concatenate(self.history[len(self.history) // 2:])
        cov = self.base
        if pooled.shape[0] >= max(200, 10 * self.dim):
            emp = np.atleast_2d(np.cov(pooled, rowvar=False))
            if np.all(np.diag(emp) > 0):
                cov = emp * (2.38 ** 2 / self.dim) + 1e-10 * np.eye(self.dim)
        try:
            self.chol = math.exp(self.log_scale) * np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            self.chol = math.exp(self.log_scale) * np.linalg.cholesky(self.base)


def _initial_state(data, target, variant, rng, fix_location):
    t = data.t
    beta = 1.0
    mu = 0.0 if fix_location else 0.5 * float(t.min())
    if target.k:
        # every row's scale starts near the median time
        gamma = np.linalg.lstsq(data.w, np.full(data.n, np.log(np.median(t))), rcond=None)[0]
        eta = None
    else:
        gamma = None
        eta = float(np.median(t))
    lambdas = None if variant.symmetric else np.where(variant.zero, 0.0, 0.5)
    allowed = np.flatnonzero(variant.allowed)
    d = rng.choice(allowed, size=int(data.masked.sum()))
    return ChainState(beta, eta, mu, gamma, lambdas, d, 0)


def _masked_logw(t, lin, beta, eta, mu, log_weights):
    """(n, 3) log of (w1 f, w2 R, w3 F) at masked times, all of which exceed mu."""
    if lin is None:
        z = (t - mu) / eta
        log_scale = math.log(eta)
    else:
        z = (t - mu) * np.exp(-lin)
        log_scale = lin
    zb = z ** beta
    out = np.empty((t.size, 3))
    out[:, 0] = math.log(beta) - log_scale + (beta - 1.0) * np.log(z) - zb
    out[:, 1] = -zb
    with np.errstate(divide="ignore"):
        out[:, 2] = np.log(-np.expm1(-zb))
    out[out < LOG_FLOOR] = -np.inf
    return out + log_weights


def run_chain(data: ComponentData, config: SamplerConfig = FULL_PROFILE, priors: PriorSpec = PriorSpec(),
              variant: Variant = Variant()) -> RawChain:
    """Run the Metropolis-within-Gibbs sampler for one component.

    Each sweep draws the masked rows' latent categories, updates
    ``(beta, eta-or-coefficients, mu)`` by random-walk Metropolis and then
    draws each free masking probability from its Beta conditional. The
    symmetric variant skips the masking probabilities entirely.

    Deterministic for a given ``config.seed``.
    """
    if data.n == 0:
        raise ValueError("no observations")
    notes = []
    masked = data.masked
    n_masked = int(masked.sum())
    if n_masked == data.n:
        notes.append("every observation is masked; the fit rests on the prior and latent draws")
    if data.n < 2:
        notes.append("fewer than two observations")
    fix_location = config.fix_location
    mu_max = data.mu_max
    if not np.isfinite(mu_max) and not fix_location:
        notes.append("no row bounds the location; fixing it at zero")
        fix_location = True
    for msg in notes:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)

    rng = np.random.default_rng(config.seed)
    target = _ThetaTarget(data, priors, mu_max, fix_location)
    state = _initial_state(data, target, variant, rng, fix_location)
    ps = config.proposal_sd
    adapter = _Adapter([ps[0]] + [ps[1]] * max(target.k, 1) + ([] if fix_location else [ps[2]]), target.dim)

    counts = [data.count(1), data.count(2), data.count(3)]
    with np.errstate(divide="ignore"):
        sym_logw = np.log(variant.allowed.astype(float))
    free = [l for l in range(3) if not variant.zero[l]]
    t_obs = [data.t[data.delta == k + 1] for k in range(3)]
    t_m = data.t[masked]
    w_obs = w_m = None
    if target.k:
        w_obs = [data.w[data.delta == k + 1] for k in range(3)]
        w_m = data.w[masked]

    def group_rows(d):
        if not n_masked:
            return _Rows(t_obs, w_obs)
        sel = [d == k for k in range(3)]
        parts_t = [np.concatenate([t_obs[k], t_m[sel[k]]]) for k in range(3)]
        parts_w = None if w_obs is None else [np.concatenate([w_obs[k], w_m[sel[k]]]) for k in range(3)]
        return _Rows(parts_t, parts_w)

    B = config.n_iter
    draws = np.empty((B, target.dim))
    lam_out = None if variant.symmetric else np.empty((B, 3))
    accepted = np.zeros(B, dtype=bool)
    d_counts = np.zeros((B, 3), dtype=int)
    n_adapt = config.burn_in if config.adapt else 0

    u = target.to_coords(state.beta, state.eta, state.gamma, state.mu)
    rows = group_rows(state.d)
    logp = target(u, rows)
    batch_start = 0
    for b in range(B):
        # step 2: latent categories of the masked rows
        if n_masked:
            beta, eta, gamma, mu = target.to_theta(u)
            lin = None if gamma is None else w_m @ gamma
            with np.errstate(divide="ignore"):
                log_weights = sym_logw if variant.symmetric else np.log(state.lambdas)
            logw = _masked_logw(t_m, lin, beta, eta, mu, log_weights)
            state.d = _draw_categories(_probs_from_logw(logw), rng)
            rows = group_rows(state.d)
            logp = target(u, rows)
        # step 3: theta block
        u, acc, logp = _mh_step(target, u, logp, rows, adapter.chol, rng)
        accepted[b] = acc
        draws[b] = u
        # steps 4-6: masking probabilities
        d_sum = np.bincount(state.d, minlength=3) if n_masked else np.zeros(3, dtype=int)
        if lam_out is not None:
            for l in free:
                state.lambdas[l] = draw_lambda(int(d_sum[l]), counts[l], rng)
            lam_out[b] = state.lambdas
        d_counts[b] = d_sum
        if b < n_adapt and b + 1 - batch_start == _Adapter.batch:
            adapter.update(draws[batch_start:b + 1], accepted[batch_start:b + 1])
            batch_start = b + 1

    beta_out = np.exp(draws[:, 0])
    if target.k:
        gamma_out = draws[:, 1:1 + target.k].copy()
        eta_out = None
    else:
        gamma_out = None
        eta_out = np.exp(draws[:, 1])
    if fix_location:
        mu_out = np.zeros(B)
    else:
        mu_out = mu_max * special.expit(draws[:, -1])
    beta, eta, gamma, mu = target.to_theta(u)
    final = ChainState(beta, eta, mu, gamma, None if state.lambdas is None else state.lambdas.copy(),
                       np.asarray(state.d).copy(), B)
    return RawChain(beta=beta_out, eta=eta_out, mu=mu_out, gamma=gamma_out, lambdas=lam_out,
                    accepted=accepted, d_counts=d_counts, config=config, variant=variant,
                    mu_max=mu_max, proposal_cov=adapter.chol @ adapter.chol.T, final=final,
                    warnings=notes)
