"""Bayesian regression of temperature on a forcing with AR(1) errors.

Traders holding the same climate model see the same data, so one posterior
per model per year is enough; :func:`sample_posterior` is called once per
model and its predictive distribution is shared by every believer.

The Gibbs sampler works on the conditional likelihood (first observation
dropped). All sums it needs are quadratic forms in a 5x5 moment matrix of
``[1, x_t, x_{t-1}, y_t, y_{t-1}]``, so each sweep costs O(1) regardless of
series length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .climate import AnnualSeries, ForcingKind, SeriesError, SingularDesignError, _aligned
from .market import SecuritySet

# Priors, on the centered-forcing intercept and the slope.
PRIOR_COEF_SD = 10.0
PRIOR_SIGMA2_SHAPE = 2.0
PRIOR_SIGMA2_SCALE = 0.02

DEFAULT_DRAWS = 2000
DEFAULT_BURN_IN = 500
MIN_DRAWS = 500
RHAT_THRESHOLD = 1.1


@dataclass(frozen=True, eq=False)
class PosteriorDraws:
    """Posterior sample; ``draws`` columns are ``alpha, beta, rho, sigma``.

    ``end_year`` and ``last_forcing`` pin the last observation the posterior
    was conditioned on, which the predictive step needs to recover each
    draw's final residual.
    """

    kind: ForcingKind
    draws: np.ndarray
    end_year: int
    last_forcing: float
    rhat: float = float("nan")
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float)
        if draws.ndim != 2 or draws.shape[1] != 4:
            raise ValueError("draws must have shape (n_draws, 4)")
        if np.any(np.abs(draws[:, 2]) >= 1.0) or np.any(draws[:, 3] < 0.0):
            raise ValueError("every draw needs |rho| < 1 and sigma >= 0")
        draws.setflags(write=False)
        object.__setattr__(self, "draws", draws)

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]

    @property
    def converged(self) -> bool:
        return not (self.rhat > RHAT_THRESHOLD)

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, ("alpha", "beta", "rho", "sigma").index(name)]


@dataclass(frozen=True, eq=False)
class PredictiveSample:
    t_star: int
    samples: np.ndarray


@numba.njit(cache=True)
def _std_normal_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@numba.njit(cache=True)
def _std_normal_ppf(p):
    # Acklam's rational approximation refined by one Halley step.
    if p <= 0.0:
        return -np.inf
    if p >= 1.0:
        return np.inf
    a0, a1, a2 = -3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02
    a3, a4, a5 = 1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00
    b0, b1, b2 = -5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02
    b3, b4 = 6.680131188771972e01, -1.328068155288572e01
    c0, c1, c2 = -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00
    c3, c4, c5 = -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00
    d0, d1, d2, d3 = 7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00, 3.754408661907416e00
    plow = 0.02425
    if p < plow:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c0 * q + c1) * q + c2) * q + c3) * q + c4) * q + c5) / (
            (((d0 * q + d1) * q + d2) * q + d3) * q + 1.0
        )
    elif p <= 1.0 - plow:
        q = p - 0.5
        r = q * q
        x = (((((a0 * r + a1) * r + a2) * r + a3) * r + a4) * r + a5) * q / (
            ((((b0 * r + b1) * r + b2) * r + b3) * r + b4) * r + 1.0
        )
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((c0 * q + c1) * q + c2) * q + c3) * q + c4) * q + c5) / (
            (((d0 * q + d1) * q + d2) * q + d3) * q + 1.0
        )
    e = _std_normal_cdf(x) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


@numba.njit(cache=True)
def _truncated_normal(mean, sd, lo, hi, u):
    """Inverse-CDF draw from N(mean, sd^2) restricted to (lo, hi)."""
    a = (lo - mean) / sd
    b = (hi - mean) / sd
    flip = a > 0.0
    if flip:
        a, b = -b, -a
    pa = _std_normal_cdf(a)
    pb = _std_normal_cdf(b)
    if pb - pa <= 0.0:
        z = b if pb <= 0.0 else a
    else:
        z = _std_normal_ppf(pa + u * (pb - pa))
        z = min(max(z, a), b)
    if flip:
        z = -z
    return mean + sd * z


@numba.njit(cache=True)
def _quad(m, u, v):
    s = 0.0
    for i in range(5):
        for j in range(5):
            s += u[i] * m[i, j] * v[j]
    return s


@numba.njit(cache=True)
def _gibbs(moments, n_obs, prior_prec, ig_shape, ig_scale, init, z, g, u, rho_bound):
    n_iter = z.shape[0]
    out = np.empty((n_iter, 4))
    a, beta, rho = init[0], init[1], init[2]
    c0 = np.zeros(5)
    c1 = np.zeros(5)
    cy = np.zeros(5)
    w = np.zeros(5)
    ce = np.zeros(5)
    cl = np.zeros(5)
    s2 = init[3] ** 2
    for it in range(n_iter):
        # (a, beta) | rho, sigma^2 on quasi-differenced data
        c0[:] = 0.0
        c1[:] = 0.0
        cy[:] = 0.0
        c0[0] = 1.0 - rho
        c1[1] = 1.0
        c1[2] = -rho
        cy[3] = 1.0
        cy[4] = -rho
        x00 = _quad(moments, c0, c0) / s2 + prior_prec
        x01 = _quad(moments, c0, c1) / s2
        x11 = _quad(moments, c1, c1) / s2 + prior_prec
        r0 = _quad(moments, c0, cy) / s2
        r1 = _quad(moments, c1, cy) / s2
        det = x00 * x11 - x01 * x01
        v00 = x11 / det
        v01 = -x01 / det
        v11 = x00 / det
        m0 = v00 * r0 + v01 * r1
        m1 = v01 * r0 + v11 * r1
        l00 = math.sqrt(v00)
        l10 = v01 / l00
        l11 = math.sqrt(max(v11 - l10 * l10, 0.0))
        a = m0 + l00 * z[it, 0]
        beta = m1 + l10 * z[it, 0] + l11 * z[it, 1]

        # sigma^2 | a, beta, rho
        for i in range(5):
            w[i] = cy[i] - a * c0[i] - beta * c1[i]
        ssr = max(_quad(moments, w, w), 0.0)
        s2 = (ig_scale + 0.5 * ssr) / g[it]

        # rho | a, beta, sigma^2, truncated to the stationary region
        ce[0] = -a
        ce[1] = -beta
        ce[2] = 0.0
        ce[3] = 1.0
        ce[4] = 0.0
        cl[0] = -a
        cl[1] = 0.0
        cl[2] = -beta
        cl[3] = 0.0
        cl[4] = 1.0
        sll = _quad(moments, cl, cl)
        if sll > 0.0:
            mean = _quad(moments, ce, cl) / sll
            sd = math.sqrt(s2 / sll)
            rho = _truncated_normal(mean, sd, -1.0, 1.0, u[it])
        else:
            rho = -1.0 + 2.0 * u[it]
        rho = min(max(rho, -rho_bound), rho_bound)

        out[it, 0] = a
        out[it, 1] = beta
        out[it, 2] = rho
        out[it, 3] = math.sqrt(s2)
    return out


def split_rhat(chain: np.ndarray) -> float:
    """Potential scale reduction from the two halves of a single chain."""
    n = len(chain) // 2
    if n < 2:
        return float("nan")
    halves = np.stack([chain[:n], chain[n : 2 * n]])
    within = halves.var(axis=1, ddof=1).mean()
    between = n * halves.mean(axis=1).var(ddof=1)
    if within <= 0.0:
        return 1.0 if between <= 0.0 else float("inf")
    var_hat = (n - 1) / n * within + between / n
    return float(np.sqrt(var_hat / within))


def sample_posterior(
    temps: AnnualSeries,
    forcing: AnnualSeries,
    n_draws: int = DEFAULT_DRAWS,
    rng: np.random.Generator | None = None,
    *,
    kind: ForcingKind = ForcingKind.LOG_CO2,
    burn_in: int = DEFAULT_BURN_IN,
) -> PosteriorDraws:
    """Gibbs sample of (alpha, beta, rho, sigma) for ``T = alpha + beta*F + AR(1)``."""
    if n_draws < MIN_DRAWS:
        raise ValueError(f"n_draws must be at least {MIN_DRAWS}")
    if burn_in < 0:
        raise ValueError("burn_in must be non-negative")
    if rng is None:
        rng = np.random.default_rng()
    y, x = _aligned(temps, forcing)
    n = len(y)
    if n < 10:
        raise SeriesError("posterior sampling needs at least 10 years")
    center = float(x.mean())
    xc = x - center
    if float(xc @ xc) <= 1e-12 * max(1.0, float(x @ x)):
        raise SingularDesignError("forcing has zero variance; slope is not identifiable")

    z_cols = np.column_stack([np.ones(n - 1), xc[1:], xc[:-1], y[1:], y[:-1]])
    moments = z_cols.T @ z_cols

    slope = float(xc @ (y - y.mean()) / (xc @ xc))
    resid = y - y.mean() - slope * xc
    init = np.array([float(y.mean()), slope, 0.0, max(float(resid.std()), 1e-3)])

    n_iter = burn_in + n_draws
    z = rng.standard_normal((n_iter, 2))
    g = rng.gamma(PRIOR_SIGMA2_SHAPE + 0.5 * (n - 1), 1.0, size=n_iter)
    u = rng.random(n_iter)
    chain = _gibbs(
        moments,
        n - 1,
        1.0 / PRIOR_COEF_SD**2,
        PRIOR_SIGMA2_SHAPE,
        PRIOR_SIGMA2_SCALE,
        init,
        z,
        g,
        u,
        1.0 - 1e-9,
    )[burn_in:]

    draws = chain.copy()
    draws[:, 0] = chain[:, 0] - chain[:, 1] * center
    rhat = split_rhat(chain[:, 1])
    return PosteriorDraws(
        kind=kind,
        draws=draws,
        end_year=temps.end_year,
        last_forcing=float(x[-1]),
        rhat=rhat,
        diagnostics={"rhat_beta": rhat, "burn_in": burn_in, "n_obs": n},
    )


def predictive_at(
    posterior: PosteriorDraws,
    temps: AnnualSeries,
    forcing_future: AnnualSeries,
    t_star: int,
    rng: np.random.Generator,
) -> PredictiveSample:
    """One temperature draw at ``t_star`` per posterior draw.

    Each draw's residual at the last observed year is rolled forward with
    fresh AR(1) innovations, so the sample mixes parameter uncertainty with
    the climate's own noise.
    """
    last = temps.end_year
    if last != posterior.end_year:
        raise SeriesError(
            f"posterior conditioned through {posterior.end_year}, temperatures end {last}"
        )
    if t_star <= last:
        raise SeriesError(f"settlement year {t_star} is not after last observation {last}")
    if not forcing_future.covers(last + 1, t_star):
        raise SeriesError(f"forcing does not cover {last + 1}-{t_star}")
    alpha, beta, rho, sigma = posterior.draws.T
    e = temps[last] - alpha - beta * posterior.last_forcing
    shocks = rng.standard_normal((t_star - last, posterior.n_draws))
    for shock in shocks:
        e = rho * e + sigma * shock
    samples = alpha + beta * forcing_future[t_star] + e
    return PredictiveSample(t_star=t_star, samples=samples)


def bin_probabilities(pred: PredictiveSample, bins: SecuritySet) -> np.ndarray:
    """Empirical frequency of predictive samples in each security's range."""
    counts = np.bincount(bins.bin_index(pred.samples), minlength=bins.k).astype(float)
    probs = counts / counts.sum()
    # Make the vector sum to exactly one despite rounding.
    top = int(np.argmax(probs))
    probs[top] = 0.0
    probs[top] = 1.0 - math.fsum(probs)
    return probs
