"""Density, CDF, quantile, sampling, moments, and fitting for all families."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import optimize
from scipy.special import log_ndtr, ndtr, ndtri, owens_t

from ..errors import (DegenerateSampleError, DomainError, NumericalError,
                      ParameterError, SampleSizeError, UnsupportedMethodError)
from . import dln as _dln
from . import stable as _stable
from .params import Family, FitResult, ParamVector

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

#: IQR of the unit-dispersion member of each LAD-supported family
_UNIT_IQR = {
    Family.NORMAL: 2.0 * ndtri(0.75),   # 1.3490 to four decimals
    Family.LAPLACE: 2.0 * math.log(2.0),
}


def _as_params(p) -> ParamVector:
    if isinstance(p, ParamVector):
        return p
    raise ParameterError(f"expected a ParamVector, got {type(p).__name__}")


@lru_cache(maxsize=32)
def _stable_grid(alpha, beta, c, delta):
    return _stable.StableGrid(alpha, beta, c, delta)


def _dln_nodes(sg_p, sg_n):
    """Escalate Gauss-Hermite nodes when the component widths are lopsided."""
    ratio = max(sg_p, sg_n) / min(sg_p, sg_n)
    if ratio > 10.0:
        return 512
    if ratio > 4.0:
        return 256
    return _dln.GH_NODES


# ---------------------------------------------------------------------------
# densities


def logpdf(p, x):
    """Log-density of the fitted law at x (scalar or array)."""
    p = _as_params(p)
    scalar = np.isscalar(x)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    f, prm = p.family, p.params
    if f is Family.NORMAL:
        mu, sg = prm
        z = (x - mu) / sg
        out = -0.5 * z * z - math.log(sg) - _LOG_SQRT_2PI
    elif f is Family.SKEW_NORMAL:
        xi, om, al = prm
        z = (x - xi) / om
        out = (math.log(2.0) - math.log(om) - 0.5 * z * z - _LOG_SQRT_2PI
               + log_ndtr(al * z))
    elif f is Family.LAPLACE:
        mu, b = prm
        out = -np.abs(x - mu) / b - math.log(2.0 * b)
    elif f is Family.STABLE:
        out = _stable_grid(*prm).logpdf(x)
    else:  # DLN
        mu_p, sg_p, mu_n, sg_n = prm
        if scalar:
            out = np.array([_dln.logpdf_quad(x[0], mu_p, sg_p, mu_n, sg_n)])
        else:
            out = _dln.logpdf_gh(x, mu_p, sg_p, mu_n, sg_n,
                                 nodes=_dln_nodes(sg_p, sg_n))
    return float(out[0]) if scalar else out


def pdf(p, x):
    return np.exp(logpdf(p, x))


def cdf(p, x):
    """CDF of the fitted law at x (scalar or array)."""
    p = _as_params(p)
    scalar = np.isscalar(x)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    f, prm = p.family, p.params
    if f is Family.NORMAL:
        mu, sg = prm
        out = ndtr((x - mu) / sg)
    elif f is Family.SKEW_NORMAL:
        xi, om, al = prm
        z = (x - xi) / om
        out = np.clip(ndtr(z) - 2.0 * owens_t(z, al), 0.0, 1.0)
    elif f is Family.LAPLACE:
        mu, b = prm
        z = (x - mu) / b
        out = np.where(z < 0, 0.5 * np.exp(z), 1.0 - 0.5 * np.exp(-z))
    elif f is Family.STABLE:
        out = _stable_grid(*prm).cdf(x)
    else:  # DLN
        mu_p, sg_p, mu_n, sg_n = prm
        if scalar:
            out = np.array([_dln.cdf_quad(x[0], mu_p, sg_p, mu_n, sg_n)])
        else:
            out = _dln.cdf_gh(x, mu_p, sg_p, mu_n, sg_n,
                              nodes=_dln_nodes(sg_p, sg_n))
    return float(out[0]) if scalar else out


def quantile(p, q):
    """Inverse CDF; root-finding on the CDF for families without closed forms."""
    p = _as_params(p)
    scalar = np.isscalar(q)
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if np.any((q <= 0.0) | (q >= 1.0)):
        raise DomainError("quantile probabilities must lie strictly in (0, 1)")
    f, prm = p.family, p.params
    if f is Family.NORMAL:
        mu, sg = prm
        out = mu + sg * ndtri(q)
    elif f is Family.LAPLACE:
        mu, b = prm
        out = np.where(q < 0.5, mu + b * np.log(2.0 * q),
                       mu - b * np.log(2.0 * (1.0 - q)))
    elif f is Family.STABLE:
        out = _stable_grid(*prm).ppf(q)
    else:
        out = _quantile_root(p, q)
    return float(out[0]) if scalar else out


def _quantile_root(p, q):
    """Bracketed root-finding on the CDF (skew-Normal and DLN)."""
    f, prm = p.family, p.params
    if f is Family.SKEW_NORMAL:
        xi, om, _ = prm
        lo, hi = xi - 14.0 * om, xi + 14.0 * om
    else:
        lo, hi = _dln.quantile_bracket(*prm)
    cdf_vec = cdf(p, np.array([lo, hi]))
    out = np.empty_like(q)
    for i, qi in enumerate(q):
        a, b_, fa, fb = lo, hi, cdf_vec[0], cdf_vec[1]
        while fa > qi:
            a *= 2.0 if a < 0 else 0.5
            a -= 1.0
            fa = cdf(p, a)
        while fb < qi:
            b_ *= 2.0 if b_ > 0 else 0.5
            b_ += 1.0
            fb = cdf(p, b_)
        out[i] = optimize.brentq(lambda x: cdf(p, x) - qi, a, b_,
                                 xtol=1e-13, rtol=8.9e-16, maxiter=200)
    return out


def sample(p, n, seed):
    """n reproducible draws from the fitted law."""
    p = _as_params(p)
    if n < 1:
        raise DomainError(f"sample size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    return sample_rng(p, n, rng)


def sample_rng(p, n, rng):
    """Sampling from an externally managed random stream."""
    f, prm = p.family, p.params
    if f is Family.NORMAL:
        return rng.normal(prm[0], prm[1], size=n)
    if f is Family.SKEW_NORMAL:
        xi, om, al = prm
        delta = al / math.sqrt(1.0 + al * al)
        u0 = rng.normal(size=n)
        u1 = rng.normal(size=n)
        z = delta * np.abs(u0) + math.sqrt(1.0 - delta * delta) * u1
        return xi + om * z
    if f is Family.LAPLACE:
        return rng.laplace(prm[0], prm[1], size=n)
    if f is Family.STABLE:
        return _stable.sample(n, *prm, rng=rng)
    return _dln.sample(n, *prm, rng=rng)


def moments(p, upto=4):
    """First `upto` of (mean, sd, skewness, kurtosis); kurtosis is raw
    (Gaussian = 3). Nonexistent moments raise rather than return NaN."""
    from ..errors import UndefinedMomentError

    p = _as_params(p)
    f, prm = p.family, p.params
    if f is Family.NORMAL:
        out = (prm[0], prm[1], 0.0, 3.0)
    elif f is Family.LAPLACE:
        out = (prm[0], math.sqrt(2.0) * prm[1], 0.0, 6.0)
    elif f is Family.SKEW_NORMAL:
        xi, om, al = prm
        delta = al / math.sqrt(1.0 + al * al)
        db = delta * _SQRT_2_OVER_PI
        var_z = 1.0 - db * db
        mean = xi + om * db
        sd = om * math.sqrt(var_z)
        skew = (4.0 - math.pi) / 2.0 * db ** 3 / var_z ** 1.5
        kurt = 3.0 + 2.0 * (math.pi - 3.0) * db ** 4 / var_z ** 2
        out = (mean, sd, skew, kurt)
    elif f is Family.STABLE:
        alpha, beta, c, delta = prm
        if alpha == 2.0:
            out = (delta, math.sqrt(2.0) * c, 0.0, 3.0)
        else:
            if alpha <= 1.0:
                raise UndefinedMomentError(
                    f"stable mean undefined for alpha <= 1 (alpha={alpha})")
            mean = delta - beta * c * math.tan(math.pi * alpha / 2.0)
            if upto >= 2:
                raise UndefinedMomentError(
                    f"stable variance is infinite for alpha < 2 (alpha={alpha})")
            out = (mean, math.nan, math.nan, math.nan)
    else:  # DLN
        out = _dln.moments(*prm)
    return out[:upto] if upto < 4 else out


# ---------------------------------------------------------------------------
# fitting


def loglik(p, data):
    """Total log-likelihood of data under the fitted law."""
    return float(np.sum(logpdf(_as_params(p), np.asarray(data, dtype=float))))


def _check_fit_data(family, data, min_n=None):
    data = np.asarray(data, dtype=float)
    if data.ndim != 1:
        raise DomainError("fit data must be one-dimensional")
    if not np.all(np.isfinite(data)):
        raise DomainError("fit data must be finite")
    from .params import N_PARAMS
    need = 5 * N_PARAMS[family] if min_n is None else min_n
    if data.size < need:
        raise SampleSizeError(
            f"{family.value} fit needs at least {need} observations, "
            f"got {data.size}")
    if np.ptp(data) == 0.0:
        raise DegenerateSampleError("all observations are identical")
    return data


def fit_mle(family, data, init=None, fast=False):
    """Maximum-likelihood fit.

    `init` warm-starts the optimizer with a ParamVector (used heavily by the
    parametric bootstrap). `fast` relaxes tolerances for inner-loop refits.
    """
    family = Family.parse(family)
    data = _check_fit_data(family, data)
    n = data.size

    if family is Family.NORMAL:
        mu = float(np.mean(data))
        sg = float(np.std(data))
        params = ParamVector(family, (mu, sg))
        return FitResult(params, loglik(params, data), n, "mle", True, 0)

    if family is Family.LAPLACE:
        mu = float(np.median(data))
        b = float(np.mean(np.abs(data - mu)))
        if b <= 0:
            raise DegenerateSampleError("laplace MLE needs dispersion > 0")
        params = ParamVector(family, (mu, b))
        return FitResult(params, loglik(params, data), n, "mle", True, 0)

    if family is Family.SKEW_NORMAL:
        return _fit_skew_normal(data, init, fast)
    if family is Family.STABLE:
        return _fit_stable(data, init, fast)
    return _fit_dln(data, init, fast)


# --- internals shared with the parametric bootstrap ---------------------


def params_to_unc(family, params):
    """Map a ParamVector's parameters to unconstrained optimizer space."""
    p = params.params if isinstance(params, ParamVector) else tuple(params)
    if family is Family.SKEW_NORMAL:
        return np.array([p[0], math.log(p[1]), p[2]])
    if family is Family.STABLE:
        return np.array([_alpha_to_unc(min(p[0], 1.9999)),
                         math.atanh(min(max(p[1], -0.9999), 0.9999)),
                         math.log(p[2]), p[3]])
    if family is Family.DLN:
        return np.array([p[0], math.log(p[1]), p[2], math.log(p[3])])
    return np.array(p, dtype=float)


def unc_to_params(family, theta):
    """Inverse of params_to_unc."""
    if family is Family.SKEW_NORMAL:
        return ParamVector(family, (float(theta[0]), math.exp(theta[1]),
                                    float(theta[2])))
    if family is Family.STABLE:
        return ParamVector(family, (_unc_to_alpha(theta[0]),
                                    math.tanh(theta[1]),
                                    math.exp(theta[2]), float(theta[3])))
    if family is Family.DLN:
        return ParamVector(family, (float(theta[0]), math.exp(theta[1]),
                                    float(theta[2]), math.exp(theta[3])))
    return ParamVector(family, tuple(float(t) for t in theta))


def negll_fast(family, data):
    """Cheap negative log-likelihood in unconstrained space, for the
    warm-started scoring refits inside bootstrap replicates."""
    data = np.asarray(data, dtype=float)
    if family is Family.SKEW_NORMAL:
        n = data.size

        def nll(theta):
            xi, lom, al = theta
            if abs(lom) > 20 or abs(al) > 300:
                return np.inf
            om = math.exp(lom)
            z = (data - xi) / om
            ll = (n * (math.log(2.0) - lom - _LOG_SQRT_2PI)
                  - 0.5 * float(np.sum(z * z))
                  + float(np.sum(log_ndtr(al * z))))
            return -ll

        return nll
    if family is Family.STABLE:
        def nll(theta):
            alpha = _unc_to_alpha(theta[0])
            beta = math.tanh(theta[1])
            if abs(theta[2]) > 20:
                return np.inf
            grid = _stable.light_grid(alpha, beta, math.exp(theta[2]),
                                      float(theta[3]))
            val = -float(np.sum(grid.logpdf_light(data)))
            return val if np.isfinite(val) else np.inf

        return nll
    if family is Family.DLN:
        obj = _dln.LightLoglik(data)

        def nll(theta):
            return -obj(theta)

        return nll
    raise UnsupportedMethodError(
        f"negll_fast supports shape families, not {family.value}")


def cdf_fast(family, params, x):
    """CDF with the same light approximations the bootstrap refits use.

    Consistent between observed and replicate statistics; the public `cdf`
    remains the reference implementation.
    """
    if family is Family.STABLE:
        return _stable.light_grid(*params.params).cdf_light(x)
    if family is Family.DLN:
        return _dln.cdf_gh_fast(np.asarray(x, float), *params.params)
    return cdf(params, np.asarray(x, dtype=float))


def fit_lad(family, data):
    """Least-absolute-deviations fit: location is the sample median and the
    dispersion matches the fitted IQR to the sample IQR."""
    family = Family.parse(family)
    if family not in _UNIT_IQR:
        raise UnsupportedMethodError(
            f"LAD fitting supports normal and laplace, not {family.value}")
    data = _check_fit_data(family, data, min_n=5)
    mu = float(np.median(data))
    q25, q75 = np.quantile(data, [0.25, 0.75])
    iqr = float(q75 - q25)
    if iqr <= 0:
        raise DegenerateSampleError("LAD fit needs a positive sample IQR")
    disp = iqr / _UNIT_IQR[family]
    params = ParamVector(family, (mu, disp))
    return FitResult(params, loglik(params, data), data.size, "lad", True, 0)


def _fit_skew_normal(data, init, fast):
    n = data.size
    m = float(np.mean(data))
    s = float(np.std(data))
    if init is not None:
        xi0, om0, al0 = init.params
    else:
        g1 = float(np.clip(_sample_skew(data), -0.95, 0.95))
        t = math.copysign(abs(2.0 * g1 / (4.0 - math.pi)) ** (1.0 / 3.0), g1)
        db = t / math.sqrt(1.0 + t * t)
        delta = float(np.clip(db / _SQRT_2_OVER_PI, -0.995, 0.995))
        al0 = delta / math.sqrt(1.0 - delta * delta)
        om0 = s / math.sqrt(max(1.0 - (delta * _SQRT_2_OVER_PI) ** 2, 0.05))
        xi0 = m - om0 * delta * _SQRT_2_OVER_PI

    def nll(theta):
        xi, lom, al = theta
        om = math.exp(lom)
        z = (data - xi) / om
        ll = (n * (math.log(2.0) - lom - _LOG_SQRT_2PI)
              - 0.5 * float(np.sum(z * z)) + float(np.sum(log_ndtr(al * z))))
        return -ll

    x0 = np.array([xi0, math.log(max(om0, 1e-8)), float(np.clip(al0, -40, 40))])
    tol = 1e-6 if fast else 1e-10
    res = optimize.minimize(nll, x0, method="L-BFGS-B",
                            bounds=[(None, None), (-20.0, 20.0), (-80.0, 80.0)],
                            options={"ftol": tol, "gtol": 1e-8, "maxiter": 300})
    xi, lom, al = res.x
    params = ParamVector(Family.SKEW_NORMAL, (float(xi), math.exp(lom), float(al)))
    return FitResult(params, -float(res.fun), n, "mle",
                     bool(res.success), int(res.nit), res.message)


def _sample_skew(x):
    m = np.mean(x)
    s = np.std(x)
    return np.mean(((x - m) / s) ** 3)


_EXPIT_CLIP = 36.0


def _alpha_to_unc(alpha):
    p = (alpha - 0.5) / 1.5
    p = min(max(p, 1e-12), 1.0 - 1e-12)
    return math.log(p / (1.0 - p))


def _unc_to_alpha(a):
    a = min(max(a, -_EXPIT_CLIP), _EXPIT_CLIP)
    return 0.5 + 1.5 / (1.0 + math.exp(-a))


def _fit_stable(data, init, fast):
    n = data.size
    if init is not None:
        a0, b0, c0, d0 = init.params
    else:
        a0, b0, c0, d0 = _stable.quantile_init(data)
    a0 = min(max(a0, 0.55), 1.995)
    b0 = min(max(b0, -0.99), 0.99)
    grid_n = 2 ** 12 if fast else 2 ** 13

    def nll(theta):
        alpha = _unc_to_alpha(theta[0])
        beta = math.tanh(theta[1])
        c = math.exp(theta[2])
        delta = theta[3]
        if not (c > 0 and np.isfinite(c)):
            return np.inf
        grid = _stable.StableGrid(alpha, beta, c, delta, n=grid_n)
        val = -float(np.sum(grid.logpdf(data, exact_tails=False)))
        return val if np.isfinite(val) else np.inf

    x0 = np.array([_alpha_to_unc(a0), math.atanh(b0), math.log(c0), d0])
    if fast:
        opts = {"maxfev": 260, "xatol": 3e-4, "fatol": 2e-4}
    else:
        opts = {"maxfev": 2500, "xatol": 1e-6, "fatol": 1e-8}
    res = optimize.minimize(nll, x0, method="Nelder-Mead", options=opts)
    alpha = _unc_to_alpha(res.x[0])
    beta = math.tanh(res.x[1])
    params = ParamVector(Family.STABLE,
                         (alpha, beta, math.exp(res.x[2]), float(res.x[3])))
    ll = loglik(params, data)
    converged = bool(res.success) or fast
    return FitResult(params, ll, n, "mle", converged, int(res.nit), res.message)


def _fit_dln(data, init, fast):
    n = data.size
    if init is not None:
        mu_p, sg_p, mu_n, sg_n = init.params
    else:
        mu_p, sg_p, mu_n, sg_n = _dln.fit_initial(data)
    x0 = np.array([mu_p, math.log(sg_p), mu_n, math.log(sg_n)])
    bounds = [(-60.0, 60.0), (math.log(1e-3), math.log(50.0))] * 2

    if fast:
        obj = _dln.LightLoglik(data)
    elif n <= 5000:
        obj = None
    else:
        obj = _dln.GridLoglik(data)
    if obj is None:
        def negll(theta):
            return -_dln.direct_loglik(data, theta, nodes=_dln.GH_NODES_FAST)
    else:
        def negll(theta):
            return -obj(theta)

    tol = 1e-7 if fast else 1e-12
    res = optimize.minimize(negll, x0, method="L-BFGS-B", bounds=bounds,
                            options={"ftol": tol, "gtol": 1e-9 if fast else 1e-11,
                                     "maxiter": 500})
    x_best, f_best, nit = res.x, res.fun, int(res.nit)
    if not fast:
        # polish with a simplex pass; L-BFGS-B on numerical gradients can
        # stall one step short of the optimum
        res2 = optimize.minimize(negll, x_best, method="Nelder-Mead",
                                 options={"maxfev": 1500, "xatol": 1e-7,
                                          "fatol": 1e-9})
        if res2.fun < f_best:
            x_best, f_best = res2.x, res2.fun
        nit += int(res2.nit)
    mu_p, lsg_p, mu_n, lsg_n = x_best
    params = ParamVector(Family.DLN, (float(mu_p), math.exp(lsg_p),
                                      float(mu_n), math.exp(lsg_n)))
    ll = float(np.sum(_dln.logpdf_gh(data, *params.params,
                                     nodes=_dln_nodes(params.params[1],
                                                      params.params[3]))))
    if not np.isfinite(ll):
        raise NumericalError("dln log-likelihood is not finite at the optimum")
    return FitResult(params, ll, n, "mle", True, nit)
