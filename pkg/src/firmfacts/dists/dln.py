"""Difference-of-log-Normals numerics.

W = Yp - Yn with Yp ~ logNormal(mu_p, sigma_p), Yn ~ logNormal(mu_n, sigma_n),
independent. The density has no closed form; it is the one-dimensional
convolution integral

    f_W(w) = int_0^inf f_LN(w + v; mu_p, sigma_p) f_LN(v; mu_n, sigma_n) dv.

Substituting v = e^u turns the second factor times the Jacobian into a
Normal(mu_n, sigma_n^2) density in u, so the integrand is a Normal weight
times a smooth bounded function. Scalar entry points use adaptive
Gauss-Kronrod on u; vectorized paths use Gauss-Hermite against the Normal
weight. Negative w reduces to positive w with the two components swapped.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import log_ndtr, logsumexp, ndtr

from ..errors import NumericalError

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# Gauss-Hermite node counts: accuracy-tested against the quadrature path.
GH_NODES = 128
GH_NODES_FAST = 64

_gh_cache: dict = {}


def _gh(nodes):
    try:
        return _gh_cache[nodes]
    except KeyError:
        z, h = np.polynomial.hermite.hermgauss(nodes)
        logh = np.log(h) - 0.5 * math.log(math.pi)
        _gh_cache[nodes] = (z, h / math.sqrt(math.pi), logh)
        return _gh_cache[nodes]


def _split_signs(w):
    """Masks for w >= 0 (direct) and w < 0 (swapped components)."""
    w = np.asarray(w, dtype=float)
    return w, w >= 0.0


def logpdf_gh(w, mu_p, sg_p, mu_n, sg_n, nodes=GH_NODES):
    """Vectorized log-density via Gauss-Hermite quadrature."""
    w, pos = _split_signs(w)
    out = np.empty(w.shape, dtype=float)
    if pos.any():
        out[pos] = _logpdf_gh_nonneg(w[pos], mu_p, sg_p, mu_n, sg_n, nodes)
    if (~pos).any():
        out[~pos] = _logpdf_gh_nonneg(-w[~pos], mu_n, sg_n, mu_p, sg_p, nodes)
    return out


def _logpdf_gh_nonneg(w, mu_p, sg_p, mu_n, sg_n, nodes):
    """log f_W(w) for w >= 0 via GH against the Yn log-scale Normal weight."""
    z, _, logh = _gh(nodes)
    u = mu_n + math.sqrt(2.0) * sg_n * z
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    # log(w + e^u), stable for any magnitudes
    lt = np.logaddexp(logw[:, None], u[None, :])
    lg = -0.5 * ((lt - mu_p) / sg_p) ** 2 - lt - math.log(sg_p) - _LOG_SQRT_2PI
    return logsumexp(lg + logh[None, :], axis=1)


def cdf_gh(w, mu_p, sg_p, mu_n, sg_n, nodes=GH_NODES):
    """Vectorized CDF via Gauss-Hermite quadrature."""
    w, pos = _split_signs(w)
    out = np.empty(w.shape, dtype=float)
    if pos.any():
        out[pos] = _cdf_gh_nonneg(w[pos], mu_p, sg_p, mu_n, sg_n, nodes)
    if (~pos).any():
        out[~pos] = 1.0 - _cdf_gh_nonneg(-w[~pos], mu_n, sg_n, mu_p, sg_p, nodes)
    return np.clip(out, 0.0, 1.0)


def _cdf_gh_nonneg(w, mu_p, sg_p, mu_n, sg_n, nodes):
    """P(W <= w) = E_u[ Phi((log(w + e^u) - mu_p)/sg_p) ] for w >= 0."""
    z, hw, _ = _gh(nodes)
    u = mu_n + math.sqrt(2.0) * sg_n * z
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    lt = np.logaddexp(logw[:, None], u[None, :])
    return ndtr((lt - mu_p) / sg_p) @ hw


def logcdf_gh(w, mu_p, sg_p, mu_n, sg_n, nodes=GH_NODES):
    """Vectorized log-CDF, accurate deep in the left tail."""
    w, pos = _split_signs(w)
    out = np.empty(w.shape, dtype=float)
    if pos.any():
        with np.errstate(divide="ignore"):
            out[pos] = np.log(_cdf_gh_nonneg(w[pos], mu_p, sg_p, mu_n, sg_n, nodes))
    if (~pos).any():
        # P(W <= w) = P(W' >= -w) with swapped components; compute the
        # survivor in log space: S'(x) = E_u[Phi((mu_n' ... ))] via log-ndtr
        z, _, logh = _gh(nodes)
        u = mu_p + math.sqrt(2.0) * sg_p * z
        x = -w[~pos]
        lt = np.logaddexp(np.log(x)[:, None], u[None, :])
        # survivor of the swapped variable at x: E[1 - Phi((log(x+e^u)-mu_n)/sg_n)]
        lg = log_ndtr(-(lt - mu_n) / sg_n)
        out[~pos] = logsumexp(lg + logh[None, :], axis=1)
    return out


def _pdf_quad_nonneg(w, mu_p, sg_p, mu_n, sg_n, tol=1e-10):
    """Adaptive Gauss-Kronrod density for a scalar w >= 0."""
    lo = mu_n - 40.0 * sg_n
    hi = mu_n + 40.0 * sg_n

    def integrand(u):
        t = w + math.exp(u)
        lg = (-0.5 * ((math.log(t) - mu_p) / sg_p) ** 2 - math.log(t)
              - math.log(sg_p) - _LOG_SQRT_2PI)
        lphi = -0.5 * ((u - mu_n) / sg_n) ** 2 - math.log(sg_n) - _LOG_SQRT_2PI
        return math.exp(lg + lphi)

    # interior peak of the Yp factor, if it falls inside the window
    points = None
    if math.exp(mu_p) > w:
        u_star = math.log(math.exp(mu_p) - w)
        if lo < u_star < hi:
            points = [u_star]
    val, err = integrate.quad(integrand, lo, hi, epsabs=tol, epsrel=1e-12,
                              limit=200, points=points)
    if err > max(tol, abs(val) * 1e-6):
        raise NumericalError(
            f"dln density quadrature did not reach tolerance {tol:g}",
            achieved_tol=err)
    return val


def pdf_quad(w, mu_p, sg_p, mu_n, sg_n, tol=1e-10):
    """High-accuracy scalar density via adaptive quadrature."""
    w = float(w)
    if w >= 0:
        return _pdf_quad_nonneg(w, mu_p, sg_p, mu_n, sg_n, tol)
    return _pdf_quad_nonneg(-w, mu_n, sg_n, mu_p, sg_p, tol)


def logpdf_quad(w, mu_p, sg_p, mu_n, sg_n, tol=1e-10):
    val = pdf_quad(w, mu_p, sg_p, mu_n, sg_n, tol)
    if val <= 0.0:
        # underflow far in a tail; fall back to the log-space GH evaluation
        return float(logpdf_gh(np.array([w]), mu_p, sg_p, mu_n, sg_n)[0])
    return math.log(val)


def cdf_quad(w, mu_p, sg_p, mu_n, sg_n, tol=1e-12):
    """High-accuracy scalar CDF via adaptive quadrature."""
    w = float(w)
    if w < 0:
        return 1.0 - cdf_quad(-w, mu_n, sg_n, mu_p, sg_p, tol)
    lo = mu_n - 40.0 * sg_n
    hi = mu_n + 40.0 * sg_n

    def integrand(u):
        t = w + math.exp(u)
        lphi = -0.5 * ((u - mu_n) / sg_n) ** 2 - math.log(sg_n) - _LOG_SQRT_2PI
        return ndtr((math.log(t) - mu_p) / sg_p) * math.exp(lphi)

    val, _ = integrate.quad(integrand, lo, hi, epsabs=tol, epsrel=1e-12, limit=200)
    return min(max(val, 0.0), 1.0)


def sample(n, mu_p, sg_p, mu_n, sg_n, rng):
    """Difference of two independent log-Normal draws."""
    yp = np.exp(rng.normal(mu_p, sg_p, size=n))
    yn = np.exp(rng.normal(mu_n, sg_n, size=n))
    return yp - yn


def _lognormal_cumulants(mu, sg):
    """(mean, kappa2, kappa3, kappa4) of logNormal(mu, sg)."""
    m = [math.exp(j * mu + 0.5 * j * j * sg * sg) for j in (1, 2, 3, 4)]
    c2 = m[1] - m[0] ** 2
    c3 = m[2] - 3.0 * m[0] * m[1] + 2.0 * m[0] ** 3
    c4 = m[3] - 4.0 * m[0] * m[2] + 6.0 * m[0] ** 2 * m[1] - 3.0 * m[0] ** 4
    return m[0], c2, c3, c4 - 3.0 * c2 * c2


def moments(mu_p, sg_p, mu_n, sg_n):
    """(mean, sd, skewness, kurtosis) in closed form from log-Normal raw
    moments E[Y^k] = exp(k mu + k^2 sg^2 / 2) and independence."""
    mp, k2p, k3p, k4p = _lognormal_cumulants(mu_p, sg_p)
    mn, k2n, k3n, k4n = _lognormal_cumulants(mu_n, sg_n)
    k2 = k2p + k2n
    k3 = k3p - k3n
    k4 = k4p + k4n
    sd = math.sqrt(k2)
    return mp - mn, sd, k3 / k2 ** 1.5, 3.0 + k4 / (k2 * k2)


def quantile_bracket(mu_p, sg_p, mu_n, sg_n):
    """A generous (lo, hi) bracket containing all but ~1e-12 of the mass."""
    hi = math.exp(mu_p + 8.0 * sg_p) + 1.0
    lo = -(math.exp(mu_n + 8.0 * sg_n) + 1.0)
    return lo, hi


def fit_initial(data):
    """Starting values: log-Normal fits to the positive part and to the
    magnitude of the negative part; a one-sided sample pins the thin side
    three log-units below the thick side."""
    data = np.asarray(data, dtype=float)
    pos = data[data > 0]
    neg = -data[data < 0]
    n = data.size

    def _ln_fit(x):
        lx = np.log(x)
        return float(np.mean(lx)), max(float(np.std(lx)), 0.05)

    if pos.size >= max(2, 0.01 * n) and neg.size >= max(2, 0.01 * n):
        mu_p, sg_p = _ln_fit(pos)
        mu_n, sg_n = _ln_fit(neg)
    elif pos.size >= 2:
        mu_p, sg_p = _ln_fit(pos)
        mu_n, sg_n = mu_p - 3.0, sg_p
    elif neg.size >= 2:
        mu_n, sg_n = _ln_fit(neg)
        mu_p, sg_p = mu_n - 3.0, sg_n
    else:
        raise NumericalError("dln fit needs at least two nonzero observations")
    return mu_p, sg_p, mu_n, sg_n


class GridLoglik:
    """Data log-likelihood evaluated through a cubic spline of the log-density
    on a fixed asinh-spaced grid. The grid depends only on the data, so the
    resulting objective is smooth in the parameters."""

    def __init__(self, data, n_grid=None, nodes=None):
        from scipy.interpolate import CubicSpline

        self._CubicSpline = CubicSpline
        data = np.asarray(data, dtype=float)
        self.n = data.size
        if n_grid is None:
            n_grid = 700 if self.n > 20000 else 360
        if nodes is None:
            nodes = GH_NODES if self.n > 20000 else GH_NODES_FAST
        self.nodes = nodes
        s = np.arcsinh(data)
        pad = 0.05 * (s.max() - s.min()) + 1e-6
        self.grid_s = np.linspace(s.min() - pad, s.max() + pad, n_grid)
        self.grid_w = np.sinh(self.grid_s)
        self.data_s = s

    def __call__(self, theta):
        mu_p, lsg_p, mu_n, lsg_n = theta
        sg_p, sg_n = math.exp(lsg_p), math.exp(lsg_n)
        lf = logpdf_gh(self.grid_w, mu_p, sg_p, mu_n, sg_n, nodes=self.nodes)
        if not np.all(np.isfinite(lf)):
            return -np.inf
        spline = self._CubicSpline(self.grid_s, lf)
        return float(np.sum(spline(self.data_s)))


def direct_loglik(data, theta, nodes=GH_NODES_FAST):
    """Exact-GH log-likelihood (used for small samples)."""
    mu_p, lsg_p, mu_n, lsg_n = theta
    lf = logpdf_gh(np.asarray(data, float), mu_p, math.exp(lsg_p),
                   mu_n, math.exp(lsg_n), nodes=nodes)
    return float(np.sum(lf))


def _log_f_nonneg_fast(w, mu_p, sg_p, mu_n, sg_n, z, hw):
    """Direct-sum GH log-density for w >= 0; no log-space safety nets, so
    callers keep w in the bulk (grid ranges padded off the data)."""
    u = mu_n + math.sqrt(2.0) * sg_n * np.clip(z, -24.0, 24.0)
    t = w[:, None] + np.exp(u)[None, :]
    lt = np.log(t)
    lg = -0.5 * ((lt - mu_p) / sg_p) ** 2 - lt
    f = np.exp(lg) @ hw / (sg_p * math.sqrt(2.0 * math.pi))
    return np.log(np.maximum(f, 1e-290))


def logpdf_gh_fast(w_pos, w_neg_abs, mu_p, sg_p, mu_n, sg_n, z, hw):
    """(log f at nonnegative points, log f at negated negative points)."""
    out_p = _log_f_nonneg_fast(w_pos, mu_p, sg_p, mu_n, sg_n, z, hw) \
        if w_pos.size else np.empty(0)
    out_n = _log_f_nonneg_fast(w_neg_abs, mu_n, sg_n, mu_p, sg_p, z, hw) \
        if w_neg_abs.size else np.empty(0)
    return out_p, out_n


def cdf_gh_fast(x, mu_p, sg_p, mu_n, sg_n, nodes=None):
    """Direct-sum GH CDF (light path; matches cdf_gh to quadrature error)."""
    if nodes is None:
        ratio = max(sg_p, sg_n) / min(sg_p, sg_n)
        nodes = 16 if ratio <= 2.0 else (32 if ratio <= 4.0 else 64)
    z, hw, _ = _gh(nodes)
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    if pos.any():
        u = np.exp(mu_n + math.sqrt(2.0) * sg_n * np.clip(z, -24.0, 24.0))
        t = x[pos][:, None] + u[None, :]
        out[pos] = ndtr((np.log(t) - mu_p) / sg_p) @ hw
    if (~pos).any():
        u = np.exp(mu_p + math.sqrt(2.0) * sg_p * np.clip(z, -24.0, 24.0))
        t = -x[~pos][:, None] + u[None, :]
        out[~pos] = 1.0 - ndtr((np.log(t) - mu_n) / sg_n) @ hw
    return np.clip(out, 0.0, 1.0)


class LightLoglik:
    """Linear-interpolated grid log-likelihood for inner bootstrap refits."""

    def __init__(self, data, n_grid=192, nodes=32):
        data = np.asarray(data, dtype=float)
        self.z, self.hw, _ = _gh(nodes)
        s = np.arcsinh(data)
        pad = 0.05 * (s.max() - s.min()) + 1e-6
        self.grid_s = np.linspace(s.min() - pad, s.max() + pad, n_grid)
        grid_w = np.sinh(self.grid_s)
        self._pos = grid_w >= 0
        self._wp = grid_w[self._pos]
        self._wn = -grid_w[~self._pos]
        self.data_s = s

    def __call__(self, theta):
        mu_p, lsg_p, mu_n, lsg_n = theta
        if abs(mu_p) > 80 or abs(mu_n) > 80 or abs(lsg_p) > 8 or abs(lsg_n) > 8:
            return -np.inf
        sg_p, sg_n = math.exp(lsg_p), math.exp(lsg_n)
        lf = np.empty(self._pos.size)
        fp, fn = logpdf_gh_fast(self._wp, self._wn, mu_p, sg_p, mu_n, sg_n,
                                self.z, self.hw)
        lf[self._pos] = fp
        lf[~self._pos] = fn
        if not np.all(np.isfinite(lf)):
            return -np.inf
        return float(np.sum(np.interp(self.data_s, self.grid_s, lf)))
