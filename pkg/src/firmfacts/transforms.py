"""Growth measures and distributional fixed-effects transforms.

The transforms re-anchor the location and dispersion of each year (or scale
bin, or a continuum of scales) to pooled targets before pooling, either in
the raw variable, in logs, or sign-split in logs. All quantiles use the
linear-interpolation (type-7) convention so repeated application is stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateGroupError, DomainError, UndefinedGrowthError,
                     ZeroDenominatorError)


# ---------------------------------------------------------------------------
# scale helpers and growth measures


def asinh_scale(x):
    """log-like axis transform valid for negative values:
    asinh(x) = log(x + sqrt(x^2 + 1))."""
    return np.arcsinh(x)


def sinh_unscale(y):
    """Exact inverse of asinh_scale."""
    return np.sinh(y)


def dlog(m_t, m_prev):
    """Log-point growth log(m_t) - log(m_prev); both must be positive."""
    m_t = np.asarray(m_t, dtype=float)
    m_prev = np.asarray(m_prev, dtype=float)
    if np.any(m_t <= 0.0) or np.any(m_prev <= 0.0):
        raise DomainError("dlog needs strictly positive sizes")
    out = np.log(m_t) - np.log(m_prev)
    return float(out) if out.ndim == 0 else out


def adj_equity_growth(eq_t, de_t, eq_prev):
    """Buy-and-hold yearly equity growth in log points, adding back the
    period's net dispensations to equity holders."""
    total = np.asarray(eq_t, dtype=float) + np.asarray(de_t, dtype=float)
    eq_prev = np.asarray(eq_prev, dtype=float)
    if np.any(total <= 0.0):
        raise DomainError("equity value plus dispensations must be positive")
    if np.any(eq_prev <= 0.0):
        raise DomainError("lagged equity value must be positive")
    out = np.log(total) - np.log(eq_prev)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SignedDecomposition:
    """A net value split into nonnegative opposing components."""

    positive_part: float
    negative_part: float

    def __post_init__(self):
        if self.positive_part < 0 or self.negative_part < 0:
            raise DomainError("decomposition components must be >= 0")
        if not (math.isfinite(self.positive_part)
                and math.isfinite(self.negative_part)):
            raise DomainError("decomposition components must be finite")

    @classmethod
    def from_net(cls, w):
        w = float(w)
        return cls(max(w, 0.0), max(-w, 0.0))

    @property
    def net(self):
        return self.positive_part - self.negative_part


def dln_growth(d_t, d_next):
    """Generalized growth rate for a sometimes-negative net value
    W = Yp - Yn:

        (Yp_t * dlog(Yp_{t+1}) - Yn_t * dlog(Yn_{t+1})) / |Yp_t - Yn_t|

    A component that is zero at BOTH dates contributes a zero term; a
    component that is zero at exactly one date leaves the growth undefined.
    """
    yp0, yn0 = d_t.positive_part, d_t.negative_part
    yp1, yn1 = d_next.positive_part, d_next.negative_part
    denom = abs(yp0 - yn0)
    if denom == 0.0:
        raise ZeroDenominatorError("net value is zero at the base date")

    def term(y0, y1):
        if y0 == 0.0 and y1 == 0.0:
            return 0.0
        if y0 == 0.0 or y1 == 0.0:
            raise UndefinedGrowthError(
                "component is zero at exactly one of the two dates")
        return y0 * (math.log(y1) - math.log(y0))

    return (term(yp0, yp1) - term(yn0, yn1)) / denom


def dln_growth_series(w_t, w_next):
    """Vectorized dln_growth on net values decomposed as (w+, w-); returns
    NaN where the measure is undefined (sign change or zero base)."""
    w_t = np.asarray(w_t, dtype=float)
    w_next = np.asarray(w_next, dtype=float)
    out = np.full(w_t.shape, np.nan)
    same_pos = (w_t > 0) & (w_next > 0)
    same_neg = (w_t < 0) & (w_next < 0)
    # single-component histories reduce to dlog of the live component
    out[same_pos] = np.log(w_next[same_pos]) - np.log(w_t[same_pos])
    out[same_neg] = -(np.log(-w_next[same_neg]) - np.log(-w_t[same_neg]))
    return out


# ---------------------------------------------------------------------------
# year / bin re-anchoring


@dataclass(frozen=True)
class YearAnchors:
    year: int
    location: float
    dispersion: float

    def __post_init__(self):
        if not self.dispersion > 0:
            raise DegenerateGroupError(
                f"year {self.year} has nonpositive dispersion", self.year)


def _iqr(x):
    q25, q75 = np.quantile(x, [0.25, 0.75])
    return float(q75 - q25)


def _group_apply(values, groups, stat_loc, stat_disp, label):
    """Per-group (location, dispersion) with degenerate-group errors."""
    values = np.asarray(values, dtype=float)
    groups = np.asarray(groups)
    if values.shape != groups.shape:
        raise DomainError("values and group labels must align")
    out = {}
    for g in np.unique(groups):
        sub = values[groups == g]
        if np.unique(sub).size < 2:
            raise DegenerateGroupError(
                f"{label} {g} has fewer than 2 distinct values", g)
        loc = stat_loc(sub)
        disp = stat_disp(sub)
        if disp <= 0:
            raise DegenerateGroupError(f"{label} {g} has zero dispersion", g)
        out[g] = (loc, disp)
    return values, groups, out


def _reanchor(values, groups, anchors, pool_loc, pool_disp):
    out = np.empty_like(values)
    for g, (loc, disp) in anchors.items():
        m = groups == g
        out[m] = (values[m] - loc) / disp * pool_disp + pool_loc
    return out


def t1_standardize(values, years):
    """Per-year standardization by the year's mean and standard deviation."""
    values, years, anchors = _group_apply(
        values, years, lambda s: float(np.mean(s)), lambda s: float(np.std(s)),
        "year")
    return _reanchor(values, years, anchors, 0.0, 1.0)


def t2_reflate(values, years):
    """Per-year standardization reflated by the pooled mean and s.d."""
    values, years, anchors = _group_apply(
        values, years, lambda s: float(np.mean(s)), lambda s: float(np.std(s)),
        "year")
    return _reanchor(values, years, anchors, float(np.mean(values)),
                     float(np.std(values)))


def t3_robust_reflate(values, years):
    """Per-year median/IQR re-anchored to the pooled median/IQR."""
    values, years, anchors = _group_apply(
        values, years, lambda s: float(np.median(s)), _iqr, "year")
    return _reanchor(values, years, anchors, float(np.median(values)),
                     _iqr(values))


def t4_size_domain(values, years):
    """The log-domain version for positive sizes: t4(Y) = exp(t3(log Y))."""
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0.0):
        raise DomainError("size-domain adjustment needs positive values")
    return np.exp(t3_robust_reflate(np.log(values), years))


def t5_signed_adjust(values, years):
    """Sign-preserving log-domain adjustment anchored on the positive
    values' yearly location and dispersion."""
    values = np.asarray(values, dtype=float)
    years = np.asarray(years)
    if values.shape != years.shape:
        raise DomainError("values and years must align")
    pos = values > 0
    anchors = {}
    for y in np.unique(years):
        sub = values[(years == y) & pos]
        if np.unique(sub).size < 2:
            raise DegenerateGroupError(
                f"year {y} has fewer than 2 distinct positive values", y)
        lsub = np.log(sub)
        disp = _iqr(lsub)
        if disp <= 0:
            raise DegenerateGroupError(
                f"year {y} has zero dispersion among positives", y)
        anchors[y] = (float(np.median(lsub)), disp)
    lpos_all = np.log(values[pos])
    pool_loc = float(np.median(lpos_all))
    pool_disp = _iqr(lpos_all)
    out = np.zeros_like(values)
    nz = values != 0.0
    for y, (loc, disp) in anchors.items():
        m = (years == y) & nz
        adj = (np.log(np.abs(values[m])) - loc) / disp * pool_disp + pool_loc
        out[m] = np.sign(values[m]) * np.exp(adj)
    return out


def t6_bin_adjust(values, bin_index):
    """Per-bin median/IQR re-anchored to the pooled median/IQR."""
    values, bins, anchors = _group_apply(
        values, bin_index, lambda s: float(np.median(s)), _iqr, "bin")
    return _reanchor(values, bins, anchors, float(np.median(values)),
                     _iqr(values))


# ---------------------------------------------------------------------------
# continuum-of-scales adjustment


@dataclass(frozen=True)
class ScaleAnchors:
    """Fitted location and log-dispersion lines against lagged scale."""

    b0_loc: float
    b1_loc: float
    b0_dis: float
    b1_dis: float
    median_scale: float

    def location_at(self, s):
        return self.b0_loc + self.b1_loc * np.asarray(s, dtype=float)

    def dispersion_at(self, s):
        return np.exp(self.b0_dis + self.b1_dis * np.asarray(s, dtype=float))

    def as_dict(self):
        return {
            "b0_loc": self.b0_loc, "b1_loc": self.b1_loc,
            "b0_dis": self.b0_dis, "b1_dis": self.b1_dis,
            "median_scale": self.median_scale,
        }


def t7_scale_adjust(x, lagged_scale, anchors):
    """Center by the fitted median line, deflate by the fitted dispersion
    line, and reflate at the pooled median scale."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(lagged_scale, dtype=float)
    if not np.all(np.isfinite(s)):
        raise DomainError("lagged scale must be finite")
    m = anchors.median_scale
    out = ((x - anchors.location_at(s)) / anchors.dispersion_at(s)
           * anchors.dispersion_at(m) + anchors.location_at(m))
    return float(out) if out.ndim == 0 else out


def estimate_scale_anchors(x, lagged_scale, nbins=49, trim=0.01, tau=0.5):
    """Fit the two anchor lines: a median (quantile) regression of x on
    lagged scale, and an OLS of binned log-IQR on bin median scale."""
    from .panel import binscatter, dispersion_scale_fit, quantile_line

    x = np.asarray(x, dtype=float)
    s = np.asarray(lagged_scale, dtype=float)
    keep = np.isfinite(x) & np.isfinite(s)
    x, s = x[keep], s[keep]
    b0_loc, b1_loc = quantile_line(x, s, tau)
    stats = binscatter(x, s, nbins=nbins, trim=trim)
    fit = dispersion_scale_fit(stats)
    return ScaleAnchors(b0_loc, b1_loc, fit.intercept, fit.slope,
                        float(np.median(s)))
