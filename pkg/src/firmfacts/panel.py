"""Firm-panel data model and analyses.

Raw firm-year records carry nominal accounting items; ingestion deflates
them to base-year dollars, derives the accounting variables (income is
forced to satisfy sales - expenses = income = dividends + investment by
constructing expenses as the residual), and attaches subset flags. All
analyses are read-only over the derived table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import (CoverageError, DegenerateGroupError, DomainError,
                     NumericalError, SampleSizeError, SchemaError)

#: raw CSV schema, in column order
RAW_COLUMNS = [
    "firm_id", "fiscal_year", "mve", "lt", "dvt", "prstkc", "sstk", "xint",
    "ppent", "at", "dp", "sl", "cogs", "xsga", "txt", "xrd", "capx", "sppe",
    "aqc", "sic",
]
_MONETARY = ["mve", "lt", "dvt", "prstkc", "sstk", "xint", "ppent", "at",
             "dp", "sl", "cogs", "xsga", "txt", "xrd", "capx", "sppe", "aqc"]

#: derived variable mnemonics
DERIVED = ["EQ", "DB", "VL", "DE", "DD", "DI", "KP", "KT", "DP", "IP", "IT",
           "CF", "SL", "XS", "RD", "XA", "CA", "IA"]

SUBSETS = ("all", "good", "nonbank")

#: size cutoff for the quality subset, in millions of base-year dollars
SIZE_CUTOFF = 1.0
#: acquisitions above this share of assets flag a major restructuring
RESTRUCTURING_SHARE = 0.20
#: excluded industry code ranges: financial firms and utilities
EXCLUDED_SIC = ((6000, 6999), (4900, 4949))


# ---------------------------------------------------------------------------
# variable construction (Table-1 formulas)


def construct_variables(raw, raw_prev=None):
    """Derived variables for one firm-year; lag-dependent fields are NaN
    without a previous-year record."""

    def g(src, name):
        if src is None:
            return math.nan
        v = src.get(name, math.nan)
        return math.nan if v is None else float(v)

    eq = g(raw, "mve")
    db = g(raw, "lt")
    de = g(raw, "dvt") + (g(raw, "prstkc") - g(raw, "sstk"))
    dd = g(raw, "xint") + (g(raw_prev, "lt") - db)
    di = de + dd
    kp = g(raw, "ppent")
    kt = g(raw, "at")
    dp = g(raw, "dp")
    ip = kp - g(raw_prev, "ppent") + dp
    it = kt - g(raw_prev, "at") + dp
    cf = di + it
    sl = g(raw, "sl")
    xa = g(raw, "cogs") + g(raw, "xsga") + g(raw, "txt")
    return {
        "EQ": eq, "DB": db, "VL": eq + db, "DE": de, "DD": dd, "DI": di,
        "KP": kp, "KT": kt, "DP": dp, "IP": ip, "IT": it, "CF": cf,
        "SL": sl, "XS": sl - cf, "RD": g(raw, "xrd"), "XA": xa,
        "CA": sl - xa, "IA": g(raw, "capx") - g(raw, "sppe"),
    }


def _derive_frame(df):
    """Vectorized Table-1 construction over a deflated raw frame sorted by
    (firm_id, fiscal_year); lags only apply across consecutive years."""
    out = pd.DataFrame(index=df.index)
    grp = df.groupby("firm_id", sort=False)
    lag_ok = grp["fiscal_year"].diff() == 1

    def lag(col):
        return grp[col].shift(1).where(lag_ok)

    out["EQ"] = df["mve"]
    out["DB"] = df["lt"]
    out["VL"] = out["EQ"] + out["DB"]
    out["DE"] = df["dvt"] + (df["prstkc"] - df["sstk"])
    out["DD"] = df["xint"] + (lag("lt") - df["lt"])
    out["DI"] = out["DE"] + out["DD"]
    out["KP"] = df["ppent"]
    out["KT"] = df["at"]
    out["DP"] = df["dp"]
    out["IP"] = out["KP"] - lag("ppent") + out["DP"]
    out["IT"] = out["KT"] - lag("at") + out["DP"]
    out["CF"] = out["DI"] + out["IT"]
    out["SL"] = df["sl"]
    out["XS"] = out["SL"] - out["CF"]
    out["RD"] = df["xrd"]
    out["XA"] = df["cogs"] + df["xsga"] + df["txt"]
    out["CA"] = out["SL"] - out["XA"]
    out["IA"] = df["capx"] - df["sppe"]
    return out


# ---------------------------------------------------------------------------
# deflators


@dataclass(frozen=True)
class DeflatorSeries:
    """Nominal GDP and GDP-deflator indices by year, base year 2019."""

    table: pd.DataFrame
    base_year: int = 2019

    def __post_init__(self):
        for col in ("nominal_gdp", "gdp_deflator"):
            if col not in self.table.columns:
                raise SchemaError(f"deflator series missing column {col!r}")
            if (self.table[col] <= 0).any():
                raise SchemaError(f"deflator column {col!r} must be positive")
        if self.base_year not in set(self.table["year"]):
            raise CoverageError(
                f"deflator series must include base year {self.base_year}")

    def factor(self, year, mode):
        """Multiplier taking nominal year dollars to base-year dollars."""
        col = {"RealGDP": "gdp_deflator", "NominalGDP": "nominal_gdp"}.get(mode)
        if col is None:
            raise DomainError(f"unknown deflation mode {mode!r}")
        s = self.table.set_index("year")[col]
        years = np.atleast_1d(np.asarray(year))
        missing = sorted(set(years) - set(s.index))
        if missing:
            raise CoverageError(f"deflator series missing years {missing}")
        base = float(s.loc[self.base_year])
        vals = base / s.loc[years].to_numpy(dtype=float)
        return float(vals[0]) if np.isscalar(year) else vals


def apply_deflator(x, year, mode, series):
    """x (nominal, year-t dollars) restated in base-year dollars."""
    f = series.factor(year, mode)
    out = np.asarray(x, dtype=float) * f
    return float(out) if np.isscalar(x) else out


# ---------------------------------------------------------------------------
# CSV loading


def _numeric(df, cols, path):
    for col in cols:
        coerced = pd.to_numeric(df[col], errors="coerce")
        bad = coerced.isna() & df[col].notna() & (df[col].astype(str).str.strip() != "")
        if bad.any():
            line = int(df.index[bad][0]) + 2  # header line + 1-indexing
            raise SchemaError(
                f"{path}: non-numeric value {df[col][bad].iloc[0]!r} in "
                f"column {col!r} at line {line}", line=line)
        df[col] = coerced
    return df


def load_panel_csv(path):
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    df = df.replace({"": None})
    missing = [c for c in RAW_COLUMNS if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing required columns {missing}", line=1)
    df = _numeric(df, [c for c in RAW_COLUMNS if c not in ("firm_id",)], path)
    if df["fiscal_year"].isna().any():
        line = int(df.index[df["fiscal_year"].isna()][0]) + 2
        raise SchemaError(f"{path}: fiscal_year missing at line {line}",
                          line=line)
    df["fiscal_year"] = df["fiscal_year"].astype(int)
    dup = df.duplicated(subset=["firm_id", "fiscal_year"])
    if dup.any():
        line = int(df.index[dup][0]) + 2
        raise SchemaError(f"{path}: duplicate (firm_id, fiscal_year) at "
                          f"line {line}", line=line)
    return df.sort_values(["firm_id", "fiscal_year"], kind="stable",
                          ignore_index=True)


def load_deflators(path, base_year=2019):
    df = pd.read_csv(path, dtype=str, keep_default_na=False).replace({"": None})
    need = ["year", "nominal_gdp", "gdp_deflator"]
    missing = [c for c in need if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing required columns {missing}", line=1)
    df = _numeric(df, need, path)
    df["year"] = df["year"].astype(int)
    return DeflatorSeries(df[need], base_year=base_year)


def load_factors(path):
    df = pd.read_csv(path, dtype=str, keep_default_na=False).replace({"": None})
    need = ["date", "mkt_rf", "smb", "hml", "rf"]
    missing = [c for c in need if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing required columns {missing}", line=1)
    df = _numeric(df, need[1:], path)
    df["date"] = pd.to_datetime(df["date"], format="ISO8601")
    return df[need].sort_values("date", ignore_index=True)


# ---------------------------------------------------------------------------
# ingestion


@dataclass
class Panel:
    """Derived firm-year table plus subset flags; immutable by convention."""

    frame: pd.DataFrame
    summary: dict = field(default_factory=dict)

    def subset(self, name):
        name = str(name).lower()
        if name not in SUBSETS:
            raise DomainError(f"unknown subset {name!r}; expected {SUBSETS}")
        if name == "all":
            return self.frame
        return self.frame[self.frame[f"flag_{name}"]]

    def variable(self, name, subset="good"):
        df = self.subset(subset)
        return resolve_variable(df, name)


def apply_filters(df):
    """Attach flag_good / flag_nonbank columns (monotone: nonbank => good)."""
    critical = (df["mve"].notna() & df["lt"].notna() & df["at"].notna()
                & df["sl"].notna() & df["IT"].notna())
    size_ok = (df[["VL", "KT", "SL"]].min(axis=1) >= SIZE_CUTOFF)
    aqc_share = df["aqc"] / df["at"]
    restructuring = aqc_share.notna() & (aqc_share > RESTRUCTURING_SHARE)
    good = critical & size_ok & ~restructuring
    sic = pd.to_numeric(df["sic"], errors="coerce")
    excluded = pd.Series(False, index=df.index)
    for lo, hi in EXCLUDED_SIC:
        excluded |= (sic >= lo) & (sic <= hi)
    out = df.copy()
    out["flag_good"] = good.fillna(False)
    out["flag_nonbank"] = (good & ~excluded).fillna(False)
    return out


def ingest(panel_csv, deflator_csv=None, mode="NominalGDP"):
    """Load, deflate, derive, and flag a raw panel CSV."""
    raw = load_panel_csv(panel_csv)
    deflated = raw.copy()
    if deflator_csv is not None:
        series = (deflator_csv if isinstance(deflator_csv, DeflatorSeries)
                  else load_deflators(deflator_csv))
        factors = series.factor(deflated["fiscal_year"].to_numpy(), mode)
        for col in _MONETARY:
            deflated[col] = deflated[col] * factors
    derived = _derive_frame(deflated)
    full = pd.concat([deflated, derived], axis=1)
    full = apply_filters(full)
    summary = {
        "rows": int(len(full)),
        "firms": int(full["firm_id"].nunique()),
        "rows_good": int(full["flag_good"].sum()),
        "firms_good": int(full.loc[full["flag_good"], "firm_id"].nunique()),
        "rows_nonbank": int(full["flag_nonbank"].sum()),
        "firms_nonbank": int(full.loc[full["flag_nonbank"], "firm_id"].nunique()),
        "years": [int(full["fiscal_year"].min()), int(full["fiscal_year"].max())],
        "deflation": mode if deflator_csv is not None else "none",
    }
    return Panel(full, summary)


# ---------------------------------------------------------------------------
# variable grammar


def _lagged(df, col):
    grp = df.groupby("firm_id", sort=False)
    ok = grp["fiscal_year"].diff() == 1
    return grp[col].shift(1).where(ok)


def resolve_variable(df, name):
    """Mnemonics plus derived measures:

    - ``X``              raw derived variable
    - ``scale.X``        log(X) for positive X
    - ``dlog.X``         within-firm log growth; EQ and VL add back the
                         period's dispensations (DE and DI respectively)
    - ``growth.X``       generalized growth rate for sometimes-negative X
    - ``intensity.X.Y``  X / Y for positive Y

    Returns a float Series aligned to df; NaN where undefined.
    """
    name = name.strip()
    parts = name.split(".")
    if len(parts) == 1:
        if name not in DERIVED:
            raise DomainError(f"unknown variable {name!r}")
        return df[name].astype(float)
    kind = parts[0].lower()
    if kind == "scale" and len(parts) == 2:
        x = resolve_variable(df, parts[1])
        return pd.Series(np.where(x > 0, np.log(x.where(x > 0)), np.nan),
                         index=df.index)
    if kind == "dlog" and len(parts) == 2:
        var = parts[1]
        x = resolve_variable(df, var)
        cur = x.copy()
        if var == "EQ":
            cur = cur + df["DE"].astype(float)
        elif var == "VL":
            cur = cur + df["DI"].astype(float)
        work = df[["firm_id", "fiscal_year"]].copy()
        work["_cur"] = cur
        work["_base"] = x
        prev = _lagged(work, "_base")
        valid = (work["_cur"] > 0) & (prev > 0)
        return pd.Series(
            np.where(valid, np.log(work["_cur"].where(valid))
                     - np.log(prev.where(valid)), np.nan), index=df.index)
    if kind == "growth" and len(parts) == 2:
        from .transforms import dln_growth_series

        x = resolve_variable(df, parts[1])
        work = df[["firm_id", "fiscal_year"]].copy()
        work["_x"] = x
        prev = _lagged(work, "_x")
        out = np.full(len(df), np.nan)
        m = prev.notna() & x.notna()
        out[m.to_numpy()] = dln_growth_series(prev[m].to_numpy(),
                                              x[m].to_numpy())
        return pd.Series(out, index=df.index)
    if kind == "intensity" and len(parts) == 3:
        x = resolve_variable(df, parts[1])
        y = resolve_variable(df, parts[2])
        return pd.Series(np.where(y > 0, x / y.where(y > 0), np.nan),
                         index=df.index)
    raise DomainError(f"cannot parse variable name {name!r}")


def lagged_scale(df, basis):
    """log of the previous year's value of a size measure, aligned to t."""
    x = resolve_variable(df, basis)
    work = df[["firm_id", "fiscal_year"]].copy()
    work["_x"] = x
    prev = _lagged(work, "_x")
    return pd.Series(np.where(prev > 0, np.log(prev.where(prev > 0)), np.nan),
                     index=df.index)


# ---------------------------------------------------------------------------
# binscatter


PERCENTILES = (1, 10, 25, 50, 75, 90, 99)


@dataclass(frozen=True)
class BinnedStats:
    bin_index: int
    scale_low: float
    scale_high: float
    scale_median: float
    count: int
    percentiles: dict
    iqr: float
    mean: float
    skewness: float

    @property
    def median(self):
        return self.percentiles[50]


def _four_moments(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return (math.nan,) * 4
    m = float(np.mean(x))
    sd = float(np.std(x))
    if sd == 0.0:
        return m, 0.0, math.nan, math.nan
    z = (x - m) / sd
    return m, sd, float(np.mean(z ** 3)), float(np.mean(z ** 4))


def binscatter(values, scale, nbins=49, trim=0.01):
    """Equal-count bins by scale after trimming the scale tails."""
    values = np.asarray(values, dtype=float)
    scale = np.asarray(scale, dtype=float)
    if values.shape != scale.shape:
        raise DomainError("values and scale must align")
    keep = np.isfinite(values) & np.isfinite(scale)
    values, scale = values[keep], scale[keep]
    n = values.size
    if n < nbins:
        raise SampleSizeError(f"binscatter needs at least {nbins} "
                              f"observations, got {n}")
    order = np.argsort(scale, kind="stable")
    k = int(n * trim)
    kept = order[k:n - k] if k > 0 else order
    out = []
    for b, idx in enumerate(np.array_split(kept, nbins)):
        v = values[idx]
        s = scale[idx]
        pct = {p: float(np.percentile(v, p)) for p in PERCENTILES}
        mean, _, skew, _ = _four_moments(v)
        out.append(BinnedStats(
            bin_index=b, scale_low=float(s.min()), scale_high=float(s.max()),
            scale_median=float(np.median(s)), count=int(v.size),
            percentiles=pct, iqr=pct[75] - pct[25], mean=mean, skewness=skew))
    return out


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    se: float
    r2: float
    nbins: int


def dispersion_scale_fit(stats):
    """OLS of log bin IQR on bin median scale."""
    stats = list(stats)
    if len(stats) < 10:
        raise SampleSizeError("dispersion fit needs at least 10 bins")
    iqr = np.array([b.iqr for b in stats])
    if np.any(iqr <= 0):
        bad = stats[int(np.argmax(iqr <= 0))].bin_index
        raise DegenerateGroupError(f"bin {bad} has zero IQR", bad)
    x = np.array([b.scale_median for b in stats])
    y = np.log(iqr)
    slope, intercept, se, r2 = _ols_line(y, x)
    return ScalingFit(slope, intercept, se, r2, len(stats))


def _ols_line(y, x):
    n = y.size
    xbar, ybar = np.mean(x), np.mean(y)
    sxx = float(np.sum((x - xbar) ** 2))
    if sxx == 0:
        raise DegenerateGroupError("regressor has zero variance", None)
    slope = float(np.sum((x - xbar) * (y - ybar)) / sxx)
    intercept = float(ybar - slope * xbar)
    resid = y - intercept - slope * x
    rss = float(np.sum(resid ** 2))
    tss = float(np.sum((y - ybar) ** 2))
    se = math.sqrt(rss / max(n - 2, 1) / sxx)
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    return slope, intercept, se, r2


# ---------------------------------------------------------------------------
# quantile regression (IRLS on the check loss)


def quantile_line(y, x, tau=0.5, max_iter=200, smooth=1e-6):
    """(intercept, slope) minimizing the tau check loss."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    keep = np.isfinite(y) & np.isfinite(x)
    y, x = y[keep], x[keep]
    if x.size < 2 or np.ptp(x) == 0:
        raise DomainError("quantile regression needs a varying regressor")
    X = np.column_stack([np.ones_like(x), x])
    beta = np.linalg.lstsq(X, y, rcond=None)[0]
    for _ in range(max_iter):
        r = y - X @ beta
        w = np.where(r >= 0, tau, 1.0 - tau) / np.maximum(np.abs(r), smooth)
        xw = X * w[:, None]
        try:
            new = np.linalg.solve(X.T @ xw, xw.T @ y)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"quantile regression IRLS failed: {exc}")
        if np.max(np.abs(new - beta)) < 1e-10 * max(1.0, np.max(np.abs(beta))):
            beta = new
            break
        beta = new
    return float(beta[0]), float(beta[1])


def quantile_slope(y, x, tau=0.5):
    """Slope of the tau-quantile regression line."""
    y = np.asarray(y, dtype=float)
    if y.size < 100:
        raise SampleSizeError("quantile slope needs at least 100 observations")
    return quantile_line(y, x, tau)[1]


# ---------------------------------------------------------------------------
# sign-split descriptive statistics


@dataclass(frozen=True)
class SignSplitStats:
    pos_moments: tuple  # (mean, sd, skew, kurt) of asinh(x), x > 0
    neg_moments: tuple  # (mean, sd, skew, kurt) of asinh(x), x < 0
    share_pos: float
    share_neg: float


def sign_split_stats(values):
    """Four moments of asinh(values) on each side of zero plus the share of
    observations on each side (zeros excluded from both)."""
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if values.size == 0:
        raise DomainError("sign-split statistics need a nonempty sample")
    s = np.arcsinh(values)
    pos = s[values > 0]
    neg = s[values < 0]
    return SignSplitStats(
        pos_moments=_four_moments(pos),
        neg_moments=_four_moments(neg),
        share_pos=pos.size / values.size,
        share_neg=neg.size / values.size,
    )


# ---------------------------------------------------------------------------
# persistence


def pooled_autocorr(df, variable, min_pairs=100):
    """Pearson correlation over all within-firm consecutive (t-1, t) pairs."""
    x = resolve_variable(df, variable) if isinstance(variable, str) \
        else pd.Series(np.asarray(variable, float), index=df.index)
    work = df[["firm_id", "fiscal_year"]].copy()
    work["_x"] = x
    prev = _lagged(work, "_x")
    m = prev.notna() & x.notna()
    if int(m.sum()) < min_pairs:
        raise SampleSizeError(
            f"pooled autocorrelation needs {min_pairs} pairs, got {int(m.sum())}")
    a = prev[m].to_numpy()
    b = x[m].to_numpy()
    return float(np.corrcoef(a, b)[0, 1])


# ---------------------------------------------------------------------------
# equity returns plumbing


def jitter_prices(price, tick, seed):
    """Undo price discreteness: uniform noise of half a tick on each side."""
    price = np.asarray(price, dtype=float)
    if not np.all(tick > 0):
        raise DomainError("tick must be positive")
    if np.any(price <= tick):
        raise DomainError("price must exceed one tick")
    rng = np.random.default_rng(seed)
    out = rng.uniform(price - tick / 2.0, price + tick / 2.0)
    return float(out) if price.ndim == 0 else out


def rolling_beta_excess(returns, factors, window=252):
    """Factor-model excess returns with betas from trailing windows.

    `returns`: DataFrame with columns (date, ret). `factors`: DataFrame with
    (date, mkt_rf, smb, hml, rf). Returns (result frame, skipped count);
    result columns are date, excess, beta_mkt, beta_smb, beta_hml.
    """
    merged = returns.merge(factors, on="date", how="left", validate="1:1")
    if merged[["mkt_rf", "smb", "hml", "rf"]].isna().any().any():
        missing = merged.loc[merged["mkt_rf"].isna(), "date"].iloc[0]
        raise CoverageError(f"factor series missing return date {missing}")
    merged = merged.sort_values("date", ignore_index=True)
    n = len(merged)
    if n <= window:
        return merged.iloc[0:0].assign(excess=[], beta_mkt=[], beta_smb=[],
                                       beta_hml=[])[
            ["date", "excess", "beta_mkt", "beta_smb", "beta_hml"]], n
    y_all = (merged["ret"] - merged["rf"]).to_numpy()
    f_all = merged[["mkt_rf", "smb", "hml"]].to_numpy()
    rows = []
    for i in range(window, n):
        fw = f_all[i - window:i]
        yw = y_all[i - window:i]
        X = np.column_stack([np.ones(window), fw])
        xtx = X.T @ X
        if np.linalg.cond(xtx) > 1e12:
            raise NumericalError("singular factor matrix in rolling window")
        beta = np.linalg.solve(xtx, X.T @ yw)
        excess = y_all[i] - float(f_all[i] @ beta[1:])
        rows.append((merged["date"].iloc[i], excess, *beta[1:]))
    out = pd.DataFrame(rows, columns=["date", "excess", "beta_mkt",
                                      "beta_smb", "beta_hml"])
    return out, window


# ---------------------------------------------------------------------------
# dynamism


@dataclass
class DynamismStats:
    exit_by_bin: pd.DataFrame
    entry_by_bin: pd.DataFrame
    exit_by_age: pd.DataFrame
    counts_by_age: pd.DataFrame
    forward_percentiles: pd.DataFrame
    pooled_exit_rate: float
    log_count_age_slope: float
    median_scale_age_slope: float
    horizon: int


def dynamism_stats(df, scale_var="scale.KT", nbins=20, horizon=10):
    """Entry/exit and long-run scaling statistics for a derived panel.

    Exit is right-censored: firms present in the final panel year are not
    counted as exits, and final-year observations are not at risk.
    """
    work = df[["firm_id", "fiscal_year"]].copy()
    work["scale"] = resolve_variable(df, scale_var).to_numpy()
    y_min = int(work["fiscal_year"].min())
    y_max = int(work["fiscal_year"].max())
    if horizon >= y_max - y_min + 1:
        raise CoverageError(
            f"horizon {horizon} exceeds the panel span {y_max - y_min}")
    grp = work.groupby("firm_id")
    first = grp["fiscal_year"].transform("min")
    last = grp["fiscal_year"].transform("max")
    work["age"] = work["fiscal_year"] - first
    work["is_exit"] = (work["fiscal_year"] == last) & (work["fiscal_year"] < y_max)
    work["is_entry"] = (work["fiscal_year"] == first) & (work["fiscal_year"] > y_min)
    work["at_risk"] = work["fiscal_year"] < y_max

    at_risk = work[work["at_risk"] & work["scale"].notna()]
    pooled_exit = float(at_risk["is_exit"].mean()) if len(at_risk) else math.nan

    def _by_scale_bin(sub, flag):
        n = len(sub)
        if n < nbins:
            raise SampleSizeError(f"dynamism binning needs {nbins} rows, got {n}")
        order = np.argsort(sub["scale"].to_numpy(), kind="stable")
        rows = []
        for b, idx in enumerate(np.array_split(order, nbins)):
            chunk = sub.iloc[idx]
            rows.append({
                "bin_index": b,
                "scale_median": float(chunk["scale"].median()),
                "count": int(len(chunk)),
                "probability": float(chunk[flag].mean()),
            })
        return pd.DataFrame(rows)

    exit_by_bin = _by_scale_bin(at_risk, "is_exit")
    entered_pool = work[(work["fiscal_year"] > y_min) & work["scale"].notna()]
    entry_by_bin = _by_scale_bin(entered_pool, "is_entry")

    exit_by_age = (at_risk.groupby("age")["is_exit"].agg(["mean", "size"])
                   .reset_index()
                   .rename(columns={"mean": "probability", "size": "count"}))

    counts = (work.groupby("age").size().rename("count").reset_index())
    ages = counts["age"].to_numpy(dtype=float)
    logc = np.log(counts["count"].to_numpy(dtype=float))
    slope, intercept, se, r2 = _ols_line(logc, ages)
    counts["log_count"] = logc
    counts_by_age = counts

    med_slope = quantile_slope(work["scale"].to_numpy(),
                               work["age"].to_numpy(dtype=float), 0.5)

    # forward scale distribution: firms observed again at t + horizon
    fwd = work.merge(
        work[["firm_id", "fiscal_year", "scale"]].assign(
            fiscal_year=lambda d: d["fiscal_year"] - horizon),
        on=["firm_id", "fiscal_year"], suffixes=("", "_fwd"))
    fwd = fwd[fwd["scale"].notna() & fwd["scale_fwd"].notna()]
    rows = []
    if len(fwd) >= nbins:
        order = np.argsort(fwd["scale"].to_numpy(), kind="stable")
        for b, idx in enumerate(np.array_split(order, nbins)):
            chunk = fwd.iloc[idx]
            row = {"bin_index": b,
                   "scale_median": float(chunk["scale"].median()),
                   "count": int(len(chunk))}
            for p in PERCENTILES:
                row[f"p{p}"] = float(np.percentile(chunk["scale_fwd"], p))
            rows.append(row)
    forward = pd.DataFrame(rows)

    return DynamismStats(
        exit_by_bin=exit_by_bin, entry_by_bin=entry_by_bin,
        exit_by_age=exit_by_age, counts_by_age=counts_by_age,
        forward_percentiles=forward, pooled_exit_rate=pooled_exit,
        log_count_age_slope=slope, median_scale_age_slope=med_slope,
        horizon=horizon)
