"""Synthetic firm-panel generator with planted, recoverable parameters.

Construction guarantees, by design:

- firm scale anchors are skew-Normal; the within-firm AR(1) deviation starts
  from its stationary law, so the pooled scale variance is analytic;
- growth innovations scale like exp(gamma * (anchor - center)), planting the
  log-IQR-versus-scale slope at exactly gamma;
- income equals size times a fixed difference-of-log-Normals draw, so income
  intensity (income / total capital) follows that law exactly and income
  location moves one-for-one with scale;
- accounting items are backed out of the planted income so that
  sales - expenses = income = dividends + investment holds row by row;
- exit applies a per-year hazard, entry draws anchors shifted down half a
  log-unit; everything is deterministic given the seed, with per-firm
  substreams derived from (seed, firm index).

Analytic truth fields assume entry_rate = 0 where noted.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd
from scipy.stats import norm as _norm

from .errors import ConfigError
from .panel import RAW_COLUMNS


@dataclass(frozen=True)
class SynthConfig:
    n_firms: int = 1000
    n_years: int = 30
    # skew-Normal scale anchors; defaults give mean 6.5, s.d. 2.1, skew 0.3
    scale_xi: float = 4.63
    scale_omega: float = 2.81
    scale_alpha: float = 1.51
    # within-firm AR(1) deviations and the growth-dispersion exponent
    rho: float = 0.5
    sigma_g: float = 0.25
    gamma: float = -0.13
    scale_drift: float = 0.0
    # dynamism
    hazard: float = 0.0
    hazard_scale_coef: float = 0.0
    entry_rate: float = 0.0
    entry_shift: float = -0.5
    # income intensity: DLN(mu_p0, sigma_p, mu_n0, sigma_n), location tied
    # one-for-one to scale
    mu_p0: float = -1.6
    sigma_p: float = 0.6
    mu_n0: float = -2.6
    sigma_n: float = 0.8
    # accounting structure
    sales_level: float = 1.0
    sales_noise: float = 0.05
    kp_share: float = 0.3
    debt_share: float = 0.5
    dp_rate: float = 0.1
    interest_rate: float = 0.04
    eq_noise: float = 0.1
    rd_share: float = 0.4
    rd_intensity: float = 0.08
    seed: int = 0

    def __post_init__(self):
        if self.n_firms < 1 or self.n_years < 1:
            raise ConfigError("n_firms and n_years must be >= 1")
        for name in ("scale_omega", "sigma_p", "sigma_n"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.sigma_g < 0:
            raise ConfigError("sigma_g must be >= 0")
        if not 0.0 <= self.hazard < 1.0:
            raise ConfigError("hazard must be in [0, 1)")
        if abs(self.rho) > 1.0:
            raise ConfigError("|rho| must be <= 1")
        if self.entry_rate < 0:
            raise ConfigError("entry_rate must be >= 0")


def _skew_normal_moments(omega, alpha):
    delta = alpha / math.sqrt(1.0 + alpha * alpha)
    db = delta * math.sqrt(2.0 / math.pi)
    return db, omega * math.sqrt(max(1.0 - db * db, 1e-12))


def planted_truth(cfg: SynthConfig) -> dict:
    """Every planted parameter plus the analytic targets they imply."""
    truth = asdict(cfg)
    db, sn_sd = _skew_normal_moments(cfg.scale_omega, cfg.scale_alpha)
    sn_mean = cfg.scale_xi + cfg.scale_omega * db
    center = sn_mean
    # E[exp(2 gamma (a - center))] from the skew-Normal MGF
    t = 2.0 * cfg.gamma
    delta = cfg.scale_alpha / math.sqrt(1.0 + cfg.scale_alpha ** 2)
    mgf = 2.0 * math.exp(cfg.scale_xi * t + 0.5 * (cfg.scale_omega * t) ** 2) \
        * _norm.cdf(delta * cfg.scale_omega * t)
    e2g = mgf * math.exp(-t * center)
    var_u = (cfg.sigma_g ** 2) * e2g / max(1.0 - cfg.rho ** 2, 1e-12) \
        if abs(cfg.rho) < 1.0 else math.nan
    truth.update({
        "scale_mean": sn_mean,
        "scale_sd": math.sqrt(sn_sd ** 2 + var_u)
        if math.isfinite(var_u) else math.nan,  # valid for entry_rate = 0
        "scale_center": center,
        "dispersion_slope": cfg.gamma,
        "income_scaling_slope": 1.0,
        "pooled_exit_rate": cfg.hazard,
        "log_count_age_slope": math.log(1.0 - cfg.hazard)
        if cfg.hazard > 0 else 0.0,
        "median_scale_age_slope": cfg.scale_drift,
        "income_share_positive": float(_norm.cdf(
            (cfg.mu_p0 - cfg.mu_n0)
            / math.sqrt(cfg.sigma_p ** 2 + cfg.sigma_n ** 2))),
    })
    return truth


def _sample_skew_normal(rng, xi, omega, alpha, size):
    delta = alpha / math.sqrt(1.0 + alpha * alpha)
    u0 = rng.normal(size=size)
    u1 = rng.normal(size=size)
    z = delta * np.abs(u0) + math.sqrt(1.0 - delta * delta) * u1
    return xi + omega * z


def _firm_sic(idx):
    if idx % 10 == 0:
        return 6020          # financial
    if idx % 20 == 1:
        return 4911          # utility
    return 2800 + (idx * 37) % 1200


def _firm_rows(cfg, firm_idx, entry_year, center, years):
    """Simulate one firm; returns a list of raw-record dicts."""
    rng = np.random.default_rng((cfg.seed & 0xFFFFFFFF, firm_idx))
    a = float(_sample_skew_normal(rng, cfg.scale_xi, cfg.scale_omega,
                                  cfg.scale_alpha, 1)[0])
    if entry_year > years[0]:
        a += cfg.entry_shift
    sig_f = cfg.sigma_g * math.exp(cfg.gamma * (a - center))
    if abs(cfg.rho) < 1.0 and cfg.sigma_g > 0:
        u = float(rng.normal(0.0, sig_f / math.sqrt(1.0 - cfg.rho ** 2)))
    else:
        u = 0.0
    rows = []
    rd_performer = (firm_idx % 100) < int(round(cfg.rd_share * 100))
    prev = None
    for age, year in enumerate(y for y in years if y >= entry_year):
        if age > 0:
            u = cfg.rho * u + float(rng.normal(0.0, sig_f))
        s = a + cfg.scale_drift * age + u
        size = math.exp(s)
        at = size
        kp = cfg.kp_share * at
        db = cfg.debt_share * at
        dp = cfg.dp_rate * kp
        eq = at * math.exp(cfg.eq_noise * float(rng.normal()))
        sl = cfg.sales_level * at * math.exp(
            cfg.sales_noise * float(rng.normal()))
        # income intensity is an exact DLN draw; income scales with size
        yp = math.exp(cfg.mu_p0 + cfg.sigma_p * float(rng.normal()))
        yn = math.exp(cfg.mu_n0 + cfg.sigma_n * float(rng.normal()))
        cf = size * (yp - yn)
        rec = {
            "firm_id": f"F{firm_idx:06d}", "fiscal_year": year,
            "mve": eq, "lt": db, "ppent": kp, "at": at, "dp": dp, "sl": sl,
            "aqc": 0.0, "sic": _firm_sic(firm_idx),
        }
        if prev is None:
            rec.update({"xint": cfg.interest_rate * db, "capx": dp,
                        "sppe": 0.0, "dvt": 0.0, "prstkc": 0.0, "sstk": 0.0})
        else:
            xint = cfg.interest_rate * prev["lt"]
            dd = xint + (prev["lt"] - db)
            it = at - prev["at"] + dp
            de = cf - it - dd
            ip = kp - prev["ppent"] + dp
            rec.update({
                "xint": xint,
                "dvt": max(de, 0.0), "prstkc": 0.0, "sstk": max(-de, 0.0),
                "capx": max(ip, 0.0), "sppe": max(-ip, 0.0),
            })
        xs = sl - cf
        xa = max(0.97 * xs, 0.0)
        rec.update({"cogs": 0.70 * xa, "xsga": 0.25 * xa, "txt": 0.05 * xa})
        rec["xrd"] = cfg.rd_intensity * at * math.exp(
            0.3 * float(rng.normal())) if rd_performer else None
        rows.append(rec)
        prev = rec
        # exit decision for the transition out of this year
        h = cfg.hazard + cfg.hazard_scale_coef * (s - center)
        h = min(max(h, 0.0), 0.95)
        if h > 0.0 and float(rng.uniform()) < h:
            break
    return rows


def generate_panel(cfg: SynthConfig):
    """(raw panel frame in the RawFirmYear schema, planted truth dict)."""
    truth = planted_truth(cfg)
    center = truth["scale_center"]
    years = list(range(2019 - cfg.n_years + 1, 2020))
    rows = []
    firm_idx = 0
    for _ in range(cfg.n_firms):
        rows.extend(_firm_rows(cfg, firm_idx, years[0], center, years))
        firm_idx += 1
    n_entrants = int(round(cfg.entry_rate * cfg.n_firms))
    for year in years[1:]:
        for _ in range(n_entrants):
            rows.extend(_firm_rows(cfg, firm_idx, year, center, years))
            firm_idx += 1
    df = pd.DataFrame(rows)
    for col in RAW_COLUMNS:
        if col not in df.columns:
            df[col] = None
    df = df[RAW_COLUMNS].sort_values(["firm_id", "fiscal_year"],
                                     ignore_index=True)
    return df, truth


def flat_deflators(years):
    """Unit deflator series covering the panel years plus the base year."""
    lo = min(int(min(years)), 2019)
    yrs = list(range(lo, 2020))
    return pd.DataFrame({"year": yrs, "nominal_gdp": [1.0] * len(yrs),
                         "gdp_deflator": [1.0] * len(yrs)})
