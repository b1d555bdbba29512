"""Command-line entry point.

    firmfacts <ingest|synth|fit-test|adjust|binscatter|growth|dynamism|report>

Commands are deterministic given their inputs and --seed: reruns produce
byte-identical outputs. Plot rendering is out of scope; commands emit
plot-ready CSV series and JSON reports instead.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import dists, gof, panel as panel_mod, synth as synth_mod, transforms
from .errors import ConfigError, DomainError, FirmFactsError
from .utils import worker_count

SCHEMA_VERSION = 1
_FLOAT_FMT = "%.12g"


# ---------------------------------------------------------------------------
# config and I/O plumbing


@dataclass
class RunConfig:
    command: str
    panel: str | None = None
    deflators: str | None = None
    factors: str | None = None
    subset: str = "good"
    var: str | None = None
    families: tuple = ()
    bins: int = 49
    trim: float = 0.01
    reps: int = 999
    seed: int = 0
    out: str = "."
    basis: str = "KT"
    mode: str = "time"
    transform: str = "t3"
    horizon: int = 10
    firms: int = 1000
    years: int = 30
    config: str | None = None

    def require_inputs(self):
        for name in ("panel", "deflators", "factors"):
            path = getattr(self, name)
            if path is not None and not os.path.exists(path):
                raise ConfigError(f"--{name} file not found: {path}")


def _write_json(path, payload):
    payload = dict(payload)
    payload["schema_version"] = SCHEMA_VERSION
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, frame):
    frame.to_csv(path, index=False, float_format=_FLOAT_FMT)


def _safe(name):
    return name.replace(".", "_")


def _load_store(cfg):
    """Accept either a raw panel CSV (optionally with deflators) or a
    derived store written by `ingest`/`adjust` (detected by its flags)."""
    head = pd.read_csv(cfg.panel, nrows=0)
    if "flag_good" in head.columns:
        frame = pd.read_csv(cfg.panel)
        frame = frame.sort_values(["firm_id", "fiscal_year"], kind="stable",
                                  ignore_index=True)
        return panel_mod.Panel(frame)
    return panel_mod.ingest(cfg.panel, cfg.deflators)


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(cfg):
    cfg.require_inputs()
    if cfg.panel is None:
        raise ConfigError("ingest needs --panel")
    pan = panel_mod.ingest(cfg.panel, cfg.deflators)
    os.makedirs(cfg.out, exist_ok=True)
    _write_csv(os.path.join(cfg.out, "firmyears.csv"), pan.frame)
    _write_json(os.path.join(cfg.out, "ingest_summary.json"), pan.summary)
    s = pan.summary
    print(f"rows {s['rows']} firms {s['firms']} | good rows {s['rows_good']} "
          f"firms {s['firms_good']} | nonbank rows {s['rows_nonbank']} "
          f"firms {s['firms_nonbank']}")
    return 0


def cmd_synth(cfg):
    kwargs = {"n_firms": cfg.firms, "n_years": cfg.years, "seed": cfg.seed}
    if cfg.config:
        if not os.path.exists(cfg.config):
            raise ConfigError(f"--config file not found: {cfg.config}")
        with open(cfg.config) as fh:
            kwargs.update(json.load(fh))
    scfg = synth_mod.SynthConfig(**kwargs)
    frame, truth = synth_mod.generate_panel(scfg)
    os.makedirs(cfg.out, exist_ok=True)
    _write_csv(os.path.join(cfg.out, "panel.csv"), frame)
    _write_csv(os.path.join(cfg.out, "deflators.csv"),
               synth_mod.flat_deflators(frame["fiscal_year"]))
    _write_json(os.path.join(cfg.out, "truth.json"), truth)
    print(f"synthetic panel: {len(frame)} rows, "
          f"{frame['firm_id'].nunique()} firms -> {cfg.out}")
    return 0


def cmd_fit_test(cfg):
    cfg.require_inputs()
    if cfg.panel is None or cfg.var is None:
        raise ConfigError("fit-test needs --panel and --var")
    if not cfg.families:
        raise ConfigError("fit-test needs --families")
    pan = _load_store(cfg)
    values = pan.variable(cfg.var, cfg.subset).dropna().to_numpy()
    if values.size == 0:
        raise DomainError(f"variable {cfg.var!r} has no valid observations")
    families = [dists.Family.parse(f) for f in cfg.families]
    workers = worker_count()

    reports, fits = {}, {}
    for fam in families:
        fit = dists.fit_mle(fam, values)
        fits[fam] = fit
        rep = gof.bootstrap_report(values, fam, reps=cfg.reps, seed=cfg.seed,
                                   workers=workers, fit=fit)
        reports[fam] = rep
    payload = {
        "variable": cfg.var,
        "subset": cfg.subset,
        "n": int(values.size),
        "reps": cfg.reps,
        "seed": cfg.seed,
        "families": {fam.value: {**reports[fam].as_dict(),
                                 "loglik": fits[fam].loglik,
                                 "converged": fits[fam].converged}
                     for fam in families},
    }
    if len(families) >= 2:
        comparison = gof.compare_models(values, families, fits=fits)
        payload["comparison"] = comparison.as_dict()
    os.makedirs(cfg.out, exist_ok=True)
    stem = f"{_safe(cfg.var)}_{cfg.subset}"
    _write_json(os.path.join(cfg.out, f"fit_{stem}.json"), payload)

    _write_csv(os.path.join(cfg.out, f"hist_{stem}.csv"),
               _histogram_frame(values, fits))
    _write_csv(os.path.join(cfg.out, f"qq_{stem}.csv"),
               _qq_frame(values, fits))
    for fam in families:
        r = reports[fam]
        pv = (f"p=({r.pvalue_ks:.3f},{r.pvalue_chi2:.3f},{r.pvalue_ad:.3f})"
              if r.pvalue_ks is not None else "p-values skipped")
        print(f"{cfg.var} [{cfg.subset}] vs {fam.value}: "
              f"ks={r.statistic_ks:.4f} chi2={r.statistic_chi2:.1f} "
              f"ad={r.statistic_ad:.3f} {pv}")
    return 0


def _histogram_frame(values, fits, nbins=60):
    s = np.arcsinh(values)
    edges_s = np.linspace(s.min(), s.max(), nbins + 1)
    counts, _ = np.histogram(s, bins=edges_s)
    centers = np.sinh(0.5 * (edges_s[:-1] + edges_s[1:]))
    frame = pd.DataFrame({
        "left": np.sinh(edges_s[:-1]), "right": np.sinh(edges_s[1:]),
        "center": centers, "count": counts,
    })
    for fam, fit in fits.items():
        frame[f"density_{fam.value}"] = dists.pdf(fit.params, centers)
    return frame


def _qq_frame(values, fits, npoints=99):
    probs = (np.arange(1, npoints + 1)) / (npoints + 1)
    frame = pd.DataFrame({
        "prob": probs,
        "empirical": np.quantile(values, probs),
    })
    for fam, fit in fits.items():
        frame[f"fitted_{fam.value}"] = dists.quantile(fit.params, probs)
    return frame


_TRANSFORMS = {
    "t1": transforms.t1_standardize,
    "t2": transforms.t2_reflate,
    "t3": transforms.t3_robust_reflate,
    "t4": transforms.t4_size_domain,
    "t5": transforms.t5_signed_adjust,
}


def cmd_adjust(cfg):
    cfg.require_inputs()
    if cfg.panel is None or cfg.var is None:
        raise ConfigError("adjust needs --panel and --var")
    pan = _load_store(cfg)
    frame = pan.frame
    values = panel_mod.resolve_variable(frame, cfg.var)
    adjusted = values.to_numpy(dtype=float).copy()
    valid = np.isfinite(adjusted)
    anchors_payload = {"variable": cfg.var, "mode": cfg.mode}

    if cfg.mode in ("time", "both"):
        fn = _TRANSFORMS[cfg.transform]
        years = frame["fiscal_year"].to_numpy()
        adjusted[valid] = fn(adjusted[valid], years[valid])
        per_year = {}
        for y in np.unique(years[valid]):
            sub = adjusted[valid & (years == y)]
            per_year[int(y)] = {"median": float(np.median(sub)),
                                "iqr": float(np.subtract(
                                    *np.percentile(sub, [75, 25])))}
        anchors_payload["time"] = {"transform": cfg.transform,
                                   "per_year_after": per_year}
    if cfg.mode in ("scale", "both"):
        try:
            lag_s = panel_mod.lagged_scale(frame, cfg.basis).to_numpy()
        except DomainError as exc:
            raise ConfigError(f"basis variable {cfg.basis!r}: {exc}")
        both = valid & np.isfinite(lag_s)
        anchors = transforms.estimate_scale_anchors(
            adjusted[both], lag_s[both], nbins=cfg.bins, trim=cfg.trim)
        adjusted[both] = transforms.t7_scale_adjust(
            adjusted[both], lag_s[both], anchors)
        adjusted[valid & ~np.isfinite(lag_s)] = np.nan
        anchors_payload["scale"] = {"basis": cfg.basis, **anchors.as_dict()}
    if cfg.mode not in ("time", "scale", "both"):
        raise ConfigError(f"unknown adjust mode {cfg.mode!r}")

    out_frame = frame.copy()
    out_frame[f"adj_{_safe(cfg.var)}"] = adjusted
    os.makedirs(cfg.out, exist_ok=True)
    _write_csv(os.path.join(cfg.out, "firmyears.csv"), out_frame)
    _write_json(os.path.join(cfg.out, f"anchors_{_safe(cfg.var)}.json"),
                anchors_payload)
    print(f"adjusted column adj_{_safe(cfg.var)} ({cfg.mode}) -> {cfg.out}")
    return 0


def cmd_binscatter(cfg):
    cfg.require_inputs()
    if cfg.panel is None or cfg.var is None:
        raise ConfigError("binscatter needs --panel and --var")
    pan = _load_store(cfg)
    sub = pan.subset(cfg.subset)
    values = panel_mod.resolve_variable(sub, cfg.var).to_numpy(dtype=float)
    basis = cfg.basis if "." in cfg.basis else f"scale.{cfg.basis}"
    scale = panel_mod.resolve_variable(sub, basis).to_numpy(dtype=float)
    stats = panel_mod.binscatter(values, scale, nbins=cfg.bins, trim=cfg.trim)
    rows = []
    for b in stats:
        row = {"bin_index": b.bin_index, "scale_low": b.scale_low,
               "scale_high": b.scale_high, "scale_median": b.scale_median,
               "count": b.count, "mean": b.mean, "iqr": b.iqr,
               "skewness": b.skewness}
        for p, v in b.percentiles.items():
            row[f"p{p}"] = v
        rows.append(row)
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out,
                        f"binscatter_{_safe(cfg.var)}_by_{_safe(basis)}.csv")
    _write_csv(path, pd.DataFrame(rows))
    print(f"{len(stats)} bins -> {path}")
    return 0


def cmd_growth(cfg):
    cfg.require_inputs()
    if cfg.panel is None or cfg.var is None:
        raise ConfigError("growth needs --panel and --var")
    pan = _load_store(cfg)
    sub = pan.subset(cfg.subset)
    values = panel_mod.resolve_variable(sub, cfg.var)
    years = sub["fiscal_year"]
    valid = values.notna()
    rows = []
    for y in sorted(years[valid].unique()):
        v = values[valid & (years == y)].to_numpy()
        q25, q50, q75 = np.percentile(v, [25, 50, 75])
        rows.append({"fiscal_year": int(y), "count": int(v.size),
                     "p25": q25, "p50": q50, "p75": q75})
    v = values[valid].to_numpy()
    mean, sd, skew, kurt = panel_mod._four_moments(v)
    summary = {
        "variable": cfg.var, "subset": cfg.subset, "n": int(v.size),
        "mean": mean, "sd": sd, "skewness": skew, "kurtosis": kurt,
        "median": float(np.median(v)),
        "iqr": float(np.subtract(*np.percentile(v, [75, 25]))),
    }
    try:
        summary["persistence"] = panel_mod.pooled_autocorr(sub, cfg.var)
    except FirmFactsError:
        summary["persistence"] = None
    os.makedirs(cfg.out, exist_ok=True)
    stem = _safe(cfg.var)
    _write_csv(os.path.join(cfg.out, f"growth_{stem}_by_year.csv"),
               pd.DataFrame(rows))
    _write_json(os.path.join(cfg.out, f"growth_{stem}_summary.json"), summary)
    print(f"{cfg.var} [{cfg.subset}]: n={summary['n']} mean={mean:.4f} "
          f"median={summary['median']:.4f}")
    return 0


def cmd_dynamism(cfg):
    cfg.require_inputs()
    if cfg.panel is None:
        raise ConfigError("dynamism needs --panel")
    pan = _load_store(cfg)
    sub = pan.subset(cfg.subset)
    basis = cfg.basis if "." in cfg.basis else f"scale.{cfg.basis}"
    dyn = panel_mod.dynamism_stats(sub, scale_var=basis, horizon=cfg.horizon)
    os.makedirs(cfg.out, exist_ok=True)
    _write_csv(os.path.join(cfg.out, "dynamism_exit_by_bin.csv"),
               dyn.exit_by_bin)
    _write_csv(os.path.join(cfg.out, "dynamism_entry_by_bin.csv"),
               dyn.entry_by_bin)
    _write_csv(os.path.join(cfg.out, "dynamism_exit_by_age.csv"),
               dyn.exit_by_age)
    _write_csv(os.path.join(cfg.out, "dynamism_counts_by_age.csv"),
               dyn.counts_by_age)
    _write_csv(os.path.join(cfg.out, "dynamism_forward_percentiles.csv"),
               dyn.forward_percentiles)
    _write_json(os.path.join(cfg.out, "dynamism_summary.json"), {
        "subset": cfg.subset, "basis": basis, "horizon": dyn.horizon,
        "pooled_exit_rate": dyn.pooled_exit_rate,
        "log_count_age_slope": dyn.log_count_age_slope,
        "median_scale_age_slope": dyn.median_scale_age_slope,
    })
    print(f"pooled exit rate {dyn.pooled_exit_rate:.4f}, "
          f"log-count-age slope {dyn.log_count_age_slope:.4f}, "
          f"median scale-age slope {dyn.median_scale_age_slope:.4f}")
    return 0


def cmd_report(cfg):
    out = cfg.out
    if not os.path.isdir(out):
        raise ConfigError(f"report needs an existing --out directory: {out}")
    collected = {}
    for name in sorted(os.listdir(out)):
        if name.endswith(".json") and name != "report.json":
            with open(os.path.join(out, name)) as fh:
                collected[name] = json.load(fh)
    _write_json(os.path.join(out, "report.json"), {"artifacts": collected})
    print(f"report.json aggregates {len(collected)} artifacts")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="firmfacts",
        description="Firm-panel distribution fitting and analysis toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, *, var=False, families=False):
        p.add_argument("--panel")
        p.add_argument("--deflators")
        p.add_argument("--factors")
        p.add_argument("--subset", default="good",
                       choices=["all", "good", "nonbank"])
        if var:
            p.add_argument("--var")
        if families:
            p.add_argument("--families", default="")
        p.add_argument("--bins", type=int, default=49)
        p.add_argument("--trim", type=float, default=0.01)
        p.add_argument("--reps", type=int, default=999)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=".")

    common(sub.add_parser("ingest", help="validate and derive a panel"))
    p = sub.add_parser("synth", help="generate a synthetic panel")
    common(p)
    p.add_argument("--firms", type=int, default=1000)
    p.add_argument("--years", type=int, default=30)
    p.add_argument("--config", help="JSON file of generator settings")
    p = sub.add_parser("fit-test", help="fit families and run the GoF battery")
    common(p, var=True, families=True)
    p = sub.add_parser("adjust", help="append an adjusted column")
    common(p, var=True)
    p.add_argument("--mode", default="time", choices=["time", "scale", "both"])
    p.add_argument("--transform", default="t3",
                   choices=sorted(_TRANSFORMS))
    p.add_argument("--basis", default="KT")
    p = sub.add_parser("binscatter", help="binned percentiles by scale")
    common(p, var=True)
    p.add_argument("--basis", default="KT")
    p = sub.add_parser("growth", help="growth series summary")
    common(p, var=True)
    p = sub.add_parser("dynamism", help="entry/exit and scaling dynamics")
    common(p)
    p.add_argument("--basis", default="KT")
    p.add_argument("--horizon", type=int, default=10)
    p = sub.add_parser("report", help="aggregate JSON artifacts")
    p.add_argument("--out", default=".")
    return ap


_HANDLERS = {
    "ingest": cmd_ingest, "synth": cmd_synth, "fit-test": cmd_fit_test,
    "adjust": cmd_adjust, "binscatter": cmd_binscatter, "growth": cmd_growth,
    "dynamism": cmd_dynamism, "report": cmd_report,
}


def main(argv=None):
    ap = _build_parser()
    ns = ap.parse_args(argv)
    cfg = RunConfig(command=ns.command)
    for field_name in vars(ns):
        if field_name == "families":
            fams = [f for f in ns.families.split(",") if f.strip()]
            cfg.families = tuple(fams)
        elif hasattr(cfg, field_name):
            val = getattr(ns, field_name)
            if val is not None:
                setattr(cfg, field_name, val)
    try:
        return _HANDLERS[ns.command](cfg)
    except FirmFactsError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
