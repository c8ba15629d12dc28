"""Command-line front end.

Subcommands: ``analytic`` (closed-form AR(1) gain surface), ``montecarlo``
(simulation studies from a JSON config), ``fit-copula`` (estimate the
copula matrix from a forecast archive), ``transform`` (joint draws mapped
to a target-frequency density), and ``score`` (score tables plus
equal-predictive-ability and PIT-uniformity tests).

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error.
All randomness flows from --seed through named substreams; every output
directory gets a manifest recording the inputs. File writes are atomic
(write to a temp file in the same directory, then rename).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__, analytic, mc, scoring
from .archive import load_archive
from .copula import (
    CorrelationMatrix,
    corr_from_json,
    corr_to_json,
    fit_copula,
    PitPanel,
    sample_joint,
)
from .errors import DataError, EstimationError, FitError, HorizonFuseError, NumericalError
from .transform import apply_transform, spec_from_json

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


# ---------------------------------------------------------------------------
# Output helpers

def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_df(path: Path, df: pd.DataFrame):
    _atomic_write(path, df.to_csv(index=False))


def _write_manifest(out: Path, command: str, params: dict):
    import scipy

    manifest = {
        "command": command,
        "params": params,
        "versions": {
            "horizon_fuse": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
        },
    }
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")


def _resolve_jobs(args) -> int:
    if getattr(args, "jobs", None) is not None:
        return max(int(args.jobs), 1)
    env = os.environ.get("HORIZON_FUSE_JOBS")
    return max(int(env), 1) if env else 1


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip() != ""]


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip() != ""]


# ---------------------------------------------------------------------------
# analytic

def cmd_analytic(args) -> int:
    rho_grid = _float_list(args.rho_grid)
    h_grid = _int_list(args.h_grid)
    if not rho_grid or not h_grid:
        raise UsageError("empty rho or h grid")
    if any(not -1 < r < 1 for r in rho_grid):
        raise UsageError("rho values must lie in (-1, 1)")
    out = Path(args.out)

    def surface_df(rhos):
        pts = analytic.gain_surface(rhos, h_grid, n_rep=args.draws, seed=args.seed)
        return pd.DataFrame([{
            "rho": p.rho, "h": p.h, "crps_gain_pct": p.crps_gain_pct,
            "qwcrps_gain_pct": p.qwcrps_gain_pct, "qs10_gain_pct": p.qs10_gain_pct,
        } for p in pts])

    _write_df(out / "gain_surface.csv", surface_df(rho_grid))
    _write_df(out / "gain_surface_negative.csv",
              surface_df([-abs(r) for r in rho_grid]))
    _write_manifest(out, "analytic", {
        "rho_grid": rho_grid, "h_grid": h_grid,
        "draws": args.draws, "seed": args.seed,
    })
    return EXIT_OK


# ---------------------------------------------------------------------------
# montecarlo

_CONFIG_KEYS = {
    "seed", "theta1_grid", "shock_family", "t_is", "t_r", "t_oos", "horizons",
    "annual_years", "n_draws", "iterations", "approaches", "studies",
    "t_is_grid", "t_r_grid", "robustness_theta1",
}


def _load_mc_config(path, seed_override=None):
    with open(path) as fh:
        raw = json.load(fh)
    unknown = sorted(set(raw) - _CONFIG_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    if "approaches" in raw and not raw["approaches"]:
        raise UsageError("approach list must be non-empty")
    if seed_override is not None:
        raw["seed"] = seed_override
    return raw


def _base_cfg(raw, theta1):
    kwargs = {k: raw[k] for k in
              ("shock_family", "t_is", "t_r", "t_oos", "horizons",
               "n_draws", "iterations", "seed") if k in raw}
    if "annual_years" in raw:
        kwargs["annual_years"] = tuple(raw["annual_years"])
    if "approaches" in raw:
        kwargs["approaches"] = tuple(raw["approaches"])
    return mc.ExperimentConfig(theta1=theta1, **kwargs)


def cmd_montecarlo(args) -> int:
    raw = _load_mc_config(args.config, seed_override=args.seed)
    jobs = _resolve_jobs(args)
    out = Path(args.out)
    theta_grid = raw.get("theta1_grid", [0.1, 0.4, 0.7])
    studies = raw.get("studies", ["main"])

    if "main" in studies:
        ratios, epa, pit, dets = [], [], [], []
        for theta1 in theta_grid:
            cfg = _base_cfg(raw, theta1)
            res = mc.run_mc_study(cfg, jobs=jobs)
            ratios.append(res.ratio_summary("copula", "benchmark").assign(theta1=theta1))
            epa.append(res.rejection_summary("epa").assign(theta1=theta1))
            pit.append(res.rejection_summary("pit").assign(theta1=theta1))
            dets.append(res.det_r.assign(theta1_cfg=theta1))
        _write_df(out / "score_ratios.csv", pd.concat(ratios, ignore_index=True))
        _write_df(out / "epa_rejections.csv", pd.concat(epa, ignore_index=True))
        _write_df(out / "pit_rejections.csv", pd.concat(pit, ignore_index=True))
        _write_df(out / "det_r.csv", pd.concat(dets, ignore_index=True))

    if "robustness" in studies:
        cfg = _base_cfg(raw, raw.get("robustness_theta1", 0.4))
        table = mc.run_robustness_grid(
            cfg, t_is_grid=tuple(raw.get("t_is_grid", (100, 200, 400))),
            t_r_grid=tuple(raw.get("t_r_grid", (25, 50, 100, 200))), jobs=jobs)
        _write_df(out / "robustness.csv", table)

    if "detr" in studies:
        cfg = _base_cfg(raw, theta_grid[0])
        per_iter, binned = mc.run_detR_experiment(cfg, jobs=jobs)
        _write_df(out / "det_iterations.csv", per_iter)
        _write_df(out / "det_bins.csv", binned)

    if "alternative" in studies:
        tables = []
        for theta1 in theta_grid:
            cfg = _base_cfg(raw, theta1)
            tables.append(mc.run_alternative_regression(cfg, jobs=jobs)
                          .assign(theta1=theta1))
        _write_df(out / "alternative_ratios.csv",
                  pd.concat(tables, ignore_index=True))

    _write_manifest(out, "montecarlo", {"config": raw, "jobs": jobs})
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit-copula

def cmd_fit_copula(args) -> int:
    arch = load_archive(args.archive)
    origins = arch.origins
    if args.train_origins is not None:
        origins = origins[: args.train_origins]
    pits = arch.pit_matrix(origins=origins)
    panel = PitPanel(pits)
    r_hat = fit_copula(panel, method=args.method)
    out = Path(args.out)
    _atomic_write(out / "copula.json", corr_to_json(r_hat) + "\n")
    panel_df = pd.DataFrame(
        pits, columns=[f"h{j + 1}" for j in range(panel.n_horizons)])
    panel_df.insert(0, "origin", origins)
    _write_df(out / "pit_panel.csv", panel_df)
    _write_manifest(out, "fit-copula", {
        "archive": str(args.archive), "train_origins": len(origins),
        "method": args.method, "det_r": r_hat.determinant(),
    })
    return EXIT_OK


# ---------------------------------------------------------------------------
# transform

def cmd_transform(args) -> int:
    arch = load_archive(args.archive)
    with open(args.spec) as fh:
        spec = spec_from_json(fh.read())
    if args.copula == "identity":
        r = CorrelationMatrix(np.eye(spec.horizon))
    else:
        with open(args.copula) as fh:
            r = corr_from_json(fh.read())
    if r.dim != spec.horizon:
        raise DataError(
            f"copula dimension {r.dim} != transform horizon {spec.horizon}")
    available = arch.horizons
    if any(h not in available for h in range(1, spec.horizon + 1)):
        raise DataError(
            f"archive horizons {available} do not cover 1..{spec.horizon}")
    history = np.array(_float_list(args.history)) if args.history else None

    all_origins = arch.origins
    origins = all_origins if args.origin == "all" else [args.origin]
    draw_rows, summary_rows = [], []
    for origin in origins:
        if origin not in all_origins:
            raise DataError(f"origin {origin!r} not in archive")
        marginals = arch.marginals(origin, horizons=range(1, spec.horizon + 1))
        seed = np.random.SeedSequence(
            entropy=args.seed, spawn_key=(all_origins.index(origin),))
        joint = sample_joint(marginals, r, args.draws, seed=seed)
        z = apply_transform(joint, spec, history=history)
        draw_rows.append([origin] + [repr(float(v)) for v in z])
        q = np.quantile(z, scoring.DEFAULT_LEVELS)
        summary_rows.append({"origin": origin, "mean": z.mean(),
                             "sd": z.std(ddof=1) if len(z) > 1 else 0.0,
                             **{f"q{int(100 * l):02d}": v
                                for l, v in zip(scoring.DEFAULT_LEVELS, q)}})

    out = Path(args.out)
    header = "origin," + ",".join(f"d{i + 1}" for i in range(args.draws))
    lines = [header] + [",".join(map(str, row)) for row in draw_rows]
    _atomic_write(out / "draws.csv", "\n".join(lines) + "\n")
    _write_df(out / "summary.csv", pd.DataFrame(summary_rows))
    _write_manifest(out, "transform", {
        "archive": str(args.archive), "copula": str(args.copula),
        "spec": spec.label, "origins": origins if len(origins) < 50 else len(origins),
        "draws": args.draws, "seed": args.seed,
    })
    return EXIT_OK


# ---------------------------------------------------------------------------
# score

def _read_draws_csv(path):
    df = pd.read_csv(path)
    if df.columns[0] != "origin":
        raise DataError(f"{path}: first column must be 'origin'")
    return {str(row.iloc[0]): row.iloc[1:].to_numpy(dtype=float)
            for _, row in df.iterrows()}


def cmd_score(args) -> int:
    metrics = [m.strip() for m in args.metrics.split(",")]
    bad = sorted(set(metrics) - set(mc.METRICS))
    if bad:
        raise UsageError(f"unknown metrics: {', '.join(bad)}")

    reals = pd.read_csv(args.realizations)
    if list(reals.columns[:2]) != ["origin", "value"]:
        raise DataError("realizations file needs columns origin,value")
    realized = {str(o): float(v) for o, v in zip(reals.origin, reals.value)}

    methods = {}
    for path in args.forecasts:
        name = Path(path).stem
        methods[name] = _read_draws_csv(path)
        missing = sorted(set(realized) - set(methods[name]))
        if missing:
            raise DataError(
                f"method {name!r} misses origins: {', '.join(missing[:5])}")

    origins = [o for o in realized]
    score_rows, losses, pits = [], {}, {}
    for name, draw_map in methods.items():
        for origin in origins:
            z = draw_map[origin]
            y = realized[origin]
            sc = mc._score_draws(z, y)
            for m in metrics:
                score_rows.append({"origin": origin, "method": name,
                                   "horizon": args.horizon, "metric": m,
                                   "value": sc[m]})
                losses.setdefault((name, m), []).append(sc[m])
            pits.setdefault(name, []).append(float(np.mean(z <= y)))

    out = Path(args.out)
    _write_df(out / "scores.csv", pd.DataFrame(score_rows))

    names = list(methods)
    epa_rows = []
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            for m in metrics:
                res = scoring.epa_test(losses[(a, m)], losses[(b, m)],
                                       hac_bandwidth=args.bandwidth)
                la, lb = np.mean(losses[(a, m)]), np.mean(losses[(b, m)])
                epa_rows.append({
                    "method_a": a, "method_b": b, "metric": m,
                    "statistic": res.statistic, "p_value": res.p_value,
                    "mean_loss_a": float(la), "mean_loss_b": float(lb),
                    "ratio_a_over_b": float(la / lb) if lb else float("nan"),
                })
    pit_rows = []
    for name in names:
        stat, crit, reject = scoring.pit_uniformity_test(
            np.asarray(pits[name]), h=max(args.horizon, 1))
        pit_rows.append({"method": name, "statistic": stat,
                         "crit_05": crit[0.05], "reject_05": bool(reject[0.05])})
    _atomic_write(out / "tests.json",
                  json.dumps({"epa": epa_rows, "pit": pit_rows}, indent=2) + "\n")
    _write_manifest(out, "score", {
        "forecasts": [str(p) for p in args.forecasts],
        "realizations": str(args.realizations), "metrics": metrics,
        "bandwidth": args.bandwidth, "horizon": args.horizon,
    })
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser and entry point

class UsageError(HorizonFuseError):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="horizon-fuse",
        description="Fuse direct multi-horizon density forecasts via a "
                    "Gaussian copula and transform them to target frequencies.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analytic", help="closed-form AR(1) gain surface")
    pa.add_argument("--rho-grid", default="0.2,0.4,0.6,0.8")
    pa.add_argument("--h-grid", default="4,8,12")
    pa.add_argument("--draws", type=int, default=100_000)
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--out", required=True)
    pa.set_defaults(func=cmd_analytic)

    pm = sub.add_parser("montecarlo", help="simulation studies from a config")
    pm.add_argument("--config", required=True)
    pm.add_argument("--out", required=True)
    pm.add_argument("--seed", type=int, default=None,
                    help="override the config seed")
    pm.add_argument("--jobs", type=int, default=None)
    pm.set_defaults(func=cmd_montecarlo)

    pf = sub.add_parser("fit-copula", help="estimate the copula from an archive")
    pf.add_argument("--archive", required=True)
    pf.add_argument("--out", required=True)
    pf.add_argument("--train-origins", type=int, default=None)
    pf.add_argument("--method", default="spearman",
                    choices=("spearman", "pearson_normal_scores"))
    pf.set_defaults(func=cmd_fit_copula)

    pt = sub.add_parser("transform", help="joint draws to a target density")
    pt.add_argument("--archive", required=True)
    pt.add_argument("--copula", required=True,
                    help="path to copula JSON, or 'identity'")
    pt.add_argument("--spec", required=True, help="transform spec JSON path")
    pt.add_argument("--origin", required=True, help="origin id, or 'all'")
    pt.add_argument("--draws", type=int, default=2000)
    pt.add_argument("--seed", type=int, default=0)
    pt.add_argument("--history", default=None,
                    help="comma list of trailing observed values, latest last")
    pt.add_argument("--out", required=True)
    pt.set_defaults(func=cmd_transform)

    ps = sub.add_parser("score", help="score tables, EPA and PIT tests")
    ps.add_argument("--forecasts", nargs="+", required=True,
                    help="draws.csv files, one per method")
    ps.add_argument("--realizations", required=True)
    ps.add_argument("--metrics", default="crps,qwcrps,qs10")
    ps.add_argument("--bandwidth", type=int, default=0)
    ps.add_argument("--horizon", type=int, default=1,
                    help="target horizon label; PIT test block length")
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=cmd_score)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, FitError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, EstimationError, HorizonFuseError, OSError,
            json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
