"""Command-line experiment runner.

    dagkernels indices     [--config PATH] [--out DIR]
    dagkernels eigvals     ...
    dagkernels regress     ... [--seeds N] [--threads N] [--mem-cap BYTES]
    dagkernels gap-compare ...
    dagkernels validate    ...

Exit codes: 0 ok, 2 configuration error, 3 resource cap exceeded,
4 numerical failure.
"""
import argparse
import csv
import math
import os
import sys

import numpy as np

from . import __version__
from ._accel import set_threads
from .arch import validate_assumptions
from .config import ConfigError, ExperimentConfig, load_config, parse_bytes
from .eigenfunctions import DEGREES, MODE_IDS, build_appendix_eigenfunctions, mode_multi_index
from .indices import MultiIndex, index_triple
from .kernel import eigenvalue_estimate
from .regression import (CSV_FIELDS, NumericalError, ResourceCapError, check_memory,
                         learning_curve, summarize)
from .svg import write_chart

EXIT_OK, EXIT_CONFIG, EXIT_CAP, EXIT_NUMERIC = 0, 2, 3, 4


def _num(x):
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        if math.isnan(x):
            return "nan"
        return f"{x:.12g}"
    return str(x)


def write_csv(path, fields, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([_num(r[f]) for f in fields])


def _ensure_out(out):
    os.makedirs(out, exist_ok=True)
    return out


# -- indices -------------------------------------------------------------------------

INDEX_FIELDS = ("mode_id", "arch", "degree", "S", "F", "L", "learnable")


def cmd_indices(cfg, out):
    act = cfg.dual_activation()
    rows = []
    for name in cfg.architectures:
        dag = cfg.arch(name, cfg.p, act)
        for mode in cfg.modes:
            try:
                r = mode_multi_index(mode, dag, cfg.p)
            except ValueError as exc:
                raise ConfigError(f"{mode} under {name}: {exc}") from None
            tri = index_triple(dag, r)
            rows.append({"mode_id": mode, "arch": name, "degree": DEGREES[mode],
                         "S": tri.S, "F": tri.F, "L": tri.L, "learnable": int(tri.learnable)})
    write_csv(os.path.join(_ensure_out(out), "indices.csv"), INDEX_FIELDS, rows)
    for r in rows:
        print(f"{r['mode_id']:7s} {r['arch']:16s} S={r['S']!s:6s} F={r['F']!s:6s} L={r['L']}")
    return rows


# -- eigenvalues ------------------------------------------------------------------

EIG_FIELDS = ("arch", "r_id", "p", "d", "L", "method", "eigenvalue", "stderr")
SLOPE_FIELDS = ("arch", "r_id", "L", "slope", "n_points")


def fit_slope(ds, lams):
    """Least-squares slope of log(lambda) against log(d); None if not defined."""
    pts = [(math.log(d), math.log(l)) for d, l in zip(ds, lams) if l > 1e-300]
    if len(pts) < 2 or len(pts) != len(ds):
        return None
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def cmd_eigvals(cfg, out):
    act = cfg.dual_activation("eig")
    rows, slopes = [], []
    targets = [(m, None) for m in cfg.modes]
    targets += [(" ".join(f"{v}:{k}" for v, k in sorted(r.items())), r) for r in cfg.multi_indices]
    for name in cfg.architectures:
        series = {}
        for rid, custom in targets:
            ds, lams, L = [], [], None
            for p in cfg.p_values:
                dag = cfg.arch(name, p, act)
                try:
                    r = MultiIndex(custom) if custom else mode_multi_index(rid, dag, p)
                except ValueError:
                    continue      # pattern undefined at this p
                tri = index_triple(dag, r)
                L = tri.L
                est = eigenvalue_estimate(dag, None, cfg.kind, r, cfg.method, cfg.mc_samples,
                                          seed=cfg.seeds[0])
                rows.append({"arch": name, "r_id": rid, "p": p, "d": dag.reference_dim, "L": L,
                             "method": cfg.method, "eigenvalue": est.value,
                             "stderr": est.stderr})
                ds.append(dag.reference_dim)
                lams.append(est.value)
            s = fit_slope(ds, lams)
            slopes.append({"arch": name, "r_id": rid, "L": L if L is not None else "n/a",
                           "slope": s if s is not None else "n/a", "n_points": len(ds)})
            if s is not None:
                series[f"{rid} (L={L})"] = (ds, lams)
        write_chart(os.path.join(_ensure_out(out), f"eigvals_{name}.svg"), series,
                    title=f"eigenvalues, {name}", xlabel="d", ylabel="eigenvalue",
                    logx=True, logy=True)
    write_csv(os.path.join(out, "eigvals.csv"), EIG_FIELDS, rows)
    write_csv(os.path.join(out, "eigvals_slopes.csv"), SLOPE_FIELDS, slopes)
    for s in slopes:
        print(f"{s['arch']:16s} {s['r_id']:10s} L={s['L']!s:6s} slope={_num(s['slope'])}")
    return rows, slopes


# -- regression -------------------------------------------------------------------

TOTAL_FIELDS = ("run_id", "arch", "m_train", "seed", "test_mse", "norm_sq")


def _target(cfg, coefficients, modes):
    return lambda seed: build_appendix_eigenfunctions(cfg.p, seed, coefficients, modes, cfg.n_norm)


def _curves(cfg, name, coefficients, run_id, modes=None):
    dag = cfg.arch(name)
    check_memory(cfg.m_schedule[-1], cfg.m_test, cfg.mem_cap)
    target = _target(cfg, coefficients, modes or cfg.modes)
    res = learning_curve(dag, None, cfg.kind, target, cfg.m_schedule,
                         cfg.seeds, m_test=cfg.m_test, jitter_rel=cfg.jitter,
                         mem_cap=cfg.mem_cap, run_id=run_id, record_time=cfg.record_time)
    totals = [{"run_id": run_id, "arch": str(dag), "m_train": t["m_train"], "seed": t["seed"],
               "test_mse": t["test_mse"], "norm_sq": sum(t["norms"].values())}
              for t in res.totals]
    return dag, res.rows, totals


def _curve_chart(path, rows, title):
    s = summarize(rows)
    Ls = {r["mode_id"]: r["L_index"] for r in rows}
    series, bands = {}, {}
    for mid in dict.fromkeys(r["mode_id"] for r in rows):
        ms = sorted(k[0] for k in s if k[1] == mid)
        mean = [s[(m, mid)][0] for m in ms]
        sd = [s[(m, mid)][1] for m in ms]
        lab = f"{mid} (L={Ls[mid]})"
        series[lab] = (ms, mean)
        bands[lab] = ([a - b for a, b in zip(mean, sd)], [a + b for a, b in zip(mean, sd)])
    write_chart(path, series, title=title, xlabel="training set size m",
                ylabel="residual", logx=True, bands=bands)


def cmd_regress(cfg, out):
    _ensure_out(out)
    rows, totals = [], []
    for name in cfg.architectures:
        dag, r, t = _curves(cfg, name, cfg.coefficients or "random", name)
        rows += r
        totals += t
        _curve_chart(os.path.join(out, f"regress_{name}.svg"), r, f"{cfg.kind} regression, {name}")
    write_csv(os.path.join(out, "regress.csv"), CSV_FIELDS, rows)
    write_csv(os.path.join(out, "regress_total.csv"), TOTAL_FIELDS, totals)
    print(f"wrote {len(rows)} rows to {os.path.join(out, 'regress.csv')}")
    return rows, totals


GAP_SUMMARY_FIELDS = ("m_train", "mode_id", "L_index", "gap_mean", "gap_std", "flatten_mean",
                      "flatten_std", "difference", "z")


def compare_rows(gap_rows, flat_rows):
    g = summarize(gap_rows)
    f = summarize(flat_rows)
    Ls = {r["mode_id"]: r["L_index"] for r in gap_rows}
    out = []
    for key in sorted(g, key=lambda k: (k[0], list(Ls).index(k[1]))):
        gm, gs, n = g[key]
        fm, fs, _ = f[key]
        diff = fm - gm
        se = math.sqrt((gs ** 2 + fs ** 2) / max(n, 1))
        out.append({"m_train": key[0], "mode_id": key[1], "L_index": Ls[key[1]], "gap_mean": gm,
                    "gap_std": gs, "flatten_mean": fm, "flatten_std": fs, "difference": diff,
                    "z": diff / se if se > 0 else (0.0 if diff == 0 else math.copysign(math.inf, diff))})
    return out


def cmd_gap_compare(cfg, out):
    _ensure_out(out)
    if cfg.coefficients == "random":
        raise ConfigError("gap-compare needs translation-invariant targets (coefficients = constant)")
    modes = cfg.modes
    if modes == list(MODE_IDS):
        modes = [m for m in modes if m != "Y5"]     # default set: symmetric-representable modes
    if "Y5" in modes:
        raise ConfigError("Y5 couples different pooled positions and is not a symmetric target "
                          "for a GAP readout; remove it from modes")
    gname, fname = cfg.gap_pair
    gdag = cfg.arch(gname)
    fdag = cfg.arch(fname)
    if gdag.readout != "gap" or fdag.readout != "flatten":
        raise ConfigError("gap_pair must name a GAP architecture followed by a flatten one")
    _, grows, gt = _curves(cfg, gname, "constant", "gap", modes)
    _, frows, ft = _curves(cfg, fname, "constant", "flatten", modes)
    write_csv(os.path.join(out, "gap_compare.csv"), CSV_FIELDS, grows + frows)
    write_csv(os.path.join(out, "gap_compare_total.csv"), TOTAL_FIELDS, gt + ft)
    summary = compare_rows(grows, frows)
    write_csv(os.path.join(out, "gap_compare_summary.csv"), GAP_SUMMARY_FIELDS, summary)
    _curve_chart(os.path.join(out, "gap_compare_gap.svg"), grows, f"GAP readout, {gname}")
    _curve_chart(os.path.join(out, "gap_compare_flatten.svg"), frows, f"flatten readout, {fname}")
    for s in summary:
        print(f"m={s['m_train']:<6d} {s['mode_id']:7s} gap={s['gap_mean']:.4f} "
              f"flatten={s['flatten_mean']:.4f} z={s['z']:.2f}")
    return grows, frows, summary


# -- validation ---------------------------------------------------------------------

VALIDATE_FIELDS = ("arch", "check", "passed", "offending", "detail")


def cmd_validate(cfg, out):
    rows = []
    ok = True
    names = list(dict.fromkeys(cfg.architectures + cfg.gap_pair))
    for name in names:
        dag = cfg.arch(name)
        rep = validate_assumptions(dag)
        ok &= rep.ok
        print(f"{name}: {dag}")
        print("  " + str(rep).replace("\n", "\n  "))
        for c in rep.checks:
            rows.append({"arch": name, "check": c.name, "passed": int(c.passed),
                         "offending": " ".join(map(str, c.offending)), "detail": c.detail})
    write_csv(os.path.join(_ensure_out(out), "validate.csv"), VALIDATE_FIELDS, rows)
    return ok


COMMANDS = {"indices": cmd_indices, "eigvals": cmd_eigvals, "regress": cmd_regress,
            "gap-compare": cmd_gap_compare, "validate": cmd_validate}


def build_parser():
    ap = argparse.ArgumentParser(prog="dagkernels", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="experiment config file (defaults are used without one)")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--seeds", type=int, help="use seeds 0..N-1")
    ap.add_argument("--threads", type=int, help="worker threads for kernel assembly")
    ap.add_argument("--mem-cap", help="memory cap for kernel storage, e.g. 2G")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.seeds is not None:
            if args.seeds < 1:
                raise ConfigError("--seeds must be >= 1")
            cfg.seeds = list(range(args.seeds))
        if args.mem_cap is not None:
            cfg.mem_cap = parse_bytes(args.mem_cap)
        out = args.out or cfg.out
    except (ConfigError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    set_threads(args.threads)
    try:
        from threadpoolctl import threadpool_limits
        # dense linear algebra stays single-threaded so outputs do not depend on --threads
        with threadpool_limits(limits=1, user_api="blas"):
            res = COMMANDS[args.command](cfg, out)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ResourceCapError, MemoryError) as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.command == "validate" and not res:
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
