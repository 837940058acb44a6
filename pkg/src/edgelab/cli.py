"""Command-line harness.

Subcommands: cf-scan, certify, bootstrap-compare, tstat-study, rate-study,
uniform-sweep, expand.  Exit code 0 on success, 2 when every produced
record is inconclusive, 1 on error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import bootstrap as bl
from . import cramer
from .expansion import SetSpec, build_expansion, set_measure
from .families import make_family
from .harness import (StudyReport, default_t_grid, dkw_halfwidth, emit_report,
                      rate_study, uniform_sweep)


def _out_dir(path: str | None) -> str:
    base = path or os.environ.get("EDGELAB_OUT", ".")
    os.makedirs(base, exist_ok=True)
    return base


def _load_points(path: str) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if rows:       # non-numeric row after data started
                    raise
                continue       # header line
    if not rows:
        raise ValueError("no numeric rows in %s" % path)
    return np.asarray(rows)


def _set_from_json(obj: dict) -> SetSpec:
    kind = obj["kind"]
    if kind == "halfline":
        return SetSpec.halfline(obj["t"])
    if kind == "box":
        return SetSpec.box(obj["low"], obj["high"])
    if kind == "ball":
        return SetSpec.ball(obj["center"], obj["radius"])
    if kind == "halfspace":
        return SetSpec.halfspace(obj["normal"], obj["offset"])
    raise ValueError("unknown set kind %r" % kind)


def _parse_grid(spec: str) -> np.ndarray:
    lo, hi, step = (float(v) for v in spec.split(":"))
    return np.arange(lo, hi + step / 2, step)


# ---------------------------------------------------------------------------
# subcommands

def cmd_cf_scan(args) -> int:
    pts = _load_points(args.data)
    h = cramer.CharFunctionHandle.from_points(pts)
    cert = cramer.weak_cramer_scan(h, b=args.b, R=args.R, T_max=args.Tmax,
                                   n_radii=args.grid_radii,
                                   n_dirs=args.grid_dirs, c=args.c)
    payload = cert.to_json_dict()
    if args.cR is not None:
        payload["prob_bound"] = cramer.failure_prob_bound(args.cR,
                                                          pts.shape[0])
    json.dump(payload, sys.stdout, indent=1)
    sys.stdout.write("\n")
    return 0


def cmd_certify(args) -> int:
    pts = _load_points(args.data)
    h = cramer.CharFunctionHandle.from_points(pts)
    cert = cramer.weak_cramer_scan(h, b=args.b, R=args.R, T_max=args.Tmax,
                                   n_radii=args.grid_radii,
                                   n_dirs=args.grid_dirs, c=args.c)
    # pairwise route: wrapped-square bound at the worst scanned frequency
    S, record = cramer.ustat_certificate(pts, np.asarray(cert.witness),
                                         args.b, args.R)
    cert.S_value = S
    if args.c is not None and record["implied_margin"] >= args.c:
        cert.status = "certified-by-ustat"
    cR = args.cR
    if cR is None:
        t_grid = np.asarray([e["t"] for e in cert.evidence])
        cR, _ = cramer.c_r_lower_bound(pts, args.R, t_grid)
    if cR > 0:
        cert.prob_bound = cramer.failure_prob_bound(cR, pts.shape[0])
    payload = cert.to_json_dict()
    payload["ustat_record"] = record
    payload["c_R"] = cR
    json.dump(payload, sys.stdout, indent=1)
    sys.stdout.write("\n")
    return 0


def _get_dataset(args) -> np.ndarray:
    if args.data:
        return _load_points(args.data)
    fam = make_family(args.family)
    rng = bl.child_rng(args.seed, 101)
    return fam.sample(rng, args.n)[:, None]


def cmd_bootstrap_compare(args) -> int:
    pts = _get_dataset(args)
    draws = bl.bootstrap_draws(pts, args.B, seed=args.seed)
    e = bl.empirical_edgeworth(pts, args.s)
    if args.sets:
        with open(args.sets) as fh:
            specs = json.load(fh)
        sets = [_set_from_json(o) for o in specs]
        labels = [json.dumps(o) for o in specs]
    else:
        grid = default_t_grid()
        sets = [SetSpec.halfline(t) for t in grid]
        labels = ["t=%g" % t for t in grid]
    band = dkw_halfwidth(args.B)
    out_dir = _out_dir(args.out)
    rows = []
    sup = 0.0
    for label, A in zip(labels, sets):
        q_emp = float(A.contains(draws).mean())
        q_tilde = set_measure(e, A).value
        dev = abs(q_emp - q_tilde)
        sup = max(sup, dev)
        rows.append([label, repr(q_emp), repr(q_tilde), repr(dev),
                     repr(band)])
    csv_path = os.path.join(out_dir, "bootstrap_compare.csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["set_id", "q_emp", "q_tilde", "abs_dev", "mc_se"])
        w.writerows(rows)
    flags = bl.event_checks(pts, args.s, rho_bar=args.rho_bar, c1=1e-6,
                            c2=args.rho_bar)
    summary = {
        "n": int(pts.shape[0]), "B": args.B, "s": args.s,
        "sup_deviation": sup,
        "events": {"e0": flags.e0, "e1": flags.e1, "e2": flags.e2},
        "degenerate_draws": 0,
        "csv": csv_path,
    }
    json_path = os.path.join(out_dir, "bootstrap_compare.json")
    with open(json_path, "w") as fh:
        json.dump(summary, fh, indent=1)
        fh.write("\n")
    print(json.dumps(summary, indent=1))
    return 0


def cmd_tstat_study(args) -> int:
    fam = make_family(args.family)
    rng = bl.child_rng(args.seed, 202)
    w = fam.sample(rng, args.n)
    tgrid = _parse_grid(args.tgrid)
    tstats, degenerate = bl.tstat_bootstrap(w, args.B, seed=args.seed)
    tsorted = np.sort(tstats)
    q_emp = np.searchsorted(tsorted, tgrid, side="right") / tstats.size
    x = np.stack([w, w ** 2], axis=1)
    stats = bl.sample_stats(x, args.s)
    e = bl.empirical_edgeworth(x, args.s)
    mc_rng = bl.child_rng(args.seed, 203)
    q_tilde, ses, singular = bl.edgeworth_tstat_curve(
        tgrid, e, stats, float(w.mean()), args.n, args.mc_budget, mc_rng)
    out_dir = _out_dir(args.out)
    csv_path = os.path.join(out_dir, "tstat_study.csv")
    with open(csv_path, "w", newline="") as fh:
        wri = csv.writer(fh, lineterminator="\n")
        wri.writerow(["t", "q_emp", "q_tilde", "abs_dev", "mc_se"])
        for t, a, b, se in zip(tgrid, q_emp, q_tilde, ses):
            wri.writerow([repr(float(t)), repr(float(a)), repr(float(b)),
                          repr(abs(float(a - b))), repr(float(se))])
    summary = {
        "family": args.family, "n": args.n, "B": args.B, "s": args.s,
        "sup_deviation": float(np.max(np.abs(q_emp - q_tilde))),
        "degenerate_draws": degenerate,
        "singular_mc_points": singular,
        "csv": csv_path,
    }
    json_path = os.path.join(out_dir, "tstat_study.json")
    with open(json_path, "w") as fh:
        json.dump(summary, fh, indent=1)
        fh.write("\n")
    print(json.dumps(summary, indent=1))
    return 0


def _report_exit(report: StudyReport) -> int:
    flags = [r.flag for r in report.records if r.metric.endswith("sup_dev")]
    if flags and all(f == "inconclusive" for f in flags):
        return 2
    return 0


def cmd_rate_study(args) -> int:
    with open(args.config) as fh:
        cfg = json.load(fh)
    fam = make_family(cfg["family"], **cfg.get("theta", {}))
    report = rate_study(fam, s=cfg.get("s", 3), n_grid=cfg["n_grid"],
                        M=cfg.get("M", 1_000_000), seed=cfg.get("seed", 0),
                        mode=cfg.get("mode", "analytic"), B=cfg.get("B"),
                        reps=cfg.get("reps", 1),
                        workers=cfg.get("workers", 1))
    out_dir = _out_dir(cfg.get("out"))
    emit_report(report, "csv", os.path.join(out_dir, "rate_study.csv"))
    emit_report(report, "json", os.path.join(out_dir, "rate_study.json"))
    print(json.dumps(report.slopes, indent=1))
    return _report_exit(report)


def cmd_uniform_sweep(args) -> int:
    with open(args.config) as fh:
        cfg = json.load(fh)
    fams = [make_family(f["name"], **f.get("theta", {}))
            for f in cfg["families"]]
    report = uniform_sweep(fams, s=cfg.get("s", 3), n_grid=cfg["n_grid"],
                           M=cfg.get("M", 1_000_000),
                           seed=cfg.get("seed", 0),
                           rho_cap=cfg.get("rho_cap"),
                           reps=cfg.get("reps", 1),
                           mode=cfg.get("mode", "analytic"), B=cfg.get("B"),
                           workers=cfg.get("workers", 1))
    out_dir = _out_dir(cfg.get("out"))
    emit_report(report, "csv", os.path.join(out_dir, "uniform_sweep.csv"))
    emit_report(report, "json", os.path.join(out_dir, "uniform_sweep.json"))
    print(json.dumps(report.slopes, indent=1))
    return _report_exit(report)


def cmd_expand(args) -> int:
    if args.data:
        pts = _load_points(args.data)
        e = bl.empirical_edgeworth(pts, args.s)
    else:
        fam = make_family(args.family)
        cums = fam.standardized_cumulants(args.s)
        e = build_expansion(cums, args.n, args.s)
    json.dump(e.to_json_dict(), sys.stdout, indent=1)
    sys.stdout.write("\n")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgelab")
    sub = p.add_subparsers(dest="command", required=True)

    def scan_args(sp):
        sp.add_argument("--data", required=True, help="CSV, one point per row")
        sp.add_argument("--b", type=float, default=1.0)
        sp.add_argument("--R", type=float, default=1.0)
        sp.add_argument("--Tmax", type=float, default=200.0)
        sp.add_argument("--c", type=float, default=None,
                        help="target margin; omitted = report the grid min")
        sp.add_argument("--grid-radii", type=int, default=512)
        sp.add_argument("--grid-dirs", type=int, default=None)
        sp.add_argument("--cR", type=float, default=None)

    sp = sub.add_parser("cf-scan", help="scan the weak Cramer inequality")
    scan_args(sp)
    sp.set_defaults(fn=cmd_cf_scan)

    sp = sub.add_parser("certify",
                        help="scan plus pairwise wrapped-square certificate")
    scan_args(sp)
    sp.set_defaults(fn=cmd_certify)

    sp = sub.add_parser("bootstrap-compare",
                        help="bootstrap draws vs empirical expansion")
    sp.add_argument("--data", default=None)
    sp.add_argument("--family", default="centered-exponential")
    sp.add_argument("--n", type=int, default=400)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--B", type=int, default=100_000)
    sp.add_argument("--s", type=int, default=3)
    sp.add_argument("--sets", default=None, help="JSON file of set specs")
    sp.add_argument("--rho-bar", type=float, default=100.0)
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_bootstrap_compare)

    sp = sub.add_parser("tstat-study",
                        help="bootstrap-t CDF vs expansion measure")
    sp.add_argument("--family", default="centered-exponential")
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--B", type=int, default=100_000)
    sp.add_argument("--s", type=int, default=3)
    sp.add_argument("--tgrid", default="-4:4:0.05")
    sp.add_argument("--mc-budget", type=int, default=200_000)
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_tstat_study)

    sp = sub.add_parser("rate-study", help="rate study from a JSON config")
    sp.add_argument("--config", required=True)
    sp.set_defaults(fn=cmd_rate_study)

    sp = sub.add_parser("uniform-sweep",
                        help="max-over-theta rate study from a JSON config")
    sp.add_argument("--config", required=True)
    sp.set_defaults(fn=cmd_uniform_sweep)

    sp = sub.add_parser("expand", help="print an expansion coefficient table")
    sp.add_argument("--data", default=None)
    sp.add_argument("--family", default="centered-exponential")
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--s", type=int, default=4)
    sp.set_defaults(fn=cmd_expand)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
