"""Command line entry point: ``stablefield simulate|classify|verify|report``."""

import argparse
from concurrent.futures import ThreadPoolExecutor
import csv
import datetime
import io
import json
import logging
import math
import os
from pathlib import Path
import sys
import warnings

import numpy as np

from . import classifier, diagnostics, fields, markov, plotting
from .actions import (FiniteDiscrete, MarkovShift, MixedMovingAverage, PathSegment,
                      SubGaussianShift, check_full_support, check_minimal_finite,
                      lattice_ball, verify_action_axioms, verify_cocycle, verify_rn_chain_rule,
                      CheckReport)
from .config import ConfigError, build_triplet, load
from .decomposition import decomposition_consistency
from .errors import DegenerateField, FitUnstable, ModelError
from .sas_core import Window, sas_cf
from .streams import stream

EXIT_OK, EXIT_CONFIG, EXIT_MODEL, EXIT_INTERNAL = 0, 2, 3, 4

log = logging.getLogger("stablefield")


def _clean(obj):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


class Writer:
    """Single funnel for every file the run produces."""

    def __init__(self, out):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)

    def path(self, name):
        return self.out / name

    def json(self, name, obj):
        text = json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False,
                          allow_nan=False)
        self.path(name).write_text(text + "\n", encoding="utf-8")

    def csv(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x
                        for x in row])
        self.path(name).write_bytes(buf.getvalue().encode("utf-8"))

    def log(self, command, args, extra=""):
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
        with open(self.path("run.log"), "a", encoding="utf-8") as fh:
            fh.write(f"{stamp} {command} config={args.config} seed={args.seed} "
                     f"threads={args.threads} {extra}\n")


def _threads(value):
    raw = value if value is not None else os.environ.get("STABLEFIELD_THREADS", "1")
    try:
        k = int(raw)
    except ValueError:
        raise ConfigError("--threads", f"not an integer: {raw!r}") from None
    if k < 1:
        raise ConfigError("--threads", "must be >= 1")
    return k


def _markov_precondition(triplet):
    fam = triplet.family
    if isinstance(fam, MarkovShift):
        for cls in fam.classes:
            if markov.classify_recurrence(cls) is markov.RecurrenceType.TRANSIENT:
                raise ModelError(f"transient class {cls.index}: the field needs a recurrent chain")


def _family_info(cfg, triplet):
    return {"kind": cfg.family["kind"], "d": triplet.d, "alpha": cfg.alpha}


# -- simulate --------------------------------------------------------------------

def cmd_simulate(cfg, args, writer):
    triplet = build_triplet(cfg)
    _markov_precondition(triplet)
    window = cfg.window
    sim = cfg.simulation
    n = sim["realizations"]

    def one(k):
        rng = stream(cfg.seed, f"realization/{k}")
        return fields.sample_field(triplet, window, rng, size=1, truncation=sim["truncation"],
                                   radius=sim["truncation_radius"])

    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        results = list(pool.map(one, range(n)))

    pts = window.points()
    per = []
    for k, (vals, info) in enumerate(results):
        flat = vals[0].ravel()
        writer.csv(f"realization_{k:04d}.csv",
                   [f"t{i + 1}" for i in range(window.d)] + ["value"],
                   (list(t) + [float(v)] for t, v in zip(pts, flat)))
        per.append({key: info[key] for key in ("truncated_mass", "tail_estimate") if key in info})
    method = results[0][1]["method"]
    meta = {"seed": cfg.seed, "family": _family_info(cfg, triplet), "method": method,
            "window": {"lo": list(window.lo), "hi": list(window.hi)},
            "realizations": n, "truncation": results[0][1]["truncation"],
            "files": [f"realization_{k:04d}.csv" for k in range(n)]}
    if method == "lepage":
        meta["truncated_mass"] = per[0]["truncated_mass"]
        meta["tail_estimate"] = [p["tail_estimate"] for p in per]
    writer.json("meta.json", meta)
    print(f"wrote {n} realization(s) to {writer.out}")
    return EXIT_OK


# -- classify --------------------------------------------------------------------

def _classify(cfg):
    triplet = build_triplet(cfg)
    _markov_precondition(triplet)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        verdict = classifier.classify(triplet)
    if isinstance(triplet.family, MarkovShift):
        fam = triplet.family
        direct = classifier.classify_markov_field(
            fam.chain, anchors={c.index: c.anchor for c in fam.classes})
        assert direct.kind is verdict.kind, \
            f"recurrence verdict {direct.kind.value} != structural verdict {verdict.kind.value}"
    return triplet, verdict


def cmd_classify(cfg, args, writer):
    _, verdict = _classify(cfg)
    out = verdict.to_dict()
    writer.json("classification.json", out)
    print(json.dumps(_clean(out), sort_keys=True, indent=2))
    return EXIT_OK


# -- verify ----------------------------------------------------------------------

def _sample_points(triplet, rng, count=6, half=12):
    fam = triplet.family
    if isinstance(fam, FiniteDiscrete):
        return list(fam.space.atoms)
    if isinstance(fam, MixedMovingAverage):
        zs = lattice_ball(fam.d, 1)
        return [(y, z) for y in fam.y_space.atoms for z in zs]
    if isinstance(fam, MarkovShift):
        out = []
        for cls in fam.classes:
            batch, _ = markov.sample_two_sided_path(cls, (-half, half), rng, size=count)
            out += [batch.segment(k) for k in range(count)]
        return out
    if isinstance(fam, SubGaussianShift):
        shape = (2 * half + 1,) * fam.d
        return [PathSegment((-half,) * fam.d, rng.normal(0, fam.coordinate_sd, shape))
                for _ in range(count)]
    raise ModelError(f"no sample points for {type(fam).__name__}")


def _verify_reports(cfg, triplet, rng):
    fam = triplet.family
    points = _sample_points(triplet, rng)
    ts = lattice_ball(fam.d, 3 if fam.d == 1 else 2)
    reports = [verify_action_axioms(fam, points, ts),
               verify_cocycle(triplet.cocycle, fam, points, ts),
               verify_rn_chain_rule(fam, points, ts)]

    support = CheckReport("full_support", checked=1)
    if isinstance(fam, FiniteDiscrete):
        if not check_full_support(triplet):
            support.violations.append("some orbit never meets the kernel support")
    elif isinstance(fam, MixedMovingAverage):
        rows = np.abs(triplet.kernel).reshape(len(fam.y_space), -1).sum(axis=1)
        support.violations += [f"kernel vanishes on fibre {y!r}"
                               for y, r in zip(fam.y_space.atoms, rows) if r == 0]
    reports.append(support)

    if isinstance(fam, FiniteDiscrete):
        reports.append(decomposition_consistency(fam))
        minimal = CheckReport("minimality")
        if support.ok:
            minimal.checked = 1
            value = check_minimal_finite(triplet)
            minimal.detail = value
            expected = cfg.family.get("expect_minimal")
            if expected is not None and bool(expected) != value:
                minimal.violations.append(f"minimality is {value}, annotation says {expected}")
        else:
            minimal.skipped = 1
        reports.append(minimal)
    return reports


def _coherence(cfg, triplet):
    rep = CheckReport("neveu_ledger_coherence", checked=1)
    try:
        _classify(cfg)
    except AssertionError as exc:
        rep.violations.append(str(exc))
    return rep


def _stationarity(cfg, triplet, seed):
    diag = cfg.diagnostics
    rep = CheckReport("stationarity")
    lags = diag["stationarity_lags"]
    if isinstance(triplet.family, MarkovShift):
        lags = [s for s in lags if abs(s) <= cfg.simulation["truncation_radius"]]
    results = diagnostics.stationarity_test(
        triplet, lags, R=diag["stationarity_samples"], rng=stream(seed, "verify/stationarity"),
        truncation=diag["truncation"])
    for r in results:
        rep.checked += 1
        if r.p_value < 0.001:
            rep.violations.append(f"lag {list(r.lag)}: KS p = {r.p_value:.2e}")
    rep.detail = [r.to_dict() for r in results]
    return rep


def cmd_verify(cfg, args, writer):
    triplet = build_triplet(cfg, check=False)
    rng = stream(cfg.seed, "verify/points")
    reports = _verify_reports(cfg, triplet, rng)
    structural_ok = all(r.ok for r in reports)
    if structural_ok:
        _markov_precondition(triplet)
        reports.append(_coherence(cfg, triplet))
        reports.append(_stationarity(cfg, triplet, cfg.seed))
    else:
        for name in ("neveu_ledger_coherence", "stationarity"):
            reports.append(CheckReport(name, skipped=1))
    out = []
    for r in reports:
        d = r.to_dict()
        if hasattr(r, "detail"):
            d["detail"] = r.detail
        out.append(d)
        status = "FAIL" if not r.ok else ("skip" if r.checked == 0 else "ok")
        note = f" value={r.detail}" if isinstance(getattr(r, "detail", None), bool) else ""
        print(f"{r.name:28s} {status:4s} checked={r.checked} skipped={r.skipped} "
              f"violations={len(r.violations)}{note}")
        for v in r.violations[:3]:
            print(f"    {v}")
    failed = [r.name for r in reports if not r.ok]
    writer.json("verify.json", {"checks": out, "failed": failed, "ok": not failed})
    if failed:
        print(f"verification failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_MODEL
    return EXIT_OK


# -- report ----------------------------------------------------------------------

AGREEMENT = {
    classifier.VerdictKind.ERGODIC: diagnostics.DispersionVerdict.ERGODIC,
    classifier.VerdictKind.NON_ERGODIC: diagnostics.DispersionVerdict.NON_ERGODIC,
    classifier.VerdictKind.MIXED: diagnostics.DispersionVerdict.NON_ERGODIC,
}


def cmd_report(cfg, args, writer):
    triplet, verdict = _classify(cfg)
    diag = cfg.diagnostics
    seed = cfg.seed
    J = diag["truncation"]
    norm = fields.alpha_norm_at_origin(triplet)
    target = math.exp(-norm) if diag["h"] == "cos" else None

    disp = diagnostics.dispersion_experiment(
        triplet, h=diag["h"], n_grid=diag["n_grid"], R=diag["realizations"],
        rng=stream(seed, "diagnostics/dispersion"), thresholds=tuple(diag["thresholds"]),
        truncation=J)
    writer.csv("ergodic_average.csv", ["n", "realization", "theta_hat"],
               ([n, k, float(disp.thetas[k, j])] for j, n in enumerate(disp.n_grid)
                for k in range(disp.thetas.shape[0])))
    plotting.theta_traces(writer.path("theta_traces.svg"), disp.n_grid, disp.thetas, target,
                          title=f"{cfg.family['kind']}: rho = {disp.rho:.3f}")

    samples, _ = fields.sample_field(triplet, Window((0,) * triplet.d, (0,) * triplet.d),
                                     stream(seed, "diagnostics/cf"), size=diag["cf_samples"],
                                     truncation=J)
    samples = samples.ravel()
    sigma = norm ** (1.0 / cfg.alpha)
    cf = diagnostics.empirical_cf(samples, diag["theta_grid"])
    model = sas_cf(cf.theta, cfg.alpha, sigma)
    writer.csv("cf.csv", ["theta", "re", "im", "se_re", "se_im", "model"],
               zip(cf.theta, cf.values.real, cf.values.imag, cf.se_real, cf.se_imag, model))
    plotting.cf_fit(writer.path("cf_fit.svg"), cf.theta, cf.values.real, model,
                    title="empirical vs model characteristic function")
    cf_summary = {"sigma_model": sigma,
                  "max_abs_z": float(np.max(np.abs(cf.values.real - model) / cf.se_real))}
    try:
        cf_summary["sigma_fit"] = diagnostics.scale_fit(samples, cfg.alpha)
    except FitUnstable as exc:
        cf_summary["sigma_fit"] = None
        cf_summary["fit_error"] = str(exc)

    try:
        mg = diagnostics.maxima_growth(triplet, diag["maxima_grid"],
                                       R=diag["maxima_realizations"],
                                       rng=stream(seed, "diagnostics/maxima"), truncation=J)
        writer.csv("maxima.csv", ["n", "median_max"], zip(mg.n_grid, mg.medians))
        plotting.maxima_loglog(writer.path("maxima.svg"), mg.n_grid, mg.medians, mg.exponent,
                               title="growth of partial maxima")
        maxima = mg.to_dict()
    except DegenerateField as exc:
        maxima = {"error": str(exc)}

    agree = AGREEMENT[verdict.kind] is disp.verdict
    comparison = {"config": Path(cfg.path).name if cfg.path else None,
                  "symbolic": verdict.kind.value, "empirical": disp.verdict.value,
                  "rho": disp.rho, "agreement": agree}
    writer.csv("comparison.csv", ["config", "symbolic", "empirical", "rho", "agreement"],
               [[comparison["config"], comparison["symbolic"], comparison["empirical"],
                 disp.rho, str(agree).lower()]])
    summary = {"seed": seed, "family": _family_info(cfg, triplet),
               "classification": verdict.to_dict(), "dispersion": disp.to_dict(),
               "expected_h_mean": target, "cf": cf_summary, "maxima": maxima,
               "comparison": comparison}
    writer.json("summary.json", summary)
    print(f"{comparison['symbolic']} vs {comparison['empirical']} (rho = {disp.rho:.3f}): "
          f"agreement = {agree}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "classify": cmd_classify, "verify": cmd_verify,
            "report": cmd_report}


def build_parser():
    p = argparse.ArgumentParser(prog="stablefield",
                                description="Stationary SaS random fields: simulation, "
                                            "ergodicity classification and diagnostics.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("config", help="experiment config (TOML)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="output directory (default out/<config stem>)")
    p.add_argument("--threads", default=None,
                   help="worker threads (fallback: STABLEFIELD_THREADS, then 1)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.threads = _threads(args.threads)
        cfg = load(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed", "must be an unsigned 64-bit integer")
            cfg.seed = args.seed
        args.seed = cfg.seed
        out = args.out or os.path.join("out", Path(args.config).stem)
        writer = Writer(out)
        code = COMMANDS[args.command](cfg, args, writer)
        writer.log(args.command, args, f"exit={code}")
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except AssertionError as exc:
        print(f"internal assertion failed: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
