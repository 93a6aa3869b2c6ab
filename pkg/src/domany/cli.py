"""Command-line front end: ``simulate``, ``measure``, ``verify``, ``exponents``.

Every option can also come from a JSON plan (``--plan``); command-line flags
win over plan values, and unknown plan keys are rejected.  Exit codes: 0
success, 1 verification failure, 2 usage or configuration error, 3
insufficient statistics.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys


from . import bits, verify
from .automaton import SpinConfiguration, run
from .estimators import (
    MODELS, ObservationRecord, _summary, beta_fit, chi_samples, correlation_length,
    crossing_samples, default_radius, eta_fit, flip_tail, format_time, nu_fit, parse_time,
    tau_samples, theta_samples, xi_fit_from_samples,
)
from .fitting import FitResult, InsufficientStatistics, fit_exponent
from .lattice import SQRT3, BoxSpec, DomainError
from .rng import replicate_rng

CSV_FIELDS = ["observable", "model", "p", "n", "L", "boundary", "param", "value", "stderr",
              "replicates", "seed"]
OBSERVABLES = ("theta", "tau", "chi", "xi", "fliptail", "crossing")
SUITES = ("equivalence", "invariants", "bounds")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_STATS = 0, 1, 2, 3

DEFAULTS = {
    "seed": 0, "workers": 1, "out": None, "emit_plot_data": False,
    "model": "domany", "p": [0.5], "n": ["1"], "L": [64], "boundary": "periodic",
    "radius": None, "separations": None, "replicates": 100, "site": "B", "sites": ["B", "B"],
    "probes": 1, "n_max": 16, "window": [2, 12], "max_steps": None, "quick": False,
    "observable": None, "suite": None, "kind": "T", "records": None,
    "beta_p": [0.52, 0.54, 0.56, 0.58, 0.60], "nu_p": [0.35, 0.375, 0.40, 0.425, 0.45],
    "eta_separations": None, "nu_separations": [1, 2, 3, 4, 6, 8],
}
PLAN_KEYS = set(DEFAULTS) | {"command"}


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# argument parsing

def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--seed", type=int, default=S, help="master seed (recorded in every row)")
    p.add_argument("--workers", type=int, default=S, help="replicate worker processes")
    p.add_argument("--out", default=S, help="output file (directory for simulate)")
    p.add_argument("--plan", default=S, help="JSON experiment plan; flags override it")
    p.add_argument("--emit-plot-data", dest="emit_plot_data", action="store_true", default=S,
                   help="also write gnuplot-style whitespace columns")


def _add_grid(p: argparse.ArgumentParser, *, radius=False, seps=False) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--model", choices=MODELS + ("both",), default=S)
    p.add_argument("--p", type=float, nargs="+", default=S, help="p grid")
    p.add_argument("--n", nargs="+", default=S, help="time grid (integers or inf)")
    p.add_argument("--L", type=int, nargs="+", default=S, help="box sizes")
    p.add_argument("--boundary", choices=("periodic", "free"), default=S)
    p.add_argument("--replicates", type=int, default=S)
    if radius:
        p.add_argument("--radius", type=float, default=S,
                       help="Euclidean radius (default: quarter of the box side)")
        p.add_argument("--site", choices=("A", "B"), default=S)
        p.add_argument("--probes", type=int, default=S,
                       help="probe sites per replicate (square number)")
    if seps:
        p.add_argument("--separations", type=int, nargs="+", default=S,
                       help="pair separations in T-steps along the u-axis")
        p.add_argument("--sites", nargs=2, choices=("A", "B"), default=S)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="domany", description=__doc__.splitlines()[0])
    _add_common(ap)
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("simulate", help="run dynamics and write one trace CSV per replicate")
    _add_common(p)
    _add_grid(p)
    p.add_argument("--max-steps", dest="max_steps", type=int, default=argparse.SUPPRESS)

    p = sub.add_parser("measure", help="Monte Carlo estimates as CSV records")
    p.add_argument("observable", nargs="?", help=f"one of {', '.join(OBSERVABLES)}")
    _add_common(p)
    _add_grid(p, radius=True, seps=True)
    p.add_argument("--n-max", dest="n_max", type=int, default=argparse.SUPPRESS)
    p.add_argument("--window", type=int, nargs=2, default=argparse.SUPPRESS)
    p.add_argument("--kind", choices=("T", "H"), default=argparse.SUPPRESS)

    p = sub.add_parser("verify", help="run a verification suite, JSON report")
    p.add_argument("suite", nargs="?", help=f"one of {', '.join(SUITES)}")
    _add_common(p)
    _add_grid(p, seps=True)
    p.add_argument("--quick", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("exponents", help="fit beta, eta, nu for both models, JSON summary")
    _add_common(p)
    _add_grid(p)
    S = argparse.SUPPRESS
    p.add_argument("--beta-p", dest="beta_p", type=float, nargs="+", default=S)
    p.add_argument("--nu-p", dest="nu_p", type=float, nargs="+", default=S)
    p.add_argument("--eta-separations", dest="eta_separations", type=int, nargs="+", default=S)
    p.add_argument("--nu-separations", dest="nu_separations", type=int, nargs="+", default=S)
    p.add_argument("--records", default=S, help="fit these CSV records instead of simulating")
    return ap


def load_plan(path: str) -> dict:
    try:
        with open(path) as fh:
            plan = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read plan {path}: {exc}") from exc
    if not isinstance(plan, dict):
        raise UsageError("plan must be a JSON object")
    unknown = set(plan) - PLAN_KEYS
    if unknown:
        raise UsageError(f"unknown plan keys: {sorted(unknown)}")
    return plan


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then plan values, then explicit flags."""
    given = {k: v for k, v in vars(args).items() if v is not None}
    plan = load_plan(given.pop("plan")) if "plan" in given else {}
    cmd = given.pop("command", None)
    if cmd and plan.get("command") not in (None, cmd):
        raise UsageError(f"plan is for {plan['command']!r}, not {cmd!r}")
    cmd = cmd or plan.get("command")
    if cmd is None:
        raise UsageError("no command given")
    cfg = {**DEFAULTS, **{k: v for k, v in plan.items() if k != "command"}, **given}
    cfg["command"] = cmd
    for key in ("p", "n", "L"):
        if not isinstance(cfg[key], list):
            cfg[key] = [cfg[key]]
        if not cfg[key]:
            raise UsageError(f"empty {key} grid")
    try:
        cfg["n"] = [parse_time(n) for n in cfg["n"]]
    except (ValueError, DomainError) as exc:
        raise UsageError(str(exc)) from exc
    if cfg["replicates"] < 1:
        raise UsageError("replicates must be >= 1")
    if cfg["workers"] < 1:
        raise UsageError("workers must be >= 1")
    for p in cfg["p"]:
        if not 0.0 <= p <= 1.0:
            raise UsageError(f"p={p} outside [0, 1]")
    return cfg


# --------------------------------------------------------------------------
# output helpers

def _sort_key(r: ObservationRecord):
    return (r.observable, r.model, r.L, r.p, r.n, r.param)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in sorted(records, key=_sort_key):
        w.writerow({k: _fmt(v) for k, v in r.as_row().items()})
    return buf.getvalue()


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else v


def parse_records(text: str) -> list[ObservationRecord]:
    """Inverse of :func:`records_to_csv`."""
    rows = csv.DictReader(io.StringIO(text))
    if rows.fieldnames != CSV_FIELDS:
        raise UsageError(f"unexpected CSV header {rows.fieldnames}")
    out = []
    for row in rows:
        out.append(ObservationRecord(
            row["observable"], row["model"], float(row["p"]), parse_time(row["n"]),
            int(row["L"]), row["boundary"], float(row["param"]), float(row["value"]),
            float(row["stderr"]), int(row["replicates"]), int(row["seed"])))
    return out


def plot_columns(records) -> str:
    lines = ["# observable model p n L param value stderr"]
    for r in sorted(records, key=_sort_key):
        lines.append(f"{r.observable} {r.model} {r.p:g} {format_time(r.n)} {r.L} "
                     f"{r.param:g} {r.value:.10g} {r.stderr:.6g}")
    return "\n".join(lines) + "\n"


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def _plot_path(out):
    return None if out in (None, "-") else os.path.splitext(out)[0] + ".dat"


def _models(cfg):
    return list(MODELS) if cfg["model"] == "both" else [cfg["model"]]


# --------------------------------------------------------------------------
# simulate

def cmd_simulate(cfg) -> int:
    out = cfg["out"] or "traces"
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise UsageError(f"cannot write to {out}")
    summary = []
    for L in cfg["L"]:
        box = BoxSpec(L, L, cfg["boundary"])
        for p in cfg["p"]:
            fix = []
            for k in range(cfg["replicates"]):
                u = replicate_rng(cfg["seed"], k, 0).random((2, L, L))
                cfg0 = SpinConfiguration(box, bits.pack(u < p), 0)
                _, trace = run(cfg0, max_steps=cfg["max_steps"])
                stem = os.path.join(out, f"trace_L{L}_p{p:g}_k{k}")
                _write(stem + ".csv", trace.to_csv())
                if cfg["emit_plot_data"]:
                    _write(stem + ".dat", "# n flips energy\n" + "".join(
                        f"{n} {f} {e}\n" for n, f, e in
                        zip(trace.times, trace.flips, trace.energies)))
                fix.append(trace.fixation_time if trace.fixated else None)
            done = [t for t in fix if t is not None]
            summary.append({"L": L, "p": p, "replicates": cfg["replicates"],
                            "fixated": len(done),
                            "max_fixation_time": max(done) if done else None})
    _write(os.path.join(out, "summary.json"), json.dumps(summary, indent=2) + "\n")
    sys.stdout.write(json.dumps(summary) + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------
# measure

def _records_from(obs, model, ps, ns, L, boundary, params, samples, cfg, binomial):
    """``samples`` has shape ``(R, P, N, S)``."""
    v, se = _summary(samples, binomial)
    out = []
    for i, p in enumerate(ps):
        for j, n in enumerate(ns):
            for q, par in enumerate(params):
                out.append(ObservationRecord(obs, model, p, n if model == "domany" else 0, L,
                                             boundary, float(par), float(v[i, j, q]),
                                             float(se[i, j, q]), cfg["replicates"],
                                             cfg["seed"]))
    return out


def _measure(cfg, obs):
    records, fits = [], []
    R, seed, W = cfg["replicates"], cfg["seed"], cfg["workers"]
    for L in cfg["L"]:
        for model in _models(cfg):
            ns = cfg["n"] if model == "domany" else [0]
            if obs == "theta":
                radius = default_radius(L) if cfg["radius"] is None else cfg["radius"]
                s = theta_samples(cfg["p"], ns, L, radius, R, seed, model, cfg["site"],
                                  cfg["probes"], cfg["boundary"], W)
                records += _records_from("theta", model, cfg["p"], ns, L, cfg["boundary"],
                                         [radius], s[..., None], cfg, cfg["probes"] <= 1)
            elif obs in ("tau", "xi"):
                seps = cfg["separations"] or [1, 2, 4, 8]
                s = tau_samples(cfg["p"], ns, L, seps, R, seed, model, tuple(cfg["sites"]),
                                cfg["boundary"], W)
                binom = cfg["boundary"] != "periodic"
                records += _records_from("tau", model, cfg["p"], ns, L, cfg["boundary"],
                                         seps, s, cfg, binom)
                if obs == "xi":
                    for i, p in enumerate(cfg["p"]):
                        for j, n in enumerate(ns):
                            fit = xi_fit_from_samples(s[:, i, j, :], seps)
                            xi, err = correlation_length(fit)
                            records.append(ObservationRecord(
                                "xi", model, p, n if model == "domany" else 0, L,
                                cfg["boundary"], float("nan"), xi, err, R, seed))
                            fits.append(_fit_dict(fit, observable="xi", model=model, p=p,
                                                  n=format_time(n), L=L))
            elif obs == "chi":
                s = chi_samples(cfg["p"], ns, L, R, seed, model, W)
                records += _records_from("chi", model, cfg["p"], ns, L, "periodic",
                                         [float("nan")], s[..., None], cfg, False)
            elif obs == "crossing":
                s = crossing_samples(cfg["p"], ns, L, R, seed, model, cfg["kind"], workers=W)
                records += _records_from(f"crossing_{cfg['kind']}", model, cfg["p"], ns, L,
                                         "periodic", [float("nan")], s[..., None], cfg, True)
            elif obs == "fliptail":
                if model != "domany":
                    raise UsageError("flip tails are defined for the domany model only")
                for p in cfg["p"]:
                    ft = flip_tail(p, L, cfg["n_max"], R, seed, tuple(cfg["window"]), W)
                    records += ft.records
                    for name, fit in (("fliptail_A", ft.fit_A), ("fliptail_B", ft.fit_B)):
                        fits.append(_fit_dict(fit, observable=name, p=p, L=L)
                                    if fit else {"observable": name, "p": p, "L": L,
                                                 "status": "all-zero tail"})
    return records, fits


def _fit_dict(fit: FitResult, **meta) -> dict:
    return {**meta, "slope": fit.slope, "intercept": fit.intercept,
            "slope_stderr": fit.slope_stderr, "r_squared": fit.r_squared,
            "points_used": fit.points_used, "window": list(fit.window),
            "flags": list(fit.flags)}


def cmd_measure(cfg) -> int:
    obs = cfg["observable"]
    if obs not in OBSERVABLES:
        raise UsageError(f"measure needs an observable from {OBSERVABLES}")
    records, fits = _measure(cfg, obs)
    _write(cfg["out"], records_to_csv(records))
    if cfg["emit_plot_data"]:
        _write(_plot_path(cfg["out"]), plot_columns(records))
    if fits:
        text = json.dumps(fits, indent=2) + "\n"
        if cfg["out"] in (None, "-"):
            sys.stderr.write(text)
        else:
            _write(os.path.splitext(cfg["out"])[0] + ".fits.json", text)
    return EXIT_OK


# --------------------------------------------------------------------------
# verify

def cmd_verify(cfg) -> int:
    suite = cfg["suite"]
    if suite == "equivalence":
        report = verify.equivalence_suite()
    elif suite == "invariants":
        report = verify.invariants_suite(quick=cfg["quick"], seed=cfg["seed"])
    elif suite == "bounds":
        ps = cfg["p"] if cfg["p"] != DEFAULTS["p"] else [0.6]
        report = verify.bounds_suite(
            ps_theta=[p for p in ps if p > 0.5] or [0.6], ns=cfg["n"], L=cfg["L"][0],
            replicates=cfg["replicates"],
            ps_tau=[p for p in ps if 0 < p <= 0.5] or [0.5],
            rs=cfg["separations"] or [8, 16], seed=cfg["seed"], workers=cfg["workers"])
    else:
        raise UsageError(f"verify needs a suite from {SUITES}")
    _write(cfg["out"], json.dumps(report, indent=2) + "\n")
    return EXIT_OK if all(r["status"] == "pass" for r in report) else EXIT_FAIL


# --------------------------------------------------------------------------
# exponents

def default_eta_separations(L: int) -> list[int]:
    """Separations (T-steps) in the window ``[8, L/8]``."""
    grid = [8, 12, 16, 24, 32, 48, 64, 96, 128]
    return [r for r in grid if r <= max(8, L // 8)]


def _fit_or_flag(fn, *a):
    try:
        return _fit_dict(fn(*a)), True
    except (InsufficientStatistics, DomainError) as exc:
        return {"status": "insufficient statistics", "detail": str(exc)}, False


def _exponents_simulated(cfg):
    L, R, seed, W = cfg["L"][0], cfg["replicates"], cfg["seed"], cfg["workers"]
    eta_seps = cfg["eta_separations"] or default_eta_separations(L)
    out = {"L": L, "replicates": R, "seed": seed,
           "windows": {"beta_p": cfg["beta_p"], "eta_separations": eta_seps,
                       "nu_p": cfg["nu_p"], "nu_separations": cfg["nu_separations"]},
           "beta": {}, "eta": {}, "nu": {}}
    ok = True
    for model in MODELS:
        ns = cfg["n"] if model == "domany" else [0]
        th = theta_samples(cfg["beta_p"], ns, L, None, R, seed, model, probes=16, workers=W)
        ta = tau_samples([0.5], ns, L, eta_seps, R, seed, model, workers=W)
        nu = tau_samples(cfg["nu_p"], ns, L, cfg["nu_separations"], R, seed, model, workers=W)
        for j, n in enumerate(ns):
            key = model if model == "independent" else f"domany n={format_time(n)}"
            for name, fn, args in (
                ("beta", beta_fit, (cfg["beta_p"], th[:, :, j])),
                ("eta", eta_fit, (eta_seps, ta[:, 0, j, :])),
                ("nu", nu_fit, (cfg["nu_p"], cfg["nu_separations"], nu[:, :, j, :])),
            ):
                d, good = _fit_or_flag(fn, *args)
                if good:
                    # exponents are the slopes up to sign
                    sign = 1.0 if name == "beta" else -1.0
                    d["exponent"] = sign * d["slope"]
                out[name][key] = d
                ok &= good
    return out, ok


def _exponents_from_records(cfg):
    with open(cfg["records"]) as fh:
        recs = parse_records(fh.read())
    out = {"source": cfg["records"], "beta": {}, "eta": {}, "nu": {}}
    ok = True
    keys = sorted({(r.model, r.n) for r in recs})
    for model, n in keys:
        key = model if model == "independent" else f"domany n={format_time(n)}"
        sel = [r for r in recs if (r.model, r.n) == (model, n)]
        th = [(r.p - 0.5, r.value, r.stderr) for r in sel if r.observable == "theta" and r.p > 0.5]
        ta = [(SQRT3 * r.param, r.value, r.stderr) for r in sel
              if r.observable == "tau" and r.p == 0.5]
        xi = [(0.5 - r.p, r.value, r.stderr) for r in sel if r.observable == "xi" and r.p < 0.5]
        for name, pts, sign in (("beta", th, 1.0), ("eta", ta, -1.0), ("nu", xi, -1.0)):
            if not pts:
                continue
            d, good = _fit_or_flag(fit_exponent, pts, "loglog")
            if good:
                d["exponent"] = sign * d["slope"]
            out[name][key] = d
            ok &= good
    return out, ok


def _differences(out):
    diffs = {}
    for name in ("beta", "eta", "nu"):
        ref = out[name].get("independent")
        if not ref or "exponent" not in ref:
            continue
        for key, d in out[name].items():
            if key == "independent" or "exponent" not in d:
                continue
            delta = d["exponent"] - ref["exponent"]
            sig = math.hypot(d["slope_stderr"], ref["slope_stderr"])
            diffs[f"{name}: {key} - independent"] = {
                "difference": delta, "combined_stderr": sig,
                "within_3sigma": bool(abs(delta) <= 3 * sig)}
    return diffs


def cmd_exponents(cfg) -> int:
    if cfg["records"]:
        out, ok = _exponents_from_records(cfg)
    else:
        # both models always run through the same pipeline
        out, ok = _exponents_simulated(cfg)
    out["differences"] = _differences(out)
    out["complete"] = ok
    _write(cfg["out"], json.dumps(out, indent=2) + "\n")
    return EXIT_OK if ok else EXIT_STATS


# --------------------------------------------------------------------------

COMMANDS = {"simulate": cmd_simulate, "measure": cmd_measure, "verify": cmd_verify,
            "exponents": cmd_exponents}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[cfg["command"]](cfg)
    except UsageError as exc:
        print(f"domany: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, ValueError) as exc:
        print(f"domany: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InsufficientStatistics as exc:
        print(f"domany: insufficient statistics: {exc}", file=sys.stderr)
        return EXIT_STATS


if __name__ == "__main__":
    sys.exit(main())
