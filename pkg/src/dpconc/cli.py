"""Command-line experiment runner.

Every subcommand writes one CSV.  Leading ``#`` lines carry metadata (scenario,
seed, trials, resolved parameters and, unless ``--no-timestamp``, the wall
clock time); the next line is the column header.  Exit codes: 0 success,
1 a verification check failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import os
import sys
import tempfile
from typing import Any, NamedTuple, Optional, Sequence

import numpy as np

from . import bounds as B
from .adversary import overfit_experiment
from .applications import pareto as P
from .applications import subgaussian as SG
from .applications import triangles as G
from .core import DomainDistribution, RngStream, sample_sum
from .estimators import empirical_tails, estimate_delta, estimate_mean, estimate_tau, set_threads
from .verify import CHECKS, CheckRow, run_all

SCENARIOS = ("bounds", "estimate", "mechanisms", "attack", "pareto", "subgaussian", "triangles", "verify-all")

DEFAULT_SEED = 42

# scenario -> (default parameters, default trials)
DEFAULTS: dict[str, tuple[dict, int]] = {
    "bounds": ({"lam": 1.0, "delta": 1e-4, "tau": 1.0, "n": 100000, "eps_min": 0.01, "eps_max": 2.0,
                "points": 20, "target": 0.0}, 0),
    "estimate": ({"dist": "rademacher", "p": 0.5, "n": 50, "lam": 2.0, "n_databases": 16}, 10000),
    "mechanisms": ({}, 0),
    "attack": ({"n": 100, "d": 5000, "beta": 0.5, "magnitude": 1.0, "epsilon": 2.0}, 200),
    "pareto": ({"n": 100, "t_min": 1e3, "t_max": 1e5, "points": 5, "variant": "instantiated"}, 100000),
    "subgaussian": ({"n": 10000, "t_min_frac": 0.05, "t_max_frac": 2.0, "points": 6}, 2000),
    "triangles": ({"N": 100, "alphas": [0.5, 1.0, 2.0]}, 500),
    "verify-all": ({"only": []}, 0),
}

META_KEYS = ("seed", "trials", "threads")

BOUND_COLUMNS = ("t", "numeric_bound", "paper_display_bound", "reference_bound", "empirical_tail", "std_error")
SUMMARY_COLUMNS = CheckRow._fields


class UsageError(Exception):
    pass


class BoundRow(NamedTuple):
    t: float
    numeric_bound: float
    paper_display_bound: float
    reference_bound: float
    empirical_tail: float
    std_error: float


# configuration ------------------------------------------------------------------


def _coerce(key: str, value: Any, default: Any) -> Any:
    try:
        if isinstance(default, bool):
            if isinstance(value, str):
                return value.lower() in ("1", "true", "yes")
            return bool(value)
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, list):
            if isinstance(value, str):
                value = [v for v in value.split(",") if v]
            if not isinstance(value, list):
                value = [value]
            if default and isinstance(default[0], float):
                return [float(v) for v in value]
            return [int(v) for v in value] if not default else list(value)
        return str(value)
    except (TypeError, ValueError):
        raise UsageError(f"bad value for key '{key}': {value!r}") from None


def _parse_set(items: Sequence[str]) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got '{item}'")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = json.loads(v)
        except json.JSONDecodeError:
            out[k.strip()] = v
    return out


def resolve_config(scenario: str, file_cfg: dict, overrides: dict, cli_meta: dict) -> tuple[dict, dict]:
    """Merge defaults < file < command line; reject keys the scenario does not know."""
    params, default_trials = DEFAULTS[scenario]
    meta = {"seed": DEFAULT_SEED, "trials": default_trials, "threads": 0}
    merged = dict(params)
    for source in (file_cfg, overrides):
        for k, v in source.items():
            if k in META_KEYS:
                meta[k] = _coerce(k, v, meta[k])
            elif k in params:
                merged[k] = _coerce(k, v, params[k])
            else:
                raise UsageError(f"unknown config key '{k}' for scenario '{scenario}'")
    for k, v in cli_meta.items():
        if v is not None:
            meta[k] = v
    if not 0 <= meta["seed"] < 2 ** 64:
        raise UsageError("seed must be a 64-bit unsigned integer")
    if meta["trials"] < 0:
        raise UsageError("trials must be positive")
    return merged, meta


# output -----------------------------------------------------------------------------


def _fmt(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def render_csv(columns: Sequence[str], rows: Sequence[Sequence[Any]], meta_lines: Sequence[str]) -> str:
    buf = io.StringIO()
    for line in meta_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".dpconc-", suffix=".csv", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_bound_table(rows: Sequence[BoundRow]) -> tuple[tuple[str, ...], list[BoundRow]]:
    """Fixed header and rows sorted by t."""
    return BOUND_COLUMNS, sorted(rows, key=lambda r: r.t)


# scenarios ------------------------------------------------------------------------


def run_bounds(p: dict, meta: dict):
    prof = B.SensitivityProfile(p["lam"], p["delta"], p["tau"])
    cols = ("kind", "epsilon", "threshold", "probability", "valid", "required_n")
    rows = []
    for eps in np.geomspace(p["eps_min"], p["eps_max"], p["points"]):
        b = B.high_prob_bound(prof, float(eps), p["n"])
        rows.append(("grid", eps, b.threshold, b.probability, b.valid, b.required_n))
    if p["target"] > 0:
        eps, b = B.optimize_epsilon(prof, p["n"], B.Mode.MIN_PROB_AT_THRESHOLD, p["target"])
        rows.append(("optimized", eps, b.threshold, b.probability, b.valid, b.required_n))
    return cols, rows, None


def _dist(p: dict) -> DomainDistribution:
    name = p["dist"]
    if name == "rademacher":
        return DomainDistribution.rademacher()
    if name == "bernoulli":
        return DomainDistribution.bernoulli(p["p"])
    if name in ("pareto", "symmetric_pareto"):
        return DomainDistribution.symmetric_pareto()
    raise UsageError(f"unknown distribution '{name}'")


def run_estimate(p: dict, meta: dict):
    rng = RngStream(meta["seed"])
    dist, f, trials = _dist(p), sample_sum(), meta["trials"]
    d = estimate_delta(f, dist, p["lam"], p["n"], trials, rng.split(0)).summary
    t = estimate_tau(f, dist, p["lam"], p["n"], rng.split(1), n_databases=p["n_databases"],
                     trials_per_database=max(2, trials // p["n_databases"])).estimate
    m = estimate_mean(f, dist, p["n"], trials, rng.split(2))
    cols = ("quantity", "estimate", "std_error", "trials")
    return cols, [("delta", d.mean, d.std_error, d.trials), ("tau", t.mean, t.std_error, t.trials),
                  ("mean", m.mean, m.std_error, m.trials)], None


def run_mechanisms(p: dict, meta: dict):
    rows = run_all(meta["seed"], meta["trials"] or None, only={1, 2, 3, 4, 5})
    return SUMMARY_COLUMNS, rows, None


def run_attack(p: dict, meta: dict):
    rep = overfit_experiment(p["n"], p["d"], p["beta"], p["magnitude"], p["epsilon"], meta["trials"],
                             RngStream(meta["seed"]))
    col, freq, se = rep.worst_fixed_column()
    cols = ("quantity", "estimate", "std_error", "trials")
    rows = [
        ("freq_nonzero_on_sample", rep.freq_nonzero_on_S.mean, rep.freq_nonzero_on_S.std_error, rep.trials),
        ("freq_nonzero_on_fresh", rep.freq_nonzero_on_fresh.mean, rep.freq_nonzero_on_fresh.std_error, rep.trials),
        ("freq_utility_event", rep.freq_utility_event.mean, rep.freq_utility_event.std_error, rep.trials),
        ("worst_fixed_column_freq", freq, se, rep.trials),
        ("mean_selected_abs_sum", rep.mean_selected_abs_sum.mean, rep.mean_selected_abs_sum.std_error, rep.trials),
        ("mean_max_abs_sum", rep.mean_max_abs_sum.mean, rep.mean_max_abs_sum.std_error, rep.trials),
        ("theta", rep.theta, 0.0, rep.trials),
    ]
    return cols, rows, None


def run_pareto(p: dict, meta: dict):
    n = p["n"]
    ts = [float(t) for t in np.geomspace(p["t_min"], p["t_max"], p["points"])]
    tails = empirical_tails(sample_sum(), DomainDistribution.symmetric_pareto(), n, ts, meta["trials"],
                            RngStream(meta["seed"]), 0.0)
    rows = []
    for t, e in zip(ts, tails):
        first, second = P.display_forms(n, t)
        rows.append(BoundRow(t, P.pareto_tail_bound(n, t, p["variant"]).probability, second, first, e.mean,
                             e.std_error))
    cols, rows = emit_bound_table(rows)
    notes = [f"variant: {P.Variant(p['variant']).value}",
             "paper_display_bound: n^2/t^3 (t <= n) or n/t^2; reference_bound: n^1.5/t^2"]
    return cols, rows, notes


def run_subgaussian(p: dict, meta: dict):
    # Rademacher sample sum with rho = |x - y|: sigma = sqrt(2) exactly
    n, sigma = p["n"], math.sqrt(2.0)
    ts = [float(t) for t in np.geomspace(p["t_min_frac"] * n, p["t_max_frac"] * n, p["points"])]
    tails = empirical_tails(sample_sum(), DomainDistribution.rademacher(), n, ts, meta["trials"],
                            RngStream(meta["seed"]), 0.0)
    rows = [BoundRow(t, SG.subgaussian_tail_bound(sigma, n, t).probability, SG.display_form(sigma, n, t),
                     SG.kontorovich_reference(sigma, n, t), e.mean, e.std_error) for t, e in zip(ts, tails)]
    cols, rows = emit_bound_table(rows)
    return cols, rows, ["scenario: Rademacher sample sum, rho = |x - y|, sigma = sqrt(2)",
                        "paper_display_bound: constant-1 display form; reference_bound: 2 exp(-t^2 / (2 n sigma^2))"]


def run_triangles(p: dict, meta: dict):
    rep = G.triangle_experiment(p["N"], meta["trials"], RngStream(meta["seed"]), alphas=tuple(p["alphas"]))
    lower, upper = rep.kimvu
    rows = [BoundRow(a * rep.expected, rep.bounds[a].probability, upper, lower, rep.tails[a].mean,
                     rep.tails[a].std_error) for a in rep.tails]
    cols, rows = emit_bound_table(rows)
    return cols, rows, [f"N: {rep.N}, p: {_fmt(rep.p)}, lambda: {_fmt(rep.lam)}, expected_count: {_fmt(rep.expected)}",
                        "paper_display_bound: exp(-p^2 N^2); reference_bound: exp(-p^2 N^2 log(1/p))"]


def run_verify_all(p: dict, meta: dict):
    only = set(p["only"]) or None
    if only is not None and not only <= set(CHECKS):
        raise UsageError(f"unknown check ids {sorted(only - set(CHECKS))}")
    return SUMMARY_COLUMNS, run_all(meta["seed"], meta["trials"] or None, only=only), None


RUNNERS = {
    "bounds": run_bounds,
    "estimate": run_estimate,
    "mechanisms": run_mechanisms,
    "attack": run_attack,
    "pareto": run_pareto,
    "subgaussian": run_subgaussian,
    "triangles": run_triangles,
    "verify-all": run_verify_all,
}


# entry point ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dpconc", description="Concentration-via-privacy experiment runner.")
    ap.add_argument("scenario", choices=SCENARIOS)
    ap.add_argument("--config", help="JSON file of parameters")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one parameter")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--trials", type=int)
    ap.add_argument("--out", help="output CSV path (default: stdout)")
    ap.add_argument("--threads", type=int, help="worker thread cap (default: all cores)")
    ap.add_argument("--no-timestamp", action="store_true", help="omit the timestamp header line")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        file_cfg = {}
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    file_cfg = json.load(fh)
            except (OSError, json.JSONDecodeError) as e:
                raise UsageError(f"cannot read config '{args.config}': {e}") from None
            if not isinstance(file_cfg, dict):
                raise UsageError("config must be a JSON object")
        params, meta = resolve_config(args.scenario, file_cfg, _parse_set(args.set),
                                      {"seed": args.seed, "trials": args.trials, "threads": args.threads})
        set_threads(meta["threads"] or None)
        cols, rows, notes = RUNNERS[args.scenario](params, meta)
    except UsageError as e:
        print(f"dpconc: error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"dpconc: error: {e}", file=sys.stderr)
        return 2

    lines = [f"scenario: {args.scenario}", f"seed: {meta['seed']}",
             f"trials: {meta['trials'] if meta['trials'] else 'per-check defaults'}",
             "params: " + json.dumps(params, sort_keys=True)]
    lines += notes or []
    if not args.no_timestamp:
        lines.append("generated: " + _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))
    text = render_csv(cols, rows, lines)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)

    if cols == SUMMARY_COLUMNS and args.scenario == "verify-all":
        return 0 if all(r.holds for r in rows) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
