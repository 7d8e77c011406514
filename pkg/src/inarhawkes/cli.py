"""Command-line front end.

    inarhawkes simulate-hawkes --config model.json --seed 1 --out events.csv
    inarhawkes simulate-inar   --config model.json --seed 1 --out counts.csv
    inarhawkes theory          --config model.json
    inarhawkes converge        --config model.json --seed 1 --reps 10000 --out sweep.csv
    inarhawkes estimate        --config model.json --input counts.csv --out kernel.csv

The config is a JSON object holding either a Hawkes model
(``{"eta": ..., "kernel": {...}, "delta": ...}``) or explicit INAR parameters
(``{"inar": {"alpha0": ..., "alphas": [...]}}``) plus optional run fields
(``seed``, ``reps``, ``out``, ``window``, ``n_steps``, ...). Command-line flags
override config fields.

Exit codes: 0 success, 2 invalid configuration, 3 supercritical model,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _io
from .approx import DEFAULT_WINDOWS, convergence_sweep
from .core import CountSeries, InarParams, RngStream, discretize, model_from_json
from .errors import ConfigInvalid, InarHawkesError, Supercritical
from .estimate import estimate_kernel
from .hawkes import HawkesModel, simulate_hawkes_cluster, simulate_hawkes_thinning
from .inar import autocovariance, inar_mean, simulate_inar_branching_paths, simulate_inar_paths

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SUPERCRITICAL = 3
EXIT_IO = 4

COMMANDS = ("simulate-hawkes", "simulate-inar", "theory", "converge", "estimate")
DEFAULT_OUT = {
    "simulate-hawkes": "events.csv",
    "simulate-inar": "counts.csv",
    "converge": "sweep.csv",
    "estimate": "kernel.csv",
}


@dataclass
class RunConfig:
    command: str
    doc: dict = field(default_factory=dict)
    seed: int | None = None
    reps: int | None = None
    out: str | None = None

    def get(self, key, default=None):
        return self.doc.get(key, default)

    def rng(self, stream: int = 0):
        return None if self.seed is None else RngStream(self.seed, stream)


def _number(doc, key, kind=float, default=None, positive=False):
    if key not in doc:
        return default
    try:
        value = kind(doc[key])
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"invalid {key!r}: {doc[key]!r}") from exc
    if positive and not value > 0:
        raise ConfigInvalid(f"{key!r} must be positive")
    return value


def _window(value, name="window"):
    try:
        a, b = (float(x) for x in value)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"{name} must be a pair [a, b]") from exc
    if not a < b:
        raise ConfigInvalid(f"{name} needs a < b")
    return a, b


def _hawkes_model(cfg: RunConfig) -> tuple[HawkesModel, float | None]:
    eta, kernel, delta = model_from_json(cfg.doc)
    return HawkesModel(eta, kernel), delta


def _inar_params(cfg: RunConfig) -> tuple[InarParams, float]:
    """Explicit ``inar`` block, else the discretization of the Hawkes model."""
    if "inar" in cfg.doc:
        block = cfg.doc["inar"]
        if not isinstance(block, dict) or "alpha0" not in block:
            raise ConfigInvalid("'inar' needs an object with 'alpha0' and 'alphas'")
        try:
            params = InarParams(float(block["alpha0"]), [float(a) for a in block.get("alphas", [])])
        except (TypeError, ValueError) as exc:
            if isinstance(exc, Supercritical):
                raise
            raise ConfigInvalid(f"invalid 'inar' block: {exc}") from exc
        return params, _number(cfg.doc, "delta", default=1.0, positive=True)
    eta, kernel, delta = model_from_json(cfg.doc)
    if delta is None:
        raise ConfigInvalid("a Hawkes model needs 'delta' to define INAR parameters")
    horizon = _number(cfg.doc, "trunc_horizon", positive=True)
    return discretize(eta, kernel, delta, horizon), delta


def _out_path(cfg: RunConfig) -> Path:
    return Path(cfg.out or DEFAULT_OUT[cfg.command])


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


# --------------------------------------------------------------------------
# subcommands


def cmd_simulate_hawkes(cfg: RunConfig) -> str:
    model, _ = _hawkes_model(cfg)
    window = _window(cfg.get("window", [0.0, 100.0]))
    lookback = _number(cfg.doc, "lookback")
    method = cfg.get("method", "cluster")
    if method not in ("cluster", "thinning"):
        raise ConfigInvalid(f"unknown method {method!r}")
    reps = cfg.reps or 1
    path = _out_path(cfg)
    if reps == 1 and method == "cluster":
        real = simulate_hawkes_cluster(model, window, lookback, cfg.rng())
        real.to_csv(path)
        counts = [len(real.pattern)]
    else:
        rows, counts = [], []
        for r in range(reps):
            rng = cfg.rng(r)
            if method == "cluster":
                times = simulate_hawkes_cluster(model, window, lookback, rng).pattern.times
            else:
                times = simulate_hawkes_thinning(model, window, lookback, rng).times
            counts.append(len(times))
            rows.extend((r, t) for t in times)
        if reps == 1:
            text = _io.csv_text(("time",), ((t,) for _, t in rows))
        else:
            text = _io.csv_text(("rep", "time"), rows)
        _io.atomic_write(path, text)
    length = window[1] - window[0]
    rate = float(np.mean(counts)) / length
    return f"simulate-hawkes: reps={reps} events={sum(counts)} mean_rate={rate:.6g} target={model.mean_rate:.6g} -> {path}"


def cmd_simulate_inar(cfg: RunConfig) -> str:
    params, delta = _inar_params(cfg)
    n_steps = _number(cfg.doc, "n_steps", int, 1000, positive=True)
    burn_in = _number(cfg.doc, "burn_in", int)
    method = cfg.get("method", "recursion")
    reps = cfg.reps or 1
    if method == "recursion":
        paths = simulate_inar_paths(params, n_steps, reps, burn_in, cfg.rng(), cfg.get("counting", "poisson"))
    elif method == "branching":
        paths = simulate_inar_branching_paths(params, n_steps, reps, _number(cfg.doc, "lookback", int), cfg.rng())
    else:
        raise ConfigInvalid(f"unknown method {method!r}")
    path = _out_path(cfg)
    if reps == 1:
        CountSeries(delta, 0, paths[0]).to_csv(path)
    else:
        rows = ((r, n, int(x)) for r in range(reps) for n, x in enumerate(paths[r]))
        _io.atomic_write(path, _io.csv_text(("rep", "index", "count"), rows))
    return (
        f"simulate-inar: reps={reps} steps={n_steps} mean={paths.mean():.6g} "
        f"target={inar_mean(params):.6g} -> {path}"
    )


def cmd_theory(cfg: RunConfig) -> str:
    params, delta = _inar_params(cfg)
    max_lag = _number(cfg.doc, "max_lag", int, 1)
    if max_lag < 0:
        raise ConfigInvalid("'max_lag' must be >= 0")
    R = autocovariance(params, max_lag)
    mean = inar_mean(params)
    if cfg.out:
        doc = {"alpha0": params.alpha0, "K": params.K, "mean": mean, "R": [float(r) for r in R]}
        _io.atomic_write(cfg.out, _io.json_text(doc))
    lags = " ".join(f"R({j})={r:.6f}" for j, r in enumerate(R))
    return f"theory: K={params.K:.6g} mean {mean:.6g} {lags}"


def cmd_converge(cfg: RunConfig) -> str:
    model, _ = _hawkes_model(cfg)
    deltas = cfg.get("deltas", [0.2, 0.1, 0.05])
    try:
        deltas = [float(d) for d in deltas]
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid("'deltas' must be a list of numbers") from exc
    if not deltas or any(d <= 0 for d in deltas):
        raise ConfigInvalid("'deltas' must be a nonempty list of positive numbers")
    windows = tuple(_window(w, "windows entry") for w in cfg.get("windows", DEFAULT_WINDOWS))
    reps = cfg.reps or 10_000
    report = convergence_sweep(model, deltas, windows, reps, cfg.rng(), _number(cfg.doc, "trunc_horizon"))
    path = _out_path(cfg)
    report.to_csv(path)
    report.to_json(_sidecar(path))
    w1 = " ".join(f"w1[{r.delta:g}]={r.w1[0]:.4f}" for r in report.rows)
    return f"converge: reps={reps} {w1} -> {path}"


def cmd_estimate(cfg: RunConfig) -> str:
    source = cfg.get("input")
    if not source:
        raise ConfigInvalid("estimate needs an input count series ('input' or --input)")
    delta = _number(cfg.doc, "delta", default=1.0, positive=True)
    p = _number(cfg.doc, "p", int, 1)
    if p < 0:
        raise ConfigInvalid("'p' must be >= 0")
    try:
        series = CountSeries.from_csv(source, delta)
    except (ValueError, IndexError) as exc:
        raise ConfigInvalid(f"cannot read count series {source}: {exc}") from exc
    est = estimate_kernel(series, delta, p)
    path = _out_path(cfg)
    est.to_csv(path)
    est.header_json(_sidecar(path))
    return f"estimate: n={len(series)} p={p} eta_hat={est.eta_hat:.6g} K_hat={delta * est.h_hat.sum():.6g} -> {path}"


HANDLERS = {
    "simulate-hawkes": cmd_simulate_hawkes,
    "simulate-inar": cmd_simulate_inar,
    "theory": cmd_theory,
    "converge": cmd_converge,
    "estimate": cmd_estimate,
}


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inarhawkes", description="INAR and Hawkes simulation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--reps", type=int)
        sp.add_argument("--out")
        if name == "estimate":
            sp.add_argument("--input", help="count series CSV (index,count)")
            sp.add_argument("--p", type=int)
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    doc = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"{args.config}: invalid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise ConfigInvalid("config must be a JSON object")
    for key in ("input", "p"):
        if getattr(args, key, None) is not None:
            doc[key] = getattr(args, key)
    seed = args.seed if args.seed is not None else _number(doc, "seed", int)
    reps = args.reps if args.reps is not None else _number(doc, "reps", int)
    if reps is not None and reps <= 0:
        raise ConfigInvalid("reps must be positive")
    out = args.out if args.out is not None else doc.get("out")
    return RunConfig(args.command, doc, seed, reps, out)


def run(cfg: RunConfig) -> str:
    return HANDLERS[cfg.command](cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        print(run(cfg))
    except Supercritical as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SUPERCRITICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InarHawkesError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
