"""Command-line front end and Monte Carlo experiment harness.

Subcommands
-----------
denoise     Solve one signal at a fixed penalty or with automated selection.
synth       Write one synthetic (truth, indicator, observation) triple.
mcmc        Run the sampler on a signal and write MAP/MMSE reconstructions.
experiment  Sweep an axis over many seeded realizations into a CSV table.
metrics     Score an estimate against a truth file.

Exit codes: 0 success, 2 input or configuration error, 3 degenerate
selection, 4 sampler failure.

Signal files hold one real per line; blank lines and ``#`` comments are
ignored, and a single-column CSV is accepted. Indicator files hold one 0/1
entry per line. Experiment configurations are JSON with the schema checked
strictly (unknown keys are rejected); see the README for the field list.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import (SelectionError, heuristic_lambda, ic_select,
                        mad_sigma)
from .core import Hyperparameters, as_signal
from .dp import solve, solve_path
from .evalkit import (SynthConfig, change_point_jaccard, generate,
                      relative_mse, sigma_for_anr)
from .gibbs import SamplerError, estimators, run_chain
from .penalty import (DegenerateCriterionError, PenaltyContext, auto_select,
                      lambda_grid, residual_variance)

CSV_HEADER = ("method,axis,axis_value,seed,lambda_hat,mse,jaccard,"
              "k_hat,seconds,error")
METHODS = ("auto", "mcmc", "sicc", "aic", "sic", "aicc", "heuristic",
           "oracle_mse", "oracle_jaccard")
AXES = ("anr", "sigma", "p", "sigma0_sq")


# ---------------------------------------------------------------------------
# file formats

def read_signal(path: str) -> np.ndarray:
    """Parse a one-value-per-line signal file."""
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            item = line.split("#", 1)[0].strip().rstrip(",")
            if not item:
                continue
            try:
                values.append(float(item))
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: not a number: {item!r}") from None
    return as_signal(values)


def read_indicator(path: str) -> np.ndarray:
    """Parse a one-entry-per-line 0/1 indicator file."""
    raw = read_signal(path)
    r = raw.astype(np.int8)
    if not np.array_equal(raw, r) or not np.isin(r, (0, 1)).all():
        raise ValueError(f"{path}: indicator entries must be 0 or 1")
    if r[-1] != 1:
        raise ValueError(f"{path}: terminal indicator entry must be 1")
    return r


def write_signal(path: str, x: np.ndarray) -> None:
    with open(path, "w") as fh:
        for v in x:
            fh.write(f"{float(v)!r}\n")


def write_indicator(path: str, r: np.ndarray) -> None:
    with open(path, "w") as fh:
        for v in r:
            fh.write(f"{int(v)}\n")


# ---------------------------------------------------------------------------
# experiment configuration

@dataclass
class ExperimentConfig:
    """Validated sweep description; see :func:`config_from_dict`."""

    axis: str
    axis_values: list[float]
    n: int
    x_min: float
    x_max: float
    methods: list[str]
    realizations: int
    base_seed: int
    p: float | None = None
    sigma: float | None = None
    anr: float | None = None
    hold_anr: bool = False
    hyper: Hyperparameters = field(default_factory=Hyperparameters)
    grid_lo: float = 1e-5
    grid_hi: float = 1e5
    grid_count: int = 500
    tmc: int = 1000
    burn_in: int | None = None


_TOP_KEYS = {"axis", "axis_values", "n", "p", "x_min", "x_max", "sigma",
             "anr", "hold_anr", "hyper", "grid", "realizations", "base_seed",
             "methods", "tmc", "burn_in"}
_HYPER_KEYS = {"alpha0", "alpha1", "sigma0_sq", "mu0"}
_GRID_KEYS = {"lo", "hi", "count"}


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown {where} keys: {sorted(unknown)}")


def config_from_dict(d: dict) -> ExperimentConfig:
    """Build and validate an :class:`ExperimentConfig` from a JSON object.

    The sweep axis determines which base parameters are fixed: the swept
    one must be omitted. Noise is given either as ``sigma`` or as ``anr``
    (never both); with ``axis = "sigma"`` and ``hold_anr = true`` the
    amplitude range is rescaled per axis value so the ratio stays at the
    configured ``anr``.
    """
    if not isinstance(d, dict):
        raise ValueError("configuration must be a JSON object")
    _reject_unknown(d, _TOP_KEYS, "configuration")
    for key in ("axis", "axis_values", "n", "x_min", "x_max", "methods",
                "realizations", "base_seed"):
        if key not in d:
            raise ValueError(f"missing configuration key: {key}")
    axis = d["axis"]
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    values = [float(v) for v in d["axis_values"]]
    if not values:
        raise ValueError("axis_values must be non-empty")
    if axis == "p":
        if not all(0 <= v < 1 for v in values):
            raise ValueError("swept p values must lie in [0, 1)")
    elif not all(v > 0 for v in values):
        raise ValueError(f"swept {axis} values must be positive")

    methods = list(d["methods"])
    if not methods:
        raise ValueError("methods must be non-empty")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {METHODS}")

    hyper_d = dict(d.get("hyper", {}))
    _reject_unknown(hyper_d, _HYPER_KEYS, "hyper")
    if axis == "sigma0_sq" and "sigma0_sq" in hyper_d:
        raise ValueError("sigma0_sq is swept; remove it from hyper")
    hyper = Hyperparameters(**hyper_d)

    grid_d = dict(d.get("grid", {}))
    _reject_unknown(grid_d, _GRID_KEYS, "grid")
    grid_lo = float(grid_d.get("lo", 1e-5))
    grid_hi = float(grid_d.get("hi", 1e5))
    grid_count = int(grid_d.get("count", 500))
    lambda_grid(grid_lo, grid_hi, grid_count)  # validates bounds

    p = d.get("p")
    sigma = d.get("sigma")
    anr_v = d.get("anr")
    hold_anr = bool(d.get("hold_anr", False))
    if axis == "p":
        if p is not None:
            raise ValueError("p is swept; remove the fixed value")
    else:
        if p is None:
            raise ValueError("missing configuration key: p")
        p = float(p)
        if not 0 <= p < 1:
            raise ValueError("p must lie in [0, 1)")
    if axis in ("anr", "sigma"):
        if sigma is not None:
            raise ValueError("noise level is swept; remove 'sigma'")
        if axis == "anr" and anr_v is not None:
            raise ValueError("anr is swept; remove the fixed value")
        if axis == "sigma" and hold_anr and anr_v is None:
            raise ValueError("hold_anr requires a fixed 'anr' value")
    else:
        if (sigma is None) == (anr_v is None):
            raise ValueError("give exactly one of 'sigma' or 'anr'")
    if hold_anr and axis != "sigma":
        raise ValueError("hold_anr only applies to the sigma axis")

    x_min = float(d["x_min"])
    x_max = float(d["x_max"])
    if not x_min < x_max:
        raise ValueError("need x_min < x_max")
    realizations = int(d["realizations"])
    if realizations < 1:
        raise ValueError("realizations must be at least 1")
    tmc = int(d.get("tmc", 1000))
    if tmc < 2:
        raise ValueError("tmc must be at least 2")
    burn_in = d.get("burn_in")
    if burn_in is not None:
        burn_in = int(burn_in)
        if not 0 <= burn_in < tmc:
            raise ValueError("burn_in must lie in [0, tmc)")

    return ExperimentConfig(
        axis=axis, axis_values=values, n=int(d["n"]), x_min=x_min,
        x_max=x_max, methods=methods, realizations=realizations,
        base_seed=int(d["base_seed"]), p=p,
        sigma=None if sigma is None else float(sigma),
        anr=None if anr_v is None else float(anr_v), hold_anr=hold_anr,
        hyper=hyper, grid_lo=grid_lo, grid_hi=grid_hi,
        grid_count=grid_count, tmc=tmc, burn_in=burn_in)


def load_experiment_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON: {exc}") from None
    return config_from_dict(d)


def _cell_params(cfg: ExperimentConfig,
                 value: float) -> tuple[float, float, float, float,
                                        Hyperparameters]:
    """Resolve (p, sigma, x_min, x_max, hyper) for one axis value."""
    p, x_min, x_max, hyper = cfg.p, cfg.x_min, cfg.x_max, cfg.hyper
    if cfg.axis == "p":
        p = value
        sigma = (cfg.sigma if cfg.sigma is not None
                 else sigma_for_anr(x_min, x_max, cfg.anr))
    elif cfg.axis == "anr":
        sigma = sigma_for_anr(x_min, x_max, value)
    elif cfg.axis == "sigma":
        sigma = value
        if cfg.hold_anr:
            x_max = x_min + 3.0 * sigma * cfg.anr
    else:  # sigma0_sq
        sigma = (cfg.sigma if cfg.sigma is not None
                 else sigma_for_anr(x_min, x_max, cfg.anr))
        hyper = replace(hyper, sigma0_sq=value)
    return p, sigma, x_min, x_max, hyper


# ---------------------------------------------------------------------------
# harness

@dataclass
class RunRecord:
    """One method evaluation on one realization."""

    method: str
    axis: str
    axis_value: float
    seed: int
    lambda_hat: float | None
    mse: float | None
    jaccard: float | None
    k_hat: int | None
    seconds: float
    error: str = ""

    def csv_row(self) -> list[str]:
        def num(v):
            return "" if v is None else repr(float(v))

        return [self.method, self.axis, repr(float(self.axis_value)),
                str(self.seed), num(self.lambda_hat), num(self.mse),
                num(self.jaccard), "" if self.k_hat is None else str(self.k_hat),
                num(self.seconds), self.error]


def _evaluate(method: str, y, x_bar, r_bar, grid, ctx: PenaltyContext,
              tmc: int, burn_in: int | None, seed: int):
    """Run one method; returns (lambda_hat, x_hat, r_hat, k_hat, seconds).

    The timer wraps the complete method call, including its own path
    solves; nothing is shared between methods.
    """
    n = y.size
    t0 = time.perf_counter()
    if method == "auto":
        entry, _ = auto_select(y, grid, ctx)
        seconds = time.perf_counter() - t0
        sol = entry.solution
        return entry.lam, sol.x_hat, sol.seg.indicator, sol.seg.k, seconds
    if method == "heuristic":
        sig = mad_sigma(y)
        sol = solve(y, heuristic_lambda(n, sig * sig))
        seconds = time.perf_counter() - t0
        return sol.lam, sol.x_hat, sol.seg.indicator, sol.seg.k, seconds
    if method in ("aic", "sic", "aicc", "sicc"):
        sol = ic_select(y, grid, method)
        seconds = time.perf_counter() - t0
        return sol.lam, sol.x_hat, sol.seg.indicator, sol.seg.k, seconds
    if method == "mcmc":
        hyper = Hyperparameters(alpha0=ctx.hyper.alpha0,
                                alpha1=ctx.hyper.alpha1,
                                sigma0_sq=max(float(np.var(y)), 1e-12),
                                mu0=float(np.mean(y)))
        chain = run_chain(y, hyper, t_mc=tmc, seed=seed, burn_in=burn_in)
        _, x_mmse = estimators(chain)
        seconds = time.perf_counter() - t0
        post = chain.post_burn()
        best = post[int(np.argmin(chain.scores[chain.burn_in:]))]
        return None, x_mmse, best.r, best.k, seconds
    if method in ("oracle_mse", "oracle_jaccard"):
        path = solve_path(y, grid)
        if method == "oracle_mse":
            losses = [relative_mse(x_bar, s.x_hat) for s in path]
        else:
            losses = [change_point_jaccard(r_bar, s.seg.indicator)
                      for s in path]
        best = int(np.argmin(losses))
        seconds = time.perf_counter() - t0
        sol = path[best]
        return sol.lam, sol.x_hat, sol.seg.indicator, sol.seg.k, seconds
    raise ValueError(f"unknown method {method!r}")


def run_cell(cfg: ExperimentConfig, axis_index: int, realization: int,
             fixed_timing: bool = False) -> list[RunRecord]:
    """All configured methods on one (axis value, realization) cell."""
    value = cfg.axis_values[axis_index]
    p, sigma, x_min, x_max, hyper = _cell_params(cfg, value)
    seed = cfg.base_seed ^ (axis_index * cfg.realizations + realization)
    x_bar, r_bar, y = generate(SynthConfig(n=cfg.n, p=p, x_min=x_min,
                                           x_max=x_max, sigma=sigma,
                                           seed=seed))
    grid = lambda_grid(cfg.grid_lo, cfg.grid_hi, cfg.grid_count)
    ctx = PenaltyContext(n=cfg.n, hyper=hyper)
    records = []
    for method in cfg.methods:
        try:
            lam, x_hat, r_hat, k_hat, seconds = _evaluate(
                method, y, x_bar, r_bar, grid, ctx, cfg.tmc, cfg.burn_in,
                seed)
            rec = RunRecord(
                method=method, axis=cfg.axis, axis_value=value, seed=seed,
                lambda_hat=lam, mse=relative_mse(x_bar, x_hat),
                jaccard=change_point_jaccard(r_bar, r_hat), k_hat=k_hat,
                seconds=0.0 if fixed_timing else seconds)
        except (DegenerateCriterionError, SelectionError, SamplerError,
                ValueError) as exc:
            rec = RunRecord(
                method=method, axis=cfg.axis, axis_value=value, seed=seed,
                lambda_hat=None, mse=None, jaccard=None, k_hat=None,
                seconds=0.0, error=f"{type(exc).__name__}: {exc}")
        records.append(rec)
    return records


def _run_cell_task(args) -> tuple[tuple[int, int], list[RunRecord]]:
    cfg, ai, ri, fixed_timing = args
    return (ai, ri), run_cell(cfg, ai, ri, fixed_timing)


def worker_count() -> int:
    """Worker cap from the POTTS_THREADS environment variable (default 1)."""
    raw = os.environ.get("POTTS_THREADS", "1")
    try:
        w = int(raw)
    except ValueError:
        raise ValueError(f"POTTS_THREADS must be an integer, got {raw!r}")
    return max(w, 1)


def run_experiment(cfg: ExperimentConfig,
                   fixed_timing: bool = False) -> list[RunRecord]:
    """Run the full sweep; rows come back in canonical cell order
    regardless of how the work was scheduled."""
    cells = [(ai, ri) for ai in range(len(cfg.axis_values))
             for ri in range(cfg.realizations)]
    workers = worker_count()
    results: dict[tuple[int, int], list[RunRecord]] = {}
    if workers == 1 or len(cells) == 1:
        for ai, ri in cells:
            results[(ai, ri)] = run_cell(cfg, ai, ri, fixed_timing)
    else:
        tasks = [(cfg, ai, ri, fixed_timing) for ai, ri in cells]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for key, recs in pool.map(_run_cell_task, tasks):
                results[key] = recs
    records = []
    for key in sorted(results):
        records.extend(results[key])
    return records


def write_records(path: str, records: list[RunRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER.split(","))
        for rec in records:
            writer.writerow(rec.csv_row())


# ---------------------------------------------------------------------------
# subcommands

def _hyper_from_args(args) -> Hyperparameters:
    return Hyperparameters(alpha0=args.alpha0, alpha1=args.alpha1,
                           sigma0_sq=args.sigma0_sq)


def _parse_grid(spec: str) -> np.ndarray:
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError("grid must look like lo:hi:count")
    return lambda_grid(float(parts[0]), float(parts[1]), int(parts[2]))


def cmd_denoise(args) -> int:
    y = read_signal(args.input)
    if args.lam is not None:
        sol = solve(y, args.lam)
        print(f"lambda = {sol.lam!r}")
        print(f"k_hat = {sol.seg.k}")
        print(f"objective = {sol.objective!r}")
        print(f"sigma_hat_sq = {residual_variance(y, sol.x_hat)!r}")
        x_hat = sol.x_hat
    else:
        grid = _parse_grid(args.grid)
        ctx = PenaltyContext(n=y.size, hyper=_hyper_from_args(args))
        entry, _ = auto_select(y, grid, ctx)
        print(f"lambda_hat = {entry.lam!r}")
        print(f"sigma_hat_sq = {entry.sigma_hat_sq!r}")
        print(f"k_hat = {entry.solution.seg.k}")
        print(f"f_value = {entry.f_value!r}")
        x_hat = entry.solution.x_hat
    if args.out:
        write_signal(args.out, x_hat)
    return 0


def cmd_synth(args) -> int:
    lo, _, hi = args.range.partition(",")
    try:
        x_min, x_max = float(lo), float(hi)
    except ValueError:
        raise ValueError(f"range must look like lo,hi, got {args.range!r}")
    cfg = SynthConfig(n=args.n, p=args.p, x_min=x_min, x_max=x_max,
                      sigma=args.sigma, seed=args.seed)
    x_bar, r_bar, y = generate(cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    write_signal(os.path.join(args.out_dir, "y.csv"), y)
    write_signal(os.path.join(args.out_dir, "xbar.csv"), x_bar)
    write_indicator(os.path.join(args.out_dir, "rbar.csv"), r_bar)
    print(f"wrote y.csv, xbar.csv, rbar.csv to {args.out_dir}")
    return 0


def cmd_mcmc(args) -> int:
    y = read_signal(args.input)
    sigma0_sq = args.sigma0_sq
    if sigma0_sq is None:
        sigma0_sq = max(float(np.var(y)), 1e-12)
    mu0 = float(np.mean(y)) if args.mu0 is None else args.mu0
    hyper = Hyperparameters(alpha0=args.alpha0, alpha1=args.alpha1,
                            sigma0_sq=sigma0_sq, mu0=mu0)
    chain = run_chain(y, hyper, t_mc=args.tmc, seed=args.seed,
                      burn_in=args.burn_in)
    x_map, x_mmse = estimators(chain)
    os.makedirs(args.out_dir, exist_ok=True)
    write_signal(os.path.join(args.out_dir, "x_map.csv"), x_map)
    write_signal(os.path.join(args.out_dir, "x_mmse.csv"), x_mmse)
    post = chain.post_burn()
    ks = np.array([s.k for s in post])
    print(f"t_mc = {args.tmc}")
    print(f"burn_in = {chain.burn_in}")
    print(f"seed = {chain.seed}")
    print(f"k_mode = {int(np.bincount(ks).argmax())}")
    print(f"map_score = {float(np.min(chain.scores[chain.burn_in:]))!r}")
    print(f"median_sigma_sq = "
          f"{float(np.median([s.sigma_sq for s in post]))!r}")
    print(f"median_p = {float(np.median([s.p for s in post]))!r}")
    print(f"zero_scale_draws = {chain.zero_scale_draws}")
    return 0


def cmd_experiment(args) -> int:
    cfg = load_experiment_config(args.config)
    records = run_experiment(cfg, fixed_timing=args.fixed_timing)
    write_records(args.out, records)
    failures = sum(1 for r in records if r.error)
    print(f"wrote {len(records)} rows to {args.out}"
          + (f" ({failures} failed)" if failures else ""))
    return 0


def cmd_metrics(args) -> int:
    if args.kind == "mse":
        truth = read_signal(args.truth)
        est = read_signal(args.estimate)
        print(f"mse = {relative_mse(truth, est)!r}")
    else:
        truth = read_indicator(args.truth)
        est = read_indicator(args.estimate)
        print(f"jaccard = {change_point_jaccard(truth, est)!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="potts1d",
        description="Piecewise-constant denoising with automated "
                    "jump-penalty selection.")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("denoise", help="denoise one signal")
    d.add_argument("--input", required=True)
    mode = d.add_mutually_exclusive_group()
    mode.add_argument("--auto", action="store_true",
                      help="automated penalty selection (default)")
    mode.add_argument("--lambda", dest="lam", type=float,
                      help="fixed penalty value")
    d.add_argument("--grid", default="1e-5:1e5:500",
                   help="selection grid as lo:hi:count")
    d.add_argument("--alpha0", type=float, default=1.0)
    d.add_argument("--alpha1", type=float, default=1.0)
    d.add_argument("--sigma0-sq", dest="sigma0_sq", type=float,
                   default=Hyperparameters().sigma0_sq)
    d.add_argument("--out", help="write the denoised signal here")
    d.set_defaults(func=cmd_denoise)

    s = sub.add_parser("synth", help="generate a synthetic signal")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--range", required=True, help="amplitude range lo,hi")
    s.add_argument("--sigma", type=float, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out-dir", default=".")
    s.set_defaults(func=cmd_synth)

    m = sub.add_parser("mcmc", help="run the sampler on a signal")
    m.add_argument("--input", required=True)
    m.add_argument("--tmc", type=int, default=1000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    m.add_argument("--alpha0", type=float, default=1.0)
    m.add_argument("--alpha1", type=float, default=1.0)
    m.add_argument("--mu0", type=float, default=None,
                   help="amplitude-prior mean (default: signal mean)")
    m.add_argument("--sigma0-sq", dest="sigma0_sq", type=float, default=None,
                   help="amplitude-prior variance (default: signal variance)")
    m.add_argument("--out-dir", default=".")
    m.set_defaults(func=cmd_mcmc)

    e = sub.add_parser("experiment", help="run a configured sweep")
    e.add_argument("--config", required=True)
    e.add_argument("--out", default="results.csv")
    e.add_argument("--fixed-timing", action="store_true",
                   help="write 0 in the seconds column for "
                        "byte-reproducible output")
    e.set_defaults(func=cmd_experiment)

    t = sub.add_parser("metrics", help="score an estimate against truth")
    t.add_argument("--truth", required=True)
    t.add_argument("--estimate", required=True)
    t.add_argument("--kind", choices=("mse", "jaccard"), default="mse")
    t.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DegenerateCriterionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except SelectionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except SamplerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
