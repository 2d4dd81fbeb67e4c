"""Command line entry point: ``run``, ``compare``, ``oracle-check`` and
``gen-synthetic``.

Config keys can come from a file (``--config``) and be overridden by flags
of the same dotted name, e.g. ``--schedule.r_beta 1.05``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .config import AUTO, KEYS, ConfigError, fresh_seed, load_config, validate
from .data import DataError, gen_synthetic, load_dataset
from .energy import MODELS, MoGNIWModel, NIWPrior
from .oracle import OracleSizeError, lemma_report
from .sampler import TRACE_FIELDS, SamplerConfig, equal_budget_compare, run, sa_chain_seed
from .schedule import ScheduleError, ScheduleParams, default_params

__all__ = ["main", "run_command", "resolve", "write_trace", "format_number"]

EXIT_OK, EXIT_FAILED, EXIT_ERROR = 0, 1, 2


def format_number(x):
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


def write_trace(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for rec in trace:
            row = []
            for name, value in zip(TRACE_FIELDS, rec.as_row()):
                if name == "iteration":
                    row.append(str(value))
                elif name == "past_beta_m":
                    row.append("1" if value else "0")
                else:
                    row.append(format_number(value))
            w.writerow(row)


def write_json(path, obj):
    # json writes floats with repr, the shortest string that round-trips
    Path(path).write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n")


def _resolve_prior(cfg, X):
    d = X.shape[1]
    nu0 = None if cfg["model.nu0"] == AUTO else cfg["model.nu0"]
    try:
        prior = NIWPrior.default(X, kappa0=cfg["model.kappa0"], nu0=nu0, alpha=cfg["model.alpha"])
    except ValueError as exc:
        raise ConfigError([f"model: {exc}"]) from exc
    mu0, lam = prior.mu0, prior.lambda0
    problems = []
    if cfg["model.mu0"] != AUTO:
        mu0 = np.asarray(cfg["model.mu0"], dtype=np.float64)
        if mu0.size != d:
            problems.append(f"model.mu0: expected {d} values, got {mu0.size}")
    if cfg["model.lambda0"] != AUTO:
        vals = np.asarray(cfg["model.lambda0"], dtype=np.float64)
        if vals.size == d:
            lam = np.diag(vals)
        elif vals.size == d * d:
            lam = vals.reshape(d, d)
        else:
            problems.append(f"model.lambda0: expected {d} or {d * d} values, got {vals.size}")
    if problems:
        raise ConfigError(problems)
    try:
        return NIWPrior(mu0=mu0, kappa0=prior.kappa0, nu0=prior.nu0, lambda0=lam, alpha=prior.alpha)
    except ValueError as exc:
        raise ConfigError([f"model: {exc}"]) from exc


def _resolve_schedules(cfg, n):
    k, m, r_beta = cfg["k"], cfg["m"], cfg["schedule.r_beta"]
    mode = cfg["mode"]
    beta0 = cfg["schedule.beta0"]
    hold = float(m) if cfg["schedule.beta_hold_target"] == AUTO else cfg["schedule.beta_hold_target"]
    r_gamma = 1.05 * r_beta if cfg["schedule.r_gamma"] == AUTO else cfg["schedule.r_gamma"]
    replica_beta0 = beta0 if mode != "sa" and beta0 != AUTO else 0.2 * m
    if mode == "sa" and beta0 != AUTO:
        sa_beta0 = beta0
    elif cfg["schedule.sa_beta0"] != AUTO:
        sa_beta0 = cfg["schedule.sa_beta0"]
    else:
        sa_beta0 = 0.2
    gamma0 = cfg["schedule.gamma0"]
    if gamma0 == AUTO:
        gamma0 = default_params(
            n, k, m, r_beta, beta_hold_target=hold, r_gamma=r_gamma, replica_beta0=replica_beta0
        ).gamma0
    qa = ScheduleParams(replica_beta0, r_beta, gamma0, r_gamma, m, n, k)
    sa = ScheduleParams(sa_beta0, r_beta, gamma0, r_gamma, m, n, k)
    resolved = {
        "schedule.beta0": sa_beta0 if mode == "sa" else replica_beta0,
        "schedule.sa_beta0": sa_beta0,
        "schedule.gamma0": gamma0,
        "schedule.r_gamma": r_gamma,
        "schedule.beta_hold_target": hold,
    }
    return qa, sa, resolved


def resolve(cfg):
    """Load the data and resolve every ``auto`` field.

    Returns ``(echo, X, model_factory, qa_schedule, sa_schedule)`` where
    ``echo`` is the complete flat config with concrete values.
    """
    echo = dict(cfg)
    if echo["seed"] is None:
        echo["seed"] = fresh_seed()
    if echo["seeds"] == AUTO:
        echo["seeds"] = [echo["seed"] + i for i in range(echo["compare.n_seeds"])]
    if echo["mode"] == "oracle-check":
        return echo, None, None, None, None

    X = load_dataset(cfg["data.path"], cfg["data.format"])
    if cfg["k"] > X.shape[0]:
        raise ConfigError([f"k: {cfg['k']} clusters for only {X.shape[0]} points"])
    if cfg["model.type"] == "mog_niw":
        prior = _resolve_prior(cfg, X)
        echo.update(
            {
                "model.kappa0": prior.kappa0,
                "model.nu0": float(prior.nu0),
                "model.alpha": prior.alpha,
                "model.mu0": prior.mu0.tolist(),
                "model.lambda0": prior.lambda0.ravel().tolist(),
            }
        )

        def factory(data, k):
            return MoGNIWModel(data, k, prior)

    else:
        factory = MODELS[cfg["model.type"]]
    qa, sa, sched = _resolve_schedules(cfg, X.shape[0])
    echo.update(sched)
    return echo, X, factory, qa, sa


def _sampler_config(echo, mode, seed, max_iters=None):
    return SamplerConfig(
        seed=seed,
        max_iters=echo["max_iters"] if max_iters is None else max_iters,
        window=echo["convergence.window"],
        tol=echo["convergence.tol"],
        mode=mode,
        m=echo["m"],
        block_order=echo["sampler.block_order"],
    )


def _result_doc(res, mode, seed, echo):
    return {
        "mode": mode,
        "seed": seed,
        "labels": res.labels.tolist(),
        "energy": res.energy,
        "best_energy_ever": res.trace[-1].best_energy_ever,
        "iterations": res.iterations,
        "termination": res.termination,
        "replica_sweeps": res.replica_sweeps,
        "replica_energies": list(res.replica_energies),
        "config": echo,
    }


def _write_run(outdir, res, mode, seed, echo):
    outdir.mkdir(parents=True, exist_ok=True)
    write_trace(outdir / "trace.csv", res.trace)
    write_json(outdir / "result.json", _result_doc(res, mode, seed, echo))


def _run_mode(echo, X, factory, qa, sa, outdir):
    mode = echo["mode"]
    schedule = qa if mode == "qast" else sa
    res = run(factory, X, echo["k"], schedule, _sampler_config(echo, mode, echo["seed"]))
    _write_run(outdir, res, mode, echo["seed"], echo)
    print(f"{mode}: energy {format_number(res.energy)} after {res.iterations} iterations ({res.termination})")
    return EXIT_OK


def _compare_mode(echo, X, factory, qa, sa, outdir):
    seeds = echo["seeds"]
    cmp = equal_budget_compare(factory, X, echo["k"], qa, sa, _sampler_config(echo, "qast", seeds[0]), seeds)
    outdir.mkdir(parents=True, exist_ok=True)
    for seed in seeds:
        sub = outdir / f"seed_{seed}"
        qa_echo = dict(echo, mode="qast", seed=seed)
        _write_run(sub / "qast", cmp.qa_runs[seed], "qast", seed, qa_echo)
        for c, res in enumerate(cmp.sa_runs[seed]):
            chain_seed = sa_chain_seed(seed, c)
            sa_echo = dict(
                echo,
                mode="sa",
                seed=chain_seed,
                **{"schedule.beta0": sa.beta0},
                max_iters=res.iterations if res.termination == "max_iters" else echo["max_iters"],
            )
            _write_run(sub / f"sa_{c}", res, "sa", chain_seed, sa_echo)
    rows = [
        {
            "seed": r.seed,
            "qa_energy": r.qa_energy,
            "sa_energy": r.sa_energy,
            "sa_chains": r.sa_chains,
            "qa_sweeps": r.qa_sweeps,
            "sa_sweeps": r.sa_sweeps,
            "qa_iterations": r.qa_iterations,
            "qa_wins": r.qa_wins,
        }
        for r in cmp.rows
    ]
    doc = {
        "config": echo,
        "seeds": seeds,
        "rows": rows,
        "qa_median": cmp.qa_median,
        "sa_median": cmp.sa_median,
        "win_rate": cmp.win_rate,
    }
    write_json(outdir / "comparison.json", doc)
    print(
        f"compare: win rate {cmp.win_rate:.3f} over {len(seeds)} seeds, "
        f"median QA-ST {format_number(cmp.qa_median)} vs SA {format_number(cmp.sa_median)}"
    )
    return EXIT_OK


def _oracle_mode(echo, outdir):
    report = lemma_report(echo["seed"], echo["oracle.draws"])
    report["config"] = echo
    outdir.mkdir(parents=True, exist_ok=True)
    write_json(outdir / "oracle.json", report)
    status = "ok" if report["passed"] else "FAILED"
    print(f"oracle-check: max deviation {report['max_deviation']:.3e} (tolerance {report['tolerance']:g}) {status}")
    return EXIT_OK if report["passed"] else EXIT_FAILED


def run_command(cfg):
    """Execute a validated config; returns the process exit status."""
    start = time.perf_counter()
    echo, X, factory, qa, sa = resolve(cfg)
    outdir = Path(echo["output.dir"])
    mode = echo["mode"]
    if mode == "oracle-check":
        status = _oracle_mode(echo, outdir)
    elif mode == "compare":
        status = _compare_mode(echo, X, factory, qa, sa, outdir)
    else:
        status = _run_mode(echo, X, factory, qa, sa, outdir)
    # wall time lives apart from result.json so that file stays reproducible
    write_json(outdir / "timing.json", {"mode": mode, "wall_time_s": time.perf_counter() - start})
    return status


def _add_config_flags(p):
    p.add_argument("--config", help="flat key = value file or JSON")
    for key, spec in KEYS.items():
        if key == "mode":
            continue
        extra = f" [default: {spec.default}]" if spec.default is not None else ""
        p.add_argument(f"--{key}", dest=key, metavar=spec.kind.upper(), help=(spec.help + extra).strip())


def build_parser():
    parser = argparse.ArgumentParser(prog="qaclust", description="Annealing samplers for clustering assignments.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="one SA or QA-ST run")
    p.add_argument("--mode", choices=("sa", "qast"), dest="mode")
    _add_config_flags(p)
    _add_config_flags(sub.add_parser("compare", help="QA-ST against equal-budget SA over several seeds"))
    _add_config_flags(sub.add_parser("oracle-check", help="exact checks of the replica expansion"))
    g = sub.add_parser("gen-synthetic", help="write a Gaussian-blob CSV")
    g.add_argument("--out", required=True, help="output CSV path")
    g.add_argument("--blobs", type=int, default=4)
    g.add_argument("--per-blob", type=int, default=100)
    g.add_argument("--separation", type=float, default=8.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--dim", type=int, default=2)
    return parser


def _gather(args):
    raw = load_config(args.config) if args.config else {}
    for key in KEYS:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    if args.command == "run":
        mode = raw.get("mode", "qast") if args.mode is None else args.mode
        if mode not in ("sa", "qast"):
            raise ConfigError([f"mode: the run command takes sa or qast, got {mode!r}"])
        raw.pop("mode", None)
        return validate(raw, mode=mode)
    raw.pop("mode", None)
    return validate(raw, mode=args.command)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen-synthetic":
            X = gen_synthetic(args.out, args.blobs, args.per_blob, args.separation, args.seed, args.dim)
            print(f"wrote {X.shape[0]} points in {X.shape[1]} dimensions to {args.out}")
            return EXIT_OK
        return run_command(_gather(args))
    except (ConfigError, DataError, ScheduleError, OracleSizeError) as exc:
        print(f"qaclust: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"qaclust: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
