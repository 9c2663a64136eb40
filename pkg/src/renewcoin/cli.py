"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 domain error,
3 I/O error.  With --json, errors are also reported on stderr as a JSON
object.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import io
from .errors import ConfigError, DomainError, IoError, RenewcoinError
from .estimators import (
    N_MIN,
    EstimateReport,
    SCORE_EPS,
    block_schedule,
    linear_estimate,
    run_statistics,
    simple_weighted_report,
    singular_evidence,
    singularity_score,
    theta_from_runs,
)
from .experiments import ExperimentConfig, asymptotics_report, run_sweep
from .ratefn import rate_tables, reconstruction_constants
from .renewal import BUILTIN_LAWS, builtin_law, delay_law, law_stats
from .rng import RngStream, entropy_seed
from .simulate import observe_coin, sample_path

PROG = "renewcoin"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _params(items):
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        out[key] = float(val)
    return out


def _load_law(args):
    if args.law and args.builtin:
        raise UsageError("give either --law or --builtin, not both")
    if args.law:
        return io.load_law(args.law)
    if args.builtin:
        return builtin_law(args.builtin, args.horizon, **_params(args.param))
    raise UsageError("a law is required: --law FILE or --builtin NAME")


def _seed(args):
    if args.entropy:
        return entropy_seed()
    if args.seed is None:
        raise UsageError("--seed is required (or pass --entropy)")
    return args.seed


def _emit(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable))


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def cmd_law(args):
    params = {k: v for k, v in (("gamma", args.gamma), ("c", args.c), ("r", args.r),
                                ("u1", args.u1)) if v is not None}
    law = builtin_law(args.name, args.horizon, **params)
    if args.delay:
        law = delay_law(law, args.delay)
    info = {"label": law.label, "horizon": law.horizon, "mass": law.mass,
            "residual": law.residual, "u1": law.u1, "u_max": law.u_max,
            "tail": law.tail.to_dict(), "meta": law.meta}
    if args.stats:
        st = law_stats(law)
        info["stats"] = {"sum_sq": st.sum_sq, "sum_sq_divergent": st.sum_sq_divergent,
                         "note": st.note, "theta_s": st.theta_s,
                         "tail_slope": st.tail_slope_fit.slope,
                         "tail_slope_stderr": st.tail_slope_fit.stderr,
                         "fit_range": list(st.tail_slope_fit.fit_range)}
    if args.out:
        io.save_law(law, args.out, sidecar=args.sidecar or None)
        info["file"] = str(args.out)
    _emit(info)


def cmd_simulate(args):
    law = _load_law(args)
    seed = _seed(args)
    stream = RngStream(seed, tuple(args.stream_id))
    path = sample_path(law, args.N, stream.child(0))
    theta = args.theta
    obs = observe_coin(path, [abs(theta)], stream.child(1))[0]
    if theta < 0:
        obs = obs.flipped()
    header = io.observation_header(obs, law.label, seed, args.stream_id)
    if args.format == "csv":
        io.save_observation_csv(obs, args.out, delta=path.delta if args.with_delta else None)
    else:
        io.save_observation_bin(obs, args.out, header)
    if args.path_out:
        io.save_observation_bin(
            type(obs)(x=np.where(path.delta[1:] == 1, 1, -1).astype(np.int8)),
            args.path_out, dict(header, kind="renewal-indicators"))
    _emit(dict(header, file=str(args.out), renewals=int(len(path.renewal_times)),
               censored=path.censored))


def cmd_estimate(args):
    law = _load_law(args)
    obs, head = io.load_observation(args.obs)
    seeds = {k: head.get(k) for k in ("seed", "stream-id") if k in head}
    if args.estimator == "linear":
        sched = block_schedule(law, args.blocks, obs.N)
        report = linear_estimate(obs, law, sched)
    elif args.estimator == "simple":
        report = simple_weighted_report(obs, law)
    elif args.estimator == "runs":
        rs = run_statistics(obs, args.n_min)
        inv = theta_from_runs(rs.R_hat, args.gamma, law)
        report = _report("runs", inv.theta, [(rs.n_at_max, inv.theta)], law,
                         {"L_N": rs.L_N, "R_hat": rs.R_hat, "n_min": rs.n_min,
                          "n_at_max": rs.n_at_max, "phi": inv.phi, "clipped": inv.clipped})
    else:
        score = singularity_score(obs)
        report = _report("score", score, [(obs.N, score)], law,
                         {"eps": args.eps, "singular_evidence": singular_evidence(score, args.eps)})
    report.seeds = seeds
    if args.out:
        io.write_report(report, args.out, args.trajectory)
    _emit(report.to_dict())


def _report(name, point, traj, law, diag):
    return EstimateReport(estimator=name, point=float(point), trajectory=traj,
                          law={"label": law.label}, diagnostics=diag)


def cmd_ratefn(args):
    law = _load_law(args)
    tables = rate_tables(law, args.a or [], args.phi or [], args.dp_depth)
    out = {"label": law.label, "log2_u1": math.log2(law.u1) if law.u1 > 0 else None,
           "lambda": [{"a": a, "lambda_star_dual": d, "lambda_star_dp_min": p,
                       "dp_depth": tables.dp_depth}
                      for a, d, p in zip(tables.a_grid, tables.lambda_star, tables.lambda_star_dp)],
           "psi": [{"phi": f, "psi": p, "xi0": x}
                   for f, p, x in zip(tables.phi_grid, tables.psi, tables.xi0)]}
    if args.constants is not None:
        g, phi = args.constants
        c = reconstruction_constants(law, g, phi)
        out["constants"] = {"gamma": g, "phi": phi, "zeta": c.zeta, "psi": c.psi,
                            "theta_threshold": c.theta_threshold, "cntex_bound": c.cntex_bound}
    if args.out:
        out["files"] = list(io.write_rate_tables(tables, args.out))
    _emit(out)


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("RCL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"RCL_THREADS must be an integer, got {env!r}") from exc
    return 1


def cmd_sweep(args):
    d = io.read_json(args.config)
    d["seed"] = _seed(args)
    if args.out:
        d["output"] = args.out
    cfg = ExperimentConfig.from_dict(d)
    base = os.path.dirname(os.path.abspath(args.config))
    summary = run_sweep(cfg, threads=_threads(args), base_dir=base)
    _emit({"output": cfg.output, "seed": cfg.seed, "cells": len(cfg.thetas) * cfg.replicates,
           "summary": summary["summary"]})


def cmd_report(args):
    law = _load_law(args)
    _emit(asymptotics_report(law, tol=args.tol))


def _law_source(p):
    p.add_argument("--law", metavar="FILE", help="law JSON file")
    p.add_argument("--builtin", choices=BUILTIN_LAWS, metavar="NAME",
                   help="builtin law instead of a file: " + ", ".join(BUILTIN_LAWS))
    p.add_argument("--horizon", type=int, default=10_000, help="horizon for --builtin (default 10000)")
    p.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="builtin law parameter, repeatable (e.g. gamma=0.75)")


def _seed_args(p):
    p.add_argument("--seed", type=int, help="master seed (required unless --entropy)")
    p.add_argument("--entropy", action="store_true", help="draw the seed from OS entropy")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="report errors as JSON on stderr")

    parser = _Parser(prog=PROG, description="Hidden-renewal coin tossing: laws, simulation, estimation.",
                     parents=[common])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("law", parents=[common], help="build, validate and save a renewal law")
    p.add_argument("name", choices=BUILTIN_LAWS, metavar="NAME", help=", ".join(BUILTIN_LAWS))
    p.add_argument("--horizon", type=int, default=10_000, help="horizon H (default 10000)")
    p.add_argument("--gamma", type=float, help="power-law exponent of u_n")
    p.add_argument("--c", type=float, help="power-law constant of u_n")
    p.add_argument("--r", type=float, help="stay probability for geometric-stay")
    p.add_argument("--u1", type=float, help="target u_1 for delayed-kaluza")
    p.add_argument("--delay", type=float, help="apply the delay transform with this p in [0, 1)")
    p.add_argument("--stats", action="store_true", help="include partial-sum statistics and theta_s")
    p.add_argument("--out", metavar="FILE", help="write the law as JSON")
    p.add_argument("--sidecar", action="store_true", help="store arrays in a binary sidecar")
    p.set_defaults(func=cmd_law)

    p = sub.add_parser("simulate", parents=[common], help="simulate one coupled coin observation path")
    _law_source(p)
    p.add_argument("-N", type=int, required=True, help="window length")
    p.add_argument("--theta", type=float, required=True, help="bias in [-1, 1]; negative values flip signs")
    _seed_args(p)
    p.add_argument("--stream-id", type=int, nargs="*", default=[], metavar="ID",
                   help="stream id integers (default none)")
    p.add_argument("--format", choices=("bin", "csv"), default="bin", help="output format (default bin)")
    p.add_argument("--with-delta", action="store_true", help="add the delta column to CSV (debugging)")
    p.add_argument("--path-out", metavar="FILE", help="also dump renewal indicators as packed bits")
    p.add_argument("--out", metavar="FILE", required=True, help="observation file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="run an estimator on an observation file")
    _law_source(p)
    p.add_argument("--estimator", choices=("linear", "simple", "runs", "score"), required=True,
                   help="linear (H_n), simple (T_n), runs (theta from R_hat), score (L_N/log2 N)")
    p.add_argument("--obs", metavar="FILE", required=True, help="observation .bin or .csv")
    p.add_argument("--gamma", type=float, help="u_n exponent for runs (default: law tail)")
    p.add_argument("--n-min", type=int, default=N_MIN, help=f"R_hat window start (default {N_MIN})")
    p.add_argument("--blocks", type=int, default=50, help="max linear-estimator blocks (default 50)")
    p.add_argument("--eps", type=float, default=SCORE_EPS, help=f"score margin (default {SCORE_EPS})")
    p.add_argument("--out", metavar="FILE", help="write the report as JSON")
    p.add_argument("--trajectory", metavar="FILE", help="write the trajectory as CSV")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("ratefn", parents=[common], help="tabulate Lambda*(a) and psi(phi)")
    _law_source(p)
    p.add_argument("--a", type=float, action="append", metavar="A", help="a value, repeatable")
    p.add_argument("--phi", type=float, action="append", metavar="PHI", help="phi value, repeatable")
    p.add_argument("--dp-depth", type=int, default=0, help="DP depth m_max (default 0: dual only)")
    p.add_argument("--constants", type=float, nargs=2, metavar=("GAMMA", "PHI"),
                   help="also report zeta and the bias thresholds")
    p.add_argument("--out", metavar="PREFIX", help="write PREFIX_lambda.csv and PREFIX_psi.csv")
    p.set_defaults(func=cmd_ratefn)

    p = sub.add_parser("sweep", parents=[common], help="run a seeded theta sweep from a JSON config")
    p.add_argument("--config", metavar="FILE", required=True, help="experiment config JSON")
    _seed_args(p)
    p.add_argument("--threads", type=int, help="worker threads (default $RCL_THREADS or 1)")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", parents=[common], help="log-log asymptotics of u_n and U_n")
    _law_source(p)
    p.add_argument("--tol", type=float, default=0.05, help="slope tolerance (default 0.05)")
    p.set_defaults(func=cmd_report)
    return parser


def _fail(args_json, exc, code):
    msg = str(exc) or type(exc).__name__
    print(f"{PROG}: error: {msg}", file=sys.stderr)
    if args_json:
        print(json.dumps({"error": type(exc).__name__, "message": msg, "exit_code": code}),
              file=sys.stderr)
    return code


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    want_json = "--json" in argv
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except (UsageError, ConfigError) as exc:
        return _fail(want_json, exc, 1)
    except IoError as exc:
        return _fail(want_json, exc, 3)
    except DomainError as exc:
        return _fail(want_json, exc, 2)
    except OSError as exc:
        return _fail(want_json, exc, 3)
    except (RenewcoinError, ValueError) as exc:
        return _fail(want_json, exc, 2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
