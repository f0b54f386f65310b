"""Command-line front end: simulation, decoding, baselines, forecasts,
networks, and the benchmark studies.

Every subcommand reads/writes CSV (pandas) or JSON, is deterministic given
its seed, and exits nonzero with a machine-readable error on failure:

    2  bad flags / usage (argparse)
    3  malformed input (unreadable CSV, bad columns, invalid values)
    4  insufficient data (no events, too little history, no model)
    5  any other pipeline error

Flags may also be supplied through a JSON config file (``--config``); values
given on the command line override the file.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np
import pandas as pd

from . import experiments
from .aggregation import DEFAULT_LEVELS, ThresholdLadder, cluster_states, encode_decode
from .encoding import (ExcursionProcess, ReturnSeries, encode_excursion,
                       encode_one_sided, quantile_threshold)
from .errors import (EmptySegmentError, InsufficientHistoryError,
                     InvalidInputError, InvalidThresholdError, NoModelError,
                     NoSeparatingThresholdError, VolstatesError)
from .forecasting import ForecastConfig, forecast_errors, rolling_forecast
from .hmm import HmmParams, baum_welch, viterbi
from .model_selection import LossConfig, optimize_theta
from .network import (SymbolSeries, build_network, cluster_dissimilarity,
                      dissimilarity, flow_matrix, node_strengths,
                      reorder_matrix, simple_binning, te_classic, te_lag_lead)
from .simulation import SimSpec, generate

EXIT_OK = 0
EXIT_BAD_INPUT = 3
EXIT_INSUFFICIENT = 4
EXIT_FAILURE = 5

_INSUFFICIENT = (NoModelError, InsufficientHistoryError,
                 NoSeparatingThresholdError, EmptySegmentError)
_BAD_INPUT = (InvalidInputError, InvalidThresholdError, KeyError, ValueError,
              OSError, pd.errors.ParserError)


def _read_series(path: str, column: str) -> np.ndarray:
    df = pd.read_csv(path)
    if column not in df.columns:
        raise InvalidInputError(
            f"column {column!r} not in {path} (has {list(df.columns)})")
    values = df[column].to_numpy(dtype=float)
    if not np.all(np.isfinite(values)):
        raise InvalidInputError(f"column {column!r} contains non-finite values")
    return values


def _parse_levels(text: str) -> tuple:
    try:
        levels = tuple(float(t) for t in text.split(","))
    except ValueError:
        raise InvalidInputError(f"cannot parse quantile list {text!r}")
    if not levels or any(not 0 < v < 1 for v in levels):
        raise InvalidInputError("ladder quantiles must lie in (0,1)")
    return levels


def _loss_config(args) -> LossConfig:
    if args.criterion == "aic":
        return LossConfig(k=2.0, m=args.m, seed=args.seed)
    return None  # BIC depends on n; resolved at the call site


def _loss_for(args, n: int) -> LossConfig:
    cfg = _loss_config(args)
    if cfg is None:
        cfg = LossConfig(k=float(np.log(n)), m=args.m, seed=args.seed)
    return cfg


def cmd_simulate(args) -> int:
    params = {}
    for name in ("p1", "p2", "p12", "w_a"):
        v = getattr(args, name)
        if v is not None:
            params[name] = v
    if args.sigma2 is not None:
        vals = [float(t) for t in args.sigma2.split(",")]
        if args.kind == "gaussian_hmm":
            params["sigma2_1"], params["sigma2_2"] = vals
        else:
            params["sigma2"] = (tuple(vals[:2]), tuple(vals[2:]))
    if args.sigmas is not None:
        params["sigmas"] = tuple(float(t) for t in args.sigmas.split(","))
    if args.dfs is not None:
        params["dfs"] = tuple(float(t) for t in args.dfs.split(","))
    obs, states = generate(SimSpec(args.kind, args.n, params, seed=args.seed))
    pd.DataFrame({"t": np.arange(len(obs)), "value": obs,
                  "state": states}).to_csv(args.out, index=False)
    print(f"wrote {len(obs)} observations to {args.out}")
    return EXIT_OK


def cmd_encode(args) -> int:
    values = _read_series(args.input, args.column)
    rs = ReturnSeries.from_values(values)
    if args.lower is not None or args.upper is not None:
        if args.lower is None or args.upper is None:
            raise InvalidInputError("two-sided coding needs both --lower and --upper")
        x = encode_excursion(rs, args.lower, args.upper)
    elif args.pi is not None:
        x = encode_one_sided(rs, args.pi)
    elif args.level is not None:
        x = encode_one_sided(rs, quantile_threshold(values, args.level))
    else:
        raise InvalidInputError("need --lower/--upper, --pi, or --level")
    pd.DataFrame({"t": np.arange(len(x)),
                  "bit": x.bits}).to_csv(args.out, index=False)
    print(f"wrote {x.n_events} events over {len(x)} steps to {args.out}")
    return EXIT_OK


def cmd_decode(args) -> int:
    values = _read_series(args.input, args.column)
    if args.binary:
        bits = values.astype(np.int64)
        if not np.all((bits == 0) | (bits == 1)):
            raise InvalidInputError("--binary input must be a 0/1 column")
        x = ExcursionProcess(bits=bits)
        result = optimize_theta(x, _loss_for(args, len(bits)), keep_trace=False)
        out = result.to_dict()
        pd.DataFrame({"t": np.arange(len(bits)), "bit": bits,
                      "state": result.best_assignment.labels}
                     ).to_csv(args.out_prefix + "_states.csv", index=False)
        with open(args.out_prefix + "_model.json", "w") as fh:
            json.dump(out, fh, indent=2)
        print(f"loss {result.best_loss:.3f}; "
              f"wrote {args.out_prefix}_states.csv and _model.json")
        return EXIT_OK
    rs = ReturnSeries.from_values(values)
    levels = _parse_levels(args.ladder)
    ladder = ThresholdLadder.from_quantiles(values, levels)
    em = encode_decode(rs, ladder, _loss_for(args, len(values)),
                       screen=args.screen)
    res = cluster_states(em, k=args.clusters,
                         features="rank" if args.rank_features else "emission",
                         refine=args.refine)
    rows = pd.DataFrame(em.values,
                        index=[f"{t:.6g}" for t in em.ladder.pis])
    rows.index.name = "threshold"
    rows.to_csv(args.out_prefix + "_emissions.csv")
    pd.DataFrame({"t": np.arange(len(values)), "value": values,
                  "state": res.labels}).to_csv(
        args.out_prefix + "_states.csv", index=False)
    if args.emit_plot_data:
        tidy = pd.DataFrame({
            "cluster": np.repeat(np.arange(1, res.k + 1),
                                 len(res.cdf_thresholds)),
            "threshold": np.tile(res.cdf_thresholds, res.k),
            "cdf": res.per_cluster_cdf.flatten(),
        })
        tidy.to_csv(args.out_prefix + "_cluster_cdfs.csv", index=False)
    print(f"decoded {res.k} clusters over {len(values)} steps; "
          f"wrote {args.out_prefix}_emissions.csv and _states.csv")
    return EXIT_OK


def cmd_hmm(args) -> int:
    values = _read_series(args.input, args.column)
    params, trace = baum_welch(values, args.states, kind=args.kind,
                               n_restarts=args.restarts,
                               max_iters=args.iters, seed=args.seed)
    loglik = float(trace[-1])
    path = viterbi(values, params) + 1
    with open(args.out_prefix + "_params.json", "w") as fh:
        json.dump({"loglik": loglik, **params.to_dict()}, fh, indent=2)
    pd.DataFrame({"t": np.arange(len(values)), "value": values,
                  "state": path}).to_csv(args.out_prefix + "_states.csv",
                                         index=False)
    print(f"loglik {loglik:.3f}; wrote {args.out_prefix}_params.json and _states.csv")
    return EXIT_OK


def cmd_forecast(args) -> int:
    values = _read_series(args.input, args.column)
    cfg = ForecastConfig(window=args.window, engine=args.engine, m=args.m,
                         hmm_states=args.states, seed=args.seed)
    preds, acts, offsets = rolling_forecast(values, cfg, args.n_forecasts)
    errs = forecast_errors(preds, acts)
    df = pd.DataFrame({"t": np.arange(len(values) - args.n_forecasts,
                                      len(values)),
                       "actual": acts, "predicted": preds,
                       "matched_offset": offsets})
    df.to_csv(args.out, index=False)
    print(json.dumps(errs.to_dict()))
    return EXIT_OK


def cmd_network(args) -> int:
    df = pd.read_csv(args.input)
    cols = [c for c in df.columns if c != "t"]
    if len(cols) < 2:
        raise InvalidInputError("need at least two instrument columns")
    sym = {}
    for c in cols:
        vals = df[c].to_numpy(dtype=float)
        if args.decode:
            sym[c] = SymbolSeries(experiments.decode_continuous(
                vals, k_clusters=args.states))
        else:
            sym[c] = simple_binning(vals, args.bins)
    if args.measure == "classic":
        m = flow_matrix(sym, measure=te_classic, lag=args.lag)
    else:
        m = flow_matrix(sym, measure=te_lag_lead)
    pd.DataFrame(m.values, index=m.nodes, columns=m.nodes).to_csv(
        args.out_prefix + "_te.csv")
    ns_in, ns_out = node_strengths(m)
    pd.DataFrame({"node": m.nodes, "in_strength": ns_in,
                  "out_strength": ns_out}).to_csv(
        args.out_prefix + "_strengths.csv", index=False)
    dis = dissimilarity(m)
    pd.DataFrame(dis, index=m.nodes, columns=m.nodes).to_csv(
        args.out_prefix + "_dissimilarity.csv")
    edges, _ = build_network(m, top_k=args.top_k)
    pd.DataFrame(edges, columns=["source", "target", "weight"]).to_csv(
        args.out_prefix + "_edges.csv", index=False)
    if args.emit_plot_data:
        row_perm, col_perm = reorder_matrix(m)
        ordered = m.values[np.ix_(row_perm, col_perm)]
        pd.DataFrame(ordered,
                     index=[m.nodes[i] for i in row_perm],
                     columns=[m.nodes[j] for j in col_perm]).to_csv(
            args.out_prefix + "_te_ordered.csv")
        _, order = cluster_dissimilarity(dis)
        pd.DataFrame({"position": np.arange(len(order)),
                      "node": [m.nodes[i] for i in order]}).to_csv(
            args.out_prefix + "_dendrogram_order.csv", index=False)
    print(f"wrote TE matrix and network files with prefix {args.out_prefix}")
    return EXIT_OK


_STUDIES = {
    "table1": lambda a: experiments.changepoint_error_table(
        reps=a.reps, base_seed=a.seed),
    "table2": lambda a: experiments.hmm_error_table(
        reps=a.reps, base_seed=a.seed),
    "fig2": lambda a: experiments.parameter_distance_study(
        reps=a.reps, base_seed=a.seed),
    "table3": lambda a: experiments.gaussian_hmm_spot(
        reps=a.reps, base_seed=a.seed),
    "table4": lambda a: experiments.mixture_hmm_spot(
        reps=a.reps, base_seed=a.seed),
    "emissions-gaussian": lambda a: experiments.emission_recovery_study(
        "gaussian", reps=a.reps, base_seed=a.seed),
    "emissions-t": lambda a: experiments.emission_recovery_study(
        "t", reps=a.reps, base_seed=a.seed),
    "clusters": lambda a: experiments.cluster_recovery_study(
        seeds=range(a.seed, a.seed + max(1, a.reps))),
    "forecast": lambda a: experiments.forecast_vs_frozen_study(
        seeds=range(a.seed, a.seed + max(1, a.reps))),
    "network": lambda a: experiments.planted_block_study(
        seeds=range(a.seed, a.seed + max(1, a.reps))),
}


def cmd_evaluate(args) -> int:
    result = _STUDIES[args.design](args)
    payload = {str(k): v for k, v in result.items()}
    text = json.dumps({"design": args.design, "reps": args.reps,
                       "seed": args.seed, "result": payload}, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="volstates",
                                description=__doc__.split("\n")[0])
    p.add_argument("--config", help="JSON file of flag defaults "
                                    "(command-line flags override)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("simulate", help="generate a synthetic design")
    sp.add_argument("--kind", required=True, choices=SimSpec.KINDS)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p1", type=float)
    sp.add_argument("--p2", type=float)
    sp.add_argument("--p12", type=float)
    sp.add_argument("--w-a", dest="w_a", type=float)
    sp.add_argument("--sigma2", help="comma list: 2 values (gaussian_hmm) "
                                     "or 4 (gmm_hmm: state1 a,b,state2 a,b)")
    sp.add_argument("--sigmas", help="comma list of 3 per-state std devs")
    sp.add_argument("--dfs", help="comma list of 3 degrees of freedom")
    sp.add_argument("--out", required=True)
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("encode", help="binary excursion coding of a series")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--column", default="value")
    sp.add_argument("--lower", type=float)
    sp.add_argument("--upper", type=float)
    sp.add_argument("--pi", type=float)
    sp.add_argument("--level", type=float,
                    help="quantile level resolved to a one-sided threshold")
    sp.add_argument("--out", required=True)
    common(sp)
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("decode", aliases=["cluster"],
                        help="multi-state decode of a series")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--column", default="value")
    sp.add_argument("--binary", action="store_true",
                    help="input column is already a 0/1 event sequence")
    sp.add_argument("--ladder", default=",".join(str(v) for v in DEFAULT_LEVELS))
    sp.add_argument("--m", type=int, default=2)
    sp.add_argument("--criterion", choices=("aic", "bic"), default="aic")
    sp.add_argument("--clusters", type=int, default=None)
    sp.add_argument("--screen", action="store_true",
                    help="drop per-threshold decodes without evidence")
    sp.add_argument("--rank-features", action="store_true")
    sp.add_argument("--refine", action="store_true")
    sp.add_argument("--emit-plot-data", action="store_true")
    sp.add_argument("--out-prefix", required=True)
    common(sp)
    sp.set_defaults(func=cmd_decode)

    sp = sub.add_parser("hmm", help="fit an HMM baseline and decode")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--column", default="value")
    sp.add_argument("--kind", choices=("bernoulli", "gaussian"),
                    default="gaussian")
    sp.add_argument("--states", type=int, default=2)
    sp.add_argument("--restarts", type=int, default=10)
    sp.add_argument("--iters", type=int, default=500)
    sp.add_argument("--out-prefix", required=True)
    common(sp)
    sp.set_defaults(func=cmd_hmm)

    sp = sub.add_parser("forecast", help="rolling pattern-matching forecasts")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--column", default="value")
    sp.add_argument("--window", type=int, default=200)
    sp.add_argument("--engine", choices=("nonparametric", "gaussian_hmm"),
                    default="nonparametric")
    sp.add_argument("--m", type=int, default=2)
    sp.add_argument("--states", type=int, default=4)
    sp.add_argument("--n-forecasts", type=int, default=50)
    sp.add_argument("--out", required=True)
    common(sp)
    sp.set_defaults(func=cmd_forecast)

    sp = sub.add_parser("network", help="pairwise information-flow network")
    sp.add_argument("--in", dest="input", required=True,
                    help="CSV with one column per instrument")
    sp.add_argument("--measure", choices=("classic", "laglead"),
                    default="classic")
    sp.add_argument("--lag", type=int, default=1)
    sp.add_argument("--bins", type=int, default=4,
                    help="quantile bins when not decoding")
    sp.add_argument("--decode", action="store_true",
                    help="decode each column to volatility states first")
    sp.add_argument("--states", type=int, default=2)
    sp.add_argument("--top-k", type=int, default=10)
    sp.add_argument("--emit-plot-data", action="store_true")
    sp.add_argument("--out-prefix", required=True)
    common(sp)
    sp.set_defaults(func=cmd_network)

    sp = sub.add_parser("evaluate", help="run a benchmark study")
    sp.add_argument("--design", required=True, choices=sorted(_STUDIES))
    sp.add_argument("--reps", type=int, default=100)
    sp.add_argument("--out")
    common(sp)
    sp.set_defaults(func=cmd_evaluate)
    p.subcommand_parsers = sub.choices
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args, _ = parser.parse_known_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                defaults = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(json.dumps({"error": type(exc).__name__,
                              "message": str(exc)}), file=sys.stderr)
            return EXIT_BAD_INPUT
        # Subparser defaults shadow parent-level set_defaults, so the config
        # values must be installed on every subparser as well.
        parser.set_defaults(**defaults)
        for sp in parser.subcommand_parsers.values():
            sp.set_defaults(**defaults)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _INSUFFICIENT as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_INSUFFICIENT
    except _BAD_INPUT as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_BAD_INPUT
    except VolstatesError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
