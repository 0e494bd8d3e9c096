"""Command-line front end: ``smcp {gen,run,estimate,hardness,sampler-check,sweep}``.

Exit codes: 0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .algorithms import ALGORITHMS, Q_MODES
from .bench import ExperimentSpec, emit_report, parse_opt, run_experiment
from .dp import hardness_ratio, optimal_online_value
from .estimate import default_sample_count, estimate_q, exact_estimate
from .graph import INSTANCE_KINDS, generate_instance, load_instance
from .matching import expected_opt
from .sampler import TargetProfile, build_policy, feasibility_margin, first_occurrence_probs

GRAPH_KINDS = ("k4",) + tuple(k for k in INSTANCE_KINDS if k != "file")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def add_instance_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("instance")
    g.add_argument("--instance", help="JSON instance file")
    g.add_argument("--graph", choices=GRAPH_KINDS, help="generate an instance instead of reading one")
    g.add_argument("--n", type=int, help="vertex count")
    g.add_argument("--p", type=float, help="uniform edge probability")
    g.add_argument("--probs", type=_floats, help="path edge probabilities, e.g. '0.9,1,0.9'")
    g.add_argument("--density", type=float, default=0.5)
    g.add_argument("--p-low", type=float, default=0.0)
    g.add_argument("--p-high", type=float, default=1.0)
    g.add_argument("--n-left", type=int)
    g.add_argument("--n-right", type=int)
    g.add_argument("--gen-seed", type=int, default=0, help="seed for random generators")


def instance_from_args(args, parser):
    if args.instance and args.graph:
        parser.error("use either --instance or --graph, not both")
    if args.instance:
        return load_instance(args.instance), Path(args.instance).stem
    kind = args.graph or "k4"
    params = {
        "n": 4 if kind == "k4" else args.n,
        "p": args.p if args.p is not None else (0.64 if kind == "k4" else None),
        "probs": args.probs,
        "density": args.density,
        "p_low": args.p_low,
        "p_high": args.p_high,
        "n_left": args.n_left,
        "n_right": args.n_right,
    }
    required = {
        "uniform-complete": ("n", "p"),
        "sparse-random": ("n",),
        "bipartite": ("n_left", "n_right", "p"),
        "path": ("probs",),
    }.get("uniform-complete" if kind == "k4" else kind, ())
    missing = [k for k in required if params[k] is None]
    if missing:
        parser.error(f"--graph {kind} needs " + ", ".join("--" + k.replace("_", "-") for k in missing))
    params = {k: v for k, v in params.items() if v is not None}
    real_kind = "uniform-complete" if kind == "k4" else kind
    g = generate_instance(real_kind, params, args.gen_seed)
    label = kind if kind != "k4" else f"k4-p{params['p']:g}"
    return g, label


def add_algo_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--algo", choices=sorted(ALGORITHMS), default="twostage")
    p.add_argument("--alpha", type=float, default=0.255)
    p.add_argument("--q-mode", choices=Q_MODES, default="fast")
    p.add_argument("--samples", type=int, help="samples per q estimate (overrides --q-mode profile size)")
    p.add_argument("--zeta", type=float, default=0.05)
    p.add_argument("--order", choices=("index", "random"), default="index", help="greedy probe order")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--opt", default=None, help="'exact' or 'mc:<trials>'")
    p.add_argument("--workers", type=int, default=1)


def algo_params(args) -> dict:
    return {
        "alpha": args.alpha,
        "q_mode": args.q_mode,
        "zeta": args.zeta,
        "samples": args.samples,
        "order": args.order,
    }


def _relevant(algo: str, params: dict) -> dict:
    names = ALGORITHMS[algo]().get_params()
    return {k: v for k, v in params.items() if k in names and k != "random_state"}


def add_output_args(p: argparse.ArgumentParser, default="csv") -> None:
    p.add_argument("--out", help="write output to this file instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default=default)


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def cmd_gen(args, parser):
    g, _ = instance_from_args(args, parser)
    _emit(json.dumps(g.to_dict(), indent=1) + "\n", args.out)


def _spec(args, parser, g, label, **override):
    opt_mode, opt_trials = parse_opt(args.opt)
    params = _relevant(args.algo, {**algo_params(args), **override})
    return ExperimentSpec(
        graph=g,
        algo=args.algo,
        params=params,
        trials=args.trials,
        seed=args.seed,
        opt_mode=opt_mode,
        opt_trials=opt_trials,
        instance=label,
        workers=args.workers,
    )


def cmd_run(args, parser):
    g, label = instance_from_args(args, parser)
    report = run_experiment(_spec(args, parser, g, label))
    _emit(emit_report(report, args.format), args.out)


def cmd_estimate(args, parser):
    g, label = instance_from_args(args, parser)
    if args.q_mode == "exact":
        est = exact_estimate(g)
    else:
        c = args.samples or default_sample_count(max(g.n, 2), args.q_mode)
        est = estimate_q(g, c, "maximum", np.random.default_rng(args.seed))
    payload = {
        "instance": label,
        "mode": est.mode,
        "matcher": est.matcher,
        "samples": est.samples_used,
        "seed": args.seed,
        "q": [{"u": u, "v": v, "p": g.p(u, v), "q": float(f"{x:.9g}")} for (u, v), x in sorted(est.q.items())],
    }
    _emit(_dumps(payload), args.out)


def cmd_hardness(args, parser):
    g, label = instance_from_args(args, parser)
    online = optimal_online_value(g)
    offline = expected_opt(g, "exact").mean
    ratio = hardness_ratio(g)
    if args.format == "json":
        text = _dumps({"instance": label, "online": float(f"{online:.9g}"),
                       "offline": float(f"{offline:.9g}"), "ratio": float(f"{ratio:.9g}")})
    else:
        text = f"instance {label}\nonline   {online:.9g}\noffline  {offline:.9g}\nratio    {ratio:.9g}\n"
    _emit(text, args.out)


def cmd_sampler_check(args, parser):
    if args.profile:
        data = json.loads(Path(args.profile).read_text())
        p, r = data["p"], data["r"]
    elif args.events_p is not None and args.targets is not None:
        p, r = args.events_p, args.targets
    else:
        parser.error("sampler-check needs --profile FILE or both --events-p and --targets")
    profile = TargetProfile(p, r)
    margin = feasibility_margin(profile)
    policy = build_policy(profile)
    achieved = first_occurrence_probs(policy, profile.p)
    rows = [
        {"event": i, "p": float(profile.p[i]), "target": float(profile.r[i]),
         "achieved": float(achieved[i]), "ok": bool(achieved[i] >= profile.r[i] - 1e-9)}
        for i in range(profile.k)
    ]
    if args.format == "json":
        text = _dumps({"margin": margin, "feasible": margin >= 1.0, "rows": [
            {k: (float(f"{v:.9g}") if isinstance(v, float) else v) for k, v in row.items()} for row in rows]})
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["event", "p", "target", "achieved", "ok"])
        for row in rows:
            w.writerow([row["event"], f"{row['p']:.9g}", f"{row['target']:.9g}", f"{row['achieved']:.9g}",
                        "yes" if row["ok"] else "NO"])
        text = buf.getvalue()
    _emit(text, args.out)
    if not all(row["ok"] for row in rows):
        return 1
    return 0


def cmd_sweep(args, parser):
    reports = []
    for value in args.values:
        if args.param == "alpha":
            g, label = instance_from_args(args, parser)
            spec = _spec(args, parser, g, f"{label}|alpha={value:g}", alpha=value)
        else:
            args.p = value
            g, label = instance_from_args(args, parser)
            spec = _spec(args, parser, g, f"{label}|p={value:g}")
        reports.append(run_experiment(spec))
    _emit(emit_report(reports, args.format), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smcp", description="Stochastic matching with commitment simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a generated instance as JSON")
    add_instance_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="run a seeded experiment")
    add_instance_args(p)
    add_algo_args(p)
    add_output_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("estimate", help="dump estimated q for every pair as JSON")
    add_instance_args(p)
    p.add_argument("--q-mode", choices=Q_MODES, default="fast")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("hardness", help="optimal online vs offline expected matching")
    add_instance_args(p)
    p.add_argument("--out")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_hardness)

    p = sub.add_parser("sampler-check", help="exact first-occurrence probabilities vs targets")
    p.add_argument("--profile", help='JSON file {"p": [...], "r": [...]}')
    p.add_argument("--events-p", type=_floats, help="event probabilities")
    p.add_argument("--targets", type=_floats, help="target probabilities")
    add_output_args(p)
    p.set_defaults(func=cmd_sampler_check)

    p = sub.add_parser("sweep", help="grid over alpha or p, one CSV row per cell")
    add_instance_args(p)
    add_algo_args(p)
    p.add_argument("--param", choices=("alpha", "p"), required=True)
    p.add_argument("--values", type=_floats, required=True)
    add_output_args(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser) or 0
    except (ValueError, RuntimeError, KeyError, OSError) as exc:
        print(f"smcp: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
