"""Seeded experiment campaigns and report serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_positive_int, trial_rng
from .algorithms import make_algorithm
from .graph import ProbeOracle, ProbGraph, sample_realization
from .matching import EXACT_PAIR_LIMIT, expected_opt, max_matching

CSV_COLUMNS = ["instance", "algo", "seed", "trials", "mean_alg", "mean_opt", "opt_mode", "ratio", "ci95"]
Z95 = 1.959963984540054


@dataclass
class ExperimentSpec:
    graph: ProbGraph
    algo: str = "twostage"
    params: dict = field(default_factory=dict)
    trials: int = 10_000
    seed: int = 0
    opt_mode: str | None = None
    opt_trials: int | None = None
    instance: str = "instance"
    workers: int = 1

    def __post_init__(self):
        check_positive_int(self.trials, "trials")
        if self.opt_mode is None:
            self.opt_mode = "exact" if self.graph.m <= EXACT_PAIR_LIMIT else "mc"
        if self.opt_mode not in ("exact", "mc"):
            raise ValueError(f"opt mode must be 'exact' or 'mc', got {self.opt_mode!r}")
        if self.opt_mode == "exact" and self.graph.m > EXACT_PAIR_LIMIT:
            raise ValueError(f"exact OPT needs at most {EXACT_PAIR_LIMIT} positive pairs")
        if self.opt_mode == "mc":
            self.opt_trials = check_positive_int(self.opt_trials or self.trials, "opt trials", minimum=2)


@dataclass
class ExperimentReport:
    instance: str
    algo: str
    seed: int
    trials: int
    sizes: list
    mean_alg: float
    mean_opt: float
    opt_ci95: float
    opt_mode: str
    ratio: float
    ci95: float
    config: dict

    def row(self) -> dict:
        return {k: getattr(self, k) for k in CSV_COLUMNS}


def parse_opt(text: str | None) -> tuple[str | None, int | None]:
    """``exact`` or ``mc:<trials>`` (``mc`` alone pairs with the run's trials)."""
    if text is None:
        return None, None
    if text == "exact":
        return "exact", None
    if text == "mc":
        return "mc", None
    if text.startswith("mc:"):
        return "mc", int(text[3:])
    raise ValueError(f"--opt must be 'exact' or 'mc:<trials>', got {text!r}")


def _run_chunk(args):
    graph, algo, params, seed, start, stop, want_opt = args
    alg = make_algorithm(algo, **params).fit(graph)
    sizes, opts = [], []
    for t in range(start, stop):
        realized = sample_realization(graph, trial_rng(seed, t, 0))
        record = alg.run(ProbeOracle(realized), trial_rng(seed, t, 1))
        sizes.append(record.size)
        if want_opt:
            opts.append(len(max_matching(realized)))
    return sizes, opts


def _opt_only(args):
    graph, seed, start, stop = args
    return [len(max_matching(sample_realization(graph, trial_rng(seed, t, 0)))) for t in range(start, stop)]


def _chunks(total, workers):
    step = max(1, math.ceil(total / max(1, workers)))
    return [(a, min(total, a + step)) for a in range(0, total, step)]


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Run ``spec.trials`` seeded trials and compare against the offline optimum.

    Trial ``t`` draws its realization from stream ``(seed, t, 0)`` and the
    algorithm's randomness from ``(seed, t, 1)``, so results do not depend on
    the worker count. Monte Carlo OPT reuses the same realizations.
    """
    graph = spec.graph
    # validate instance/algorithm compatibility before launching work
    make_algorithm(spec.algo, **spec.params).fit(graph)
    paired = spec.opt_mode == "mc"
    n_paired = min(spec.trials, spec.opt_trials) if paired else 0
    jobs = [(graph, spec.algo, spec.params, spec.seed, a, b, paired) for a, b in _chunks(spec.trials, spec.workers)]
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            results = list(pool.map(_run_chunk, jobs))
    else:
        results = [_run_chunk(j) for j in jobs]
    sizes = [s for chunk, _ in results for s in chunk]
    alg = np.array(sizes, dtype=float)
    mean_alg = float(alg.mean())
    if paired:
        opts = [o for _, chunk in results for o in chunk][:n_paired]
        if spec.opt_trials > spec.trials:
            opts += _opt_only((graph, spec.seed, spec.trials, spec.opt_trials))
        opt = np.array(opts, dtype=float)
        mean_opt = float(opt.mean())
        opt_ci = float(Z95 * opt.std(ddof=1) / math.sqrt(opt.size))
    else:
        mean_opt = expected_opt(graph, "exact").mean
        opt = None
        opt_ci = 0.0
    ratio = mean_alg / mean_opt if mean_opt > 0 else math.nan
    ci = ratio_ci(alg, opt, ratio, mean_opt)
    config = {"algo": spec.algo, **{k: v for k, v in sorted(spec.params.items()) if v is not None}}
    return ExperimentReport(
        instance=spec.instance,
        algo=spec.algo,
        seed=spec.seed,
        trials=spec.trials,
        sizes=sizes,
        mean_alg=mean_alg,
        mean_opt=mean_opt,
        opt_ci95=opt_ci,
        opt_mode="exact" if not paired else f"mc:{spec.opt_trials}",
        ratio=ratio,
        ci95=ci,
        config=config,
    )


def ratio_ci(alg, opt, ratio, mean_opt) -> float:
    """Delta-method half-width for mean(ALG)/mean(OPT)."""
    n = alg.size
    if mean_opt <= 0 or n < 2:
        return math.nan if mean_opt <= 0 else 0.0
    if opt is None:
        return float(Z95 * alg.std(ddof=1) / math.sqrt(n) / mean_opt)
    if opt.size == n:
        resid = alg - ratio * opt
        return float(Z95 * resid.std(ddof=1) / math.sqrt(n) / mean_opt)
    var = alg.var(ddof=1) / n + ratio**2 * opt.var(ddof=1) / opt.size
    return float(Z95 * math.sqrt(var) / mean_opt)


def _fmt(x):
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.9g}"
    return x


def _round(x):
    if isinstance(x, float):
        return float(f"{x:.9g}") if math.isfinite(x) else None
    if isinstance(x, dict):
        return {k: _round(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_round(v) for v in x]
    return x


def report_to_json(report: ExperimentReport) -> str:
    return json.dumps(_round(asdict(report)), indent=1, sort_keys=True) + "\n"


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow({k: _fmt(v) for k, v in r.row().items()})
    return buf.getvalue()


def emit_report(report, fmt: str = "csv", path=None) -> str:
    """Serialize one report (or a list of reports, CSV only) and optionally write it."""
    if fmt == "csv":
        text = reports_to_csv(report if isinstance(report, list) else [report])
    elif fmt == "json":
        if isinstance(report, list):
            text = json.dumps([_round(asdict(r)) for r in report], indent=1, sort_keys=True) + "\n"
        else:
            text = report_to_json(report)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text
