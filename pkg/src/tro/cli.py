"""Command-line experiment harness.

Verbs::

    tro run <config.json> [--out DIR] [--jobs N]
    tro sweep <config.json> [--out DIR] [--jobs N]
    tro verify [--suite clip|selfbound|grad|all] [--seed S]
    tro params <config.json>

Exit status: 0 on success, 1 when a verification suite fails, 2 for a
config that violates the schema (the message names the field), 3 for an
infeasible target risk and 4 for a numerical failure. ``TRO_SEED``
overrides ``instance.seed``.

Replicas run in a process pool; results are merged in (method, eps_prior,
stream) order and every file is written after all workers have joined.
"""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
from scipy import stats

from .baselines import run_baseline
from .config import ConfigError, build_instance, check_targets, load_config
from .exceptions import InfeasibleTargetError, NumericalFailureError
from .results import fmt, write_run
from .synthdata import InstanceSpec, instance_from_spec
from .targetrisk import METHOD, derive_params, run_algorithm
from .verify import SUITES, diagnose_run, report_json, run_suite

log = logging.getLogger("tro")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_SCHEMA = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4

RUN_SUMMARY = "run_summary.json"
SWEEP_SUMMARY = "sweep_summary.json"
SWEEP_TABLE = "sweep_table.csv"
SWEEP_TABLE_HEADER = ("method", "eps_prior", "n_ok", "n_exhausted", "median", "q25", "q75")
MIN_FIT_POINTS = 3
MIN_SWEEP_REPLICAS = 5


class Task(NamedTuple):
    method: str
    eps_prior: Optional[float]
    stream: int


def default_jobs():
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


@lru_cache(maxsize=4)
def _instance(spec_json):
    return instance_from_spec(InstanceSpec.from_dict(json.loads(spec_json)))


def _execute(task, config_json, budget=None):
    # module level so that it pickles into worker processes
    from .config import ExperimentConfig

    config = ExperimentConfig.model_validate_json(config_json)
    instance = _instance(json.dumps(config.instance.model_dump(), sort_keys=True))
    radius = config.instance.radius_R
    if task.method == METHOD:
        algo = config.algorithm.algo_config(radius, eps_prior=task.eps_prior)
        result = run_algorithm(algo, instance, stream=task.stream)
        if config.algorithm.diagnostics:
            diagnose_run(result, instance)
        return result
    section = next(b for b in config.baselines if b.label == task.method)
    result = run_baseline(section.baseline_config(radius, budget), instance, stream=task.stream)
    result.method = task.method
    return result


def _sort_key(task):
    return (task.method, -1.0 if task.eps_prior is None else task.eps_prior, task.stream)


def execute_tasks(tasks, config, jobs=1, budget=None):
    """Run ``tasks`` and return ``{task: RunResult}`` in deterministic order."""
    tasks = sorted(tasks, key=_sort_key)
    payload = config.model_dump_json()
    if jobs <= 1 or len(tasks) <= 1:
        results = [_execute(t, payload, budget) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            futures = [pool.submit(_execute, t, payload, budget) for t in tasks]
            results = [f.result() for f in futures]
    for t, r in zip(tasks, results):
        try:
            r.check_finite()
        except ValueError as exc:
            raise NumericalFailureError(f"{t.method} stream {t.stream}: {exc}") from None
    return dict(zip(tasks, results))


def _run_dir(out, task):
    path = Path(out) / task.method
    if task.eps_prior is not None:
        path = path / f"eps_{fmt(task.eps_prior)}"
    return path / f"rep_{task.stream:03d}"


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, allow_nan=False)
        fh.write("\n")


def run_experiment(config, out_dir, jobs=1):
    """Run the algorithm and every baseline on ``config.replicas`` streams.

    Returns the run summary (also written to ``run_summary.json``).
    """
    instance = check_targets(config)
    eps = config.algorithm.eps_prior
    tasks = [Task(METHOD, None, r) for r in range(config.replicas)]
    tasks += [Task(b.label, None, r) for b in config.baselines for r in range(config.replicas)]
    results = execute_tasks(tasks, config, jobs)

    rows = []
    for task, res in results.items():
        path = write_run(res, _run_dir(out_dir, task))
        last = res.checkpoints[-1]
        rows.append(
            {
                "method": task.method,
                "stream": task.stream,
                "final_risk": res.final_risk,
                "excess_risk": res.final_risk - instance.eps_opt,
                "samples_used": res.samples_used,
                "samples_to_target": res.samples_to_target(eps),
                "last_checkpoint": last.samples,
                "dir": str(path.relative_to(out_dir)),
            }
        )
    summary = {
        "instance": config.instance.model_dump(),
        "eps_opt": instance.eps_opt,
        "eps_prior": eps,
        "derived": derive_params(
            config.algorithm.algo_config(config.instance.radius_R), instance.alpha, instance.beta, instance.dim
        ).to_dict(),
        "runs": rows,
    }
    _write_json(Path(out_dir) / RUN_SUMMARY, summary)
    return summary


def fit_line(x, y):
    """Least-squares line ``y = intercept + slope x`` with its R^2."""
    fit = stats.linregress(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return {"slope": float(fit.slope), "intercept": float(fit.intercept), "r2": float(fit.rvalue**2)}


def _row_stats(method, eps, counts):
    ok = [c for c in counts if c is not None]
    row = {"method": method, "eps_prior": eps, "n_ok": len(ok), "n_exhausted": len(counts) - len(ok)}
    if ok:
        q25, med, q75 = np.percentile(ok, [25, 50, 75])
        row.update(median=float(med), q25=float(q25), q75=float(q75))
    else:
        row.update(median=None, q25=None, q75=None)
    return row


def _method_fits(rows, warnings):
    method = rows[0]["method"]
    pts = [(r["eps_prior"], r["median"]) for r in rows if r["median"] is not None]
    out = {"log": None, "inverse": None, "ratio": None}
    if len(pts) < MIN_FIT_POINTS:
        if len(rows) > 1:
            warnings.append(f"{method}: {len(pts)} usable sweep points, no fit (need {MIN_FIT_POINTS})")
        return out
    eps = np.array([p[0] for p in pts])
    med = np.array([p[1] for p in pts])
    out["log"] = fit_line(np.log(1.0 / eps), med)
    out["inverse"] = fit_line(1.0 / eps, med)
    lo, hi = med[np.argmin(eps)], med[np.argmax(eps)]
    out["ratio"] = float(lo / hi) if hi > 0 else None
    return out


def sweep_sample_complexity(config, out_dir, jobs=1):
    """Samples-to-target across the sweep's ``eps_prior`` values.

    The algorithm runs once per (eps_prior, replica); a baseline does not
    depend on the target, so it runs once per replica with
    ``sweep.max_budget`` examples (default: its own budget) and its
    checkpoints are searched for every target. A replica that never reaches
    the target is counted as exhausted and left out of the medians.
    """
    if config.sweep is None:
        raise ConfigError("sweep", "the sweep verb needs a 'sweep' section")
    sweep = config.sweep
    instance = check_targets(config)
    warnings = []
    if len(sweep.eps_prior) < MIN_FIT_POINTS:
        warnings.append(f"{len(sweep.eps_prior)} sweep points; fits need at least {MIN_FIT_POINTS}")
    if sweep.replicas < MIN_SWEEP_REPLICAS:
        warnings.append(f"{sweep.replicas} replicas; medians are unreliable below {MIN_SWEEP_REPLICAS}")

    streams = range(sweep.replicas)
    eps_values = sorted(sweep.eps_prior, reverse=True)
    tasks = [Task(METHOD, e, r) for e in eps_values for r in streams]
    tasks += [Task(b.label, None, r) for b in config.baselines for r in streams]
    results = execute_tasks(tasks, config, jobs, budget=sweep.max_budget)
    for task, res in results.items():
        write_run(res, _run_dir(out_dir, task))

    methods = [METHOD] + [b.label for b in config.baselines]
    table, fits = [], {}
    for method in methods:
        rows = []
        for e in eps_values:
            if method == METHOD:
                counts = [results[Task(METHOD, e, r)].samples_to_target(e) for r in streams]
            else:
                counts = [results[Task(method, None, r)].samples_to_target(e) for r in streams]
            row = _row_stats(method, e, counts)
            if row["n_exhausted"]:
                warnings.append(f"{method} eps_prior={e:g}: {row['n_exhausted']} replica(s) exhausted the budget")
            rows.append(row)
        fits[method] = _method_fits(rows, warnings)
        table += rows

    for w in warnings:
        log.warning(w)
    kinds = {b.label: b.kind for b in config.baselines}
    summary = {
        "instance": config.instance.model_dump(),
        "eps_opt": instance.eps_opt,
        "replicas": sweep.replicas,
        "kinds": {METHOD: METHOD, **kinds},
        "table": table,
        "fits": fits,
        "warnings": warnings,
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / SWEEP_SUMMARY, summary)
    with open(out / SWEEP_TABLE, "w") as fh:
        fh.write(",".join(SWEEP_TABLE_HEADER) + "\n")
        for row in table:
            vals = [row["method"], fmt(row["eps_prior"]), str(row["n_ok"]), str(row["n_exhausted"])]
            vals += ["" if row[k] is None else fmt(row[k]) for k in ("median", "q25", "q75")]
            fh.write(",".join(vals) + "\n")
    return summary


def print_params(config, stream=None):
    stream = sys.stdout if stream is None else stream
    instance = build_instance(config)
    algo = config.algorithm.algo_config(config.instance.radius_R)
    p = derive_params(algo, instance.alpha, instance.beta, instance.dim)
    rows = [
        ("alpha", instance.alpha),
        ("beta", instance.beta),
        ("eps_opt", instance.eps_opt),
        ("xi", p.xi),
        ("T1", p.t1),
        ("eta", p.eta),
        ("s", p.s),
        ("m", p.m),
        ("total_samples", p.total_samples),
    ]
    for name, value in rows:
        print(f"{name:<14}{value:.10g}" if isinstance(value, float) else f"{name:<14}{value}", file=stream)
    return p


def _print_run(summary):
    for r in summary["runs"]:
        print(
            f"{r['method']:<22} stream {r['stream']:>3}  risk {r['final_risk']:.6g}  "
            f"excess {r['excess_risk']:.3g}  samples {r['samples_used']}"
        )


def _print_sweep(summary):
    for r in summary["table"]:
        med = "exhausted" if r["median"] is None else f"{r['median']:.0f}"
        print(f"{r['method']:<22} eps_prior {r['eps_prior']:<8g} median samples {med}  ({r['n_ok']} ok)")
    for method, f in summary["fits"].items():
        if f["log"] is None:
            continue
        ratio = "undefined" if f["ratio"] is None else f"{f['ratio']:.3g}"
        print(f"{method:<22} R2(log 1/eps) {f['log']['r2']:.3f}  R2(1/eps) {f['inverse']['r2']:.3f}  ratio {ratio}")


def build_parser():
    parser = argparse.ArgumentParser(prog="tro", description="Target-risk SGD experiments")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("run", "sweep"):
        p = sub.add_parser(verb)
        p.add_argument("config")
        p.add_argument("--out", default=None, help="output directory (default: output.dir of the config)")
        p.add_argument("--jobs", type=int, default=default_jobs())
    p = sub.add_parser("verify")
    p.add_argument("--suite", choices=SUITES, default="all")
    p.add_argument("--seed", type=int, default=0)
    p = sub.add_parser("params")
    p.add_argument("config")
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.verb == "verify":
        report = run_suite(args.suite, seed=args.seed)
        print(report_json(report))
        return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED
    try:
        config = load_config(args.config)
        if args.verb == "params":
            print_params(config)
            return EXIT_OK
        out = Path(args.out if args.out is not None else config.output.dir)
        jobs = max(1, args.jobs)
        if args.verb == "run":
            _print_run(run_experiment(config, out, jobs))
        else:
            _print_sweep(sweep_sample_complexity(config, out, jobs))
    except ConfigError as exc:
        print(f"config error at {exc.path}: {exc.message}", file=sys.stderr)
        return EXIT_SCHEMA
    except InfeasibleTargetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
