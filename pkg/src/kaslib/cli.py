"""Command-line interface: ``kaslib {run-benchmark,generate,tune,fit,predict,compare}``.

Exit status is 0 on success, 2 for usage and input-file problems, 3 for
numerical failures.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import kernels
from .benchmarks import REGISTRY, make_benchmark
from .datasets import _read_table, _write_table, dataset_paths, read_dataset, write_dataset
from .errors import (DimensionError, DomainError, FitError, FoldError, KasError, RangeError,
                     SchemaError, StateError, UnsupportedError)
from .featuremap import MEASURE_KINDS, FeatureMap
from .pipeline import Surrogate, compare, fit_surrogate, predict, summary_plot_data, write_plot_csv
from .tuning import GRID_MAX, GRID_MIN, GRID_POINTS, TuneConfig, default_grid, grid_search

log = logging.getLogger("kaslib")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

# Per-benchmark defaults: training samples, test samples, spectral measure.
BENCH_DEFAULTS = {
    "paraboloid": (500, 500, "gaussian"),
    "sine": (800, 500, "laplace"),
    "ebola": (800, 0, "beta"),
    "vec-quadratic": (500, 0, "gaussian"),
}


class UsageError(KasError):
    pass


def _write_json(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _out_dir(args):
    os.makedirs(args.out_dir, exist_ok=True)
    return args.out_dir


def _tune_config(args, measure, r):
    grid = default_grid(measure, args.grid_min, args.grid_max, args.grid_points)
    return TuneConfig(grid, D=args.features, r=r, folds=args.folds, tol=args.tol,
                      sigma_f=args.sigma_f, seed=args.seed, workers=args.threads)


def _load_dataset(args):
    if not (args.inputs and args.outputs and args.gradients):
        raise UsageError("--inputs, --outputs and --gradients are all required")
    paths = {"inputs": args.inputs, "outputs": args.outputs, "gradients": args.gradients,
             "metric": args.metric}
    for key, path in paths.items():
        if path and not os.path.exists(path):
            raise UsageError(f"{key} file {path} does not exist")
    return read_dataset(paths)


def _rs(args):
    return sorted(set(args.r)) if args.r else [1]


def _write_summary_plots(out, surrogates, X, Y):
    for method, s in surrogates.items():
        rows = summary_plot_data(s, X, Y)
        write_plot_csv(os.path.join(out, f"summary_{method}.csv"), rows)


def _comparison_outputs(out, ds, rep, test):
    _write_json(os.path.join(out, "report.json"), rep.to_dict())
    _write_text(os.path.join(out, "report.csv"), rep.to_csv())
    if rep.feature_map is not None:
        _write_json(os.path.join(out, "featuremap.json"), rep.feature_map.to_dict())
    if ds.d != 1:
        log.info("summary plots skipped: output is %d-dimensional", ds.d)
        return
    surrogates = {"AS": fit_surrogate(ds, "AS", 1)}
    if rep.feature_map is not None:
        surrogates["KAS"] = fit_surrogate(ds, "KAS", 1, rep.feature_map)
    shown = test if test is not None else ds
    _write_summary_plots(out, surrogates, shown.X, shown.Y[:, 0])


def cmd_run_benchmark(args):
    if args.name not in REGISTRY:
        raise UsageError(f"unknown benchmark {args.name!r}; choose from {', '.join(REGISTRY)}")
    train, ntest, measure = BENCH_DEFAULTS[args.name]
    train = args.train or train
    ntest = ntest if args.test is None else args.test
    measure = args.measure or measure
    bench = make_benchmark(args.name, seed=args.seed)
    ds = bench.dataset(train, args.seed)
    test = bench.dataset(ntest, args.seed + 1) if ntest else None
    rs = _rs(args)
    rep = compare(ds, _tune_config(args, measure, rs[0]), rs, measure, test)
    out = _out_dir(args)
    _comparison_outputs(out, ds, rep, test)
    for c in rep.cells:
        d = c.to_dict()
        log.info("%s r=%d cv %s test %s", d["method"], d["r"], d["cv_mean"], d["test_mean"])
    return EXIT_OK


def cmd_generate(args):
    if args.name not in REGISTRY:
        raise UsageError(f"unknown benchmark {args.name!r}; choose from {', '.join(REGISTRY)}")
    bench = make_benchmark(args.name, seed=args.seed)
    ds = bench.dataset(args.train or BENCH_DEFAULTS[args.name][0], args.seed)
    paths = dataset_paths(_out_dir(args))
    if ds.d == 1:
        paths["metric"] = None
    write_dataset(ds, paths)
    return EXIT_OK


def cmd_tune(args):
    ds = _load_dataset(args)
    measure = args.measure or "gaussian"
    rep = grid_search(ds, _tune_config(args, measure, _rs(args)[0]), measure)
    out = _out_dir(args)
    _write_json(os.path.join(out, "tune_report.json"), rep.to_dict())
    if rep.feature_map is not None:
        _write_json(os.path.join(out, "featuremap.json"), rep.feature_map.to_dict())
    else:
        log.error("tuning found no grid point with mean score below 1")
    return EXIT_OK


def cmd_fit(args):
    ds = _load_dataset(args)
    method = args.method.upper()
    r = _rs(args)[0]
    out = _out_dir(args)
    fm = None
    if method == "KAS":
        if args.featuremap:
            if not os.path.exists(args.featuremap):
                raise UsageError(f"feature map file {args.featuremap} does not exist")
            with open(args.featuremap, encoding="utf-8") as fh:
                fm = FeatureMap.from_dict(json.load(fh))
        else:
            measure = args.measure or "gaussian"
            rep = grid_search(ds, _tune_config(args, measure, r), measure)
            if rep.feature_map is None:
                raise FitError("tuning found no usable feature map")
            fm = rep.feature_map
        _write_json(os.path.join(out, "featuremap.json"), fm.to_dict())
    s = fit_surrogate(ds, method, r, fm)
    _write_json(os.path.join(out, "surrogate.json"), s.to_dict())
    return EXIT_OK


def cmd_predict(args):
    path = args.surrogate or os.path.join(args.out_dir, "surrogate.json")
    if not os.path.exists(path):
        raise UsageError(f"surrogate file {path} does not exist; run fit first")
    if not args.inputs or not os.path.exists(args.inputs):
        raise UsageError("--inputs must name an existing CSV file")
    with open(path, encoding="utf-8") as fh:
        s = Surrogate.from_dict(json.load(fh))
    _, X = _read_table(args.inputs)
    if X.shape[1] != s.spec.m and X.shape[0] > 0:
        raise DimensionError(f"{args.inputs}: {X.shape[1]} columns, surrogate expects {s.spec.m}")
    mean, var = predict(s, X.reshape(-1, s.spec.m))
    header = ["mean"] if mean.shape[1] == 1 else [f"mean_{j + 1}" for j in range(mean.shape[1])]
    _write_table(os.path.join(_out_dir(args), "predictions.csv"), header + ["variance"],
                 np.column_stack([mean, var]))
    return EXIT_OK


def cmd_compare(args):
    ds = _load_dataset(args)
    measure = args.measure or "gaussian"
    rs = _rs(args)
    rep = compare(ds, _tune_config(args, measure, rs[0]), rs, measure)
    _comparison_outputs(_out_dir(args), ds, rep, None)
    return EXIT_OK


def _add_common(p, dataset=False):
    if dataset:
        p.add_argument("--inputs", help="inputs CSV (header row, one column per input)")
        p.add_argument("--outputs", help="outputs CSV")
        p.add_argument("--gradients", help="gradients CSV, columns g_<output>_<input>, taken "
                       "with respect to the coordinates of the inputs file")
        p.add_argument("--metric", help="optional d x d output metric CSV without header")
    p.add_argument("--seed", type=int, default=0, help="seed for every random draw")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out-dir", default=".", help="directory for output files")


def _add_tuning(p):
    p.add_argument("--r", type=int, action="append", help="active dimension (repeatable)")
    p.add_argument("--features", type=int, default=1000, help="feature space dimension D")
    p.add_argument("--sigma-f", type=float,
                   help="feature amplitude (default: output standard deviation)")
    p.add_argument("--measure", choices=MEASURE_KINDS)
    p.add_argument("--grid-min", type=float, default=GRID_MIN)
    p.add_argument("--grid-max", type=float, default=GRID_MAX)
    p.add_argument("--grid-points", type=int, default=GRID_POINTS)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--tol", type=float, default=0.8)


def build_parser():
    parser = argparse.ArgumentParser(prog="kaslib", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-benchmark", help="sample a benchmark, tune, compare AS and KAS")
    p.add_argument("--name", required=True, help=f"one of {', '.join(REGISTRY)}")
    p.add_argument("--train", type=int, help="training samples")
    p.add_argument("--test", type=int, help="extra held-out test samples")
    _add_tuning(p)
    _add_common(p)
    p.set_defaults(func=cmd_run_benchmark, folds=3)

    p = sub.add_parser("generate", help="write a benchmark dataset as CSV files")
    p.add_argument("--name", required=True)
    p.add_argument("--train", type=int, help="number of samples")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("tune", help="grid-search the spectral measure of a feature map")
    _add_tuning(p)
    _add_common(p, dataset=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("fit", help="fit an AS or KAS response surface")
    p.add_argument("--method", choices=("as", "kas"), default="as")
    p.add_argument("--featuremap", help="feature map JSON from tune (KAS); tunes when absent")
    _add_tuning(p)
    _add_common(p, dataset=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="evaluate a fitted surrogate on new inputs")
    p.add_argument("--surrogate", help="surrogate JSON (default: <out-dir>/surrogate.json)")
    p.add_argument("--inputs", help="inputs CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("compare", help="tune and cross-validate AS against KAS on a CSV dataset")
    _add_tuning(p)
    _add_common(p, dataset=True)
    p.set_defaults(func=cmd_compare)
    return parser


def _configure_logging():
    level = os.environ.get("KASLIB_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be positive")
    kernels.set_threads(args.threads)
    try:
        return args.func(args)
    except (UsageError, SchemaError, DimensionError, RangeError, UnsupportedError, StateError,
            FileNotFoundError) as exc:
        print(f"kaslib: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, FitError, FoldError, DomainError) as exc:
        print(f"kaslib: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"kaslib: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
