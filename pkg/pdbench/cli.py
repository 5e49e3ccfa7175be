"""
Command-line front door.

    python -m pdbench.cli validate  --data parkinsons.data
    python -m pdbench.cli summarize --data parkinsons.data [--out results/]
    python -m pdbench.cli heatmap   --data parkinsons.data [--out results/heatmap.svg]
    python -m pdbench.cli train     --model svm --kernel rbf --c 10 --data parkinsons.data --save model.json
    python -m pdbench.cli predict   --model model.json --input new.csv [--out scores.csv]
    python -m pdbench.cli bench     --data parkinsons.data --suite all --seed 42 --out results/

Exit codes: 0 success, 2 usage, 3 data error, 4 model error.
Settings precedence: flags > --config JSON file > environment (.env) > defaults.
"""

import argparse
import json
import logging
import sys
import traceback
from dataclasses import dataclass, field
from pathlib import Path

from . import config
from .bench import SUITES, BenchConfig, render_heatmap, run_bench
from .errors import PdBenchError, UsageError
from .ingest import (
    class_counts, correlation_matrix, load_dataset, load_features, strong_pairs, summarize,
    top_correlations,
)
from .linear_models import SOLVER_ALIASES, SOLVERS, SolverConfig, train_logreg
from .metrics import evaluate, render_ratio, time_training
from .neural import KINDS, default_spec, train_neural
from .persistence import TrainedModel, load_model, save_model
from .preprocess import fit_chain, stratified_split
from .svm import KERNELS, Kernel, train_svm
from .tables import csv_text, write_text
from .tree_ensembles import STYLES, train_forest, train_gbdt

logger = logging.getLogger(__name__)

VERBS = ("validate", "summarize", "heatmap", "train", "predict", "bench")
MODELS = ("logreg", "svm", "forest", "gbdt", "neural")
SETTING_KEYS = ("data", "out", "seed", "test_fraction", "cv_folds", "pca_variance", "suites", "jobs",
                "record_timing", "grid_file")


@dataclass(frozen=True)
class Command:
    verb: str
    options: dict = field(default_factory=dict)


class _Parser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _max_depth(text):
    if text.lower() in ("none", "null", "unlimited"):
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'None', got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("max depth must be >= 1")
    return value


def _gamma(text):
    if text in ("scale", "auto"):
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, 'scale' or 'auto', got {text!r}")


def _suite_list(text):
    return [s.strip() for s in text.split(",") if s.strip()]


def _add_common(p, data=True):
    if data:
        p.add_argument("--data", help="UCI parkinsons.data CSV (default: $PDBENCH_DATA)")
    p.add_argument("--config", help="JSON settings file (overridden by flags)")
    p.add_argument("--seed", type=int)
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def build_parser():
    parser = _Parser(prog="pdbench", description="Parkinson's voice classification benchmark")
    verbs = parser.add_subparsers(dest="verb", metavar="verb", required=True)

    p = verbs.add_parser("validate", help="load and validate the data file")
    _add_common(p)

    p = verbs.add_parser("summarize", help="summary statistics, strongest correlations and outliers")
    _add_common(p)
    p.add_argument("--out", help="directory for table1.csv / table1.md")

    p = verbs.add_parser("heatmap", help="correlation heatmap as SVG")
    _add_common(p)
    p.add_argument("--out", help="SVG path (default: <output dir>/heatmap.svg)")

    p = verbs.add_parser("train", help="train one model on the fixed split and save it")
    _add_common(p)
    p.add_argument("--model", required=True, choices=MODELS)
    p.add_argument("--save", required=True, help="model JSON path")
    p.add_argument("--pca", action="store_true", help="PCA after standardization")
    p.add_argument("--pca-variance", dest="pca_variance", type=float)
    p.add_argument("--c", type=float, help="C (default: logreg 100, svm 10)")
    p.add_argument("--solver", choices=SOLVERS + tuple(SOLVER_ALIASES), default="newton")
    p.add_argument("--kernel", choices=KERNELS, default="rbf")
    p.add_argument("--gamma", type=_gamma, default="scale")
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--coef0", type=float, default=0.0)
    p.add_argument("--n-estimators", dest="n_estimators", type=int, default=100)
    p.add_argument("--max-depth", dest="max_depth", type=_max_depth, default=argparse.SUPPRESS,
                   help="tree depth, or None (default: forest None, gbdt 3)")
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--style", choices=STYLES, default="classic")
    p.add_argument("--lambda", dest="reg_lambda", type=float, default=1.0)
    p.add_argument("--max-bins", dest="max_bins", type=int, default=255)
    p.add_argument("--kind", choices=KINDS, default="fnn")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)

    p = verbs.add_parser("predict", help="score a CSV with a saved model")
    p.add_argument("--model", required=True, help="model JSON written by train")
    p.add_argument("--input", required=True, help="CSV with the model's feature columns")
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.add_argument("-v", "--verbose", action="store_true")

    p = verbs.add_parser("bench", help="run benchmark suites and write result tables")
    _add_common(p)
    p.add_argument("--suite", dest="suites", action="append", type=_suite_list,
                   help="suite name(s), comma separated or repeated: all, " + ", ".join(SUITES))
    p.add_argument("--out", help="output directory")
    p.add_argument("--cv-folds", dest="cv_folds", type=int)
    p.add_argument("--pca-variance", dest="pca_variance", type=float)
    p.add_argument("--jobs", type=int, help="parallel grid cells (timed suites stay serial)")
    p.add_argument("--no-timing", dest="record_timing", action="store_false", default=None,
                   help="write NA for training time (byte-identical reruns)")
    p.add_argument("--grid-file", dest="grid_file")
    return parser


def parse_args(argv=None):
    args = build_parser().parse_args(argv)
    options = {k: v for k, v in vars(args).items() if k != "verb"}
    if options.get("suites") is not None:
        options["suites"] = [s for group in options["suites"] for s in group]
    return Command(verb=args.verb, options=options)


def resolve_settings(options):
    """defaults <- environment <- config file <- flags"""
    settings = config.defaults()
    settings.update(suites=["all"], jobs=1, record_timing=True, grid_file=None)

    config_path = options.get("config")
    if config_path:
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                from_file = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"--config {config_path}: {e}")
        if not isinstance(from_file, dict):
            raise UsageError(f"--config {config_path}: expected a JSON object")
        unknown = sorted(set(from_file) - set(SETTING_KEYS))
        if unknown:
            raise UsageError(f"--config {config_path}: unknown keys {', '.join(unknown)}")
        settings.update(from_file)

    for key in SETTING_KEYS:
        if options.get(key) is not None:
            settings[key] = options[key]
    return settings


def _require_data(settings):
    if not settings.get("data"):
        raise UsageError("No data file: pass --data or set PDBENCH_DATA")
    return settings["data"]


def _provenance_lines(ds, settings):
    split = stratified_split(ds, settings["test_fraction"], settings["seed"])
    return [f"seed={settings['seed']}", f"split_sha256={split.digest()}"]


def _banner(title):
    print("=" * 70)
    print(title)
    print("=" * 70)


# Verbs

def cmd_validate(options):
    settings = resolve_settings(options)
    ds = load_dataset(_require_data(settings))
    counts = class_counts(ds)
    _banner("Data validation")
    print(f"✓ {len(ds)} records, {len(ds.feature_names)} features, no missing or non-finite values")
    print(f"✓ status=1 (PD): {counts[1]}   status=0 (healthy): {counts[0]}")
    if counts != config.STATED_CLASS_COUNTS:
        print(f"⚠ Published description states {config.STATED_CLASS_COUNTS[1]} PD / "
              f"{config.STATED_CLASS_COUNTS[0]} healthy; the file is used as ground truth")
    return 0


def cmd_summarize(options):
    settings = resolve_settings(options)
    ds = load_dataset(_require_data(settings))
    table = summarize(ds)
    corr = correlation_matrix(ds)

    _banner("Summary Statistics")
    for feature in table.features:
        print(f"{feature:<18s} mean {table.value('mean', feature):>12.6f}   std {table.value('std', feature):>12.6f}"
              f"   min {table.value('min', feature):>12.6f}   max {table.value('max', feature):>12.6f}"
              f"   outliers {table.outliers[feature]:>3d}")

    print("\nStrongest correlations with status:")
    for feature, r in top_correlations(corr, k=5):
        print(f"  {feature:<18s} {r:+.2f}")
    pairs = strong_pairs(corr, 0.9)
    print(f"\nRedundant feature pairs (|r| >= 0.9): {len(pairs)}")
    for a, b, r in pairs[:10]:
        print(f"  {a} / {b}: {r:+.2f}")

    out = options.get("out")
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        lines = _provenance_lines(ds, settings) + [f"records={len(ds)}"]
        write_text(out / "table1.csv", table.to_csv(comments=lines))
        write_text(out / "table1.md", table.to_markdown(notes=["; ".join(lines)]))
        print(f"\n✓ Wrote {out / 'table1.csv'} and {out / 'table1.md'}")
    return 0


def cmd_heatmap(options):
    settings = resolve_settings(options)
    ds = load_dataset(_require_data(settings))
    out = Path(options.get("out") or settings["out"])
    if out.suffix.lower() != ".svg":
        out = out / "heatmap.svg"
    render_heatmap(correlation_matrix(ds, include_status=True), out, _provenance_lines(ds, settings))
    print(f"✓ Heatmap written to {out}")
    return 0


def _fitter(options, seed):
    """Training closure and table label for the requested model."""
    model = options["model"]
    if model == "logreg":
        C = options["c"] if options.get("c") is not None else 100.0
        cfg = SolverConfig(solver=options["solver"], seed=seed)
        return (lambda X, y: train_logreg(X, y, C, cfg)), f"logreg {cfg.solver} C={C:g}"
    if model == "svm":
        C = options["c"] if options.get("c") is not None else 10.0
        kernel = Kernel(kind=options["kernel"], gamma=options["gamma"], degree=options["degree"],
                        coef0=options["coef0"])
        return (lambda X, y: train_svm(X, y, C, kernel)), f"svm {kernel.kind} C={C:g}"
    if model == "forest":
        n, depth = options["n_estimators"], options.get("max_depth")
        return ((lambda X, y: train_forest(X, y, n_estimators=n, max_depth=depth, seed=seed)),
                f"n_estimators={n}, max_depth={depth}")
    if model == "gbdt":
        depth = options["max_depth"] if "max_depth" in options else 3
        rate = options["learning_rate"] if options.get("learning_rate") is not None else 0.1
        return ((lambda X, y: train_gbdt(X, y, n_estimators=options["n_estimators"], learning_rate=rate,
                                         max_depth=depth, style=options["style"],
                                         reg_lambda=options["reg_lambda"], max_bins=options["max_bins"],
                                         seed=seed)),
                f"{options['style']} n={options['n_estimators']}, rate={rate:g}, depth={depth}")
    overrides = {"seed": seed}
    for key in ("epochs", "batch_size"):
        if options.get(key) is not None:
            overrides[key] = options[key]
    if options.get("learning_rate") is not None:
        overrides["learning_rate"] = options["learning_rate"]
    spec = default_spec(options["kind"], **overrides)
    return (lambda X, y: train_neural(X, y, spec)), spec.kind.upper()


def cmd_train(options):
    settings = resolve_settings(options)
    data = _require_data(settings)
    ds = load_dataset(data)
    split = stratified_split(ds, settings["test_fraction"], settings["seed"])
    matrix = ds.to_matrix()
    train, test = matrix.take(split.train), matrix.take(split.test)

    chain = fit_chain(train, use_pca=options.get("pca", False), variance_target=settings["pca_variance"])
    fit, label = _fitter(options, settings["seed"])
    model, seconds = time_training(lambda: fit(chain.apply(train).values, train.labels))

    trained = TrainedModel(model=model, feature_names=tuple(ds.feature_names), chain=chain)
    test_report = evaluate(test.labels, trained.predict(test)[1], label)
    file_report = evaluate(matrix.labels, trained.predict(matrix)[1], label)
    metadata = {
        "label": label,
        "seed": settings["seed"],
        "test_fraction": settings["test_fraction"],
        "split_sha256": split.digest(),
        "pca_components": chain.pca.k if chain.pca is not None else None,
        "train_time_s": round(seconds, 4),
        "test_accuracy": render_ratio(test_report.accuracy_exact),
        "test_precision": render_ratio(test_report.precision_exact),
        "training_file_accuracy": render_ratio(file_report.accuracy_exact),
    }
    save_model(TrainedModel(model=model, feature_names=trained.feature_names, chain=chain, metadata=metadata),
               options["save"])

    _banner(f"Trained {label}")
    print(f"✓ Test accuracy:  {metadata['test_accuracy']}   precision: {metadata['test_precision']}")
    print(f"✓ Training time:  {seconds:.4f} s")
    print(f"✓ Saved to {options['save']}")
    return 0


def cmd_predict(options):
    trained = load_model(options["model"])
    X = load_features(options["input"], trained.feature_names)
    scores, labels = trained.predict(X)
    rows = []
    for name, score, label in zip(X.names, scores, labels):
        probability = repr(float(score)) if trained.has_probability else "NA"
        rows.append([name, probability, int(label)])
    text = csv_text(["name", "probability", "label"], rows)

    out = options.get("out")
    if out:
        write_text(out, text)
        print(f"✓ Scored {len(rows)} rows -> {out}")
    else:
        sys.stdout.write(text)
    return 0


def print_bench_summary(rs):
    _banner("Best configuration per suite")
    for suite in rs.reports:
        best = rs.best(suite)
        failed = sum(r.failed for r in rs.reports[suite])
        if best is None:
            print(f"❌ {suite:<15s} every configuration failed")
            continue
        line = (f"✓ {suite:<15s} {best.label:<40s} accuracy {render_ratio(best.accuracy_exact)}"
                f"   precision {render_ratio(best.precision_exact)}")
        if failed:
            line += f"   ({failed} failed)"
        print(line)


def cmd_bench(options):
    settings = resolve_settings(options)
    cfg = BenchConfig(
        data=_require_data(settings),
        seed=settings["seed"],
        test_fraction=settings["test_fraction"],
        cv_folds=settings["cv_folds"],
        suites=tuple(settings["suites"]),
        out_dir=settings["out"],
        pca_variance=settings["pca_variance"],
        record_timing=bool(settings["record_timing"]),
        n_jobs=settings["jobs"],
        grid_file=settings.get("grid_file"),
    )
    _banner(f"Benchmark: {', '.join(cfg.suites) or '(no suites)'}")
    rs, written = run_bench(cfg)
    if not written:
        print("⚠ No suites selected, nothing written")
        return 0
    if rs.reports:
        print_bench_summary(rs)
    print(f"\n✓ {len(written)} files written to {cfg.out_dir}")
    return 0


HANDLERS = {
    "validate": cmd_validate,
    "summarize": cmd_summarize,
    "heatmap": cmd_heatmap,
    "train": cmd_train,
    "predict": cmd_predict,
    "bench": cmd_bench,
}


def configure_logging(verbose=False):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    try:
        command = parse_args(argv)
        configure_logging(command.options.get("verbose", False))
        return HANDLERS[command.verb](command.options)
    except KeyboardInterrupt:
        print("\n\n⚠ Interrupted by user")
        return 130
    except PdBenchError as e:
        print(f"\n❌ {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        print(f"\n❌ Unexpected error: {e}", file=sys.stderr)
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
