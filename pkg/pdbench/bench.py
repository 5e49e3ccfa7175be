"""
Benchmark runner: executes each suite's grid on the fixed stratified split and
writes {suite}.csv / {suite}.md, table1.*, heatmap.svg and provenance.json.

Suites (closed set):
    table1, heatmap                     descriptive outputs
    gcf                                 random forest grid
    logreg, logreg_pca                  four solvers at the documented C
    svm, svm_pca                        four kernels at C = 10
    gbm, xgb_style                      classic / second-order boosting on standardized features
    lgbm_style, catboost_style          histogram / oblivious boosting after PCA
    neural                              fnn, rnn, lstm
    gbm_pca                             optional, not part of "all"
"""

import hashlib
import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from matplotlib import colormaps
from matplotlib.cm import ScalarMappable
from matplotlib.colors import Normalize
from matplotlib.patches import Rectangle
import numpy as np

from . import config
from .errors import InvalidParameter
from .ingest import correlation_matrix, load_dataset, strong_pairs, summarize, top_correlations
from .linear_models import SolverConfig, predict_logreg, select_C, train_logreg
from .metrics import EvalReport, evaluate, time_training
from .neural import default_spec, predict_neural, train_neural
from .preprocess import fit_chain, stratified_kfold, stratified_split
from .svm import Kernel, predict_svm, select_svm_C, train_svm
from .tables import csv_text, markdown_text, write_text
from .tree_ensembles import GridResult, boosting_label, predict_ensemble, train_forest, train_gbdt

logger = logging.getLogger(__name__)

DESCRIPTIVE_SUITES = ("table1", "heatmap")
MODEL_SUITES = ("gcf", "logreg", "logreg_pca", "svm", "svm_pca", "gbm", "xgb_style",
                "lgbm_style", "catboost_style", "neural")
ALL_SUITES = DESCRIPTIVE_SUITES + MODEL_SUITES
OPTIONAL_SUITES = ("gbm_pca",)
SUITES = ALL_SUITES + OPTIONAL_SUITES

# timed for ordering comparisons: always run serially
SERIAL_SUITES = ("gcf", "neural")

CSV_HEADER = ("config", "accuracy", "precision", "train_time_s")
TABLE_HEADER = ("Model", "Accuracy", "Precision", "Training Time (s)")


def calculate_file_hash(file_path):
    """Calculate SHA256 hash of file content."""
    h = hashlib.sha256()
    with open(file_path, "rb") as f:
        for chunk in iter(lambda: f.read(4096), b""):
            h.update(chunk)
    return h.hexdigest()


def load_grids(path=None):
    path = Path(path or config.GRID_FILE)
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def expand_suites(names):
    """Resolve 'all' and validate names, preserving order without duplicates."""
    resolved = []
    for name in names:
        for suite in (ALL_SUITES if name == "all" else (name,)):
            if suite not in SUITES:
                raise InvalidParameter("suite", suite, "one of all, " + ", ".join(SUITES))
            if suite not in resolved:
                resolved.append(suite)
    return tuple(resolved)


@dataclass(frozen=True)
class BenchConfig:
    data: str
    seed: int = config.DEFAULT_SEED
    test_fraction: float = config.DEFAULT_TEST_FRACTION
    cv_folds: int = config.DEFAULT_CV_FOLDS
    suites: tuple = ("all",)
    out_dir: str = str(config.OUTPUT_DIR)
    pca_variance: float = config.PCA_VARIANCE
    record_timing: bool = True
    n_jobs: int = 1
    grid_file: str = None

    def __post_init__(self):
        object.__setattr__(self, "suites", expand_suites(self.suites))
        if not 0 < self.test_fraction < 1:
            raise InvalidParameter("test_fraction", self.test_fraction, "0 < fraction < 1")
        if self.cv_folds < 2:
            raise InvalidParameter("cv_folds", self.cv_folds, "cv_folds >= 2")
        if self.n_jobs < 1:
            raise InvalidParameter("jobs", self.n_jobs, "jobs >= 1")

    def to_dict(self):
        return {
            "data": str(self.data),
            "seed": self.seed,
            "test_fraction": self.test_fraction,
            "cv_folds": self.cv_folds,
            "suites": list(self.suites),
            "out_dir": str(self.out_dir),
            "pca_variance": self.pca_variance,
            "record_timing": self.record_timing,
            "jobs": self.n_jobs,
            "grid_file": str(self.grid_file or config.GRID_FILE),
        }


@dataclass
class Prepared:
    """The fixed split with preprocessing chains fitted on its training part only."""
    dataset: object
    split: object
    train: object
    test: object
    chains: dict  # {False: scaler only, True: scaler + PCA}
    folds: list

    def features(self, use_pca):
        chain = self.chains[use_pca]
        return chain.apply(self.train).values, chain.apply(self.test).values

    @property
    def y_train(self):
        return self.train.labels

    @property
    def y_test(self):
        return self.test.labels


def prepare(cfg, ds=None):
    ds = ds if ds is not None else load_dataset(cfg.data)
    split = stratified_split(ds, cfg.test_fraction, cfg.seed)
    matrix = ds.to_matrix()
    train = matrix.take(split.train)
    test = matrix.take(split.test)
    chains = {False: fit_chain(train), True: fit_chain(train, use_pca=True, variance_target=cfg.pca_variance)}
    folds = stratified_kfold(train.labels, cfg.cv_folds, cfg.seed)
    pca = chains[True].pca
    logger.info("Split: %d train / %d test (seed %d); PCA keeps %d components",
                len(split.train), len(split.test), cfg.seed, pca.k)
    return Prepared(dataset=ds, split=split, train=train, test=test, chains=chains, folds=folds)


@dataclass
class ReportSet:
    reports: dict = field(default_factory=dict)  # suite -> [EvalReport] in grid order
    provenance: dict = field(default_factory=dict)

    def merge(self, other):
        self.reports.update(other.reports)
        for key, value in other.provenance.items():
            if key == "suites":
                self.provenance.setdefault("suites", {}).update(value)
            else:
                self.provenance.setdefault(key, value)
        return self

    def best(self, suite):
        """Highest accuracy, then precision; earliest grid cell wins ties."""
        best = None
        for report in self.reports.get(suite, []):
            if report.failed:
                continue
            key = (report.accuracy_exact, report.precision_exact or 0)
            if best is None or key > best[0]:
                best = (key, report)
        return None if best is None else best[1]


# Cells: (label, fit(X, y) -> model, predict(model, X) -> (scores, labels))

def _gcf_cells(spec, cfg):
    grid = spec["grid"]
    for n_estimators, max_depth in itertools.product(grid["n_estimators"], grid["max_depth"]):
        label = f"n_estimators={n_estimators}, max_depth={max_depth}"
        yield label, (lambda X, y, n=n_estimators, d=max_depth:
                      train_forest(X, y, n_estimators=n, max_depth=d, seed=cfg.seed)), predict_ensemble


def _logreg_cells(spec, cfg):
    for solver in spec["solvers"]:
        solver_cfg = SolverConfig(solver=solver, seed=cfg.seed)
        yield solver, (lambda X, y, s=solver_cfg: train_logreg(X, y, spec["C"], s)), predict_logreg


def _svm_cells(spec, cfg):
    for kind in spec["kernels"]:
        yield kind, (lambda X, y, k=Kernel(kind=kind): train_svm(X, y, spec["C"], k)), predict_svm


def _gbdt_cells(spec, cfg):
    grid = spec["grid"]
    for n, rate, depth in itertools.product(grid["n_estimators"], grid["learning_rate"], grid["max_depth"]):
        yield boosting_label(n, rate, depth), (lambda X, y, n=n, rate=rate, depth=depth:
                                               train_gbdt(X, y, n_estimators=n, learning_rate=rate,
                                                          max_depth=depth, style=spec["style"],
                                                          seed=cfg.seed)), predict_ensemble


def _neural_cells(spec, cfg):
    for kind in spec["kinds"]:
        neural_spec = default_spec(kind, epochs=spec.get("epochs", 200), seed=cfg.seed)
        yield kind.upper(), (lambda X, y, s=neural_spec: train_neural(X, y, s)), predict_neural


_CELLS = {"forest": _gcf_cells, "logreg": _logreg_cells, "svm": _svm_cells,
          "gbdt": _gbdt_cells, "neural": _neural_cells}


def run_cell(label, fit, predict, X_train, y_train, X_test, y_test, record_timing=True):
    """Fit (timed), score on the test split; any exception marks the cell failed."""
    try:
        model, seconds = time_training(lambda: fit(X_train, y_train))
        _, labels = predict(model, X_test)
        report = evaluate(y_test, labels, label)
    except Exception as e:
        logger.warning("%s failed: %s", label, e)
        return EvalReport.failure(label, e)
    return report.with_timing(seconds if record_timing else None)


def _suite_extras(suite, spec, X_train, y_train, prepared, cfg):
    """Cross-validation tables reported alongside the documented C."""
    if spec["model"] == "logreg":
        best, rows = select_C(X_train, y_train, spec["cv_grid"], SolverConfig("newton"), prepared.folds)
        return {"C": spec["C"], "cv_selected_C": best, "cv": rows}
    if spec["model"] == "svm":
        best, rows = select_svm_C(X_train, y_train, spec["cv_grid"], Kernel("rbf"), prepared.folds)
        return {"C": spec["C"], "cv_kernel": "rbf", "cv_selected_C": best, "cv": rows}
    return {}


def run_suite(cfg, suite, prepared=None, grids=None):
    if suite in DESCRIPTIVE_SUITES or suite not in SUITES:
        raise InvalidParameter("suite", suite, "a model suite: " + ", ".join(MODEL_SUITES + OPTIONAL_SUITES))
    prepared = prepared or prepare(cfg)
    grids = grids or load_grids(cfg.grid_file)
    spec = grids["suites"][suite]
    use_pca = bool(spec.get("pca"))
    X_train, X_test = prepared.features(use_pca)
    y_train, y_test = prepared.y_train, prepared.y_test

    cells = list(_CELLS[spec["model"]](spec, cfg))
    logger.info("Suite %s: %d configurations%s", suite, len(cells), " (PCA)" if use_pca else "")

    def job(cell):
        label, fit, predict = cell
        return run_cell(label, fit, predict, X_train, y_train, X_test, y_test, cfg.record_timing)

    if cfg.n_jobs > 1 and suite not in SERIAL_SUITES:
        with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
            reports = list(pool.map(job, cells))
    else:
        reports = [job(cell) for cell in cells]

    extras = _suite_extras(suite, spec, X_train, y_train, prepared, cfg)
    suite_provenance = {"title": spec.get("title", suite), "pca": use_pca, "rows": len(reports)}
    if use_pca:
        suite_provenance["pca_components"] = prepared.chains[True].pca.k
    suite_provenance.update(extras)
    return ReportSet(reports={suite: reports}, provenance={**base_provenance(cfg, prepared),
                                                           "suites": {suite: suite_provenance}})


def grid_results(rs, suite, grids=None):
    """Boosting suite rows as GridResult records (configuration parsed from the grid order)."""
    grids = grids or load_grids()
    spec = grids["suites"][suite]
    grid = spec["grid"]
    configs = itertools.product(grid["n_estimators"], grid["learning_rate"], grid["max_depth"])
    return [GridResult(n, rate, depth, spec["style"], report)
            for (n, rate, depth), report in zip(configs, rs.reports[suite])]


def base_provenance(cfg, prepared):
    return {
        "schema_version": config.SCHEMA_VERSION,
        "seed": cfg.seed,
        "test_fraction": cfg.test_fraction,
        "split_sha256": prepared.split.digest(),
        "train_size": len(prepared.split.train),
        "test_size": len(prepared.split.test),
        "config": cfg.to_dict(),
    }


def _provenance_lines(suite, provenance):
    return [f"suite={suite}", f"seed={provenance['seed']}", f"split_sha256={provenance['split_sha256']}"]


def emit_tables(rs, fmt, out_dir):
    """One file per suite; returns the written paths."""
    if fmt not in ("csv", "markdown"):
        raise InvalidParameter("format", fmt, "csv or markdown")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for suite, reports in rs.reports.items():
        if not reports:
            continue
        lines = _provenance_lines(suite, rs.provenance)
        rows = [r.row(timing=r.train_time_seconds is not None) for r in reports]
        if fmt == "csv":
            path = out_dir / f"{suite}.csv"
            write_text(path, csv_text(CSV_HEADER, rows, comments=lines))
        else:
            path = out_dir / f"{suite}.md"
            title = rs.provenance.get("suites", {}).get(suite, {}).get("title", suite)
            write_text(path, markdown_text(TABLE_HEADER, rows, title=title, notes=["; ".join(lines)]))
        written.append(path)
    return written


def render_heatmap(c, out, provenance=()):
    """
    23x23 diverging-color grid over [-1, 1] with 2-decimal cell labels, written as SVG.
    `provenance` lines (seed, split digest) go into the SVG <title> and metadata description.
    """
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    n = len(c.labels)
    cmap = colormaps["coolwarm"]
    norm = Normalize(vmin=-1.0, vmax=1.0)

    with plt.rc_context({"svg.fonttype": "none", "svg.hashsalt": "pdbench"}):
        fig, ax = plt.subplots(figsize=(14, 12))
        for i in range(n):
            for j in range(n):
                value = float(c.values[i, j])
                ax.add_patch(Rectangle((j, i), 1, 1, facecolor=cmap(norm(value)), edgecolor="white",
                                       linewidth=0.5, gid=f"cell-{i}-{j}"))
                ax.text(j + 0.5, i + 0.5, f"{value:.2f}", ha="center", va="center", fontsize=6,
                        color="white" if abs(value) > 0.6 else "black")
        ax.set_xlim(0, n)
        ax.set_ylim(n, 0)
        ax.set_aspect("equal")
        ax.set_xticks(np.arange(n) + 0.5)
        ax.set_xticklabels(c.labels, rotation=90, fontsize=7)
        ax.set_yticks(np.arange(n) + 0.5)
        ax.set_yticklabels(c.labels, fontsize=7)
        ax.set_title("Pairwise Pearson correlation")
        mappable = ScalarMappable(norm=norm, cmap=cmap)
        mappable.set_array([])
        fig.colorbar(mappable, ax=ax, fraction=0.046, pad=0.04)
        fig.tight_layout()
        metadata = {"Date": None}
        if provenance:
            metadata["Title"] = "pdbench correlation heatmap; " + "; ".join(provenance)
            metadata["Description"] = "; ".join(provenance)
        fig.savefig(out, format="svg", metadata=metadata)
        plt.close(fig)
    return out


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    return value


def write_provenance(rs, out_dir, extra=None):
    path = Path(out_dir) / "provenance.json"
    data = dict(rs.provenance)
    data.update(extra or {})
    data["generated_at"] = datetime.now().isoformat()
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(data), f, indent=2, ensure_ascii=False)
    return path


def write_descriptive(suite, prepared, cfg, out_dir):
    ds = prepared.dataset
    comments = [f"suite={suite}", f"seed={cfg.seed}", f"split_sha256={prepared.split.digest()}"]
    if suite == "table1":
        table = summarize(ds)
        write_text(out_dir / "table1.csv", table.to_csv(comments=comments))
        write_text(out_dir / "table1.md", table.to_markdown(notes=["; ".join(comments)]))
        return [out_dir / "table1.csv", out_dir / "table1.md"]
    corr = correlation_matrix(ds, include_status=True)
    write_text(out_dir / "correlations.csv", corr.to_csv(comments=comments))
    return [out_dir / "correlations.csv", render_heatmap(corr, out_dir / "heatmap.svg", comments)]


def run_bench(cfg, ds=None):
    """Run every selected suite and write all artifacts. Returns (ReportSet, written paths)."""
    out_dir = Path(cfg.out_dir)
    rs = ReportSet()
    if not cfg.suites:
        logger.warning("No suites selected, nothing written")
        return rs, []

    out_dir.mkdir(parents=True, exist_ok=True)
    prepared = prepare(cfg, ds)
    grids = load_grids(cfg.grid_file)
    rs.provenance.update(base_provenance(cfg, prepared))
    rs.provenance["data_sha256"] = calculate_file_hash(cfg.data) if cfg.data and Path(cfg.data).exists() else None
    rs.provenance["grid_version"] = grids.get("version")

    written = []
    for suite in cfg.suites:
        if suite in DESCRIPTIVE_SUITES:
            written.extend(write_descriptive(suite, prepared, cfg, out_dir))
            continue
        result = run_suite(cfg, suite, prepared, grids)
        written.extend(emit_tables(result, "csv", out_dir))
        written.extend(emit_tables(result, "markdown", out_dir))
        rs.merge(result)

    descriptive = {}
    if "table1" in cfg.suites or "heatmap" in cfg.suites:
        corr = correlation_matrix(prepared.dataset)
        descriptive = {
            "top_status_correlations": top_correlations(corr, k=5),
            "strong_pairs": strong_pairs(corr, 0.9),
        }
    written.append(write_provenance(rs, out_dir, extra={"descriptive": descriptive} if descriptive else None))
    return rs, written
