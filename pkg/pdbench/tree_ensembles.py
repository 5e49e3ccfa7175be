"""
CART trees, random forests ("gcF") and one gradient-boosted-tree engine.

Boosting styles:
    classic       trees fit to the negative gradient (variance splits), one Newton step per leaf
    second_order  split gain and leaf value from per-leaf gradient/hessian sums, L2 lambda
    histogram     second_order math, split search over quantile bins (max_bins)
    oblivious     second_order math, one shared (feature, threshold) per depth level
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ClassAbsent, DimensionMismatch, InvalidParameter
from .ingest import as_array
from .rng import derive_seed

logger = logging.getLogger(__name__)

STYLES = ("classic", "second_order", "histogram", "oblivious")
MIN_GAIN = 1e-12


@dataclass
class TreeNode:
    feature: int = None
    threshold: float = None
    left: "TreeNode" = None
    right: "TreeNode" = None
    value: float = 0.0
    n_samples: int = 0

    @property
    def is_leaf(self):
        return self.feature is None

    def to_dict(self):
        if self.is_leaf:
            return {"leaf": self.value}
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, d):
        if "leaf" in d:
            return cls(value=float(d["leaf"]))
        return cls(feature=int(d["feature"]), threshold=float(d["threshold"]),
                   left=cls.from_dict(d["left"]), right=cls.from_dict(d["right"]))


def tree_predict(node, X):
    X = as_array(X)
    out = np.empty(len(X))
    _fill(node, X, np.arange(len(X)), out)
    return out


def _fill(node, X, idx, out):
    if node.is_leaf:
        out[idx] = node.value
        return
    mask = X[idx, node.feature] <= node.threshold
    _fill(node.left, X, idx[mask], out)
    _fill(node.right, X, idx[~mask], out)


def tree_depth(node):
    if node.is_leaf:
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def iter_leaves(node):
    if node.is_leaf:
        yield node
    else:
        yield from iter_leaves(node.left)
        yield from iter_leaves(node.right)


# Split criteria. Each criterion reads two per-sample statistics and scores
# a node by a cost; the gain of a split is cost(parent) - cost(left) - cost(right).
#   gini      stats [1 - y, y]     cost = n - (n0^2 + n1^2) / n     (n * gini impurity)
#   variance  stats [r, r^2]       cost = sum r^2 - (sum r)^2 / n   (sum of squared errors)
#   newton    stats [g, h]         cost = -1/2 G^2 / (H + lambda)

def _cost(criterion, sums, counts, reg_lambda=0.0):
    sums = np.asarray(sums, dtype=float)
    counts = np.asarray(counts, dtype=float)
    first = sums[..., 0]
    second = sums[..., 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        if criterion == "gini":
            cost = counts - (first ** 2 + second ** 2) / counts
        elif criterion == "variance":
            cost = second - first ** 2 / counts
        else:
            cost = -0.5 * first ** 2 / (second + reg_lambda)
    return np.where(counts > 0, cost, 0.0)


def _stats(criterion, target, hess=None):
    if criterion == "gini":
        target = np.asarray(target, dtype=float)
        return np.column_stack([1.0 - target, target])
    if criterion == "variance":
        return np.column_stack([target, target ** 2])
    return np.column_stack([target, hess])


# Binning

def bin_edges(X, max_bins=255):
    """
    Per-feature split thresholds. With at most max_bins distinct values every midpoint
    between adjacent distinct values is kept; otherwise midpoints at training quantiles.
    """
    if max_bins < 2:
        raise InvalidParameter("max_bins", max_bins, "max_bins >= 2")
    X = as_array(X)
    edges = []
    for f in range(X.shape[1]):
        distinct = np.unique(X[:, f])
        if len(distinct) < 2:
            edges.append(np.empty(0))
            continue
        mids = (distinct[:-1] + distinct[1:]) / 2.0
        if len(distinct) <= max_bins:
            edges.append(mids)
            continue
        quantiles = np.quantile(X[:, f], np.linspace(0.0, 1.0, max_bins + 1)[1:-1])
        k = np.clip(np.searchsorted(distinct, quantiles, side="right") - 1, 0, len(distinct) - 2)
        edges.append(np.unique(mids[k]))
    return edges


def bin_matrix(X, edges):
    """Bin index = number of edges strictly below the value, so x <= edges[b] <=> bin <= b."""
    X = as_array(X)
    B = np.empty(X.shape, dtype=np.int64)
    for f, e in enumerate(edges):
        B[:, f] = np.searchsorted(e, X[:, f], side="left")
    return B


class _Builder:
    """Greedy recursive tree growth shared by the classification trees and the boosting styles."""

    def __init__(self, X, stats, criterion, leaf_fn, max_depth=None, min_samples_leaf=1,
                 reg_lambda=0.0, rng=None, max_features=None, binned=None):
        self.X = X
        self.stats = stats
        self.criterion = criterion
        self.leaf_fn = leaf_fn
        self.max_depth = max_depth
        self.min_leaf = max(1, int(min_samples_leaf))
        self.reg_lambda = reg_lambda
        self.rng = rng
        self.n_features = X.shape[1]
        self.max_features = self.n_features if max_features is None else int(max_features)
        self.binned = binned  # (B, edges) or None

    def grow(self, idx=None):
        if idx is None:
            idx = np.arange(len(self.X))
        return self._grow(idx, 0)

    def _grow(self, idx, depth):
        node = TreeNode(value=self.leaf_fn(idx), n_samples=len(idx))
        if self.max_depth is not None and depth >= self.max_depth:
            return node
        if len(idx) < 2 * self.min_leaf:
            return node
        if self.criterion == "gini":
            positives = self.stats[idx, 1].sum()
            if positives == 0 or positives == len(idx):
                return node

        split = self.find_split(idx)
        if split is None:
            return node
        feature, threshold, _ = split
        mask = self.X[idx, feature] <= threshold
        node.feature = feature
        node.threshold = threshold
        node.left = self._grow(idx[mask], depth + 1)
        node.right = self._grow(idx[~mask], depth + 1)
        return node

    def find_split(self, idx):
        if self.max_features >= self.n_features:
            return self._search(idx, range(self.n_features))
        # random feature subsets; keep drawing until a usable split appears
        order = self.rng.permutation(self.n_features)
        for start in range(0, self.n_features, self.max_features):
            split = self._search(idx, sorted(int(f) for f in order[start:start + self.max_features]))
            if split is not None:
                return split
        return None

    def _search(self, idx, features):
        n = len(idx)
        S = self.stats[idx]
        parent_sums = S.sum(axis=0)
        parent_cost = float(_cost(self.criterion, parent_sums, n, self.reg_lambda))
        scale = n if self.criterion == "gini" else 1.0

        best = None
        best_gain = MIN_GAIN
        for f in features:
            if self.binned is None:
                candidate = self._exact(idx, S, f, parent_sums, parent_cost)
            else:
                candidate = self._histogram(idx, S, f, parent_sums, parent_cost)
            if candidate is None:
                continue
            gain, threshold = candidate
            gain /= scale
            if gain > best_gain:
                best, best_gain = (f, threshold, gain), gain
        return best

    def _exact(self, idx, S, f, parent_sums, parent_cost):
        n = len(idx)
        xs = self.X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs = xs[order]
        left = np.cumsum(S[order], axis=0)[:-1]
        left_n = np.arange(1, n)
        valid = (xs[:-1] < xs[1:]) & (left_n >= self.min_leaf) & (n - left_n >= self.min_leaf)
        if not np.any(valid):
            return None
        gains = (parent_cost
                 - _cost(self.criterion, left, left_n, self.reg_lambda)
                 - _cost(self.criterion, parent_sums - left, n - left_n, self.reg_lambda))
        gains = np.where(valid, gains, -np.inf)
        p = int(np.argmax(gains))
        threshold = (xs[p] + xs[p + 1]) / 2.0
        if threshold >= xs[p + 1]:
            threshold = xs[p]
        return float(gains[p]), float(threshold)

    def _histogram(self, idx, S, f, parent_sums, parent_cost):
        B, edges = self.binned
        n_bins = len(edges[f]) + 1
        if n_bins < 2:
            return None
        n = len(idx)
        bins = B[idx, f]
        counts = np.bincount(bins, minlength=n_bins)
        hist = np.column_stack([np.bincount(bins, weights=S[:, c], minlength=n_bins) for c in (0, 1)])
        left = np.cumsum(hist, axis=0)[:-1]
        left_n = np.cumsum(counts)[:-1]
        valid = (left_n >= self.min_leaf) & (n - left_n >= self.min_leaf)
        if not np.any(valid):
            return None
        gains = (parent_cost
                 - _cost(self.criterion, left, left_n, self.reg_lambda)
                 - _cost(self.criterion, parent_sums - left, n - left_n, self.reg_lambda))
        gains = np.where(valid, gains, -np.inf)
        b = int(np.argmax(gains))
        # threshold: midpoint of the node's adjacent observed values around the bin boundary
        xs = self.X[idx, f]
        below = xs[bins <= b]
        above = xs[bins > b]
        threshold = (below.max() + above.min()) / 2.0
        if threshold >= above.min():
            threshold = below.max()
        return float(gains[b]), float(threshold)


def _check_binary(y):
    y = np.asarray(y, dtype=int)
    for label in (0, 1):
        if not np.any(y == label):
            raise ClassAbsent(label)
    return y


# Single trees

def train_tree(X, y, max_depth=None, min_samples_leaf=1, feature_subset_seed=None,
               max_features=None, mode="classification"):
    """
    Classification mode: gini splits, leaf value = fraction of class 1.
    Regression mode: variance-reduction splits on real targets, leaf value = mean.
    With feature_subset_seed, each split considers max_features random features (default sqrt(d)).
    """
    X = as_array(X)
    if len(X) == 0:
        return TreeNode()
    y = np.asarray(y, dtype=float)
    criterion = "gini" if mode == "classification" else "variance"
    rng = None
    if feature_subset_seed is not None:
        rng = np.random.default_rng(feature_subset_seed)
        if max_features is None:
            max_features = max(1, int(math.sqrt(X.shape[1])))
    else:
        max_features = None
    builder = _Builder(X, _stats(criterion, y), criterion, lambda idx: float(np.mean(y[idx])),
                       max_depth=max_depth, min_samples_leaf=min_samples_leaf, rng=rng,
                       max_features=max_features)
    return builder.grow()


def best_split(X, y, mode="classification", min_samples_leaf=1):
    """Best root split as (feature, threshold, gain); gain is the gini decrease in classification mode."""
    X = as_array(X)
    y = np.asarray(y, dtype=float)
    criterion = "gini" if mode == "classification" else "variance"
    builder = _Builder(X, _stats(criterion, y), criterion, lambda idx: 0.0, min_samples_leaf=min_samples_leaf)
    return builder.find_split(np.arange(len(X)))


def predict_tree(node, X):
    values = tree_predict(node, X)
    return values, (values >= 0.5).astype(int)


# Random forest

@dataclass(frozen=True)
class ForestModel:
    trees: tuple
    seeds: tuple
    max_features: int
    n_estimators: int
    max_depth: int = None
    bootstrap: bool = True
    n_features: int = 0

    def to_dict(self):
        return {
            "trees": [t.to_dict() for t in self.trees],
            "seeds": list(self.seeds),
            "max_features": self.max_features,
            "n_estimators": self.n_estimators,
            "max_depth": self.max_depth,
            "bootstrap": self.bootstrap,
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(trees=tuple(TreeNode.from_dict(t) for t in d["trees"]), seeds=tuple(d["seeds"]),
                   max_features=int(d["max_features"]), n_estimators=int(d["n_estimators"]),
                   max_depth=d["max_depth"], bootstrap=bool(d["bootstrap"]),
                   n_features=int(d["n_features"]))


def _resolve_max_features(max_features, d):
    if max_features in (None, "all"):
        return d
    if max_features == "sqrt":
        return max(1, int(math.sqrt(d)))
    if isinstance(max_features, int) and 1 <= max_features:
        return min(max_features, d)
    raise InvalidParameter("max_features", max_features, "'sqrt', 'all' or a positive integer")


def _tree_sample(n, tree_seed, bootstrap):
    rng = np.random.default_rng(tree_seed)
    idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
    return rng, idx


def bootstrap_indices(n, tree_seed):
    """Row sample (n draws with replacement) used by the tree with this seed."""
    return _tree_sample(n, tree_seed, True)[1]


def train_forest(X, y, n_estimators=100, max_depth=None, seed=42, max_features="sqrt",
                 bootstrap=True, min_samples_leaf=1, n_jobs=1):
    X = as_array(X)
    y = _check_binary(y)
    n, d = X.shape
    mtry = _resolve_max_features(max_features, d)
    seeds = tuple(derive_seed(seed, i) for i in range(n_estimators))

    def fit_one(tree_seed):
        rng, idx = _tree_sample(n, tree_seed, bootstrap)
        Xs, ys = X[idx], y[idx].astype(float)
        builder = _Builder(Xs, _stats("gini", ys), "gini", lambda rows: float(np.mean(ys[rows])),
                           max_depth=max_depth, min_samples_leaf=min_samples_leaf, rng=rng,
                           max_features=mtry)
        return builder.grow()

    # trees are independent given their seeds; map() keeps grid order
    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = tuple(pool.map(fit_one, seeds))
    else:
        trees = tuple(fit_one(s) for s in seeds)

    return ForestModel(trees=trees, seeds=seeds, max_features=mtry, n_estimators=n_estimators,
                       max_depth=max_depth, bootstrap=bootstrap, n_features=d)


def predict_forest(m, X):
    """Majority vote of per-tree class predictions; ties go to class 1. Returns (vote share, labels)."""
    X = as_array(X)
    if X.shape[1] != m.n_features:
        raise DimensionMismatch(m.n_features, X.shape[1])
    votes = np.mean([tree_predict(t, X) >= 0.5 for t in m.trees], axis=0)
    return votes, (votes >= 0.5).astype(int)


# Gradient boosting

@dataclass(frozen=True)
class GbdtModel:
    base_score: float
    trees: tuple  # leaf values already scaled by learning_rate
    style: str
    learning_rate: float
    n_estimators: int
    max_depth: int
    reg_lambda: float = 1.0
    max_bins: int = 255
    n_features: int = 0

    def to_dict(self):
        return {
            "base_score": self.base_score,
            "trees": [t.to_dict() for t in self.trees],
            "style": self.style,
            "learning_rate": self.learning_rate,
            "n_estimators": self.n_estimators,
            "max_depth": self.max_depth,
            "lambda": self.reg_lambda,
            "max_bins": self.max_bins,
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(base_score=float(d["base_score"]), trees=tuple(TreeNode.from_dict(t) for t in d["trees"]),
                   style=d["style"], learning_rate=float(d["learning_rate"]),
                   n_estimators=int(d["n_estimators"]), max_depth=d["max_depth"],
                   reg_lambda=float(d["lambda"]), max_bins=int(d["max_bins"]),
                   n_features=int(d["n_features"]))


def _grow_oblivious(X, B, edges, stats, max_depth, reg_lambda, leaf_scale):
    """Level-wise symmetric tree: every node on a level uses the same (feature, threshold)."""
    n, d = X.shape
    node_of = np.zeros(n, dtype=np.int64)
    levels = []
    for level in range(max_depth):
        n_nodes = 2 ** level
        node_counts = np.bincount(node_of, minlength=n_nodes).astype(float)
        node_sums = np.column_stack([np.bincount(node_of, weights=stats[:, c], minlength=n_nodes) for c in (0, 1)])
        parent_cost = _cost("newton", node_sums, node_counts, reg_lambda)

        best, best_gain = None, MIN_GAIN
        for f in range(d):
            n_bins = len(edges[f]) + 1
            if n_bins < 2:
                continue
            key = node_of * n_bins + B[:, f]
            size = n_nodes * n_bins
            counts = np.bincount(key, minlength=size).reshape(n_nodes, n_bins)
            sums = np.stack([np.bincount(key, weights=stats[:, c], minlength=size).reshape(n_nodes, n_bins)
                             for c in (0, 1)], axis=-1)
            left = np.cumsum(sums, axis=1)[:, :-1]
            left_n = np.cumsum(counts, axis=1)[:, :-1]
            right = node_sums[:, None, :] - left
            right_n = node_counts[:, None] - left_n
            gains = (parent_cost[:, None]
                     - _cost("newton", left, left_n, reg_lambda)
                     - _cost("newton", right, right_n, reg_lambda)).sum(axis=0)
            splits_something = np.any((left_n > 0) & (right_n > 0), axis=0)
            gains = np.where(splits_something, gains, -np.inf)
            b = int(np.argmax(gains))
            if gains[b] > best_gain:
                best, best_gain = (f, float(edges[f][b])), float(gains[b])
        if best is None:
            break
        f, threshold = best
        levels.append(best)
        node_of = node_of * 2 + (X[:, f] > threshold)

    n_leaves = 2 ** len(levels)
    G = np.bincount(node_of, weights=stats[:, 0], minlength=n_leaves)
    H = np.bincount(node_of, weights=stats[:, 1], minlength=n_leaves)
    counts = np.bincount(node_of, minlength=n_leaves)
    leaves = np.where(counts > 0, -G / (H + reg_lambda), 0.0) * leaf_scale
    return _oblivious_node(levels, leaves, counts)


def _oblivious_node(levels, leaves, counts, level=0, prefix=0):
    if level == len(levels):
        return TreeNode(value=float(leaves[prefix]), n_samples=int(counts[prefix]))
    f, threshold = levels[level]
    return TreeNode(feature=f, threshold=threshold,
                    left=_oblivious_node(levels, leaves, counts, level + 1, prefix * 2),
                    right=_oblivious_node(levels, leaves, counts, level + 1, prefix * 2 + 1))


def oblivious_levels(node):
    """(feature, threshold) per depth level, asserting every node on a level shares it."""
    levels = []
    frontier = [node]
    while frontier and not frontier[0].is_leaf:
        keys = {(n.feature, n.threshold) for n in frontier}
        if len(keys) != 1 or any(n.is_leaf for n in frontier):
            raise ValueError(f"level {len(levels)} is not oblivious: {sorted(keys)}")
        levels.append(keys.pop())
        frontier = [child for n in frontier for child in (n.left, n.right)]
    return levels


def train_gbdt(X, y, n_estimators=100, learning_rate=0.1, max_depth=3, style="classic",
               reg_lambda=1.0, max_bins=255, seed=0, min_samples_leaf=1):
    """Logistic-loss boosting from base_score = log-odds of the training prevalence."""
    if style not in STYLES:
        raise InvalidParameter("style", style, "one of " + ", ".join(STYLES))
    if learning_rate < 0:
        raise InvalidParameter("learning_rate", learning_rate, "learning_rate >= 0")
    if style == "oblivious" and max_depth is None:
        raise InvalidParameter("max_depth", max_depth, "a finite depth for oblivious trees")
    X = as_array(X)
    y = np.asarray(y, dtype=int)
    n, d = X.shape

    prevalence = min(max(float(np.mean(y)), 1e-6), 1.0 - 1e-6)
    base = math.log(prevalence / (1.0 - prevalence))
    logits = np.full(n, base)

    binned = None
    if style in ("histogram", "oblivious"):
        edges = bin_edges(X, max_bins)
        binned = (bin_matrix(X, edges), edges)

    trees = []
    for round_index in range(n_estimators):
        p = expit(logits)
        hess = p * (1.0 - p)
        if style == "classic":
            residual = y - p

            def leaf(idx, residual=residual, hess=hess):
                denominator = hess[idx].sum()
                step = residual[idx].sum() / denominator if denominator > 1e-150 else 0.0
                return learning_rate * float(step)

            tree = _Builder(X, _stats("variance", residual), "variance", leaf, max_depth=max_depth,
                            min_samples_leaf=min_samples_leaf).grow()
        else:
            grad = p - y
            stats = _stats("newton", grad, hess)
            if style == "oblivious":
                tree = _grow_oblivious(X, binned[0], binned[1], stats, max_depth, reg_lambda, learning_rate)
            else:
                def leaf(idx, grad=grad, hess=hess):
                    return learning_rate * float(-grad[idx].sum() / (hess[idx].sum() + reg_lambda))

                tree = _Builder(X, stats, "newton", leaf, max_depth=max_depth, min_samples_leaf=min_samples_leaf,
                                reg_lambda=reg_lambda,
                                binned=binned if style == "histogram" else None).grow()
        trees.append(tree)
        logits = logits + tree_predict(tree, X)
        logger.debug("round %d (%s): depth %d", round_index, style, tree_depth(tree))

    return GbdtModel(base_score=base, trees=tuple(trees), style=style, learning_rate=float(learning_rate),
                     n_estimators=n_estimators, max_depth=max_depth, reg_lambda=float(reg_lambda),
                     max_bins=int(max_bins), n_features=d)


def staged_logits(m, X):
    """Logits after 0, 1, ..., n_estimators rounds."""
    X = as_array(X)
    logits = np.full(len(X), m.base_score)
    stages = [logits.copy()]
    for tree in m.trees:
        logits = logits + tree_predict(tree, X)
        stages.append(logits.copy())
    return stages


def predict_gbdt(m, X):
    X = as_array(X)
    if X.shape[1] != m.n_features:
        raise DimensionMismatch(m.n_features, X.shape[1])
    logits = np.full(len(X), m.base_score)
    for tree in m.trees:
        logits = logits + tree_predict(tree, X)
    probabilities = expit(logits)
    return probabilities, (probabilities >= 0.5).astype(int)


def predict_ensemble(m, X):
    if isinstance(m, ForestModel):
        return predict_forest(m, X)
    return predict_gbdt(m, X)


@dataclass(frozen=True)
class GridResult:
    n_estimators: int
    learning_rate: float
    max_depth: object
    style: str
    report: object  # metrics.EvalReport

    @property
    def label(self):
        return boosting_label(self.n_estimators, self.learning_rate, self.max_depth)


def boosting_label(n_estimators, learning_rate, max_depth):
    return f"n={n_estimators}, rate={learning_rate:g}, depth={max_depth}"
