"""
Binary C-SVM trained by SMO (maximal violating pair working set) with
linear, polynomial, RBF and sigmoid kernels.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import ClassAbsent, DimensionMismatch, InvalidParameter
from .ingest import as_array
from .metrics import cross_val_accuracy

logger = logging.getLogger(__name__)

KERNELS = ("linear", "poly", "rbf", "sigmoid")
GAMMA_RULES = ("scale", "auto")


@dataclass(frozen=True)
class Kernel:
    kind: str = "rbf"
    gamma: object = "scale"
    degree: int = 3
    coef0: float = 0.0

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise InvalidParameter("kernel", self.kind, "one of " + ", ".join(KERNELS))
        if isinstance(self.gamma, str):
            if self.gamma not in GAMMA_RULES:
                raise InvalidParameter("gamma", self.gamma, "a positive number, 'scale' or 'auto'")
        elif not self.gamma > 0:
            raise InvalidParameter("gamma", self.gamma, "gamma > 0")
        if int(self.degree) < 1:
            raise InvalidParameter("degree", self.degree, "degree >= 1")

    @property
    def resolved(self):
        return not isinstance(self.gamma, str)

    def resolve(self, X):
        """Fix a numeric gamma from the training matrix ('scale' = 1 / (d * mean column variance))."""
        if self.resolved:
            return self
        X = as_array(X)
        d = X.shape[1]
        if self.gamma == "auto":
            return replace(self, gamma=1.0 / d)
        variance = float(np.mean(X.var(axis=0)))
        return replace(self, gamma=1.0 / (d * variance) if variance > 0 else 1.0)

    def to_dict(self):
        return {"kind": self.kind, "gamma": self.gamma, "degree": self.degree, "coef0": self.coef0}

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d["kind"], gamma=d["gamma"], degree=int(d["degree"]), coef0=float(d["coef0"]))


def _gamma(k):
    if k.kind != "linear" and not k.resolved:
        raise InvalidParameter("gamma", k.gamma, "a resolved numeric gamma (call Kernel.resolve first)")
    return k.gamma


def kernel_matrix(k, A, B):
    A = as_array(A)
    B = as_array(B)
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(A.shape[1], B.shape[1])
    gamma = _gamma(k)
    if k.kind == "linear":
        return A @ B.T
    if k.kind == "poly":
        return (gamma * (A @ B.T) + k.coef0) ** k.degree
    if k.kind == "sigmoid":
        return np.tanh(gamma * (A @ B.T) + k.coef0)
    sq = np.sum(A ** 2, axis=1)[:, None] + np.sum(B ** 2, axis=1)[None, :] - 2.0 * (A @ B.T)
    return np.exp(-gamma * np.clip(sq, 0.0, None))


def kernel_eval(k, a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise DimensionMismatch(len(a), len(b))
    gamma = _gamma(k)
    if k.kind == "linear":
        return float(a @ b)
    if k.kind == "poly":
        return float((gamma * (a @ b) + k.coef0) ** k.degree)
    if k.kind == "sigmoid":
        return float(np.tanh(gamma * (a @ b) + k.coef0))
    diff = a - b
    return float(np.exp(-gamma * (diff @ diff)))


@dataclass(frozen=True)
class SvmModel:
    support_vectors: np.ndarray
    dual_coefs: np.ndarray  # alpha_i * y_i
    bias: float
    C: float
    kernel: Kernel
    dual_objective: float
    iterations: int = 0
    converged: bool = True

    def to_dict(self):
        return {
            "kernel": self.kernel.to_dict(),
            "support_vectors": self.support_vectors.tolist(),
            "dual_coefs": self.dual_coefs.tolist(),
            "bias": self.bias,
            "C": self.C,
            "dual_objective": self.dual_objective,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d):
        support_vectors = np.array(d["support_vectors"], dtype=float)
        return cls(
            support_vectors=support_vectors.reshape(len(d["dual_coefs"]), -1),
            dual_coefs=np.array(d["dual_coefs"], dtype=float),
            bias=float(d["bias"]),
            C=float(d["C"]),
            kernel=Kernel.from_dict(d["kernel"]),
            dual_objective=float(d["dual_objective"]),
            iterations=int(d.get("iterations", 0)),
            converged=bool(d.get("converged", True)),
        )


def dual_objective(alpha, y, K):
    Q = (y[:, None] * y[None, :]) * K
    return float(alpha.sum() - 0.5 * alpha @ Q @ alpha)


def _bias(alpha, y, G, C):
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if np.any(free):
        return -float(np.mean(yG[free]))
    at_upper = alpha >= C
    at_lower = alpha <= 0
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = float(np.min(yG[ub_mask])) if np.any(ub_mask) else np.inf
    lb = float(np.max(yG[lb_mask])) if np.any(lb_mask) else -np.inf
    if not np.isfinite(ub):
        return -lb
    if not np.isfinite(lb):
        return -ub
    return -(ub + lb) / 2.0


def train_svm(X, y, C=10.0, kernel=None, tol=1e-3, max_iter=None, callback=None):
    """
    Solve max sum(alpha) - 1/2 alpha'Q alpha  s.t. 0 <= alpha <= C, y'alpha = 0.
    Labels {0,1} are mapped to {-1,+1}. `callback(alpha)` is called after every update.
    """
    if not C > 0:
        raise InvalidParameter("C", C, "C > 0")
    kernel = kernel or Kernel()
    X = as_array(X)
    labels = np.asarray(y, dtype=int)
    for label in (0, 1):
        if not np.any(labels == label):
            raise ClassAbsent(label)
    y = np.where(labels == 1, 1.0, -1.0)
    n = len(y)

    kernel = kernel.resolve(X)
    if kernel.kind == "sigmoid":
        logger.debug("sigmoid kernel may be indefinite; SMO is capped at %d iterations", 100 * n)
    K = kernel_matrix(kernel, X, X)
    diag = np.diag(K).copy()

    alpha = np.zeros(n)
    G = -np.ones(n)
    cap = max_iter or 100 * n
    converged = False
    iterations = 0

    while iterations < cap:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not np.any(up) or not np.any(low):
            converged = True
            break
        score = -y * G
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        gap = score[i] - score[j]
        if gap <= tol:
            converged = True
            break

        curvature = diag[i] + diag[j] - 2.0 * K[i, j]
        if curvature <= 1e-12:
            curvature = 1e-12
        room_i = C - alpha[i] if y[i] > 0 else alpha[i]
        room_j = alpha[j] if y[j] > 0 else C - alpha[j]
        lam = min(gap / curvature, room_i, room_j)

        alpha[i] += y[i] * lam
        alpha[j] -= y[j] * lam
        if lam == room_i:
            alpha[i] = C if y[i] > 0 else 0.0
        if lam == room_j:
            alpha[j] = 0.0 if y[j] > 0 else C
        G += y * lam * (K[:, i] - K[:, j])
        iterations += 1
        if callback is not None:
            callback(alpha.copy())

    if not converged:
        logger.warning("SMO stopped at the iteration cap (%d) before reaching tol=%g", cap, tol)

    support = np.flatnonzero(alpha > 0)
    return SvmModel(
        support_vectors=X[support].copy(),
        dual_coefs=(alpha * y)[support],
        bias=_bias(alpha, y, G, C),
        C=float(C),
        kernel=kernel,
        dual_objective=dual_objective(alpha, y, K),
        iterations=iterations,
        converged=converged,
    )


def decision_function(m, X):
    X = as_array(X)
    width = m.support_vectors.shape[1]
    if X.shape[1] != width:
        raise DimensionMismatch(width, X.shape[1])
    if len(m.dual_coefs) == 0:
        return np.full(len(X), m.bias)
    return kernel_matrix(m.kernel, X, m.support_vectors) @ m.dual_coefs + m.bias


def predict_svm(m, X):
    values = decision_function(m, X)
    return values, (values >= 0).astype(int)


def select_svm_C(X, y, grid, kernel=None, folds=(), tol=1e-3):
    """Cross-validated C for one kernel; ties go to the larger C. Returns (best C, rows)."""
    if not grid:
        raise InvalidParameter("grid", grid, "a non-empty list of C values")
    kernel = kernel or Kernel()
    rows = []
    best_C, best_score = None, -np.inf
    for C in sorted(grid):
        def fit_predict(X_train, y_train, X_test, C=C):
            return predict_svm(train_svm(X_train, y_train, C, kernel, tol), X_test)[1]

        mean, scores, failed = cross_val_accuracy(fit_predict, X, y, folds) if folds else (float("nan"), [], [])
        rows.append({"C": C, "mean_accuracy": mean, "fold_accuracies": scores, "failed_folds": failed})
        if not np.isnan(mean) and mean >= best_score:
            best_C, best_score = C, mean
    return (best_C if best_C is not None else max(grid)), rows
