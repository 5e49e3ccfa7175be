"""
L2-regularized binary logistic regression with four interchangeable solvers.

Objective (intercept unpenalized, z = 2y - 1):

    f(w, b) = sum_i log(1 + exp(-z_i (w.x_i + b))) + ||w||^2 / (2C)
"""

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ClassAbsent, DimensionMismatch, InvalidParameter
from .ingest import as_array
from .metrics import cross_val_accuracy

logger = logging.getLogger(__name__)

SOLVERS = ("newton", "lbfgs", "sag", "saga")
SOLVER_ALIASES = {"newton-cg": "newton", "l-bfgs": "lbfgs"}
# SAG/SAGA need ~10^4 epochs on the standardized voice features at C=100
DEFAULT_MAX_ITER = {"newton": 100, "lbfgs": 500, "sag": 20000, "saga": 20000}
C_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)


@dataclass(frozen=True)
class SolverConfig:
    solver: str = "newton"
    tol: float = 1e-6
    max_iter: int = None
    seed: int = 0
    memory: int = 10

    def __post_init__(self):
        solver = SOLVER_ALIASES.get(self.solver, self.solver)
        if solver not in SOLVERS:
            raise InvalidParameter("solver", self.solver, "one of " + ", ".join(SOLVERS))
        object.__setattr__(self, "solver", solver)
        if self.max_iter is None:
            object.__setattr__(self, "max_iter", DEFAULT_MAX_ITER[solver])
        if not self.tol > 0:
            raise InvalidParameter("tol", self.tol, "tol > 0")
        if self.max_iter < 1:
            raise InvalidParameter("max_iter", self.max_iter, "max_iter >= 1")


@dataclass(frozen=True)
class LogRegModel:
    weights: np.ndarray
    intercept: float
    C: float
    solver: str
    iterations: int
    objective: float
    converged: bool = True

    def to_dict(self):
        return {
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "C": self.C,
            "solver": self.solver,
            "iterations": self.iterations,
            "objective": self.objective,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(weights=np.array(d["weights"], dtype=float), intercept=float(d["intercept"]),
                   C=float(d["C"]), solver=d["solver"], iterations=int(d["iterations"]),
                   objective=float(d["objective"]), converged=bool(d.get("converged", True)))


# Objective pieces on theta = [w, b]

def objective(theta, X, z, C):
    w = theta[:-1]
    margins = z * (X @ w + theta[-1])
    return float(np.sum(np.logaddexp(0.0, -margins)) + (w @ w) / (2.0 * C))


def gradient(theta, X, z, C):
    w = theta[:-1]
    margins = z * (X @ w + theta[-1])
    s = -z * expit(-margins)
    g = np.empty_like(theta)
    g[:-1] = X.T @ s + w / C
    g[-1] = s.sum()
    return g


def hessian(theta, X, z, C):
    p = expit(X @ theta[:-1] + theta[-1])
    curvature = p * (1.0 - p)
    Xa = np.column_stack([X, np.ones(len(X))])
    H = Xa.T @ (Xa * curvature[:, None])
    d = X.shape[1]
    H[np.arange(d), np.arange(d)] += 1.0 / C
    return H


def _armijo(fun, theta, direction, f0, g0, alpha0=1.0, c1=1e-4, tau=0.5, max_bt=60):
    """Backtracking line search; returns (step, f_new) or (None, f0)."""
    slope = float(g0 @ direction)
    alpha = alpha0
    for _ in range(max_bt):
        f_try = fun(theta + alpha * direction)
        if f_try <= f0 + c1 * alpha * slope:
            return alpha, f_try
        alpha *= tau
    return None, f0


def _newton(X, z, C, cfg):
    theta = np.zeros(X.shape[1] + 1)
    fun = lambda t: objective(t, X, z, C)
    f = fun(theta)
    converged = False
    iterations = 0
    for _ in range(cfg.max_iter):
        g = gradient(theta, X, z, C)
        if np.max(np.abs(g)) <= cfg.tol:
            converged = True
            break
        H = hessian(theta, X, z, C)
        try:
            direction = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            direction = None
        if direction is None or not np.all(np.isfinite(direction)) or g @ direction >= 0:
            # singular Hessian: damp until the system is solvable and gives descent
            logger.warning("Singular Hessian at iteration %d, using a damped step", iterations)
            mu = 1e-8 * max(1.0, float(np.trace(H)))
            direction = -g
            for _ in range(30):
                try:
                    damped = -np.linalg.solve(H + mu * np.eye(len(H)), g)
                except np.linalg.LinAlgError:
                    damped = None
                if damped is not None and np.all(np.isfinite(damped)) and g @ damped < 0:
                    direction = damped
                    break
                mu *= 10.0
        step, f_new = _armijo(fun, theta, direction, f, g)
        if step is None:
            break
        theta = theta + step * direction
        f = f_new
        iterations += 1
    else:
        g = gradient(theta, X, z, C)
        converged = np.max(np.abs(g)) <= cfg.tol
    return theta, iterations, converged


def _two_loop(g, memory):
    q = g.copy()
    history = []
    for s, y in reversed(memory):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        q -= a * y
        history.append((rho, a))
    if memory:
        s, y = memory[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), (rho, a) in zip(memory, reversed(history)):
        beta = rho * (y @ q)
        q += s * (a - beta)
    return q


def _lbfgs(X, z, C, cfg):
    theta = np.zeros(X.shape[1] + 1)
    fun = lambda t: objective(t, X, z, C)
    f = fun(theta)
    g = gradient(theta, X, z, C)
    memory = deque(maxlen=cfg.memory)
    converged = False
    iterations = 0
    while iterations < cfg.max_iter:
        if np.max(np.abs(g)) <= cfg.tol:
            converged = True
            break
        direction = -_two_loop(g, memory)
        if g @ direction >= 0:
            memory.clear()
            direction = -g
        alpha0 = 1.0 if memory else min(1.0, 1.0 / float(np.sum(np.abs(g))))
        step, f_new = _armijo(fun, theta, direction, f, g, alpha0=alpha0)
        if step is None:
            break
        s = step * direction
        theta = theta + s
        g_new = gradient(theta, X, z, C)
        y = g_new - g
        if s @ y > 1e-10:
            memory.append((s, y))
        g, f = g_new, f_new
        iterations += 1
    else:
        converged = np.max(np.abs(g)) <= cfg.tol
    return theta, iterations, converged


def _stochastic_average(X, z, C, cfg, unbiased):
    """
    SAG (unbiased=False) / SAGA (unbiased=True) on the per-sample averaged objective
    (1/n) sum_i loss_i + ||w||^2 / (2Cn). Step 1/L with L = 0.25 max_i ||[x_i, 1]||^2 + 1/(Cn).
    Stored gradients are the scalar loss derivatives per sample.
    """
    n, d = X.shape
    Xa = np.column_stack([X, np.ones(n)])
    mask = np.ones(d + 1)
    mask[-1] = 0.0
    reg = 1.0 / (C * n)
    step = 1.0 / (0.25 * float(np.max(np.sum(Xa ** 2, axis=1))) + reg)

    theta = np.zeros(d + 1)
    stored = np.zeros(n)
    grad_sum = np.zeros(d + 1)
    seen = np.zeros(n, dtype=bool)
    n_seen = 0
    rng = np.random.default_rng(cfg.seed)

    converged = False
    epochs = 0
    for epochs in range(1, cfg.max_iter + 1):
        for i in rng.integers(0, n, size=n):
            xi = Xa[i]
            derivative = -z[i] * expit(-z[i] * float(xi @ theta))
            delta = derivative - stored[i]
            if unbiased:
                direction = delta * xi + grad_sum / n + reg * theta * mask
                grad_sum += delta * xi
                stored[i] = derivative
            else:
                if not seen[i]:
                    seen[i] = True
                    n_seen += 1
                grad_sum += delta * xi
                stored[i] = derivative
                direction = grad_sum / n_seen + reg * theta * mask
            theta -= step * direction
        g = gradient(theta, X, z, C)
        if np.max(np.abs(g)) / n <= cfg.tol:
            converged = True
            break
    return theta, epochs, converged


def train_logreg(X, y, C, cfg=None):
    cfg = cfg or SolverConfig()
    if not C > 0:
        raise InvalidParameter("C", C, "C > 0")
    X = as_array(X)
    y = np.asarray(y, dtype=int)
    for label in (0, 1):
        if not np.any(y == label):
            raise ClassAbsent(label)
    z = 2.0 * y - 1.0

    if cfg.solver == "newton":
        theta, iterations, converged = _newton(X, z, C, cfg)
    elif cfg.solver == "lbfgs":
        theta, iterations, converged = _lbfgs(X, z, C, cfg)
    else:
        theta, iterations, converged = _stochastic_average(X, z, C, cfg, unbiased=cfg.solver == "saga")

    if not converged:
        logger.warning("%s did not converge in %d iterations (C=%g)", cfg.solver, iterations, C)
    return LogRegModel(
        weights=theta[:-1].copy(),
        intercept=float(theta[-1]),
        C=float(C),
        solver=cfg.solver,
        iterations=int(iterations),
        objective=objective(theta, X, z, C),
        converged=bool(converged),
    )


def predict_logreg(m, X):
    X = as_array(X)
    if X.shape[1] != len(m.weights):
        raise DimensionMismatch(len(m.weights), X.shape[1])
    probabilities = expit(X @ m.weights + m.intercept)
    return probabilities, (probabilities >= 0.5).astype(int)


def select_C(X, y, grid=C_GRID, cfg=None, folds=()):
    """
    Pick C by mean fold accuracy; ties go to the larger C.
    Returns (best C, rows) where each row is {C, mean_accuracy, fold_accuracies, failed_folds}.
    """
    if not grid:
        raise InvalidParameter("grid", grid, "a non-empty list of C values")
    cfg = cfg or SolverConfig()
    X = as_array(X)
    y = np.asarray(y, dtype=int)

    rows = []
    best_C, best_score = None, -np.inf
    for C in sorted(grid):
        def fit_predict(X_train, y_train, X_test, C=C):
            return predict_logreg(train_logreg(X_train, y_train, C, cfg), X_test)[1]

        if folds:
            mean, scores, failed = cross_val_accuracy(fit_predict, X, y, folds)
        else:
            mean, scores, failed = float("nan"), [], []
        rows.append({"C": C, "mean_accuracy": mean, "fold_accuracies": scores, "failed_folds": failed})
        if not np.isnan(mean) and mean >= best_score:
            best_C, best_score = C, mean
        logger.debug("C=%g mean CV accuracy %.4f", C, mean)

    if best_C is None:
        best_C = max(grid)
    return best_C, rows
