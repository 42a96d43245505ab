"""Linear epsilon-insensitive support vector regression.

The dual over the 2n variables (alpha+, alpha-) is a convex QP with box
bounds and one equality. It is solved exactly (to tolerance) by a
Mehrotra predictor-corrector interior-point method, with the box rescaled
to [0, 1] so that very small and very large C behave alike. The bias is then
the midpoint of the interval minimizing the training loss for the fitted
weights.
"""

import logging
from dataclasses import dataclass

import numpy as np

from skillseries.core.errors import BadParam, DegenerateInput, DimMismatch, NoConvergence

logger = logging.getLogger(__name__)

STEP_FRACTION = 0.99
REGULARIZATION = 1e-12


@dataclass(frozen=True, eq=False)
class LinearSvrModel:
    weights: np.ndarray
    bias: float
    C: float
    epsilon: float
    iterations: int = 0
    gap: float = 0.0


def _max_step(values: np.ndarray, steps: np.ndarray) -> float:
    """Largest t with values + t * steps >= 0."""
    shrinking = steps < 0
    if not shrinking.any():
        return np.inf
    return float(np.min(-values[shrinking] / steps[shrinking]))


def _solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(matrix, rhs)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(matrix, rhs, rcond=None)[0]


def best_bias(residuals: np.ndarray, epsilon: float) -> float:
    """Midpoint of the b interval minimizing sum max(0, |r_i - b| - epsilon)."""
    residuals = np.asarray(residuals, dtype=np.float64)
    knots = np.unique(np.concatenate([residuals - epsilon, residuals + epsilon]))
    loss = np.maximum(0.0, np.abs(residuals[None, :] - knots[:, None]) - epsilon).sum(axis=1)
    best = loss.min()
    optimal = knots[loss <= best + 1e-12 * (1.0 + best)]
    return float((optimal.min() + optimal.max()) / 2)


def svr_fit(
    X: np.ndarray,
    y: np.ndarray,
    C: float,
    epsilon: float = 0.1,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> LinearSvrModel:
    """Minimize 0.5 |w|^2 + C sum max(0, |w.x_i + b - y_i| - epsilon)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    n = X.shape[0]
    if n < 2:
        raise DegenerateInput("SVR needs at least 2 training points", n=n)
    if y.size != n:
        raise DimMismatch("X and y row counts differ", rows=n, targets=y.size)
    if C <= 0:
        raise BadParam("C must be > 0", C=C)
    if epsilon < 0:
        raise BadParam("epsilon must be >= 0", epsilon=epsilon)

    # Every target fits inside one tube: w = 0 is optimal
    if np.ptp(y) <= 2 * epsilon:
        bias = float((y.max() + y.min()) / 2)
        return LinearSvrModel(np.zeros(X.shape[1]), bias, C, epsilon, 0, 0.0)

    K = X @ X.T
    m = 2 * n
    # Scaled dual: alpha = C * a, a in [0, 1]^m
    H = C * np.block([[K, -K], [-K, K]])
    c = np.concatenate([epsilon - y, epsilon + y])
    e = np.concatenate([np.ones(n), -np.ones(n)])
    scale = 1.0 + float(np.abs(c).max())
    reg = REGULARIZATION * (1.0 + float(np.abs(np.diag(H)).max()))

    a = np.full(m, 0.5)
    s = np.full(m, 0.5)
    lam = 0.0
    u = np.full(m, scale)
    v = np.full(m, scale)

    kkt = np.zeros((m + 1, m + 1))
    kkt[:m, m] = e
    kkt[m, :m] = e

    iteration = 0
    while True:
        Ha = H @ a
        r_dual = Ha + c + lam * e - u + v
        r_primal = float(e @ a)
        complementarity = float(a @ u + s @ v)
        objective = 0.5 * float(a @ Ha) + float(c @ a)
        gap = complementarity / (1.0 + abs(objective))
        if (
            gap <= tol
            and np.abs(r_dual).max() <= tol * scale
            and abs(r_primal) <= tol
        ):
            break
        if iteration >= max_iter:
            raise NoConvergence(
                f"SVR solver did not converge in {max_iter} iterations",
                iterations=iteration,
                gap=gap,
            )

        mu = complementarity / (2 * m)
        kkt[:m, :m] = H
        kkt[np.arange(m), np.arange(m)] += u / a + v / s + reg

        def direction(
            r_au: np.ndarray, r_sv: np.ndarray
        ) -> tuple[np.ndarray, float, np.ndarray, np.ndarray]:
            rhs = np.append(-r_dual + r_au / a - r_sv / s, -r_primal)
            step = _solve(kkt, rhs)
            da = step[:m]
            du = (r_au - u * da) / a
            dv = (r_sv + v * da) / s
            return da, float(step[m]), du, dv

        def longest(da: np.ndarray, du: np.ndarray, dv: np.ndarray) -> float:
            return min(_max_step(a, da), _max_step(s, -da), _max_step(u, du), _max_step(v, dv))

        # Predictor
        da, _, du, dv = direction(-a * u, -s * v)
        t = min(1.0, longest(da, du, dv))
        mu_affine = float((a + t * da) @ (u + t * du) + (s - t * da) @ (v + t * dv)) / (2 * m)
        sigma = min(1.0, (mu_affine / mu) ** 3)

        # Corrector
        da, dlam, du, dv = direction(
            sigma * mu - a * u - da * du, sigma * mu - s * v + da * dv
        )
        t = min(1.0, STEP_FRACTION * longest(da, du, dv))
        a = a + t * da
        s = s - t * da
        lam += t * dlam
        u = u + t * du
        v = v + t * dv
        iteration += 1

    coefficients = C * (a[:n] - a[n:])
    weights = X.T @ coefficients
    bias = best_bias(y - X @ weights, epsilon)
    logger.debug(f"SVR converged after {iteration} iterations (gap {gap:.3g})")
    return LinearSvrModel(weights, bias, C, epsilon, iteration, max(gap, 0.0))


def svr_predict(model: LinearSvrModel, x: np.ndarray) -> np.ndarray | float:
    """w.x + b for one vector, or for every row of a matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.weights.size:
        raise DimMismatch(
            f"Expected {model.weights.size} features, got {x.shape[-1]}",
            expected=model.weights.size,
            got=x.shape[-1],
        )
    result = x @ model.weights + model.bias
    return float(result) if np.ndim(result) == 0 else result


def hinge_loss(model: LinearSvrModel, X: np.ndarray, y: np.ndarray) -> float:
    """Total epsilon-insensitive loss on a dataset."""
    residual = np.abs(np.asarray(svr_predict(model, X)) - np.asarray(y, dtype=np.float64))
    return float(np.sum(np.maximum(0.0, residual - model.epsilon)))


def svr_objective(model: LinearSvrModel, X: np.ndarray, y: np.ndarray) -> float:
    """Primal objective value of a fitted model."""
    return 0.5 * float(model.weights @ model.weights) + model.C * hinge_loss(model, X, y)
