"""Solvers for the regularized ERM problem and primal/dual conversions.

The primal problem in a space of dimension p is

    min_w  lam/2 ||w||^2 + sum_i l(y_i x_i' w)

over the columns x_i of a p x n feature matrix.  ``solve_primal`` also
covers the sketched problem (pass the sketched features) and, internally,
the shifted variants used by iterative recovery.  The contract is a
gradient-norm certificate: a returned solution always satisfies
||grad|| <= tolerance, where the gradient is evaluated in the space the
caller handed in; failure to certify raises ``ConvergenceError`` carrying
the best iterate.

The method is damped Newton with a Cholesky-factored exact Hessian.  When
p exceeds n + 1 the iterate provably lies in the span of the feature
columns (plus the shift offset), so the problem is first reduced onto an
orthonormal basis of that span; the certificate is still evaluated in the
full space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .losses import LossSpec

__all__ = [
    "SolverConfig",
    "PrimalSolution",
    "DualSolution",
    "ConvergenceError",
    "LinearSolveError",
    "solve_primal",
    "solve_shifted",
    "ridge_closed_form",
    "dual_from_primal",
    "primal_from_dual",
    "dual_objective",
    "primal_objective",
]

DEFAULT_TOLERANCE = 1e-10
DEFAULT_MAX_ITERATIONS = 100_000

ARMIJO_C = 1e-4
MIN_STEP = 2.0**-40
NOISE_EPS = 8.0 * np.finfo(float).eps


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class PrimalSolution:
    """Weights plus solver diagnostics; the objective trace is monotone."""

    weights: np.ndarray
    objective: float
    grad_norm: float
    iterations: int
    objective_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_json(self) -> str:
        return json.dumps(
            {
                "weights": [float(v) for v in self.weights],
                "objective": float(self.objective),
                "grad_norm": float(self.grad_norm),
                "iterations": int(self.iterations),
            }
        )


@dataclass(frozen=True)
class DualSolution:
    """Dual vector, one component per example, each in the loss's dual domain."""

    alphas: np.ndarray


class ConvergenceError(RuntimeError):
    """Raised when the gradient certificate cannot be met; carries the best iterate."""

    def __init__(self, message: str, best: PrimalSolution):
        super().__init__(message)
        self.best = best


class LinearSolveError(RuntimeError):
    """A direct linear solve failed (singular or numerically unusable system)."""


def primal_objective(features, labels, loss: LossSpec, lam: float, weights) -> float:
    """Value of the regularized ERM objective at ``weights``."""
    margins = labels * (features.T @ weights)
    return float(0.5 * lam * np.dot(weights, weights) + np.sum(loss.value(margins)))


def _newton(features, labels, loss, lam, config, offset=None, margin_shift=None):
    """Damped Newton on the (possibly shifted) primal.

    Minimizes  lam/2 ||z + offset||^2 + sum_i l(y_i z' x_i + margin_shift_i)
    and certifies the gradient in the caller's space.
    """
    x_full = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    p, n = x_full.shape
    u_full = np.zeros(p) if offset is None else np.asarray(offset, dtype=float)
    shift = np.zeros(n) if margin_shift is None else np.asarray(margin_shift, dtype=float)

    # The minimizer lies in span(columns of X, offset); reduce when that helps.
    if offset is not None and np.any(u_full):
        span_cols = np.column_stack([x_full, u_full])
    else:
        span_cols = x_full
    if p > span_cols.shape[1]:
        basis, _ = np.linalg.qr(span_cols)
        x = basis.T @ x_full
        u = basis.T @ u_full
    else:
        basis = None
        x, u = x_full, u_full
    k = x.shape[0]

    def full_grad_norm(z_red, coef):
        z_f = basis @ z_red if basis is not None else z_red
        g_f = lam * (z_f + u_full) + x_full @ coef
        return float(np.linalg.norm(g_f)), z_f

    def evaluate(z):
        margins = y * (x.T @ z) + shift
        f = 0.5 * lam * np.dot(z + u, z + u) + float(np.sum(loss.value(margins)))
        return f, margins

    z = np.zeros(k)
    f, margins = evaluate(z)
    trace = [f]
    coef = y * loss.grad(margins)
    g = lam * (z + u) + x @ coef
    iters = 0

    def snapshot(gn_full, z_f):
        return PrimalSolution(
            weights=z_f,
            objective=f,
            grad_norm=gn_full,
            iterations=iters,
            objective_trace=np.array(trace),
        )

    while True:
        gn_full, z_f = full_grad_norm(z, coef)
        if gn_full <= config.tolerance:
            return snapshot(gn_full, z_f)
        if iters >= config.max_iterations:
            raise ConvergenceError(
                f"no convergence after {iters} iterations (grad norm {gn_full:.3e})",
                snapshot(gn_full, z_f),
            )
        curv = loss.curvature(margins)
        hess = (x * curv) @ x.T
        hess[np.diag_indices_from(hess)] += lam
        try:
            c_factor = scipy.linalg.cho_factor(hess, lower=True)
        except scipy.linalg.LinAlgError as exc:  # lam > 0 makes this unlikely
            raise ConvergenceError(
                f"Hessian factorization failed: {exc}", snapshot(gn_full, z_f)
            ) from exc
        direction = scipy.linalg.cho_solve(c_factor, -g)
        slope = float(g @ direction)
        if slope >= 0.0:
            direction, slope = -g, -float(g @ g)

        # Accept a backtracked step only while its decrease is measurable
        # above the float noise of evaluating f; otherwise the search would
        # accept zero-progress micro-steps and stall short of the optimum.
        noise = NOISE_EPS * (1.0 + abs(f))
        step = 1.0
        accepted = False
        while step >= MIN_STEP:
            z_new = z + step * direction
            f_new, margins_new = evaluate(z_new)
            if f_new <= f + ARMIJO_C * step * slope and f - f_new > noise:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # Objective differences are below float resolution; take the full
            # Newton step if it still shrinks the gradient (quadratic endgame).
            z_new = z + direction
            f_new, margins_new = evaluate(z_new)
            coef_new = y * loss.grad(margins_new)
            g_new = lam * (z_new + u) + x @ coef_new
            if np.linalg.norm(g_new) <= 0.9 * np.linalg.norm(g) and f_new <= f + 1e-12 * (1.0 + abs(f)):
                z, f, margins, coef, g = z_new, f_new, margins_new, coef_new, g_new
                trace.append(f)
                iters += 1
                continue
            raise ConvergenceError(
                f"stalled at the floating-point floor (grad norm {gn_full:.3e}, "
                f"tolerance {config.tolerance:.3e})",
                snapshot(gn_full, z_f),
            )
        z, f, margins = z_new, f_new, margins_new
        coef = y * loss.grad(margins)
        g = lam * (z + u) + x @ coef
        trace.append(f)
        iters += 1


def solve_primal(
    features,
    labels,
    loss: LossSpec,
    lam: float,
    config: SolverConfig = SolverConfig(),
) -> PrimalSolution:
    """Minimize the regularized ERM objective with a gradient-norm certificate.

    Works for the original problem (pass the d x n features) and the
    sketched one (pass the m x n sketched features).  Raises
    ``ConvergenceError`` carrying the best iterate when the certificate
    cannot be met within ``config.max_iterations``.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if lam <= 0:
        raise ValueError("regularization weight must be positive")
    if features.ndim != 2 or labels.shape != (features.shape[1],):
        raise ValueError("features must be p x n with one label per column")
    return _newton(features, labels, loss, lam, config)


def solve_shifted(
    features,
    labels,
    loss: LossSpec,
    lam: float,
    offset,
    margin_shift,
    config: SolverConfig = SolverConfig(),
) -> PrimalSolution:
    """Solve the shifted problem used by iterative recovery.

    Minimizes lam/2 ||z + offset||^2 + sum_i l(y_i z' x_i + margin_shift_i);
    with zero offset and shift this is exactly ``solve_primal``.
    """
    if lam <= 0:
        raise ValueError("regularization weight must be positive")
    return _newton(features, labels, loss, lam, config, offset=offset, margin_shift=margin_shift)


def ridge_closed_form(features, labels, lam: float) -> np.ndarray:
    """Exact ridge solution via whichever of the two normal systems is smaller.

    Solves (lam I + X X') w = X y when d <= n and uses the equivalent
    w = X (lam I + X' X)^{-1} y otherwise; the two agree up to roundoff.
    """
    if lam <= 0:
        raise ValueError("regularization weight must be positive")
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    d, n = x.shape
    try:
        if d <= n:
            a = x @ x.T
            a[np.diag_indices_from(a)] += lam
            return scipy.linalg.solve(a, x @ y, assume_a="pos")
        a = x.T @ x
        a[np.diag_indices_from(a)] += lam
        return x @ scipy.linalg.solve(a, y, assume_a="pos")
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise LinearSolveError(f"ridge system could not be solved: {exc}") from exc


def dual_from_primal(features, labels, loss: LossSpec, weights) -> DualSolution:
    """Dual vector read off a primal solution: alpha_i = grad l(y_i x_i' w)."""
    margins = np.asarray(labels, dtype=float) * (np.asarray(features, dtype=float).T @ weights)
    return DualSolution(alphas=np.asarray(loss.grad(margins), dtype=float))


def primal_from_dual(features, labels, lam: float, dual: DualSolution) -> np.ndarray:
    """Map a dual vector back to weights: w = -(1/lam) sum_i alpha_i y_i x_i."""
    if lam <= 0:
        raise ValueError("regularization weight must be positive")
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    return -(x @ (y * dual.alphas)) / lam


def dual_objective(gram_matrix, loss: LossSpec, lam: float, dual: DualSolution) -> float:
    """Value of the concave dual: -sum_i l*(alpha_i) - alpha' G alpha / (2 lam)."""
    if lam <= 0:
        raise ValueError("regularization weight must be positive")
    alphas = dual.alphas
    conj = loss.conjugate(alphas)  # raises on a domain violation
    quad = float(alphas @ (np.asarray(gram_matrix, dtype=float) @ alphas))
    return float(-np.sum(conj) - quad / (2.0 * lam))
