"""Recovery of the high-dimensional solution from a sketched solve.

Three routes are implemented:

- ``recover_naive``: map the sketched solution back through the projection
  matrix, R z / sqrt(m).  Lands in the random subspace and is a provably
  poor approximation of the true weights.
- ``recover_drp``: solve the sketched problem, read its dual vector off the
  loss gradient, and rebuild the weights through the *original* data
  matrix, w = -(1/lam) X D(y) alpha.  Lands in the span of the data.
- ``recover_iterative``: repeat the dual recovery on the residual using
  shifted losses, reusing the single sketch; the error contracts
  geometrically per pass.

Plus a closed-form square-loss route and the error functionals used to
check the recovery guarantees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import Dataset, SpectrumInfo
from .losses import LossSpec
from .sketch import ProjectionSketch
from .solve import (
    ConvergenceError,
    DualSolution,
    LinearSolveError,
    SolverConfig,
    solve_primal,
    solve_shifted,
)

__all__ = [
    "RecoveryResult",
    "IterationTrace",
    "recover_naive",
    "recover_drp",
    "ridge_drp_closed_form",
    "recover_iterative",
    "span_restricted_error",
    "measurement_error",
    "relative_error",
]

METHODS = ("naive", "drp", "drp_iterative", "ridge_closed")


@dataclass(frozen=True)
class RecoveryResult:
    """A recovered weight vector, optionally scored against a reference."""

    recovered: np.ndarray
    method: str
    reference: np.ndarray | None = None
    rel_error: float | None = None


@dataclass(frozen=True)
class IterationTrace:
    """Relative-error trail of the iterative recovery plus its final duals.

    ``per_iteration_errors[t]`` is ||w_t - w*|| / ||w*||; entry 0 is exactly
    1 because the iteration starts from the zero vector.  Errors are NaN
    when no reference was supplied.
    """

    per_iteration_errors: np.ndarray
    duals: np.ndarray


def relative_error(recovered, reference) -> float:
    ref_norm = np.linalg.norm(reference)
    if ref_norm == 0.0:
        raise ValueError("reference vector has zero norm")
    return float(np.linalg.norm(np.asarray(recovered) - np.asarray(reference)) / ref_norm)


def _scored(recovered, method, reference):
    if reference is None:
        return RecoveryResult(recovered=recovered, method=method)
    return RecoveryResult(
        recovered=recovered,
        method=method,
        reference=np.asarray(reference, dtype=float),
        rel_error=relative_error(recovered, reference),
    )


def recover_naive(r_matrix, z_star, m: int) -> np.ndarray:
    """Back-projection R z / sqrt(m) of a sketched solution."""
    r_matrix = np.asarray(r_matrix, dtype=float)
    z_star = np.asarray(z_star, dtype=float)
    if r_matrix.ndim != 2 or z_star.shape != (r_matrix.shape[1],) or r_matrix.shape[1] != m:
        raise ValueError("projection matrix must be d x m and z of length m")
    return (r_matrix @ z_star) / np.sqrt(m)


def recover_drp(
    data: Dataset,
    loss: LossSpec,
    lam: float,
    sketch: ProjectionSketch,
    config: SolverConfig = SolverConfig(),
    reference=None,
) -> RecoveryResult:
    """Dual recovery from one sketched solve.

    Solves the m-dimensional sketched problem, forms the dual vector
    alpha_i = grad l(y_i xhat_i' z), and maps it back through the original
    features.  No d-dimensional optimization problem is ever solved.
    """
    if sketch.sketched_features.shape != (sketch.m, data.n):
        raise ValueError("sketch does not match the dataset")
    z_sol = solve_primal(sketch.sketched_features, data.labels, loss, lam, config)
    margins = data.labels * (sketch.sketched_features.T @ z_sol.weights)
    alphas = np.asarray(loss.grad(margins), dtype=float)
    recovered = -(data.features @ (data.labels * alphas)) / lam
    return _scored(recovered, "drp", reference)


def ridge_drp_closed_form(data: Dataset, lam: float, sketch: ProjectionSketch) -> np.ndarray:
    """Square-loss dual recovery in closed form through an n x n system.

    Evaluates X (lam I + X' (R R'/m) X)^{-1} y; the middle matrix is just
    the Gram of the sketched features, so no d x d system appears.
    """
    if lam <= 0:
        raise ValueError("regularization weight must be positive")
    xs = sketch.sketched_features
    if xs.shape != (sketch.m, data.n):
        raise ValueError("sketch does not match the dataset")
    a = xs.T @ xs
    a[np.diag_indices_from(a)] += lam
    try:
        t = scipy.linalg.solve(a, data.labels, assume_a="pos")
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise LinearSolveError(f"sketched ridge system could not be solved: {exc}") from exc
    return data.features @ t


def recover_iterative(
    data: Dataset,
    loss: LossSpec,
    lam: float,
    sketch: ProjectionSketch,
    t_iters: int,
    config: SolverConfig = SolverConfig(),
    reference=None,
    early_stop: bool = False,
) -> tuple[RecoveryResult, IterationTrace]:
    """Iterative dual recovery with shifted losses, reusing one sketch.

    Starting from w_0 = 0, each pass t solves the sketched residual problem

        min_z lam/2 ||z + R' w_{t-1} / sqrt(m)||^2
              + sum_i l(y_i z' xhat_i + y_i w_{t-1}' x_i),

    reads off the cumulative dual alpha_t,i = grad l(y_i xhat_i' z_t +
    y_i w_{t-1}' x_i), and rebuilds w_t = -(1/lam) X D(y) alpha_t.  The
    per-example dot products w_{t-1}' x_i live in the original space; the
    projection matrix is sampled once, before the loop.

    Solver failure at any pass raises ``ConvergenceError`` with the pass
    index in the message.  ``early_stop`` ends the loop once the sketched
    increment is negligible next to the current iterate.
    """
    if t_iters < 1:
        raise ValueError("t_iters must be at least 1")
    xs = sketch.sketched_features
    if xs.shape != (sketch.m, data.n):
        raise ValueError("sketch does not match the dataset")
    ref = None if reference is None else np.asarray(reference, dtype=float)
    sqrt_m = np.sqrt(sketch.m)

    w = np.zeros(data.d)
    alphas = np.zeros(data.n)
    errors = [1.0 if ref is not None else np.nan]
    for t in range(1, t_iters + 1):
        dots = data.features.T @ w
        offset = (sketch.matrix_r.T @ w) / sqrt_m
        try:
            z_sol = solve_shifted(
                xs, data.labels, loss, lam, offset, data.labels * dots, config
            )
        except ConvergenceError as exc:
            raise ConvergenceError(f"pass {t}: {exc}", exc.best) from exc
        margins = data.labels * (xs.T @ z_sol.weights) + data.labels * dots
        alphas = np.asarray(loss.grad(margins), dtype=float)
        w = -(data.features @ (data.labels * alphas)) / lam
        errors.append(relative_error(w, ref) if ref is not None else np.nan)
        if early_stop and np.linalg.norm(z_sol.weights) <= 1e-12 * np.linalg.norm(w):
            break
    trace = IterationTrace(per_iteration_errors=np.array(errors), duals=alphas)
    return _scored(w, "drp_iterative", ref), trace


def span_restricted_error(spec: SpectrumInfo, w_a, w_b) -> float:
    """Worst-case prediction gap over unit vectors in the span of the data.

    Equals ||U' (w_a - w_b)|| for the rank-r left singular basis U, since
    the maximizing unit vector lies in the span of the data columns.
    """
    diff = np.asarray(w_a, dtype=float) - np.asarray(w_b, dtype=float)
    return float(np.linalg.norm(spec.top_left_basis().T @ diff))


def measurement_error(z_star, r_matrix, m: int, w_star) -> float:
    """How far sqrt(m) z strays from the random measurements R' w of the truth."""
    r_matrix = np.asarray(r_matrix, dtype=float)
    measured = r_matrix.T @ np.asarray(w_star, dtype=float)
    denom = np.linalg.norm(measured)
    if denom == 0.0:
        raise ValueError("R' w has zero norm; the measurement ratio is undefined")
    return float(np.linalg.norm(np.sqrt(m) * np.asarray(z_star, dtype=float) - measured) / denom)
