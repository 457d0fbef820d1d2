"""Equilibrium computation with rotational gauge fixing.

The vector field only depends on phase differences, so equilibria come
in one-parameter families of uniform shifts.  The solver pins the first
phase to zero and runs damped Newton on the remaining unknowns; the
multi-start uniqueness check then verifies that every equilibrium found
inside the synchronization set shares the same edge differences.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import rhs, _phases
from .errors import (InconclusiveError, NearBifurcationError,
                     NoConvergenceError, ValidationError)
from .network import DerivedModel
from .stability import coupling_jacobian, edge_margin_met

MAX_HALVINGS = 30


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    """Gauge-fixed equilibrium with its verification data."""

    delta_star: np.ndarray  # phases, rad, delta_star[0] == 0
    residual_norm: float  # inf-norm of the vector field at delta_star
    iterations: int
    edge_differences: np.ndarray  # incidence^T @ delta_star

    @property
    def max_edge_difference(self) -> float:
        return float(np.abs(self.edge_differences).max())


def _result(model: DerivedModel, delta: np.ndarray, iterations: int) -> EquilibriumResult:
    residual = float(np.abs(rhs(model, delta)).max())
    return EquilibriumResult(
        delta_star=delta,
        residual_norm=residual,
        iterations=iterations,
        edge_differences=model.incidence.T @ delta,
    )


def solve(model: DerivedModel, guess=None, tol: float = 1e-10,
          max_iter: int = 100) -> EquilibriumResult:
    """Find an equilibrium by damped Newton iteration on the reduced system.

    The first phase is pinned to zero (the guess is shifted into that
    gauge), leaving the remaining phases as unknowns.  Each step solves
    the reduced linearized system, with the first row and column of the
    Jacobian deleted, and backtracks by halving until the full residual
    2-norm decreases.  Success requires the full residual inf-norm below
    ``tol``, which also rules out points that solve the reduced
    equations without being true equilibria.

    Parameters
    ----------
    model : derived network model
    guess : starting phases; defaults to zero
    tol : rad/s, inf-norm convergence threshold
    max_iter : Newton iteration budget

    Raises
    ------
    NoConvergenceError
        Iteration budget exhausted or the line search stalled; carries
        the best iterate seen.
    NearBifurcationError
        The reduced Jacobian is singular at an iterate.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    n = model.node_count
    delta = np.zeros(n) if guess is None else np.array(_phases(guess), dtype=float)
    delta = delta - delta[0]

    best_delta, best_norm = delta.copy(), np.inf
    for iteration in range(max_iter + 1):
        residual = rhs(model, delta)
        res_inf = float(np.abs(residual).max())
        if res_inf < best_norm:
            best_delta, best_norm = delta.copy(), res_inf
        if res_inf < tol:
            return _result(model, delta, iteration)
        if iteration == max_iter:
            break

        jac = -(model.angular_gain[:, None] * coupling_jacobian(model, delta))
        try:
            step = np.linalg.solve(jac[1:, 1:], -residual[1:])
        except np.linalg.LinAlgError as exc:
            raise NearBifurcationError(
                f"singular reduced Jacobian at iteration {iteration}") from exc
        if not np.all(np.isfinite(step)):
            raise NearBifurcationError(
                f"reduced Jacobian is numerically singular at iteration {iteration}")

        res_2 = float(np.linalg.norm(residual))
        alpha = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = delta.copy()
            trial[1:] += alpha * step
            if float(np.linalg.norm(rhs(model, trial))) < res_2:
                delta = trial
                break
            alpha *= 0.5
        else:
            raise NoConvergenceError(
                f"line search stalled at iteration {iteration}",
                best_delta=best_delta, best_residual=best_norm)

    raise NoConvergenceError(
        f"no convergence within {max_iter} iterations (best residual {best_norm:.3e})",
        best_delta=best_delta, best_residual=best_norm)


@dataclass(frozen=True, eq=False)
class UniquenessResult:
    """Multi-start evidence for uniqueness of equilibrium phase differences."""

    unique: bool
    witnesses: tuple  # one edge-difference vector per distinct class found
    max_pairwise_deviation: float
    n_retained: int
    n_starts: int
    n_failed: int
    results: tuple  # retained EquilibriumResult objects, by start index


def check_uniqueness(model: DerivedModel, n_starts: int = 20, seed=0,
                     tol: float = 1e-8, solver_tol: float = 1e-10,
                     max_iter: int = 100, jobs: int = 1) -> UniquenessResult:
    """Solve from many random starts and compare the edge differences.

    Starts are drawn with every pairwise difference strictly inside the
    stability margin, and only solutions that land inside it are
    retained.  The result is unique when all retained edge-difference
    vectors agree pairwise within ``tol``.

    Raises
    ------
    ValidationError
        Fewer than two starts requested.
    InconclusiveError
        No start produced an equilibrium inside the margin; existence
        cannot be confirmed.
    """
    if n_starts < 2:
        raise ValidationError("need at least two starts")
    rng = np.random.default_rng(seed)
    half = 0.5 * (0.5 * np.pi - model.psi_max)
    guesses = rng.uniform(-half, half, size=(n_starts, model.node_count))

    def attempt(guess):
        try:
            return solve(model, guess, tol=solver_tol, max_iter=max_iter)
        except (NoConvergenceError, NearBifurcationError):
            return None

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(attempt, guesses))
    else:
        outcomes = [attempt(g) for g in guesses]

    retained = [r for r in outcomes
                if r is not None and edge_margin_met(r.max_edge_difference, model.psi_max)]
    n_failed = sum(1 for r in outcomes if r is None)
    if not retained:
        raise InconclusiveError(
            f"no equilibrium inside the synchronization set from {n_starts} starts")

    diffs = np.array([r.edge_differences for r in retained])
    # Max over retained pairs of the inf-norm deviation equals the
    # largest per-edge range across starts.
    max_dev = float((diffs.max(axis=0) - diffs.min(axis=0)).max())
    witnesses: list[np.ndarray] = []
    for res in retained:
        if not any(np.abs(res.edge_differences - w).max() <= tol for w in witnesses):
            witnesses.append(res.edge_differences)

    return UniquenessResult(
        unique=max_dev <= tol,
        witnesses=tuple(witnesses),
        max_pairwise_deviation=max_dev,
        n_retained=len(retained),
        n_starts=n_starts,
        n_failed=n_failed,
        results=tuple(retained),
    )
