"""Exception types shared across the package."""

from __future__ import annotations


class LossyKuramotoError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(LossyKuramotoError):
    """A parameter value or shape violates the model's constraints."""


class StructuralError(LossyKuramotoError):
    """The coupling graph is structurally unusable (e.g. disconnected)."""


class ConfigError(LossyKuramotoError):
    """An experiment configuration is incomplete or inconsistent."""


class IntegrationDivergedError(LossyKuramotoError):
    """Integration produced a non-finite state.

    Carries the last finite sample so callers can inspect how far the
    trajectory got before blowing up.
    """

    def __init__(self, message, last_good_time, last_good_state):
        super().__init__(message)
        self.last_good_time = last_good_time
        self.last_good_state = last_good_state


class NoConvergenceError(LossyKuramotoError):
    """The equilibrium solver ran out of iterations or stalled.

    Carries the best iterate seen, which is often useful for diagnosing
    infeasible networks.
    """

    def __init__(self, message, best_delta, best_residual):
        super().__init__(message)
        self.best_delta = best_delta
        self.best_residual = best_residual


class NearBifurcationError(LossyKuramotoError):
    """The reduced Newton Jacobian is singular (loss of solvability)."""


class InconclusiveError(LossyKuramotoError):
    """No equilibrium was found inside the synchronization set.

    Absence of a solution from finitely many starts does not prove
    non-existence, so the outcome is reported as inconclusive rather
    than negative.
    """


class InternalConsistencyError(LossyKuramotoError):
    """Two independently computed forms of the same quantity disagree."""
