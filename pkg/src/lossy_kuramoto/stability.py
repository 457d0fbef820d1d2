"""Linearization of the coupling flow, its Laplacian structure, and spectra.

The Jacobian of the coupling sums at a phase vector is a (generally
non-symmetric) Laplacian-type matrix.  It is assembled here in two
independent algebraic forms, validated against each other and against
finite differences, and its spectrum drives the stability verdict: one
structural zero mode along the uniform-shift direction plus a Hurwitz
remainder whenever the equilibrium's edge differences stay strictly
inside the phase-shift margin.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dynamics import rhs, wrap_to_pi, _phases
from .errors import InternalConsistencyError, ValidationError
from .network import DerivedModel

log = logging.getLogger(__name__)

FORM_AGREEMENT_TOL = 1e-12
ROW_SUM_TOL = 1e-10
ZERO_EIGENVALUE_TOL = 1e-8  # relative to the spectral radius
HURWITZ_TOL = 1e-9
ZERO_MODE_ANGLE_TOL = 1e-6  # rad


class ComparisonOutcome(str, Enum):
    """Result of comparing algebraic connectivity to an external threshold."""

    HOLDS = "external-condition-holds"
    FAILS = "external-condition-fails"
    NOT_EVALUATED = "not-evaluated"


def coupling_jacobian(model: DerivedModel, delta) -> np.ndarray:
    """Jacobian of the per-node coupling sums, split incidence form.

    Computed as B diag(b cos d) B^T + |B| diag(a sin d) B^T where d are
    the wrapped edge differences.  The first term is the symmetric
    lossless part; the second, built with the unsigned incidence matrix,
    is what makes the matrix non-symmetric on lossy networks.
    """
    lossless, lossy = _split_parts(model, _phases(delta))
    return lossless + lossy


def _split_parts(model: DerivedModel, delta):
    d = wrap_to_pi(delta[model.src] - delta[model.dst])
    lossless = model.incidence @ np.diag(model.b * np.cos(d)) @ model.incidence.T
    lossy = model.abs_incidence @ np.diag(model.a * np.sin(d)) @ model.incidence.T
    return lossless, lossy


def _pairwise_jacobian(model: DerivedModel, delta) -> np.ndarray:
    """Same Jacobian from the phase-shifted cosine, per ordered neighbor pair.

    Entry (i, j) for neighbors is -sqrt(a^2+b^2) cos(d_ij - psi) with
    d_ij oriented from i to j, so the two endpoints of an edge receive
    different values; diagonals accumulate the same weights with a plus
    sign.
    """
    delta = _phases(delta)
    n = model.node_count
    d = wrap_to_pi(delta[model.src] - delta[model.dst])
    w_src = model.magnitude * np.cos(d - model.psi)
    w_dst = model.magnitude * np.cos(-d - model.psi)
    out = np.zeros((n, n))
    np.subtract.at(out, (model.src, model.dst), w_src)
    np.subtract.at(out, (model.dst, model.src), w_dst)
    np.add.at(out, (model.src, model.src), w_src)
    np.add.at(out, (model.dst, model.dst), w_dst)
    return out


@dataclass(frozen=True, eq=False)
class LaplacianFlags:
    """Structure checks of the coupling Jacobian."""

    row_sum_error: float  # max |sum_j L_ij|
    diagonal_positive: bool
    neighbor_entries_negative: bool
    nonneighbor_entries_zero: bool
    asymmetry: float  # max |L - L^T|


@dataclass(frozen=True, eq=False)
class JacobianReport:
    """Coupling Jacobian at a phase vector, in both forms, with its spectrum.

    ``spectrum`` and ``eigenvectors`` describe the linearized flow
    -diag(angular_gain) @ l_tilde, eigenvalues sorted by ascending real
    part (the structural zero mode lands last).
    """

    l_tilde: np.ndarray
    lossless_part: np.ndarray
    lossy_part: np.ndarray
    form_disagreement: float
    spectrum: np.ndarray  # complex, ascending real part
    eigenvectors: np.ndarray  # columns matching ``spectrum``
    zero_mode_error: float  # max |l_tilde @ ones|
    flags: LaplacianFlags


def jacobian(model: DerivedModel, delta_star) -> JacobianReport:
    """Build the coupling Jacobian in two independent forms and analyze it.

    The phase-shifted pairwise form and the split incidence form are
    computed separately and must agree entrywise to ``FORM_AGREEMENT_TOL``
    (an internal bug trap, the identity is unconditional).  The returned
    spectrum is that of the linearized flow including the gains.

    Raises
    ------
    InternalConsistencyError
        If the two forms disagree beyond tolerance.
    """
    delta_star = _phases(delta_star)
    if delta_star.shape != (model.node_count,):
        raise ValidationError("phase vector does not match the model size")

    pairwise = _pairwise_jacobian(model, delta_star)
    lossless, lossy = _split_parts(model, delta_star)
    split = lossless + lossy
    disagreement = float(np.abs(pairwise - split).max())
    if disagreement >= FORM_AGREEMENT_TOL:
        raise InternalConsistencyError(
            f"jacobian forms disagree by {disagreement:.3e}")

    system = -(model.angular_gain[:, None] * pairwise)
    eigvals, eigvecs = np.linalg.eig(system)
    order = np.lexsort((eigvals.imag, eigvals.real))
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]

    n = model.node_count
    zero_mode_error = float(np.abs(pairwise @ np.ones(n)).max())

    neighbor = (model.abs_incidence @ model.abs_incidence.T) > 0
    np.fill_diagonal(neighbor, False)
    off = ~neighbor & ~np.eye(n, dtype=bool)
    flags = LaplacianFlags(
        row_sum_error=float(np.abs(pairwise.sum(axis=1)).max()),
        diagonal_positive=bool(np.all(np.diag(pairwise) > 0)),
        neighbor_entries_negative=bool(np.all(pairwise[neighbor] < 0)),
        nonneighbor_entries_zero=bool(np.all(np.abs(pairwise[off]) <= 1e-12)),
        asymmetry=float(np.abs(pairwise - pairwise.T).max()),
    )

    return JacobianReport(
        l_tilde=pairwise,
        lossless_part=lossless,
        lossy_part=lossy,
        form_disagreement=disagreement,
        spectrum=eigvals,
        eigenvectors=eigvecs,
        zero_mode_error=zero_mode_error,
        flags=flags,
    )


def finite_difference_check(model: DerivedModel, delta_star, h: float = 1e-6) -> float:
    """Max relative error of the Jacobian against central differences.

    Differentiates the coupling sums (the vector field divided by the
    negated gains) column by column and compares entrywise against the
    assembled matrix, normalized by the matrix's largest entry.
    """
    if h <= 0:
        raise ValidationError("step h must be positive")
    delta_star = _phases(delta_star)
    n = model.node_count

    def coupling_sums(d):
        return -rhs(model, d) / model.angular_gain

    fd = np.zeros((n, n))
    for j in range(n):
        bump = np.zeros(n)
        bump[j] = h
        fd[:, j] = (coupling_sums(delta_star + bump)
                    - coupling_sums(delta_star - bump)) / (2.0 * h)
    exact = _pairwise_jacobian(model, delta_star)
    scale = max(float(np.abs(exact).max()), 1e-300)
    return float(np.abs(fd - exact).max() / scale)


def check_laplacian_structure(report: JacobianReport, delta_star,
                              model: DerivedModel) -> bool:
    """True iff the Jacobian has the Laplacian sign pattern.

    Zero row sums, positive diagonal, negative entries for neighbors,
    exact zeros elsewhere.  The pattern is guaranteed when the edge
    differences lie strictly inside the phase-shift margin; outside it
    the result is reported without being an error.
    """
    flags = report.flags
    return (flags.row_sum_error < ROW_SUM_TOL
            and flags.diagonal_positive
            and flags.neighbor_entries_negative
            and flags.nonneighbor_entries_zero)


@dataclass(frozen=True, eq=False)
class SpectralSummary:
    """Zero-mode count and Hurwitz status of the linearized flow."""

    zero_count: int
    hurwitz: bool
    zero_mode_angle: float  # rad, angle between the zero eigenvector and ones
    max_imaginary: float


def spectral_analysis(report: JacobianReport,
                      zero_tol: float = ZERO_EIGENVALUE_TOL,
                      hurwitz_tol: float = HURWITZ_TOL) -> SpectralSummary:
    """Classify the spectrum of the linearized flow.

    Eigenvalues with modulus below ``zero_tol`` times the spectral
    radius count as the structural zero mode; the flow is Hurwitz on the
    complement when every remaining real part is below ``-hurwitz_tol``.
    Also measures the angle between the zero-mode eigenvector and the
    uniform-shift direction.  Nonzero imaginary parts are possible for
    the non-symmetric matrix and are logged, not rejected.
    """
    lam = report.spectrum
    scale = float(np.abs(lam).max())
    if scale == 0.0:
        return SpectralSummary(zero_count=len(lam), hurwitz=True,
                               zero_mode_angle=0.0, max_imaginary=0.0)
    near_zero = np.abs(lam) < zero_tol * scale
    zero_count = int(near_zero.sum())
    rest = lam[~near_zero]
    hurwitz = bool(np.all(rest.real < -hurwitz_tol)) if rest.size else True

    max_imag = float(np.abs(lam.imag).max())
    if max_imag > zero_tol * scale:
        log.info("linearized flow has complex eigenvalues, max |Im| = %.3e", max_imag)

    angle = np.pi / 2.0
    if zero_count:
        idx = int(np.argmin(np.abs(lam)))
        v = report.eigenvectors[:, idx]
        n = v.shape[0]
        cosine = np.abs(np.vdot(v, np.ones(n))) / (np.linalg.norm(v) * np.sqrt(n))
        angle = float(np.arccos(np.clip(cosine, -1.0, 1.0)))
    return SpectralSummary(zero_count=zero_count, hurwitz=hurwitz,
                           zero_mode_angle=angle, max_imaginary=max_imag)


def coupling_strength_laplacian(model: DerivedModel) -> np.ndarray:
    """Symmetric Laplacian weighted by sqrt(a^2+b^2) cos(psi) per edge."""
    w = model.magnitude * np.cos(model.psi)
    return model.incidence @ np.diag(w) @ model.incidence.T


def algebraic_connectivity(model: DerivedModel) -> float:
    """Second-smallest eigenvalue of the coupling-strength Laplacian."""
    eigs = np.linalg.eigvalsh(coupling_strength_laplacian(model))
    return float(eigs[1])


def compare_connectivity(lambda2: float,
                         lambda_critical: float | None) -> ComparisonOutcome:
    """Compare algebraic connectivity against an externally supplied threshold.

    The threshold comes from a sufficient condition published elsewhere
    and is never computed here; without one the comparison is skipped.
    """
    if lambda_critical is None:
        return ComparisonOutcome.NOT_EVALUATED
    if lambda2 > lambda_critical:
        return ComparisonOutcome.HOLDS
    return ComparisonOutcome.FAILS


def connectivity_comparison(model: DerivedModel,
                            lambda_critical: float | None = None
                            ) -> tuple[float, ComparisonOutcome]:
    """Algebraic connectivity plus its comparison outcome."""
    lam2 = algebraic_connectivity(model)
    return lam2, compare_connectivity(lam2, lambda_critical)


@dataclass(frozen=True, eq=False)
class StabilityVerdict:
    """Outcome of the synchronization condition at an equilibrium."""

    psi_max: float  # rad
    gamma_bound: float  # rad, pi/2 - psi_max
    max_edge_difference: float  # rad, inf-norm of the equilibrium edge differences
    condition_met: bool
    spectral_confirmation: bool
    zero_count: int
    zero_mode_angle: float
    lambda2: float
    lambda_critical: float | None
    comparison_outcome: ComparisonOutcome


def edge_margin_met(max_edge_difference: float, psi_max_value: float) -> bool:
    """Strict interior test: every edge difference below pi/2 - psi_max.

    The boundary case counts as not met because the admissible arc
    length ranges over a half-open interval.
    """
    return max_edge_difference < 0.5 * np.pi - psi_max_value


def synchronization_condition(model: DerivedModel, delta_star,
                              lambda_critical: float | None = None,
                              report: JacobianReport | None = None) -> StabilityVerdict:
    """Evaluate the synchronization condition at a verified equilibrium.

    Checks that the largest equilibrium edge difference stays strictly
    below pi/2 - psi_max, and bundles the spectral confirmation (single
    zero mode aligned with the uniform shift, Hurwitz remainder) plus
    the algebraic-connectivity comparison.
    """
    delta_star = _phases(delta_star)
    diffs = wrap_to_pi(model.incidence.T @ delta_star)
    max_diff = float(np.abs(diffs).max())
    gamma_bound = 0.5 * np.pi - model.psi_max

    if report is None:
        report = jacobian(model, delta_star)
    summary = spectral_analysis(report)
    spectral_ok = (summary.zero_count == 1 and summary.hurwitz
                   and summary.zero_mode_angle < ZERO_MODE_ANGLE_TOL)

    lam2, outcome = connectivity_comparison(model, lambda_critical)
    return StabilityVerdict(
        psi_max=model.psi_max,
        gamma_bound=gamma_bound,
        max_edge_difference=max_diff,
        condition_met=edge_margin_met(max_diff, model.psi_max),
        spectral_confirmation=spectral_ok,
        zero_count=summary.zero_count,
        zero_mode_angle=summary.zero_mode_angle,
        lambda2=lam2,
        lambda_critical=lambda_critical,
        comparison_outcome=outcome,
    )
