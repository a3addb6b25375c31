"""Perturbation bounds for the triangular factor of the QR factorization.

Two structured operators drive everything. The linear map sends
vec(Q^T dA) to uvec(dR) at first order and is built as

    uvec-selection . (R^T kron I) . up-mask . [R^{-T} kron I + (I kron R^{-T}) Pi]

with Pi the vec-permutation; the quadratic map, with the same outer stages and
core R^{-T} kron R^{-T}, absorbs the second-order terms dA^T dA - dR^T dR. A
fixed-point argument then yields rigorous bounds whenever
||quad|| (||lin|| d2 + ||quad|| d2^2) < 1/4, where d2 = ||dA||_F and the bound
itself uses d1 = ||Q^T dA||_F <= d2.

Componentwise perturbations |dA| <= eps C |A| route through the entrywise
absolute values of the two maps weighted by Kronecker factors of |R|; those
need dense materialization. The scaled comparison bounds of Chang and Stehle
and the two scaling recipes used in the experiments (row norms, and the
recursive equilibration built from row 1-norms) are included for tightness
measurements.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import dense
from .dense import QrFactors
from .errors import AbsOperatorTooLarge, SingularDiagonal
from .lu_bounds import ScalingMatrix
from .structured import (
    KroneckerStage,
    SelectionKind,
    SelectionStage,
    StructuredOperator,
    SumStage,
    VecPermutationStage,
    operator_materialize,
    operator_spectral_norm,
    selection_matrix,
)

SQRT6_PLUS_SQRT3 = math.sqrt(6.0) + math.sqrt(3.0)


def r_factor_operator(r) -> StructuredOperator:
    """Map from vec(Q^T dA) to uvec(dR), the first-order change of R."""
    r = np.asarray(r, dtype=float)
    n = r.shape[0]
    rinv = dense.triangular_inverse(r, "upper")
    eye = np.eye(n)
    branch_direct = StructuredOperator(stages=(KroneckerStage(rinv.T, eye),))
    branch_transposed = StructuredOperator(stages=(
        KroneckerStage(eye, rinv.T),
        VecPermutationStage(n, n),
    ))
    return StructuredOperator(stages=(
        SelectionStage(selection_matrix(SelectionKind.UVEC, n)),
        KroneckerStage(r.T, eye),
        SelectionStage(selection_matrix(SelectionKind.UP, n)),
        SumStage(branches=(branch_direct, branch_transposed)),
    ))


def r_quadratic_operator(r) -> StructuredOperator:
    """Map absorbing the quadratic terms dA^T dA - dR^T dR into uvec(dR)."""
    r = np.asarray(r, dtype=float)
    n = r.shape[0]
    rinv = dense.triangular_inverse(r, "upper")
    return StructuredOperator(stages=(
        SelectionStage(selection_matrix(SelectionKind.UVEC, n)),
        KroneckerStage(r.T, np.eye(n)),
        SelectionStage(selection_matrix(SelectionKind.UP, n)),
        KroneckerStage(rinv.T, rinv.T),
    ))


def zeta(d: ScalingMatrix) -> float:
    """max over i < j of d_j / d_i; below 1 for a decreasing diagonal."""
    diag = d.diagonal
    if diag.size < 2:
        return 0.0
    running_min = np.minimum.accumulate(diag)[:-1]
    return float(np.max(diag[1:] / running_min))


def scaling_d_r(r) -> ScalingMatrix:
    """Row 2-norm scaling of an upper triangular matrix."""
    r = np.asarray(r, dtype=float)
    norms = np.linalg.norm(r, axis=1)
    if np.any(norms == 0.0):
        raise SingularDiagonal(int(np.flatnonzero(norms == 0.0)[0]) + 1)
    return ScalingMatrix(diagonal=norms)


def scaling_d_e(r) -> ScalingMatrix:
    """Recursive equilibration scaling built from row 1-norms.

    With M = diag(row 1-norms) @ inv(R), the j-th diagonal entry is the
    reciprocal of the j-th column norm of M whenever those column norms are
    nondecreasing, and repeats the previous entry otherwise.
    """
    r = np.asarray(r, dtype=float)
    dc = np.sum(np.abs(r), axis=1)
    m = dc[:, None] * dense.triangular_inverse(r, "upper")
    col_norms = np.linalg.norm(m, axis=0)
    n = r.shape[0]
    out = np.empty(n)
    out[0] = 1.0 / col_norms[0]
    for j in range(1, n):
        if col_norms[j] >= col_norms[j - 1]:
            out[j] = 1.0 / col_norms[j]
        else:
            out[j] = out[j - 1]
    return ScalingMatrix(diagonal=out)


def chang_stehle_qr(r, delta_or_eps: float, model: str, d: ScalingMatrix,
                    c=None, q=None):
    """Scaled-condition-number comparison bound for dR.

    ``model`` is ``"normwise"`` or ``"componentwise"``. Returns
    ``(bound, applicable)``; the normwise gate is
    ||R^-1||_2 ||dA||_F < sqrt(3/2) - 1 and the componentwise gate is
    || |R||R^-1| ||_2 ||C|Q|||_F eps < sqrt(3/2) - 1.
    """
    r = np.asarray(r, dtype=float)
    rinv = dense.triangular_inverse(r, "upper")
    z = zeta(d)
    factor = SQRT6_PLUS_SQRT3 * math.sqrt(1.0 + z * z)
    gate = math.sqrt(1.5) - 1.0
    if model == "normwise":
        kappa = dense.kappa2_triangular(r / d.diagonal[:, None], "upper")
        bound = factor * kappa * delta_or_eps
        applicable = dense.spectral_norm(rinv) * delta_or_eps < gate
        return bound, applicable
    if model == "componentwise":
        if c is None or q is None:
            raise ValueError("componentwise model needs the envelope matrix c and q")
        c = np.asarray(c, dtype=float)
        q = np.asarray(q, dtype=float)
        c_env_norm = float(np.linalg.norm(c @ np.abs(q)))
        bound = (factor
                 * dense.spectral_norm(r / d.diagonal[:, None])
                 * dense.spectral_norm(np.abs(r) @ np.abs(rinv) * d.diagonal[None, :])
                 * c_env_norm * delta_or_eps)
        applicable = (dense.spectral_norm(np.abs(r) @ np.abs(rinv))
                      * c_env_norm * delta_or_eps < gate)
        return bound, applicable
    raise ValueError(f"model must be 'normwise' or 'componentwise', got {model!r}")


@dataclass(frozen=True)
class QrNormwiseReport:
    """Normwise QR bound report; delta1 = ||Q^T dA||_F, delta2 = ||dA||_F."""

    delta1: float
    delta2: float
    linear_op_norm: float
    quadratic_op_norm: float
    condition_value: float            # quad*(lin*d2 + quad*d2^2), gate < 1/4
    strengthened_condition_value: float  # quad*(1 + 2*lin)*d2, gate < 1/2
    applicable: bool
    rigorous_dr: float | None
    relaxed_dr: float | None
    simple_dr: float | None           # (1 + 2*lin) * d2
    first_order_dr: float             # lin * d1
    comparison_dr: float
    comparison_applicable: bool
    zeta_d: float


def qr_normwise_bounds(factors: QrFactors, delta1: float, delta2: float,
                       d: ScalingMatrix | None = None) -> QrNormwiseReport:
    """Evaluate the normwise bounds for the triangular factor.

    ``delta1`` may exceed ``delta2`` only by rounding noise; it is clamped,
    since ||Q^T dA||_F <= ||dA||_F holds exactly for orthonormal columns.
    """
    if delta1 < 0.0 or delta2 < 0.0:
        raise ValueError("deltas must be nonnegative")
    if delta1 > delta2 * (1.0 + 1e-12):
        raise ValueError("delta1 cannot exceed delta2")
    delta1 = min(delta1, delta2)
    r = factors.r
    lin = operator_spectral_norm(r_factor_operator(r))
    quad = operator_spectral_norm(r_quadratic_operator(r))
    condition = quad * (lin * delta2 + quad * delta2 * delta2)
    strengthened = quad * (1.0 + 2.0 * lin) * delta2
    applicable = condition < 0.25

    rigorous = relaxed = simple = None
    if applicable:
        core = lin * delta1 + quad * delta2 * delta2
        rigorous = 2.0 * core / (1.0 + math.sqrt(1.0 - 4.0 * quad * core))
        relaxed = 2.0 * core
        simple = (1.0 + 2.0 * lin) * delta2

    if d is None:
        d = scaling_d_r(r)
    comparison, comp_ok = chang_stehle_qr(r, delta2, "normwise", d)

    return QrNormwiseReport(
        delta1=delta1,
        delta2=delta2,
        linear_op_norm=lin,
        quadratic_op_norm=quad,
        condition_value=condition,
        strengthened_condition_value=strengthened,
        applicable=applicable,
        rigorous_dr=rigorous,
        relaxed_dr=relaxed,
        simple_dr=simple,
        first_order_dr=lin * delta1,
        comparison_dr=comparison,
        comparison_applicable=comp_ok,
        zeta_d=zeta(d),
    )


@dataclass(frozen=True)
class QrComponentwiseReport:
    """Componentwise QR bound report for perturbations |dA| <= eps C |A|."""

    epsilon: float
    a_t: float            # ||abs(lin map) weighted by |R^T| kron I||_2 * || |Q^T| C |Q| ||_F
    b_t: float            # ||abs(quad map) weighted by |R^T| kron |R^T|||_2 * || |Q^T| C^T C |Q| ||_F
    c_t: float            # ||abs(quad map)||_2
    applicable: bool      # c_t (a_t eps + b_t eps^2) < 1/4
    strengthened_value: float  # gate < 1/2
    rigorous_dr: float | None
    relaxed_dr: float | None
    simple_dr: float | None
    first_order_dr: float      # a_t * eps
    comparison_dr_row: float   # at the row-norm scaling
    comparison_dr_eq: float    # at the equilibration scaling
    comparison_applicable: bool
    q_ratio: float
    gamma_r: float
    gamma_r_dr: float
    gamma_r_de: float
    eta_dr: float
    eta_de: float
    t_gamma: float
    t_gamma_dr: float
    t_gamma_de: float


def componentwise_operator_norms(r, threshold: int = dense.EXPLICIT_THRESHOLD):
    """Weighted absolute-operator norms entering the componentwise bounds.

    Returns ``(abs_lin_weighted, abs_quad_weighted, abs_quad)``:
    || |lin| (|R^T| kron I) ||_2, || |quad| (|R^T| kron |R^T|) ||_2 and
    || |quad| ||_2. Dense materialization is required; raises
    AbsOperatorTooLarge above the threshold.
    """
    r = np.asarray(r, dtype=float)
    n = r.shape[0]
    if n * n > threshold:
        raise AbsOperatorTooLarge(f"input dimension {n * n} exceeds threshold {threshold}")
    absr = np.abs(r)
    eye = np.eye(n)
    gmat = np.abs(operator_materialize(r_factor_operator(r), threshold))
    hmat = np.abs(operator_materialize(r_quadratic_operator(r), threshold))
    # |M| (|R^T| kron B) computed as (kron(|R|, B^T) |M|^T)^T without the big kron
    g_weighted = KroneckerStage(absr, eye).apply2(gmat.T).T
    h_weighted = KroneckerStage(absr, absr).apply2(hmat.T).T
    return (dense.spectral_norm(g_weighted),
            dense.spectral_norm(h_weighted),
            dense.spectral_norm(hmat))


def qr_componentwise_bounds(factors: QrFactors, c, epsilon: float,
                            scalings: tuple[ScalingMatrix, ScalingMatrix] | None = None,
                            threshold: int = dense.EXPLICIT_THRESHOLD,
                            ) -> QrComponentwiseReport:
    """Evaluate the componentwise bounds for |dA| <= epsilon * C * |A|.

    ``c`` is the nonnegative envelope matrix with entries in [0, 1]. The two
    scalings default to the row-norm and equilibration recipes.
    """
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    c = np.asarray(c, dtype=float)
    if np.any(c < 0.0) or np.any(c > 1.0):
        raise ValueError("envelope entries must lie in [0, 1]")
    q, r = factors.q, factors.r
    if c.shape != (q.shape[0], q.shape[0]):
        raise ValueError(f"envelope must be {q.shape[0]}x{q.shape[0]}, got {c.shape}")

    t0 = time.perf_counter()
    absq = np.abs(q)
    c_env_norm = float(np.linalg.norm(c @ absq))          # ||C|Q|||_F
    qcq_norm = float(np.linalg.norm(absq.T @ c @ absq))   # || |Q^T| C |Q| ||_F
    qccq_norm = float(np.linalg.norm(absq.T @ (c.T @ c) @ absq))
    lin_w, quad_w, quad_abs = componentwise_operator_norms(r, threshold)
    a_t = lin_w * qcq_norm
    b_t = quad_w * qccq_norm
    c_t = quad_abs
    absr_norm = dense.spectral_norm(np.abs(r))
    r_norm = dense.spectral_norm(r)
    core = a_t * epsilon + b_t * epsilon * epsilon
    applicable = c_t * core < 0.25
    strengthened = c_t * (absr_norm * c_env_norm + 2.0 * a_t) * epsilon

    rigorous = relaxed = simple = None
    if applicable:
        rigorous = 2.0 * core / (1.0 + math.sqrt(1.0 - 4.0 * c_t * core))
        relaxed = 2.0 * core
        simple = (absr_norm * c_env_norm + 2.0 * a_t) * epsilon

    gamma_r = (absr_norm * c_env_norm + 2.0 * a_t) / r_norm
    q_ratio = qcq_norm / c_env_norm if c_env_norm > 0.0 else 0.0
    t_gamma = time.perf_counter() - t0

    t1 = time.perf_counter()
    d_row = scalings[0] if scalings is not None else scaling_d_r(r)
    comp_row, comp_ok = chang_stehle_qr(r, epsilon, "componentwise", d_row, c=c, q=q)
    gamma_r_dr = _comparison_gamma(r, c_env_norm, d_row, r_norm)
    eta_dr = abs_scaling_ratio(r, d_row)
    t_gamma_dr = time.perf_counter() - t1

    t2 = time.perf_counter()
    d_eq = scalings[1] if scalings is not None else scaling_d_e(r)
    comp_eq, _ = chang_stehle_qr(r, epsilon, "componentwise", d_eq, c=c, q=q)
    gamma_r_de = _comparison_gamma(r, c_env_norm, d_eq, r_norm)
    eta_de = abs_scaling_ratio(r, d_eq)
    t_gamma_de = time.perf_counter() - t2

    return QrComponentwiseReport(
        epsilon=epsilon,
        a_t=a_t, b_t=b_t, c_t=c_t,
        applicable=applicable,
        strengthened_value=strengthened,
        rigorous_dr=rigorous,
        relaxed_dr=relaxed,
        simple_dr=simple,
        first_order_dr=a_t * epsilon,
        comparison_dr_row=comp_row,
        comparison_dr_eq=comp_eq,
        comparison_applicable=comp_ok,
        q_ratio=q_ratio,
        gamma_r=gamma_r,
        gamma_r_dr=gamma_r_dr,
        gamma_r_de=gamma_r_de,
        eta_dr=eta_dr,
        eta_de=eta_de,
        t_gamma=t_gamma,
        t_gamma_dr=t_gamma_dr,
        t_gamma_de=t_gamma_de,
    )


def _comparison_gamma(r, c_env_norm: float, d: ScalingMatrix, r_norm: float) -> float:
    z = zeta(d)
    return (SQRT6_PLUS_SQRT3 * math.sqrt(1.0 + z * z)
            * dense.spectral_norm(r / d.diagonal[:, None])
            * dense.spectral_norm(np.abs(r) @ np.abs(dense.triangular_inverse(r, "upper"))
                                  * d.diagonal[None, :])
            * c_env_norm / r_norm)


def abs_scaling_ratio(r, d: ScalingMatrix) -> float:
    """||D^-1 |R|||_2 / ||D^-1 R||_2, at least 1 for any positive diagonal D."""
    r = np.asarray(r, dtype=float)
    scaled = r / d.diagonal[:, None]
    return dense.spectral_norm(np.abs(r) / d.diagonal[:, None]) / dense.spectral_norm(scaled)
