"""Perturbation bounds for the pivot-free LU factorization.

For A = LU with a normwise perturbation of Frobenius size delta, the
first-order changes of the factors are linear images of vec(dA), so the bound
machinery is built from two structured operators:

* the lower map sends vec(dA) to slvec(dL): a strict-lower selection of
  L * slt(L^{-1} dA [U_{n-1}^{-1} 0; 0 0]),
* the upper map sends vec(dA) to uvec(dU): an upper selection of
  ut(L^{-1} dA U^{-1}) * U.

A fixed-point argument turns the operator norms into rigorous bounds valid
whenever the product of the two norms times delta stays below 1/4, and the
same structure handles componentwise perturbations bounded by the
backward-error envelope eps * |L~| |U~| of Gaussian elimination. Comparison
bounds in the style of Chang and Stehle, evaluated at caller-supplied scaling
matrices, are provided so the tightness of the operator-norm bounds can be
measured.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import dense
from .dense import LuFactors
from .errors import AbsOperatorTooLarge, ZeroVector
from .structured import (
    KroneckerStage,
    SelectionKind,
    SelectionStage,
    StructuredOperator,
    abs_operator,
    operator_materialize,
    operator_spectral_norm,
    selection_matrix,
    vec,
)

#: unit roundoff of IEEE double precision
UNIT_ROUNDOFF = 2.0 ** -53


def gaussian_elimination_epsilon(n: int, u: float = UNIT_ROUNDOFF) -> float:
    """Backward-error constant n*u / (1 - n*u) of Gaussian elimination."""
    return n * u / (1.0 - n * u)


@dataclass(frozen=True)
class ScalingMatrix:
    """Positive diagonal scaling, stored as its diagonal."""

    diagonal: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diagonal, dtype=float)
        if d.ndim != 1 or d.size == 0 or not np.all(d > 0.0):
            raise ValueError("scaling diagonal must be a 1-D positive vector")
        object.__setattr__(self, "diagonal", d)

    def matrix(self) -> np.ndarray:
        return np.diag(self.diagonal)


def heuristic_scaling(m, mode: str) -> ScalingMatrix:
    """Diagonal of column (or row) 2-norms, the scaling used in the experiments."""
    m = np.asarray(m, dtype=float)
    if mode == "columns":
        norms = np.linalg.norm(m, axis=0)
    elif mode == "rows":
        norms = np.linalg.norm(m, axis=1)
    else:
        raise ValueError(f"mode must be 'columns' or 'rows', got {mode!r}")
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroVector(int(zero[0]) + 1)
    return ScalingMatrix(diagonal=norms)


def lower_factor_operator(l, u) -> StructuredOperator:
    """Map from vec(dA) to slvec(dL), the first-order change of the unit lower factor."""
    l = np.asarray(l, dtype=float)
    u = np.asarray(u, dtype=float)
    n = l.shape[0]
    linv = dense.triangular_inverse(l, "lower")
    pad = np.zeros((n, n))
    if n > 1:
        pad[: n - 1, : n - 1] = dense.triangular_inverse(u[: n - 1, : n - 1], "upper")
    return StructuredOperator(stages=(
        SelectionStage(selection_matrix(SelectionKind.SLVEC, n)),
        KroneckerStage(np.eye(n), l),
        SelectionStage(selection_matrix(SelectionKind.SLT, n)),
        KroneckerStage(pad.T, linv),
    ))


def upper_factor_operator(l, u) -> StructuredOperator:
    """Map from vec(dA) to uvec(dU), the first-order change of the upper factor."""
    l = np.asarray(l, dtype=float)
    u = np.asarray(u, dtype=float)
    n = l.shape[0]
    linv = dense.triangular_inverse(l, "lower")
    uinv = dense.triangular_inverse(u, "upper")
    return StructuredOperator(stages=(
        SelectionStage(selection_matrix(SelectionKind.UVEC, n)),
        KroneckerStage(u.T, np.eye(n)),
        SelectionStage(selection_matrix(SelectionKind.UT, n)),
        KroneckerStage(uinv.T, linv),
    ))


@dataclass(frozen=True)
class LuNormwiseReport:
    """Normwise LU bound report.

    Rigorous and relaxed bounds are ``None`` when the applicability condition
    fails; a rigorous bound asserted outside its hypothesis would be a
    correctness bug. First-order values are present whenever the weaker
    first-order condition holds, flagged separately.
    """

    delta: float
    l_op_norm: float
    u_op_norm: float
    condition_value: float          # l_op_norm * u_op_norm * delta, gate < 1/4
    applicable: bool
    rigorous_dl: float | None
    rigorous_du: float | None
    relaxed_dl: float | None        # 2 * l_op_norm * delta
    relaxed_du: float | None
    fo_condition_value: float       # ||L^-1||_2 ||U^-1||_2 delta, gate < 1
    fo_applicable: bool
    first_order_dl: float | None    # l_op_norm * delta
    first_order_du: float | None
    comparison_dl: float            # scaled-condition-number bound for dL
    comparison_du: float
    comparison_applicable: bool     # fo_condition_value < 1/4


def chang_stehle_lu(factors: LuFactors, delta: float,
                    d_l: ScalingMatrix, d_u: ScalingMatrix):
    """Normwise comparison bounds built from scaled condition numbers.

    Returns ``(bound_dl, bound_du, applicable)`` where the bounds are
    2 * kappa2(L D_l^-1) * ||U_{n-1}^-1||_2 * delta and
    2 * kappa2(D_u^-1 U) * ||L^-1||_2 * delta, and the applicability gate is
    ||L^-1||_2 ||U^-1||_2 delta < 1/4. The infimum over all positive diagonal
    scalings is approximated by the supplied ones, as in the experiments.
    """
    l, u = factors.l, factors.u
    n = l.shape[0]
    linv_norm = dense.spectral_norm(dense.triangular_inverse(l, "lower"))
    uinv = dense.triangular_inverse(u, "upper")
    uinv_norm = dense.spectral_norm(uinv)
    un1_inv_norm = dense.spectral_norm(_leading_inverse(u)) if n > 1 else 0.0
    kappa_l = dense.kappa2_triangular(l / d_l.diagonal[None, :], "lower")
    kappa_u = dense.kappa2_triangular(u / d_u.diagonal[:, None], "upper")
    bound_dl = 2.0 * kappa_l * un1_inv_norm * delta
    bound_du = 2.0 * kappa_u * linv_norm * delta
    applicable = linv_norm * uinv_norm * delta < 0.25
    return bound_dl, bound_du, applicable


def _leading_inverse(u: np.ndarray) -> np.ndarray:
    n = u.shape[0]
    return dense.triangular_inverse(u[: n - 1, : n - 1], "upper")


def lu_normwise_bounds(factors: LuFactors, delta: float,
                       d_l: ScalingMatrix | None = None,
                       d_u: ScalingMatrix | None = None) -> LuNormwiseReport:
    """Evaluate the normwise LU bounds for a perturbation of Frobenius size delta."""
    if delta < 0.0:
        raise ValueError("delta must be nonnegative")
    l, u = factors.l, factors.u
    nl = operator_spectral_norm(lower_factor_operator(l, u))
    nu = operator_spectral_norm(upper_factor_operator(l, u))
    condition = nl * nu * delta
    applicable = condition < 0.25

    rigorous_dl = rigorous_du = relaxed_dl = relaxed_du = None
    if applicable:
        denom = 1.0 + math.sqrt(1.0 - 4.0 * condition)
        rigorous_dl = 2.0 * nl * delta / denom
        rigorous_du = 2.0 * nu * delta / denom
        relaxed_dl = 2.0 * nl * delta
        relaxed_du = 2.0 * nu * delta

    linv_norm = dense.spectral_norm(dense.triangular_inverse(l, "lower"))
    uinv_norm = dense.spectral_norm(dense.triangular_inverse(u, "upper"))
    fo_condition = linv_norm * uinv_norm * delta
    fo_applicable = fo_condition < 1.0
    first_order_dl = nl * delta if fo_applicable else None
    first_order_du = nu * delta if fo_applicable else None

    if d_l is None:
        d_l = heuristic_scaling(l, "columns")
    if d_u is None:
        d_u = heuristic_scaling(u, "rows")
    comparison_dl, comparison_du, comparison_applicable = chang_stehle_lu(
        factors, delta, d_l, d_u)

    return LuNormwiseReport(
        delta=delta,
        l_op_norm=nl,
        u_op_norm=nu,
        condition_value=condition,
        applicable=applicable,
        rigorous_dl=rigorous_dl,
        rigorous_du=rigorous_du,
        relaxed_dl=relaxed_dl,
        relaxed_du=relaxed_du,
        fo_condition_value=fo_condition,
        fo_applicable=fo_applicable,
        first_order_dl=first_order_dl,
        first_order_du=first_order_du,
        comparison_dl=comparison_dl,
        comparison_du=comparison_du,
        comparison_applicable=comparison_applicable,
    )


@dataclass(frozen=True)
class LuComponentwiseReport:
    """Componentwise LU bound report for perturbations |dA| <= eps |L~||U~|.

    ``a``, ``b`` are the Frobenius norms of the absolute operators applied to
    the backward-error envelope, ``c = b * ||abs lower op||_2 -
    a * ||abs upper op||_2``; ``c`` and ``tau = c * eps`` keep their sign and
    both sign cases flow through the bound formulas as written.
    """

    epsilon: float
    a: float
    b: float
    c: float
    abs_l_op_norm: float
    abs_u_op_norm: float
    applicable: bool                # |c| eps < 1 and 4 a ||abs upper|| eps < (1 - c eps)^2
    rigorous_dl: float | None
    rigorous_du: float | None
    relaxed_dl: float | None        # 2 a eps / (1 - c eps)
    relaxed_du: float | None        # 2 b eps / (1 + c eps)
    first_order_dl_f: float         # a * eps
    first_order_du_f: float         # b * eps
    first_order_dl_m: float
    first_order_du_m: float
    first_order_dl_s: float
    first_order_du_s: float
    gamma_l: float
    gamma_l_d: float
    gamma_u: float
    gamma_u_d: float
    eta_dl: float
    eta_du: float
    tau: float
    comparison_dl: float
    comparison_du: float
    comparison_applicable: bool
    t_gamma: float                  # seconds spent on the operator-norm quantities
    t_gamma_d: float                # seconds spent on the scaled comparison quantities


def lu_componentwise_bounds(tilde_factors: LuFactors, epsilon: float,
                            d_l: ScalingMatrix | None = None,
                            d_u: ScalingMatrix | None = None,
                            threshold: int = dense.EXPLICIT_THRESHOLD,
                            ) -> LuComponentwiseReport:
    """Evaluate the componentwise LU bounds at the computed factors.

    ``tilde_factors`` are the factors of the perturbed matrix (for rounding
    analysis: the computed factors), and the perturbation model is
    |dA| <= epsilon * |L~| |U~|. Needs the absolute value of the two factor
    maps, hence dense materialization; raises AbsOperatorTooLarge above the
    threshold.
    """
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    lt, ut = tilde_factors.l, tilde_factors.u
    n = lt.shape[0]

    t0 = time.perf_counter()
    abs_lower = abs_operator(lower_factor_operator(lt, ut), threshold)
    abs_upper = abs_operator(upper_factor_operator(lt, ut), threshold)
    envelope = np.abs(lt) @ np.abs(ut)
    venv = vec(envelope)
    lower_image = abs_lower.apply(venv)
    upper_image = abs_upper.apply(venv)
    a = float(np.linalg.norm(lower_image))
    b = float(np.linalg.norm(upper_image))
    n_abs_l = operator_spectral_norm(abs_lower)
    n_abs_u = operator_spectral_norm(abs_upper)
    c = b * n_abs_l - a * n_abs_u
    ce = c * epsilon

    applicable = abs(c) * epsilon < 1.0 and 4.0 * a * n_abs_u * epsilon < (1.0 - ce) ** 2
    rigorous_dl = rigorous_du = relaxed_dl = relaxed_du = None
    if applicable:
        root = math.sqrt((1.0 - ce) ** 2 - 4.0 * a * n_abs_u * epsilon)
        rigorous_dl = 2.0 * a * epsilon / (1.0 - ce + root)
        rigorous_du = 2.0 * b * epsilon / (1.0 + ce + root)
        relaxed_dl = 2.0 * a * epsilon / (1.0 - ce)
        relaxed_du = 2.0 * b * epsilon / (1.0 + ce)

    fo_dl_m = float(np.max(lower_image)) * epsilon if lower_image.size else 0.0
    fo_du_m = float(np.max(upper_image)) * epsilon if upper_image.size else 0.0
    fo_dl_s = float(np.sum(lower_image)) * epsilon
    fo_du_s = float(np.sum(upper_image)) * epsilon

    lt_fro = float(np.linalg.norm(lt))
    ut_fro = float(np.linalg.norm(ut))
    gamma_l = (a / (1.0 - ce)) / lt_fro
    gamma_u = (b / (1.0 + ce)) / ut_fro
    t_gamma = time.perf_counter() - t0

    t1 = time.perf_counter()
    if d_l is None:
        d_l = heuristic_scaling(lt, "columns")
    if d_u is None:
        d_u = heuristic_scaling(ut, "rows")
    lt_inv = dense.triangular_inverse(lt, "lower")
    ut_inv = dense.triangular_inverse(ut, "upper")
    abs_linv_l = np.abs(lt_inv) @ np.abs(lt)
    abs_u_uinv = np.abs(ut) @ np.abs(ut_inv)
    if n > 1:
        un1 = ut[: n - 1, : n - 1]
        abs_un1 = np.abs(un1) @ np.abs(dense.triangular_inverse(un1, "upper"))
        abs_un1_fro = float(np.linalg.norm(abs_un1))
    else:
        abs_un1_fro = 0.0

    l_scaled = lt / d_l.diagonal[None, :]
    u_scaled = ut / d_u.diagonal[:, None]
    l_scaled_norm = dense.spectral_norm(l_scaled)
    u_scaled_norm = dense.spectral_norm(u_scaled)
    gamma_l_d = (l_scaled_norm
                 * dense.spectral_norm(d_l.diagonal[:, None] * abs_linv_l)
                 * abs_un1_fro) / lt_fro
    gamma_u_d = (u_scaled_norm
                 * dense.spectral_norm(abs_u_uinv * d_u.diagonal[None, :])
                 * float(np.linalg.norm(abs_linv_l))) / ut_fro
    eta_dl = dense.spectral_norm(np.abs(lt) / d_l.diagonal[None, :]) / l_scaled_norm
    eta_du = dense.spectral_norm(np.abs(ut) / d_u.diagonal[:, None]) / u_scaled_norm

    comparison_dl = 2.0 * epsilon * gamma_l_d * lt_fro
    comparison_du = 2.0 * epsilon * gamma_u_d * ut_fro
    comparison_applicable = (dense.spectral_norm(abs_linv_l)
                             * dense.spectral_norm(abs_u_uinv) * epsilon < 0.25)
    t_gamma_d = time.perf_counter() - t1

    return LuComponentwiseReport(
        epsilon=epsilon,
        a=a, b=b, c=c,
        abs_l_op_norm=n_abs_l,
        abs_u_op_norm=n_abs_u,
        applicable=applicable,
        rigorous_dl=rigorous_dl,
        rigorous_du=rigorous_du,
        relaxed_dl=relaxed_dl,
        relaxed_du=relaxed_du,
        first_order_dl_f=a * epsilon,
        first_order_du_f=b * epsilon,
        first_order_dl_m=fo_dl_m,
        first_order_du_m=fo_du_m,
        first_order_dl_s=fo_dl_s,
        first_order_du_s=fo_du_s,
        gamma_l=gamma_l,
        gamma_l_d=gamma_l_d,
        gamma_u=gamma_u,
        gamma_u_d=gamma_u_d,
        eta_dl=eta_dl,
        eta_du=eta_du,
        tau=ce,
        comparison_dl=comparison_dl,
        comparison_du=comparison_du,
        comparison_applicable=comparison_applicable,
        t_gamma=t_gamma,
        t_gamma_d=t_gamma_d,
    )


def worst_case_m_norm_perturbation(tilde_factors: LuFactors, epsilon: float,
                                   target: str,
                                   threshold: int = dense.EXPLICIT_THRESHOLD,
                                   ) -> np.ndarray:
    """Perturbation attaining the first-order max-entry bound for one factor.

    The extremal dA has vec(dA) = eps * sign(row_k) * vec(|L~||U~|) entrywise,
    where row_k is the row of the factor map whose absolute image of the
    envelope is largest. ``target`` is ``"L"`` or ``"U"``.
    """
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    lt, ut = tilde_factors.l, tilde_factors.u
    n = lt.shape[0]
    if target == "L":
        op = lower_factor_operator(lt, ut)
    elif target == "U":
        op = upper_factor_operator(lt, ut)
    else:
        raise ValueError(f"target must be 'L' or 'U', got {target!r}")
    if op.in_dim > threshold:
        raise AbsOperatorTooLarge(
            f"input dimension {op.in_dim} exceeds threshold {threshold}")
    rows = operator_materialize(op, threshold)
    venv = vec(np.abs(lt) @ np.abs(ut))
    image = np.abs(rows) @ venv
    if rows.shape[0] == 0:
        return np.zeros((n, n))
    k = int(np.argmax(image))
    # Entries where the extremal row vanishes do not affect attainment; give
    # them sign +1 so the perturbation saturates the whole envelope.
    signs = np.where(rows[k] >= 0.0, 1.0, -1.0)
    delta_vec = epsilon * signs * venv
    return delta_vec.reshape((n, n), order="F")
