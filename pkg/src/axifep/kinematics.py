"""Deformation-gradient kinematics for axisymmetric motions.

Deformation gradients are two-point tensors; their mixed cylindrical
components stored here mix the reference basis (at radius R) with the
current basis (at radius r).  Because theta = Theta for every axisymmetric
motion, the mixed hoop component F[1, 1] equals 1 identically, while the
physical (orthonormal-frame) hoop component is F[1, 1] * r / R.  All other
quantities derived here (Cauchy-Green tensors, log strain) are one-point
tensors whose mixed components coincide numerically with orthonormal-frame
components on the axisymmetric sparsity pattern.

The volume ratio needs the metric determinants:

    J = det(F_components) * r / R

and the transpose of a two-point tensor carries the metric factors

    F^T = g_contra(ref) . F_components^T . g_cov(cur)

whose hoop entry picks up (r/R)^2 relative to the plain matrix transpose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral

_I3 = np.eye(3)


class InvertedElementError(RuntimeError):
    """Raised when a motion ceases to be orientation preserving."""


@dataclass(frozen=True)
class DefGrad:
    """Mixed components of a deformation gradient plus its two radii."""

    comp: np.ndarray
    R_ref: float
    r_cur: float

    def jacobian(self):
        """Volume ratio J = det(comp) * r_cur / R_ref."""
        return float(np.linalg.det(self.comp)) * self.r_cur / self.R_ref


@dataclass(frozen=True)
class ElasticState:
    """Elastic left Cauchy-Green tensor with its log strain and Jacobian."""

    b_e: np.ndarray
    eps_e: np.ndarray
    J_e: float


def _make_defgrad(comp, R_ref, r_cur):
    d = float(np.linalg.det(comp))
    if not np.isfinite(d) or d <= 0.0:
        raise InvertedElementError(f"deformation gradient determinant {d} <= 0")
    return DefGrad(comp=comp, R_ref=float(R_ref), r_cur=float(r_cur))


def defgrad_total(U_partials, S):
    """Total deformation gradient from the covariant displacement gradient.

    ``U_partials`` is the reference covariant derivative U^B|_A of the
    displacement (reference Christoffel symbols), ``S`` the shifter from the
    reference radius to the current one.  comp = S . (I + U_partials).
    """
    comp = S.mat @ (_I3 + np.asarray(U_partials, dtype=float))
    return _make_defgrad(comp, S.R_ref, S.r_cur)


def defgrad_incremental(U_inc_partials, S_inc, F_prev):
    """Total deformation gradient composed from an incremental one.

    The incremental gradient is built like ``defgrad_total`` but on the
    previously converged configuration (its covariant derivative and shifter
    live there), then composed: F_total = F_inc . F_prev.
    """
    F_inc = S_inc.mat @ (_I3 + np.asarray(U_inc_partials, dtype=float))
    comp = F_inc @ F_prev.comp
    return _make_defgrad(comp, F_prev.R_ref, S_inc.r_cur)


def defgrad_inverse_spatial(u_partials, S_inv):
    """Inverse deformation gradient from the spatial displacement gradient.

    ``u_partials`` is the current-configuration covariant derivative u^a|_b
    of the displacement, ``S_inv`` the current -> reference shifter (build it
    as ``cylgeo.shifter(r_cur, R_ref)``).  Returns S_inv . (I - u_partials),
    the inverse of the matching ``defgrad_total`` output.
    """
    inv = S_inv.mat @ (_I3 - np.asarray(u_partials, dtype=float))
    if not np.isfinite(np.linalg.det(inv)) or np.linalg.det(inv) == 0.0:
        raise InvertedElementError("spatial inverse of the deformation gradient is singular")
    return inv


def transpose(F):
    """Metric transpose of a two-point tensor: g_contra(ref) . comp^T . g_cov(cur).

    The hoop-hoop scale is evaluated as (r/R)^2 rather than (1/R^2) * r^2 so
    the transpose of an identity map is exactly the identity; with moduli of
    order 1e9 the one-ulp difference would otherwise surface as a phantom
    stress at undeformed points.
    """
    R, r = F.R_ref, F.r_cur
    ratio = r / R
    scale = np.array([
        [1.0, r * r, 1.0],
        [1.0 / (R * R), ratio * ratio, 1.0 / (R * R)],
        [1.0, r * r, 1.0],
    ])
    return F.comp.T * scale


def left_cauchy_green(F):
    """Mixed components of b = F . F^T (spatial tensor, indices at r_cur)."""
    return F.comp @ transpose(F)


def right_cauchy_green(F):
    """Mixed components of C = F^T . F (referential tensor, indices at R_ref)."""
    return transpose(F) @ F.comp


def log_strain(b_mixed, r_cur):
    """Logarithmic strain eps = 0.5 log(b) via the similarity-symmetrised spectrum.

    ``b_mixed`` holds mixed components of a left Cauchy-Green tensor at
    radius ``r_cur``; diag(1, r, 1) similarity makes it symmetric without
    changing eigenvalues, the log is taken spectrally, and the result is
    mapped back.  J_e is cached as exp(trace eps).
    """
    b = np.asarray(b_mixed, dtype=float)
    D = np.array([1.0, float(r_cur), 1.0])
    b_hat = (b * (D[:, None] / D[None, :]))
    lams, vecs = spectral.eigh3_sym(b_hat)
    if np.any(lams <= 0.0):
        raise InvertedElementError(f"left Cauchy-Green eigenvalues {lams} not all positive")
    eps_hat = spectral.from_principal(0.5 * np.log(lams), vecs)
    eps = eps_hat * (D[None, :] / D[:, None])
    J_e = float(np.exp(np.trace(eps)))
    return ElasticState(b_e=b, eps_e=eps, J_e=J_e)


def trial_elastic_b(F_inc, b_prev):
    """Push the converged elastic b through an incremental deformation gradient."""
    return F_inc.comp @ np.asarray(b_prev, dtype=float) @ transpose(F_inc)


def jacobian_split(F, es):
    """Total/elastic/plastic volume ratios (J, J_e, J_p) with J_p = J / J_e."""
    J = F.jacobian()
    J_e = es.J_e
    J_p = J / J_e
    if J_p <= 0.0:
        raise InvertedElementError(f"plastic Jacobian {J_p} <= 0")
    return J, J_e, J_p
