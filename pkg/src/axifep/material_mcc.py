"""Hencky hyperelasticity coupled to Modified Cam-Clay plasticity.

Stress measure: zeta = J_e * sigma, the stress conjugate to the elastic
logarithmic strain.  Stored energy (volume density on the intermediate
configuration):

    rho_psi(eps_e, z) = K/2 * eps_v^2 + 3/2 * G * eps_q^2 + Psi_hard(z)
    Psi_hard(z)       = H/2 * (z^2 + (kappa/alpha_h) * (exp(-alpha_h z) - 1)^2)

with the kappa = 0 limit H z^2 / 2 taken analytically.  The yield function
uses the Eshelby-shifted stress xi = zeta - rho_psi * I:

    Phi = (q_xi / m)^2 + p_xi * (p_xi - p_c),      p_c = p_c0 + beta(z)

where beta = d Psi_hard / d z.  Signs are tension-positive; p_c0 is stored
negative (compressive preconsolidation), so the ellipse spans
p in [p_c, 0] and the stress-free state sits exactly on the surface.
Compressive plastic flow drives z (hence beta and p_c) negative, deepening
the cap: compaction hardening.

The return map integrates the backward-Euler flow system in the principal
frame of the trial elastic b (isotropy keeps the converged state coaxial
with the trial):

    eps_e - eps_tr + dgam * dPhi/dxi   = 0
    z     - z_n    + dgam * dPhi/dbeta = 0
    Phi                                = 0

The 5x5 local Newton matrix is also the strain-driven linearisation of that
system, so the consistent block d eps_e / d eps_tr is the top-left 3x3 of
its inverse, and D_alg = (elastic Hencky modulus) : dE_dEtr because the
energy is uncoupled in (eps_e, z).  Full fourth-order tangents are rebuilt
from the principal blocks with spectral divided differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral

_I3 = np.eye(3)
_ONES3 = np.ones(3)
_J33 = np.ones((3, 3))
_II4 = np.einsum("ij,kl->ijkl", _I3, _I3)
_ISYM4 = 0.5 * (np.einsum("ik,jl->ijkl", _I3, _I3) + np.einsum("il,jk->ijkl", _I3, _I3))

N_MAX = 50
DEFAULT_TOL = 1e-10


class ConstitutiveError(RuntimeError):
    """Invalid material parameters or integration failure at a material point."""


class ConsistencyError(ConstitutiveError):
    """Negative plastic multiplier at a converged return-map solution."""


# ---------------------------------------------------------------------------
# parameters and state containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatParams:
    E: float
    nu: float
    H: float
    kappa: float
    alpha_h: float
    m: float
    p_c0: float
    K: float
    G: float


def make_params(E, nu, H, kappa, alpha_h, m, p_c0):
    """Validate and derive the bulk/shear moduli; p_c0 is the signed value."""
    if E <= 0.0:
        raise ConstitutiveError(f"E = {E} must be positive")
    if not -1.0 < nu < 0.5:
        raise ConstitutiveError(f"nu = {nu} outside (-1, 0.5)")
    if m <= 0.0:
        raise ConstitutiveError(f"m = {m} must be positive")
    if H < 0.0:
        raise ConstitutiveError(f"H = {H} must be non-negative")
    if kappa != 0.0 and alpha_h <= 0.0:
        raise ConstitutiveError("alpha_h must be positive when kappa is non-zero")
    K = E / (3.0 * (1.0 - 2.0 * nu))
    G = E / (2.0 * (1.0 + nu))
    return MatParams(E=E, nu=nu, H=H, kappa=kappa, alpha_h=alpha_h, m=m,
                     p_c0=p_c0, K=K, G=G)


@dataclass(frozen=True)
class MatState:
    """Converged material state at one Gauss point.

    ``dgam`` and ``phi_trial`` are diagnostics of the step that produced the
    state (zero / the trial yield value for elastic steps).
    """

    b_e: np.ndarray
    z: float
    zeta: np.ndarray
    J_e: float
    yielded: bool
    dgam: float = 0.0
    phi_trial: float = 0.0


@dataclass(frozen=True)
class TangentPack:
    D_alg: np.ndarray
    dE_dEtr: np.ndarray


# ---------------------------------------------------------------------------
# energy, stress, hardening
# ---------------------------------------------------------------------------

def _vol_dev(eps):
    eps = np.asarray(eps, dtype=float)
    eps_v = float(np.trace(eps))
    dev = eps - (eps_v / 3.0) * _I3
    return eps_v, dev


def _psi_hard(z, p):
    if p.kappa == 0.0:
        return 0.5 * p.H * z * z
    w = np.expm1(-p.alpha_h * z)  # exp(-a z) - 1
    return 0.5 * p.H * (z * z + (p.kappa / p.alpha_h) * w * w)


def stored_energy(eps_e, z, p):
    """(elastic energy, hardening energy), both volume densities in Pa."""
    eps_v, dev = _vol_dev(eps_e)
    dev2 = float(np.tensordot(dev, dev))
    Psi = 0.5 * p.K * eps_v * eps_v + p.G * dev2
    return Psi, _psi_hard(z, p)


def zeta_stress(eps_e, p):
    """zeta = K eps_v I + 2 G dev(eps_e), the Hencky stress law."""
    eps_v, dev = _vol_dev(eps_e)
    return p.K * eps_v * _I3 + 2.0 * p.G * dev


def invariants(T):
    """(p, s, rho, q): pressure, deviator, deviator norm, triaxial q."""
    T = np.asarray(T, dtype=float)
    p_inv = float(np.trace(T)) / 3.0
    s = T - p_inv * _I3
    rho = float(np.sqrt(np.tensordot(s, s)))
    q = np.sqrt(1.5) * rho
    return p_inv, s, rho, q


def hardening_beta(z, p):
    """beta = d Psi_hard / d z."""
    if p.kappa == 0.0:
        return p.H * z
    ez = np.exp(-p.alpha_h * z)
    return p.H * (z + p.kappa * ez * (1.0 - ez))


def hardening_beta_z(z, p):
    """d beta / d z."""
    if p.kappa == 0.0:
        return p.H
    ez = np.exp(-p.alpha_h * z)
    return p.H * (1.0 + p.kappa * p.alpha_h * ez * (2.0 * ez - 1.0))


def eshelby_zeta(zeta, Psi_total):
    """xi = zeta - (total stored energy density) * I."""
    return np.asarray(zeta, dtype=float) - Psi_total * _I3


def yield_function(xi, beta, p):
    """Phi = (q/m)^2 + p_xi (p_xi - p_c) with p_c = p_c0 + beta.  Units Pa^2."""
    p_xi, _, _, q = invariants(xi)
    p_c = p.p_c0 + beta
    return (q / p.m) ** 2 + p_xi * (p_xi - p_c)


def elastic_modulus(p):
    """Constant Hencky modulus K I(x)I + 2G (I_sym - I(x)I / 3)."""
    return p.K * _II4 + 2.0 * p.G * (_ISYM4 - _II4 / 3.0)


# ---------------------------------------------------------------------------
# return map in the trial principal frame
# ---------------------------------------------------------------------------

def _elastic_matrix(p):
    """3x3 principal form of the Hencky modulus: d zeta_A / d eps_B."""
    return p.K * _J33 + 2.0 * p.G * (np.eye(3) - _J33 / 3.0)


def _phi_xixi(p):
    return (3.0 / p.m ** 2) * (np.eye(3) - _J33 / 3.0) + (2.0 / 9.0) * _J33


def _principal_point(eps, z, p):
    """Stress-side quantities at a principal-strain iterate."""
    zeta = _elastic_matrix(p) @ eps
    eps_v = eps.sum()
    dev = eps - eps_v / 3.0
    psi = 0.5 * p.K * eps_v ** 2 + p.G * float(dev @ dev)
    beta = hardening_beta(z, p)
    xi = zeta - (psi + _psi_hard(z, p))
    p_xi = xi.mean()
    s = xi - p_xi
    q2 = 1.5 * float(s @ s)
    p_c = p.p_c0 + beta
    phi = q2 / p.m ** 2 + p_xi * (p_xi - p_c)
    dphi_dxi = (3.0 / p.m ** 2) * s + (2.0 * p_xi - p_c) / 3.0
    dphi_dbeta = -p_xi
    return zeta, beta, phi, dphi_dxi, dphi_dbeta


def _local_system(eps, eps_tr, z, z_prev, dgam, p, gam_scale, phi_scale):
    """Residual and Newton matrix of the principal-frame flow system.

    Unknown ordering (eps_1, eps_2, eps_3, z, dgam * gam_scale); the yield
    row is divided by phi_scale.  The matrix is simultaneously the
    strain-driven linearisation, so its inverse also yields the consistent
    tangent block.
    """
    zeta, beta, phi, dphi_dxi, dphi_dbeta = _principal_point(eps, z, p)
    beta_z = hardening_beta_z(z, p)
    phi_xixi = _phi_xixi(p)
    s_mat = _elastic_matrix(p) - np.outer(_ONES3, zeta)   # d xi_A / d eps_B
    Xi = -beta * _ONES3                                   # d xi_A / d z

    res = np.empty(5)
    res[0:3] = eps - eps_tr + dgam * dphi_dxi
    res[3] = z - z_prev + dgam * dphi_dbeta
    res[4] = phi / phi_scale

    A = np.zeros((5, 5))
    A[0:3, 0:3] = np.eye(3) + dgam * (phi_xixi @ s_mat)
    A[0:3, 3] = dgam * (phi_xixi @ Xi - beta_z * _ONES3 / 3.0)
    A[0:3, 4] = dphi_dxi / gam_scale
    A[3, 0:3] = dgam * (-(s_mat.sum(axis=0)) / 3.0)
    A[3, 3] = 1.0 + dgam * beta                           # -mean(Xi) = beta
    A[3, 4] = dphi_dbeta / gam_scale
    A[4, 0:3] = (s_mat.T @ dphi_dxi) / phi_scale
    A[4, 3] = (float(dphi_dxi @ Xi) + dphi_dbeta * beta_z) / phi_scale
    A[4, 4] = 0.0
    return res, A, zeta, phi


def return_map(b_e_trial, z_prev, p, tol=DEFAULT_TOL):
    """Backward-Euler stress update with consistent tangents.

    Returns ``(MatState, TangentPack)``.  Elastic whenever Phi(trial) <= 0;
    otherwise Newton iteration on (principal eps_e, z, dgam) with the yield
    residual scaled by p_c0^2 and the multiplier column scaled by E for
    conditioning.  Raises ``ConstitutiveError`` after ``N_MAX`` iterations
    and ``ConsistencyError`` if the converged multiplier is negative.
    """
    b_tr = np.asarray(b_e_trial, dtype=float)
    lams, vecs = spectral.eigh3_sym(b_tr)
    if np.any(lams <= 0.0):
        raise ConstitutiveError(f"trial elastic b has non-positive eigenvalues {lams}")
    eps_tr = 0.5 * np.log(lams)

    zeta_v, beta, phi_tr, _, _ = _principal_point(eps_tr, z_prev, p)

    if phi_tr <= 0.0:
        state = MatState(b_e=b_tr, z=z_prev,
                         zeta=spectral.from_principal(zeta_v, vecs),
                         J_e=float(np.exp(eps_tr.sum())), yielded=False,
                         dgam=0.0, phi_trial=phi_tr)
        return state, TangentPack(D_alg=elastic_modulus(p), dE_dEtr=_ISYM4.copy())

    phi_scale = p.p_c0 ** 2
    gam_scale = p.E
    eps = eps_tr.copy()
    z = z_prev
    dgam = 0.0

    converged = False
    for _ in range(N_MAX):
        res, A, zeta_v, phi = _local_system(
            eps, eps_tr, z, z_prev, dgam, p, gam_scale, phi_scale)
        if np.linalg.norm(res) <= tol:
            converged = True
            break
        try:
            delta = np.linalg.solve(A, -res)
        except np.linalg.LinAlgError as exc:
            raise ConstitutiveError(
                f"singular local system at z={z}, dgam={dgam}") from exc
        eps += delta[0:3]
        z += delta[3]
        dgam += delta[4] / gam_scale

    if not converged:
        raise ConstitutiveError(
            f"return map did not converge in {N_MAX} iterations "
            f"(trial eps {eps_tr}, z_prev {z_prev})")
    if dgam < 0.0:
        raise ConsistencyError(f"negative plastic multiplier {dgam}")

    # the converged matrix doubles as the strain-driven linearisation
    _, A, zeta_v, phi = _local_system(
        eps, eps_tr, z, z_prev, dgam, p, gam_scale, phi_scale)
    rhs = np.zeros((5, 3))
    rhs[0:3, 0:3] = np.eye(3)
    dE3 = np.linalg.solve(A, rhs)[0:3, 0:3]
    D3 = _elastic_matrix(p) @ dE3

    dE4 = spectral.coaxial_fourth_order(eps_tr, vecs, eps, dE3)
    D4 = spectral.coaxial_fourth_order(eps_tr, vecs, zeta_v, D3)

    state = MatState(b_e=spectral.from_principal(np.exp(2.0 * eps), vecs),
                     z=z, zeta=spectral.from_principal(zeta_v, vecs),
                     J_e=float(np.exp(eps.sum())), yielded=True,
                     dgam=dgam, phi_trial=phi_tr)
    return state, TangentPack(D_alg=D4, dE_dEtr=dE4)


def tangent_fd_check(b_e_trial, z_prev, p, h):
    """Max relative deviation of D_alg from a central finite difference.

    Perturbs the trial log strain along each of the six symmetric coordinate
    directions, re-runs the return map, and differences zeta.  The deviation
    is normalised by the largest entry of D_alg.
    """
    _, pack = return_map(b_e_trial, z_prev, p)
    lams, vecs = spectral.eigh3_sym(np.asarray(b_e_trial, dtype=float))
    eps_tr = spectral.from_principal(0.5 * np.log(lams), vecs)
    scale = np.max(np.abs(pack.D_alg))
    worst = 0.0
    for i in range(3):
        for j in range(i, 3):
            dE = np.zeros((3, 3))
            dE[i, j] = dE[j, i] = 1.0
            zp = _zeta_of_trial(eps_tr + h * dE, z_prev, p)
            zm = _zeta_of_trial(eps_tr - h * dE, z_prev, p)
            fd = (zp - zm) / (2.0 * h)
            exact = np.einsum("abkl,kl->ab", pack.D_alg, dE)
            worst = max(worst, float(np.max(np.abs(fd - exact))) / scale)
    return worst


def _zeta_of_trial(eps_tr_tensor, z_prev, p):
    lams, vecs = spectral.eigh3_sym(eps_tr_tensor)
    b = spectral.from_principal(np.exp(2.0 * lams), vecs)
    state, _ = return_map(b, z_prev, p)
    return state.zeta
