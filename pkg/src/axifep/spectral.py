"""Spectral utilities for symmetric 3x3 tensors and isotropic tensor functions.

Axisymmetric states have the block sparsity

    [[*, 0, *],
     [0, *, 0],
     [*, 0, *]]

so the eigenproblem splits into a closed-form symmetric 2x2 in the (r, z)
plane plus the decoupled hoop entry; that path is taken whenever the input
matches the pattern.  General symmetric matrices (used by round-trip tests
on random inputs) fall back to LAPACK.

Mixed cylindrical components of symmetric spatial tensors relate to their
orthonormal-frame representation by the diagonal similarity
diag(1, r, 1) . T . diag(1, 1/r, 1), which only rescales the (always zero)
hoop couplings of the axisymmetric pattern.  Numerically the two coincide,
which is why these helpers can be fed mixed components directly.

Derivatives of isotropic tensor functions use the projector form with
divided differences; eigenvalue gaps below ``CONFLUENT_REL`` times the
largest eigenvalue magnitude switch to the confluent (repeated-root) limits.
"""

from __future__ import annotations

import numpy as np

CONFLUENT_REL = 1e-8


def eigh3_sym(M):
    """Eigenvalues and orthonormal eigenvectors of a symmetric 3x3 matrix.

    Returns ``(lams, vecs)`` with eigenvectors in the columns of ``vecs``.
    Uses the closed-form in-plane 2x2 + hoop split when the axisymmetric
    sparsity pattern holds, LAPACK otherwise.
    """
    M = np.asarray(M, dtype=float)
    scale = np.max(np.abs(M))
    off = max(abs(M[0, 1]), abs(M[1, 0]), abs(M[1, 2]), abs(M[2, 1]))
    if scale == 0.0 or off <= 1e-12 * scale:
        a = M[0, 0]
        b = 0.5 * (M[0, 2] + M[2, 0])
        c = M[2, 2]
        mid = 0.5 * (a + c)
        disc = np.hypot(0.5 * (a - c), b)
        th = 0.5 * np.arctan2(2.0 * b, a - c)
        ct, st = np.cos(th), np.sin(th)
        lams = np.array([mid + disc, M[1, 1], mid - disc])
        vecs = np.array([
            [ct, 0.0, -st],
            [0.0, 1.0, 0.0],
            [st, 0.0, ct],
        ])
        return lams, vecs
    return np.linalg.eigh(0.5 * (M + M.T))


def projectors(vecs):
    """Rank-one eigenprojectors P_A = n_A (x) n_A from eigenvector columns."""
    return np.einsum("iA,jA->Aij", vecs, vecs)


def from_principal(vals, vecs):
    """Assemble sum_A vals[A] * n_A (x) n_A."""
    return (vecs * np.asarray(vals)) @ vecs.T


def _gaps_confluent(x):
    ref = np.max(np.abs(x))
    tol = CONFLUENT_REL * ref if ref > 0.0 else 0.0
    return tol


def tensor_function(M, f):
    """Isotropic tensor function f applied through the spectrum of M."""
    lams, vecs = eigh3_sym(M)
    return from_principal(f(lams), vecs)


def tensor_function_with_derivative(M, f, fp):
    """Value and fourth-order derivative of an isotropic tensor function.

    Returns ``(Y, L)`` with ``Y = sum f(lam_A) P_A`` and ``L[i,j,k,l] =
    dY[i,j]/dM[k,l]`` in the form valid for symmetric variations of M (minor
    symmetry in the last two slots).
    """
    lams, vecs = eigh3_sym(M)
    y = f(lams)
    dy = np.diag(fp(lams))
    Y = from_principal(y, vecs)
    L = coaxial_fourth_order(lams, vecs, y, dy)
    return Y, L


def coaxial_fourth_order(x_lams, vecs, y_vals, dy_principal):
    """Derivative of a coaxial isotropic map Y(X) sharing X's eigenvectors.

    ``y_vals[A]`` are the principal values of Y, ``dy_principal[A, B] =
    d y_A / d x_B``.  The result acts on symmetric increments of X; the
    eigenvector-rotation (spin) terms use the divided differences
    (y_A - y_B)/(x_A - x_B) with the confluent limit
    dy[A, A] - dy[A, B] when the eigenvalues of X coincide.
    """
    Ps = projectors(vecs)
    L = np.einsum("AB,Aij,Bkl->ijkl", dy_principal, Ps, Ps)
    tol = _gaps_confluent(x_lams)
    for A in range(3):
        for B in range(3):
            if A == B:
                continue
            gap = x_lams[A] - x_lams[B]
            if abs(gap) <= tol:
                theta = dy_principal[A, A] - dy_principal[A, B]
            else:
                theta = (y_vals[A] - y_vals[B]) / gap
            nA = vecs[:, A]
            nB = vecs[:, B]
            pair = np.outer(nA, nB)
            sym_pair = 0.5 * (pair + pair.T)
            L += theta * np.einsum("ij,kl->ijkl", pair, sym_pair)
    return L


def trace_of_coaxial(vecs, dy_principal):
    """Second-order tensor T with T : dX = trace(dY) for a coaxial map.

    Only the principal part of the fourth-order derivative survives the
    trace (the spin pairs are orthogonal, hence traceless in the first
    slots), leaving T = sum_B (sum_A dy[A, B]) P_B.
    """
    Ps = projectors(vecs)
    col = np.sum(dy_principal, axis=0)
    return np.einsum("B,Bkl->kl", col, Ps)
