"""Cylindrical-coordinate geometry kernel.

Coordinate convention: reference coordinates (R, Theta, Z) and current
coordinates (r, theta, z), both ordered (radial, hoop, axial) so the hoop
direction is always index 1.  The position vector of a point at radius x
gives covariant basis vectors with metric

    g_cov    = diag(1, x**2, 1)
    g_contra = diag(1, x**-2, 1)

and the only non-zero Christoffel symbols

    Gamma^theta_{r theta} = Gamma^theta_{theta r} = 1/x
    Gamma^r_{theta theta} = -x.

These hold in both configurations with the respective radius.  The shifter
is the two-point basis translator diag(1, R/r, 1) taking reference basis
vectors to current ones; it is orthogonal (inverse = transpose in the metric
sense) and reduces to the identity when the radii match.

Everything here is total and stateless.  The symmetry axis (radius -> 0) is
rejected by every operation; meshes generated upstream guarantee Gauss
points never sit on the axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _check_radius(radius, r_min=0.0, name="radius"):
    if not np.isfinite(radius) or radius <= r_min:
        raise ValueError(
            f"{name} = {radius!r} is non-positive or too close to the symmetry axis "
            f"(minimum {r_min!r})"
        )


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricCyl:
    """Covariant and contravariant metric coefficients at one radius."""

    radius: float
    cov: np.ndarray
    contra: np.ndarray


@dataclass(frozen=True)
class Christoffel:
    """The three non-zero Christoffel symbols of the second kind at one radius.

    ``gamma_hoop_mixed`` is Gamma^theta_{r theta} = Gamma^theta_{theta r} = 1/radius
    and ``gamma_r_hoophoop`` is Gamma^r_{theta theta} = -radius.
    """

    radius: float
    gamma_hoop_mixed: float
    gamma_r_hoophoop: float

    def component(self, a, b, c):
        """Gamma^a_{bc}; returns 0 for every triple other than the three non-zero ones."""
        if a == 1 and {b, c} == {0, 1}:
            return self.gamma_hoop_mixed
        if a == 0 and b == 1 and c == 1:
            return self.gamma_r_hoophoop
        return 0.0

    def as_array(self):
        """Dense (3,3,3) array G[a, b, c] = Gamma^a_{bc}."""
        G = np.zeros((3, 3, 3))
        G[1, 0, 1] = G[1, 1, 0] = self.gamma_hoop_mixed
        G[0, 1, 1] = self.gamma_r_hoophoop
        return G


@dataclass(frozen=True)
class Shifter:
    """Two-point basis translator reference -> current: diag(1, R_ref/r_cur, 1)."""

    R_ref: float
    r_cur: float
    mat: np.ndarray

    def inverse(self):
        """The current -> reference translator diag(1, r_cur/R_ref, 1)."""
        return np.diag([1.0, self.r_cur / self.R_ref, 1.0])


@dataclass(frozen=True)
class BasisChange:
    """Jacobians of the Cartesian <-> cylindrical coordinate maps at one point.

    ``cyl_to_cart`` holds d z^j / d x^a (columns scale with radius in the hoop
    slot), ``cart_to_cyl`` its inverse.  det(cyl_to_cart) = radius, which is
    also sqrt(det g_cov).
    """

    angle: float
    radius: float
    cart_to_cyl: np.ndarray
    cyl_to_cart: np.ndarray


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def metric(radius, r_min=0.0):
    """Metric coefficients at ``radius`` (either configuration)."""
    _check_radius(radius, r_min)
    cov = np.diag([1.0, radius * radius, 1.0])
    contra = np.diag([1.0, 1.0 / (radius * radius), 1.0])
    return MetricCyl(radius=float(radius), cov=cov, contra=contra)


def christoffel(radius, r_min=0.0):
    """Christoffel symbols of the second kind at ``radius``."""
    _check_radius(radius, r_min)
    return Christoffel(
        radius=float(radius),
        gamma_hoop_mixed=1.0 / radius,
        gamma_r_hoophoop=-float(radius),
    )


def shifter(R_ref, r_cur, r_min=0.0):
    """Basis shifter taking the configuration at ``R_ref`` to the one at ``r_cur``."""
    _check_radius(R_ref, r_min, "R_ref")
    _check_radius(r_cur, r_min, "r_cur")
    mat = np.diag([1.0, R_ref / r_cur, 1.0])
    return Shifter(R_ref=float(R_ref), r_cur=float(r_cur), mat=mat)


def basis_change(radius, angle, r_min=0.0):
    """Jacobian matrices between Cartesian and cylindrical coordinates at a point."""
    _check_radius(radius, r_min)
    c, s = np.cos(angle), np.sin(angle)
    cyl_to_cart = np.array([
        [c, -radius * s, 0.0],
        [s, radius * c, 0.0],
        [0.0, 0.0, 1.0],
    ])
    cart_to_cyl = np.array([
        [c, s, 0.0],
        [-s / radius, c / radius, 0.0],
        [0.0, 0.0, 1.0],
    ])
    return BasisChange(
        angle=float(angle),
        radius=float(radius),
        cart_to_cyl=cart_to_cyl,
        cyl_to_cart=cyl_to_cart,
    )


def transform_defgrad_components(F_cart, bc_ref, bc_cur):
    """Deformation-gradient components in cylindrical bases.

    Sandwiches the Cartesian components with the basis-change Jacobians:
    the current-point Cartesian->cylindrical Jacobian on the left and the
    reference-point cylindrical->Cartesian Jacobian on the right.
    """
    return bc_cur.cart_to_cyl @ np.asarray(F_cart, dtype=float) @ bc_ref.cyl_to_cart


def covariant_derivative_vector(partials, components, chr_):
    """Covariant derivative W^a|_b = dW^a/dx^b + Gamma^a_{bc} W^c.

    ``partials[a, b]`` must hold dW^a/dx^b; ``chr_`` supplies the Christoffel
    symbols at the evaluation radius.
    """
    W = np.asarray(components, dtype=float)
    out = np.array(partials, dtype=float)
    x = chr_.radius
    # Gamma^theta_{b theta} W^theta and Gamma^theta_{b r} ... only three terms survive
    out[1, 0] += W[1] / x          # Gamma^theta_{r theta} W^theta
    out[1, 1] += W[0] / x          # Gamma^theta_{theta r} W^r
    out[0, 1] += -x * W[1]         # Gamma^r_{theta theta} W^theta
    return out


def shape_grad(shape_value, shape_partials, chr_):
    """Covariant-gradient blocks of one shape function for both in-plane directions.

    Returns an array of shape (2, 3, 3); ``[0]`` is the block for a radial
    nodal displacement and ``[1]`` the block for an axial one.  Entry layout
    (rows: tensor component a, columns: derivative direction b):

        radial block: [[dpsi/dr, 0, dpsi/dz], [0, psi/r, 0], [0, 0, 0]]
        axial  block: [[0, 0, 0], [0, 0, 0], [dpsi/dr, 0, dpsi/dz]]

    The hoop entry psi/r is the Christoffel contribution; it is what couples
    radial motion to hoop stretching in an axisymmetric body.
    """
    dpr, dpz = float(shape_partials[0]), float(shape_partials[1])
    psi = float(shape_value)
    blocks = np.zeros((2, 3, 3))
    blocks[0, 0, 0] = dpr
    blocks[0, 0, 2] = dpz
    blocks[0, 1, 1] = psi * chr_.gamma_hoop_mixed
    blocks[1, 2, 0] = dpr
    blocks[1, 2, 2] = dpz
    return blocks
