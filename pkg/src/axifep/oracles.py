"""Independent cross-checks for the kinematics, material and FEM layers.

Each oracle recomputes a quantity the production code produces, through a
deliberately different route:

* cavity_fixture: closed-form cylinder inflation, with the Cartesian/
  cylindrical basis rotations written out in trig form right here rather
  than taken from cylgeo;
* substep_integrate: explicit sub-stepped integration of the continuum
  flow equations in strain space, sharing nothing with the implicit return
  map except the material constants;
* quadrature_oracle: 64-point-per-axis tensor Gauss quadrature of the same
  per-point integrand the 3x3 assembly uses;
* fd_global_stiffness: central finite differences of the assembled residual
  against the assembled consistent tangent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem_axisym, material_mcc

_I3 = np.eye(3)


# ---------------------------------------------------------------------------
# closed-form cylinder inflation
# ---------------------------------------------------------------------------

def cavity_fixture(alpha, R=1.0, Theta=0.0):
    """Radial scaling r = alpha R, z = Z, theta = Theta.

    Returns (F_cart, F_cyl, J): the Cartesian gradient at the point,
    its cylindrical mixed components obtained through the full two-sided
    basis rotation, and the exact volume ratio alpha^2.  The motion is a
    homogeneous in-plane stretch, so F_cart is position independent while
    F_cyl comes out diagonal; the rotation matrices at angle Theta must
    cancel exactly for that to happen, which is what makes this a useful
    fixture for the transformation chain.
    """
    a = float(alpha)
    if a <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    F_cart = np.diag([a, a, 1.0])

    c, s = np.cos(Theta), np.sin(Theta)
    r = a * R
    # rows: (e_r, e_theta/r, e_z) of the current point; columns: Cartesian
    cart_to_cyl = np.array([
        [c, s, 0.0],
        [-s / r, c / r, 0.0],
        [0.0, 0.0, 1.0],
    ])
    # columns scaled back by the reference radius: x = R cos Theta etc.
    cyl_to_cart = np.array([
        [c, -R * s, 0.0],
        [s, R * c, 0.0],
        [0.0, 0.0, 1.0],
    ])
    F_cyl = cart_to_cyl @ F_cart @ cyl_to_cart
    return F_cart, F_cyl, a * a


# ---------------------------------------------------------------------------
# explicit sub-stepped flow integration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubstepResult:
    eps_e: np.ndarray
    z: float
    zeta: np.ndarray
    J_e: float
    dgam: float
    yielded: bool


def _zeta_lin(eps, p):
    ev = np.trace(eps)
    return p.K * ev * _I3 + 2.0 * p.G * (eps - ev / 3.0 * _I3)


def _energy(eps, z, p):
    ev = np.trace(eps)
    e = eps - ev / 3.0 * _I3
    eq2 = (2.0 / 3.0) * np.tensordot(e, e)
    psi = 0.5 * p.K * ev * ev + 1.5 * p.G * eq2
    if p.kappa == 0.0:
        psi_h = 0.5 * p.H * z * z
    else:
        w = np.exp(-p.alpha_h * z) - 1.0
        psi_h = 0.5 * p.H * (z * z + (p.kappa / p.alpha_h) * w * w)
    return psi + psi_h


def _beta(z, p):
    if p.kappa == 0.0:
        return p.H * z
    ez = np.exp(-p.alpha_h * z)
    return p.H * (z + p.kappa * ez * (1.0 - ez))


def _beta_z(z, p):
    if p.kappa == 0.0:
        return p.H
    ez = np.exp(-p.alpha_h * z)
    return p.H * (1.0 + p.kappa * p.alpha_h * ez * (2.0 * ez - 1.0))


def _phi_state(eps, z, p):
    """Yield value and flow directions at (eps_e, z)."""
    zeta = _zeta_lin(eps, p)
    xi = zeta - _energy(eps, z, p) * _I3
    p_xi = np.trace(xi) / 3.0
    s_xi = xi - p_xi * _I3
    q_xi2 = 1.5 * np.tensordot(s_xi, s_xi)
    p_c = p.p_c0 + _beta(z, p)
    phi = q_xi2 / (p.m * p.m) + p_xi * (p_xi - p_c)
    dphi_dxi = (3.0 / (p.m * p.m)) * s_xi + ((2.0 * p_xi - p_c) / 3.0) * _I3
    dphi_dbeta = -p_xi
    return zeta, phi, dphi_dxi, dphi_dbeta


def substep_integrate(eps_tr_path, z0, params, n_sub=10000):
    """Forward-Euler integration of the flow along a piecewise-linear path.

    ``eps_tr_path`` is a sequence of symmetric 3x3 trial-strain tensors; the
    first entry is the initial elastic strain (the state must start on or
    inside the yield surface).  Each leg is split into ``n_sub`` equal
    sub-increments; on each, the plastic multiplier follows from rate
    consistency (zero while the state is inside the surface or unloading).
    Everything is computed in strain space with closed-form volumetric/
    deviatoric elasticity, so no spectral machinery is involved.
    """
    path = [np.asarray(e, dtype=float) for e in eps_tr_path]
    if len(path) < 2:
        raise ValueError("need at least two path points")
    eps = path[0].copy()
    z = float(z0)
    dgam_total = 0.0
    plastic = False

    for k in range(len(path) - 1):
        d_tr = (path[k + 1] - path[k]) / n_sub
        for _ in range(n_sub):
            zeta, phi, n_xi, phi_b = _phi_state(eps, z, params)
            dgam = 0.0
            if phi >= 0.0:
                tr_n = np.trace(n_xi)
                # numerator and denominator of the consistency multiplier
                num = (np.tensordot(n_xi, _zeta_lin(d_tr, params))
                       - np.tensordot(zeta, d_tr) * tr_n)
                den = (np.tensordot(n_xi, _zeta_lin(n_xi, params))
                       - np.tensordot(zeta, n_xi) * tr_n
                       - _beta(z, params) * phi_b * tr_n
                       + phi_b * phi_b * _beta_z(z, params))
                if den > 0.0 and num > 0.0:
                    dgam = num / den
            eps = eps + d_tr - dgam * n_xi
            z = z - dgam * phi_b
            if dgam > 0.0:
                plastic = True
                dgam_total += dgam

    zeta = _zeta_lin(eps, params)
    lams, vecs = np.linalg.eigh(eps)
    b_e = (vecs * np.exp(2.0 * lams)) @ vecs.T
    return SubstepResult(eps_e=eps, z=z, zeta=zeta,
                         J_e=float(np.exp(np.trace(eps))),
                         dgam=dgam_total, yielded=plastic)


# ---------------------------------------------------------------------------
# high-order quadrature of the assembly integrand
# ---------------------------------------------------------------------------

def quadrature_oracle(mesh, elem, u_total, params, tag, component=None, n=64):
    """Integrate one element's contribution with an n x n Gauss grid.

    The displacement is applied as a single increment from the virgin state,
    which makes the integrand a well-defined field (per-point history is
    available at arbitrary parent coordinates, not just the stored Gauss
    points).  Tags:

    * ``volume``: reference volume per radian, independent of u_total;
    * ``f_int_component``: entry ``component = (local_node, direction)`` of
      the element internal-force vector.
    """
    if tag not in ("volume", "f_int_component"):
        raise ValueError(f"unknown integrand tag {tag!r}")
    x1, w1 = np.polynomial.legendre.leggauss(n)
    conn = mesh.elems[elem]
    Xe = mesh.nodes[conn]
    u2 = np.asarray(u_total, dtype=float).reshape(-1, 2)
    ue = u2[conn]
    virgin = material_mcc.MatState(b_e=_I3.copy(), z=0.0,
                                   zeta=np.zeros((3, 3)), J_e=1.0,
                                   yielded=False)
    total = 0.0
    for j in range(n):
        for i in range(n):
            xi = np.array([x1[i], x1[j]])
            w = w1[i] * w1[j]
            vals, ders = fem_axisym.q8_shape(xi)
            R = float(vals @ Xe[:, 0])
            Z = float(vals @ Xe[:, 1])
            det0 = float(np.linalg.det(ders.T @ Xe))
            if tag == "volume":
                total += R * w * det0
                continue
            rec = fem_axisym.GpRecord(elem=elem, gp=-1, xi=xi, w=w, R=R, Z=Z,
                                      state=virgin, F_prev=_I3.copy(),
                                      r_prev=R, J_prev=1.0)
            fdens, _, _, _ = fem_axisym.ul_point(
                rec, Xe, ue, ue, vals, ders, params, mesh.r_min)
            node, direction = component
            total += R * w * det0 * fdens[node, direction]
    return total


# ---------------------------------------------------------------------------
# finite-difference check of the assembled tangent
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FdReport:
    h: float
    max_rel_err: float
    worst: tuple               # (row dof, column dof)
    scale: float               # max |K| used as the normaliser
    n_cols: int


def fd_global_stiffness(mesh, states, u, params, h=1e-6, dofs=None,
                        formulation="UL", u_from=None):
    """Central-difference columns of the residual vs the assembled tangent.

    ``states`` is the committed history and ``u`` the displacement of the
    probed iterate; perturbations enter through both the total and the
    incremental displacement, exactly as a Newton iterate would.  ``dofs``
    selects the columns to probe (all of them if None).

    ``u_from`` is the displacement at which ``states`` was committed and
    defaults to ``u`` itself.  The default is only meaningful on elastic
    history: a committed plastic state sits exactly on the yield surface, so
    probing there straddles the elastic/plastic corner and central
    differences return the average of the two branch tangents no matter how
    small ``h`` is.  To probe plastic response, pass the previous step's
    commit as ``u_from`` and its converged (not yet committed) solution as
    ``u``; the trial states of that iterate are strictly outside the surface
    and the residual is smooth around it.  The trial composition under TL is
    drawn from the history directly, so ``u_from`` only affects UL.
    """
    u = np.asarray(u, dtype=float)
    u_n = u if u_from is None else np.asarray(u_from, dtype=float)

    def resid_of(v):
        if formulation == "UL":
            r, _, _ = fem_axisym.assemble_ul(mesh, states, v, v - u_n, params)
        else:
            r, _, _ = fem_axisym.assemble_tl(mesh, states, v, params)
        return r

    if formulation == "UL":
        _, K, _ = fem_axisym.assemble_ul(mesh, states, u, u - u_n, params)
    else:
        _, K, _ = fem_axisym.assemble_tl(mesh, states, u, params)
    K = K.tocsc()
    scale = float(np.abs(K).max())
    cols = np.arange(mesh.ndof) if dofs is None else np.asarray(dofs, dtype=int)

    worst = (0, int(cols[0]))
    max_rel = 0.0
    for dof in cols:
        up = u.copy()
        up[dof] += h
        um = u.copy()
        um[dof] -= h
        col_fd = (resid_of(up) - resid_of(um)) / (2.0 * h)
        diff = np.abs(col_fd - K[:, dof].toarray().ravel())
        row = int(diff.argmax())
        rel = float(diff[row]) / scale
        if rel > max_rel:
            max_rel = rel
            worst = (row, int(dof))
    return FdReport(h=float(h), max_rel_err=max_rel, worst=worst,
                    scale=scale, n_cols=len(cols))
