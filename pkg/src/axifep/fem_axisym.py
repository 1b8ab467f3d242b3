"""Axisymmetric Q8 finite elements with UL and TL assembly and a Newton driver.

Discretisation: 8-node serendipity quadrilaterals in the (R, Z) half-plane
with full 3x3 Gauss quadrature.  Volume measure per radian of circumference:
dV0 = R * w * det(d X / d xi); the 2*pi factor is dropped consistently, so
residuals, stiffness and reactions are per radian.

Both formulations drive the same constitutive pipeline per Gauss point
(trial elastic b pushed forward from the converged state, return map,
spatial tangent kernel) and differ only in how the deformation gradient and
the test-function gradients are produced:

* updated Lagrangian: spatial shape-function gradients from current nodal
  coordinates, incremental deformation gradient from the inverse spatial
  route, composed onto the stored converged gradient;
* total Lagrangian: reference shape-function gradients (precomputable),
  total deformation gradient from the covariant displacement gradient and
  the total shifter, internal force through the first Piola-Kirchhoff
  contraction with referential test-function gradients.

The consistent tangent contracts the shape-gradient blocks with the
per-point kernel

    a = J_p * ( -zeta_a^d delta_c^b + zeta_a^b delta_c^d
                + 1/2 (D_alg - zeta (x) tr.dE_dEtr) : L : B )

where L = d log(b_tr) / d b_tr and B maps the spatial velocity gradient to
the convected variation of b_tr.  The kernel is unsymmetric in general, so
the linear solves use a direct unsymmetric sparse factorisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import cylgeo, kinematics, material_mcc, spectral

_I3 = np.eye(3)


class SolverError(RuntimeError):
    """Step failure of the global Newton process (after any bisection)."""


class ConfigError(ValueError):
    """Invalid geometry or boundary-condition description."""


# ---------------------------------------------------------------------------
# mesh and shape functions
# ---------------------------------------------------------------------------

@dataclass
class MeshAxi:
    nodes: np.ndarray            # (n_nodes, 2) reference (R, Z)
    elems: np.ndarray            # (n_els, 8) connectivity, VTK quadratic-quad order
    bsets: dict                  # name -> node index array
    r_min: float                 # axis rejection radius (1e-12 * domain diameter)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_els(self):
        return self.elems.shape[0]

    @property
    def ndof(self):
        return 2 * self.n_nodes


def gen_cylinder_mesh(R_int, R_ext, H, n_R, n_Z):
    """Structured Q8 mesh of the rectangle [R_int, R_ext] x [0, H]."""
    if not (R_int > 0.0 and R_ext > R_int and H > 0.0 and n_R >= 1 and n_Z >= 1):
        raise ConfigError(
            f"invalid cylinder geometry (R_int={R_int}, R_ext={R_ext}, H={H}, "
            f"n_R={n_R}, n_Z={n_Z})")
    diameter = float(np.hypot(R_ext, H))
    r_min = 1e-12 * diameter
    if R_int <= r_min:
        raise ConfigError(f"inner radius {R_int} too close to the symmetry axis")

    # lattice of (2 n_R + 1) x (2 n_Z + 1) positions minus the element centres
    index = {}
    coords = []
    for j in range(2 * n_Z + 1):
        for i in range(2 * n_R + 1):
            if i % 2 == 1 and j % 2 == 1:
                continue  # no interior node in serendipity elements
            index[(i, j)] = len(coords)
            coords.append((R_int + (R_ext - R_int) * i / (2 * n_R),
                           H * j / (2 * n_Z)))
    nodes = np.array(coords)

    elems = []
    for cj in range(n_Z):
        for ci in range(n_R):
            i0, j0 = 2 * ci, 2 * cj
            elems.append([
                index[(i0, j0)], index[(i0 + 2, j0)],
                index[(i0 + 2, j0 + 2)], index[(i0, j0 + 2)],
                index[(i0 + 1, j0)], index[(i0 + 2, j0 + 1)],
                index[(i0 + 1, j0 + 2)], index[(i0, j0 + 1)],
            ])
    elems = np.array(elems, dtype=int)

    R = nodes[:, 0]
    Z = nodes[:, 1]
    bsets = {
        "inner": np.where(np.abs(R - R_int) < 1e-12 * diameter)[0],
        "outer": np.where(np.abs(R - R_ext) < 1e-12 * diameter)[0],
        "bottom": np.where(np.abs(Z) < 1e-12 * diameter)[0],
        "top": np.where(np.abs(Z - H) < 1e-12 * diameter)[0],
        "axis": np.where(R <= r_min)[0],
    }
    return MeshAxi(nodes=nodes, elems=elems, bsets=bsets, r_min=r_min)


# node order: four corners counter-clockwise, then midsides bottom/right/top/left
_Q8_CORNERS = ((-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0))
_Q8_MIDS = ((0.0, -1.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0))


def q8_shape(xi):
    """Serendipity Q8 shape values (8,) and parent-space partials (8, 2)."""
    s, t = float(xi[0]), float(xi[1])
    vals = np.empty(8)
    der = np.empty((8, 2))
    for k, (si, ti) in enumerate(_Q8_CORNERS):
        vals[k] = 0.25 * (1 + s * si) * (1 + t * ti) * (s * si + t * ti - 1)
        der[k, 0] = 0.25 * si * (1 + t * ti) * (2 * s * si + t * ti)
        der[k, 1] = 0.25 * ti * (1 + s * si) * (2 * t * ti + s * si)
    for k, (si, ti) in enumerate(_Q8_MIDS):
        n = 4 + k
        if si == 0.0:
            vals[n] = 0.5 * (1 - s * s) * (1 + t * ti)
            der[n, 0] = -s * (1 + t * ti)
            der[n, 1] = 0.5 * (1 - s * s) * ti
        else:
            vals[n] = 0.5 * (1 + s * si) * (1 - t * t)
            der[n, 0] = 0.5 * si * (1 - t * t)
            der[n, 1] = -t * (1 + s * si)
    return vals, der


_GAUSS_CACHE = {}


def gauss_rule(n=3):
    """Tensor-product Gauss-Legendre points (n*n, 2) and weights (n*n,)."""
    if n not in _GAUSS_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        pts = np.array([(a, b) for b in x for a in x])
        wts = np.array([wa * wb for wb in w for wa in w])
        _GAUSS_CACHE[n] = (pts, wts)
    return _GAUSS_CACHE[n]


_SHAPE_CACHE = {}


def _shapes_at(pts_key, pts):
    if pts_key not in _SHAPE_CACHE:
        vals = np.array([q8_shape(p)[0] for p in pts])
        ders = np.array([q8_shape(p)[1] for p in pts])
        _SHAPE_CACHE[pts_key] = (vals, ders)
    return _SHAPE_CACHE[pts_key]


# ---------------------------------------------------------------------------
# per-Gauss-point records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GpRecord:
    """Converged history of one Gauss point."""

    elem: int
    gp: int
    xi: np.ndarray               # parent coordinates
    w: float                     # quadrature weight
    R: float                     # reference position
    Z: float
    state: material_mcc.MatState
    F_prev: np.ndarray           # converged total deformation gradient (mixed)
    r_prev: float                # converged current radius
    J_prev: float                # converged total volume ratio


def init_states(mesh, params):
    """Virgin history: identity deformation, stress free, unyielded."""
    pts, wts = gauss_rule(3)
    vals, _ = _shapes_at(3, pts)
    recs = []
    virgin = material_mcc.MatState(
        b_e=_I3.copy(), z=0.0, zeta=np.zeros((3, 3)), J_e=1.0, yielded=False)
    for e in range(mesh.n_els):
        Xe = mesh.nodes[mesh.elems[e]]
        for g in range(9):
            R = float(vals[g] @ Xe[:, 0])
            Z = float(vals[g] @ Xe[:, 1])
            recs.append(GpRecord(elem=e, gp=g, xi=pts[g], w=float(wts[g]),
                                 R=R, Z=Z, state=virgin, F_prev=_I3.copy(),
                                 r_prev=R, J_prev=1.0))
    return recs


# ---------------------------------------------------------------------------
# shared per-point machinery
# ---------------------------------------------------------------------------

def _grad_blocks_from(dpsi_dx, vals, r):
    """Covariant test-function gradient blocks, shape (8, 2, 3, 3).

    Row layout per block matches cylgeo.shape_grad: radial blocks carry the
    in-plane partials in row 0 plus the hoop entry psi/r, axial blocks carry
    the partials in row 2.
    """
    G = np.zeros((8, 2, 3, 3))
    G[:, 0, 0, 0] = dpsi_dx[:, 0]
    G[:, 0, 0, 2] = dpsi_dx[:, 1]
    G[:, 0, 1, 1] = vals / r
    G[:, 1, 2, 0] = dpsi_dx[:, 0]
    G[:, 1, 2, 2] = dpsi_dx[:, 1]
    return G


def _spatial_kernel(zeta, pack, b_tr, J_p, r):
    """Per-point tangent kernel a[a, b, c, d] contracted by the G blocks."""
    lams, vecs = spectral.eigh3_sym(b_tr)
    L4 = spectral.coaxial_fourth_order(lams, vecs, np.log(lams),
                                       np.diag(1.0 / lams))
    g_cov = np.array([1.0, r * r, 1.0])
    b_up = b_tr * (1.0 / g_cov)[None, :]          # b^{gd} = b^g_e g^{ed}
    B4 = (np.einsum("gc,dh->ghcd", _I3, b_tr)
          + np.einsum("gd,hc->ghcd", b_up, np.diag(g_cov)))
    T2 = np.einsum("mmkl->kl", pack.dE_dEtr)
    M4 = pack.D_alg - np.einsum("ab,ef->abef", zeta, T2)
    MLB = (M4.reshape(9, 9) @ L4.reshape(9, 9) @ B4.reshape(9, 9)).reshape(3, 3, 3, 3)
    a4 = J_p * (-np.einsum("ad,cb->abcd", zeta, _I3)
                + np.einsum("ab,cd->abcd", zeta, _I3)
                + 0.5 * MLB)
    return a4


def _constitutive(rec, b_tr, params):
    try:
        return material_mcc.return_map(b_tr, rec.state.z, params)
    except material_mcc.ConstitutiveError as exc:
        raise material_mcc.ConstitutiveError(
            f"element {rec.elem}, gauss point {rec.gp}: {exc}") from exc


# ---------------------------------------------------------------------------
# updated-Lagrangian assembly
# ---------------------------------------------------------------------------

def ul_point(rec, Xe, ue_tot, ue_inc, vals, ders, params, r_min):
    """Constitutive update and force density of one UL Gauss point.

    Returns (fdens (8,2), a4, G, new GpRecord fields) where fdens must still
    be scaled by the reference volume weight.
    """
    cur = Xe + ue_tot
    prev = cur - ue_inc
    JM = ders.T @ cur                       # (2,2): d x_j / d xi_a
    detJ = float(np.linalg.det(JM))
    if detJ <= 0.0:
        raise kinematics.InvertedElementError(
            f"element {rec.elem}, gauss point {rec.gp}: current parent map "
            f"determinant {detJ} <= 0")
    dpsi_dx = ders @ np.linalg.inv(JM).T    # (8,2) spatial partials
    r = float(vals @ cur[:, 0])
    r_n = float(vals @ prev[:, 0])
    if r <= r_min or r_n <= r_min:
        raise kinematics.InvertedElementError(
            f"element {rec.elem}, gauss point {rec.gp}: radius {min(r, r_n)} "
            f"reached the symmetry axis")

    # spatial covariant derivative of the incremental displacement
    due = dpsi_dx.T @ ue_inc                # (2,2): d u_c / d x_j
    h = np.zeros((3, 3))
    h[0, 0] = due[0, 0]
    h[0, 2] = due[1, 0]
    h[2, 0] = due[0, 1]
    h[2, 2] = due[1, 1]
    h[1, 1] = float(vals @ ue_inc[:, 0]) / r

    S_inv = cylgeo.shifter(r, r_n, 0.0)     # current -> previous translator
    Xinc_inv = kinematics.defgrad_inverse_spatial(h, S_inv)
    F_inc_comp = np.linalg.inv(Xinc_inv)
    F_inc = kinematics.DefGrad(comp=F_inc_comp, R_ref=r_n, r_cur=r)

    F_tot = F_inc_comp @ rec.F_prev
    J = float(np.linalg.det(F_tot)) * r / rec.R
    if J <= 0.0:
        raise kinematics.InvertedElementError(
            f"element {rec.elem}, gauss point {rec.gp}: J = {J} <= 0")

    b_tr = kinematics.trial_elastic_b(F_inc, rec.state.b_e)
    state, pack = _constitutive(rec, b_tr, params)
    J_p = J / state.J_e

    G = _grad_blocks_from(dpsi_dx, vals, r)
    fdens = np.einsum("nfab,ab->nf", G, J_p * state.zeta)
    a4 = _spatial_kernel(state.zeta, pack, b_tr, J_p, r)
    new_rec = replace(rec, state=state, F_prev=F_tot, r_prev=r, J_prev=J)
    return fdens, a4, G, new_rec


def assemble_ul(mesh, states, u_total, u_inc, params):
    """Updated-Lagrangian residual, consistent stiffness and updated states."""
    return _assemble(mesh, states, u_total, u_inc, params, ul_point)


# ---------------------------------------------------------------------------
# total-Lagrangian assembly
# ---------------------------------------------------------------------------

def tl_point(rec, Xe, ue_tot, ue_inc, vals, ders, params, r_min):
    """Constitutive update and force density of one TL Gauss point.

    ``ue_inc`` is unused: the incremental deformation gradient is recovered
    from the stored converged total gradient.  The internal force runs
    through the first Piola-Kirchhoff contraction with referential
    test-function gradients; the stiffness reuses the spatial kernel with
    chain-ruled spatial shape gradients (the two residual routes are
    algebraically identical, so the kernel is the exact tangent here too).
    """
    JM0 = ders.T @ Xe
    dPsi_dX = ders @ np.linalg.inv(JM0).T   # (8,2) reference partials
    cur = Xe + ue_tot
    r = float(vals @ cur[:, 0])
    if r <= r_min:
        raise kinematics.InvertedElementError(
            f"element {rec.elem}, gauss point {rec.gp}: radius {r} reached "
            f"the symmetry axis")

    # referential covariant derivative of the total displacement
    dUe = dPsi_dX.T @ ue_tot
    Ucov = np.zeros((3, 3))
    Ucov[0, 0] = dUe[0, 0]
    Ucov[0, 2] = dUe[1, 0]
    Ucov[2, 0] = dUe[0, 1]
    Ucov[2, 2] = dUe[1, 1]
    Ucov[1, 1] = float(vals @ ue_tot[:, 0]) / rec.R

    S_tot = cylgeo.shifter(rec.R, r, 0.0)
    F_tot = kinematics.defgrad_total(Ucov, S_tot)
    J = F_tot.jacobian()

    F_inc_comp = F_tot.comp @ np.linalg.inv(rec.F_prev)
    F_inc = kinematics.DefGrad(comp=F_inc_comp, R_ref=rec.r_prev, r_cur=r)
    b_tr = kinematics.trial_elastic_b(F_inc, rec.state.b_e)
    state, pack = _constitutive(rec, b_tr, params)
    J_p = J / state.J_e

    # first Piola-Kirchhoff contraction: P_a^A = J sigma_a^b (F^{-1})^A_b
    Finv = np.linalg.inv(F_tot.comp)
    P = J_p * state.zeta @ Finv.T
    G_ref = np.zeros((8, 2, 3, 3))
    G_ref[:, 0, 0, 0] = dPsi_dX[:, 0]
    G_ref[:, 0, 0, 2] = dPsi_dX[:, 1]
    G_ref[:, 0, 1, 1] = vals / r            # hoop entry at the current radius
    G_ref[:, 1, 2, 0] = dPsi_dX[:, 0]
    G_ref[:, 1, 2, 2] = dPsi_dX[:, 1]
    fdens = np.einsum("nfaA,aA->nf", G_ref, P)

    Fip = F_tot.comp[np.ix_((0, 2), (0, 2))]
    dpsi_dx = dPsi_dX @ np.linalg.inv(Fip)
    G = _grad_blocks_from(dpsi_dx, vals, r)
    a4 = _spatial_kernel(state.zeta, pack, b_tr, J_p, r)
    new_rec = replace(rec, state=state, F_prev=F_tot.comp, r_prev=r, J_prev=J)
    return fdens, a4, G, new_rec


def assemble_tl(mesh, states, u_total, params):
    """Total-Lagrangian residual, consistent stiffness and updated states."""
    return _assemble(mesh, states, u_total, None, params, tl_point)


# ---------------------------------------------------------------------------
# common assembly loop
# ---------------------------------------------------------------------------

def _assemble(mesh, states, u_total, u_inc, params, point_fn):
    pts, wts = gauss_rule(3)
    vals_all, ders_all = _shapes_at(3, pts)
    u2 = np.asarray(u_total, dtype=float).reshape(-1, 2)
    du2 = None if u_inc is None else np.asarray(u_inc, dtype=float).reshape(-1, 2)

    ndof = mesh.ndof
    resid = np.zeros(ndof)
    nel = mesh.n_els
    rows = np.empty(nel * 256, dtype=int)
    cols = np.empty(nel * 256, dtype=int)
    data = np.empty(nel * 256)
    new_states = list(states)

    for e in range(nel):
        conn = mesh.elems[e]
        Xe = mesh.nodes[conn]
        ue_tot = u2[conn]
        ue_inc = np.zeros((8, 2)) if du2 is None else du2[conn]
        edofs = np.stack((2 * conn, 2 * conn + 1), axis=1).ravel()
        fe = np.zeros((8, 2))
        Ke = np.zeros((16, 16))
        for g in range(9):
            rec = states[e * 9 + g]
            JM0 = ders_all[g].T @ Xe
            dV0 = rec.R * rec.w * float(np.linalg.det(JM0))
            fdens, a4, G, new_rec = point_fn(
                rec, Xe, ue_tot, ue_inc, vals_all[g], ders_all[g], params,
                mesh.r_min)
            fe += dV0 * fdens
            G8 = G.reshape(16, 9)
            Ke += dV0 * (G8 @ a4.reshape(9, 9) @ G8.T)
            new_states[e * 9 + g] = new_rec
        resid[edofs] += fe.ravel()
        block = slice(e * 256, (e + 1) * 256)
        rows[block] = np.repeat(edofs, 16)
        cols[block] = np.tile(edofs, 16)
        data[block] = Ke.ravel()

    K = sp.coo_matrix((data, (rows, cols)), shape=(ndof, ndof)).tocsr()
    return resid, K, new_states


# ---------------------------------------------------------------------------
# boundary conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DirichletBC:
    """Prescribed dof indices with their absolute target values."""

    dofs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.dofs, dtype=int)
        v = np.asarray(self.values, dtype=float)
        if d.shape != v.shape:
            raise ConfigError("dof and value arrays differ in length")
        if not np.all(np.isfinite(v)):
            raise ConfigError("non-finite prescribed value")
        order = np.argsort(d, kind="stable")
        d, v = d[order], v[order]
        dup = np.nonzero(np.diff(d) == 0)[0]
        for i in dup:
            if v[i] != v[i + 1]:
                raise ConfigError(
                    f"dof {d[i]} prescribed twice with conflicting values "
                    f"{v[i]} and {v[i + 1]}")
        keep = np.ones(d.size, dtype=bool)
        keep[1:] = np.diff(d) != 0
        object.__setattr__(self, "dofs", d[keep])
        object.__setattr__(self, "values", v[keep])


def merge_bcs(*bcs):
    """Union of several Dirichlet sets; conflicting duplicates raise."""
    if not bcs:
        return DirichletBC(dofs=np.empty(0, dtype=int), values=np.empty(0))
    return DirichletBC(dofs=np.concatenate([b.dofs for b in bcs]),
                       values=np.concatenate([b.values for b in bcs]))


@dataclass(frozen=True)
class ReducedSystem:
    K_ff: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    reactions: np.ndarray        # residual entries at the fixed dofs


def apply_dirichlet(K, resid, bc, du_fixed=None):
    """Row/column elimination of the prescribed dofs.

    ``du_fixed`` is the prescribed increment to inject through the coupling
    block (zero when the displacement targets were applied before assembly,
    which is how the Newton driver works).  The reaction forces are the
    residual entries at the fixed dofs (internal force minus external load,
    per radian).
    """
    ndof = resid.shape[0]
    fixed = np.asarray(bc.dofs, dtype=int)
    if fixed.size and (fixed.min() < 0 or fixed.max() >= ndof):
        raise ConfigError("prescribed dof index out of range")
    mask = np.ones(ndof, dtype=bool)
    mask[fixed] = False
    free = np.nonzero(mask)[0]
    K_ff = K[free][:, free].tocsr()
    rhs = -resid[free]
    if du_fixed is not None and fixed.size:
        rhs -= K[free][:, fixed] @ np.asarray(du_fixed, dtype=float)
    return ReducedSystem(K_ff=K_ff, rhs=rhs, free=free, fixed=fixed,
                         reactions=resid[fixed].copy())


# ---------------------------------------------------------------------------
# Newton-Raphson driver
# ---------------------------------------------------------------------------

@dataclass
class NrReport:
    err_hist: list               # err(1) = 1 by definition, then relative norms
    iterations: int              # index of the first residual with err <= tol
    n_solves: int
    converged: bool
    r1: float                    # normaliser ||r|| of the first assembly
    reactions: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _assemble_for(formulation, mesh, states, u, u_n, params):
    if formulation == "UL":
        return assemble_ul(mesh, states, u, u - u_n, params)
    if formulation == "TL":
        return assemble_tl(mesh, states, u, params)
    raise ConfigError(f"unknown formulation {formulation!r}")


@dataclass
class AssemblyCache:
    """Final converged assembly of the last committed step.

    At a zero increment the internal forces depend only on the committed
    Gauss-point states, so the residual of the previous converged assembly
    is also the residual of the current step's zero initial guess.  Solving
    with that assembly before re-assembling keeps the consistent
    elastic/plastic branch of every Gauss point (a fresh zero-increment
    trial sits exactly on the yield surface and its branch choice degrades
    to noise), which is what lets smooth continuation steps converge in 3
    iterations.
    """
    resid: np.ndarray | None = None
    K: sp.spmatrix | None = None


def nr_solve(formulation, mesh, states, params, step_loads, tol=1e-8,
             k_max=25, u_init=None, cache=None):
    """One load step of the Newton process.

    ``step_loads`` is a DirichletBC with the absolute prescribed values at
    the end of the step.  The initial guess for the free dofs is the zero
    increment; the residual of the first iteration defines the normaliser
    of the convergence measure err = ||r|| / ||r1||, with norms taken over
    the free dofs.  The iteration count is the number of assembled
    residuals until err <= tol.

    ``cache`` (an AssemblyCache, optional) carries the converged assembly
    across steps.  When it holds one, the step starts by solving with it,
    injecting the prescribed increment through the coupling block
    (apply_dirichlet with du_fixed); r1 is then the residual assembled at
    that predicted state, and each further iteration is one solve plus one
    assembly.  The carried tangent keeps the converged elastic/plastic
    branch of each Gauss point, which a zero-increment re-assembly cannot
    reproduce (the trial state lands exactly on the yield surface), so a
    smooth continuation step converges in 3 iterations.  If the predictor
    already satisfies ||r1|| <= tol * ||first rhs||, the step is done in
    one iteration (linear continuation).

    Without a cache the prescribed dofs are set to their targets and the
    residual of that guess is r1; a linear problem then converges in 2
    iterations (the second confirms).  On convergence the final assembly
    is stored into the cache when one was passed.

    Returns (u, new_states, NrReport); raises SolverError on divergence
    (three consecutive error growths) or iteration exhaustion.
    """
    bc = step_loads
    u_n = np.zeros(mesh.ndof) if u_init is None else np.asarray(u_init, dtype=float).copy()
    u = u_n.copy()
    du_p = bc.values - u_n[bc.dofs]

    err_hist = []
    r1 = 0.0
    grow = 0
    n_solves = 0
    forcing = 0.0

    warm = cache is not None and cache.K is not None
    if warm:
        red = apply_dirichlet(cache.K, cache.resid, bc, du_fixed=du_p)
        forcing = float(np.linalg.norm(red.rhs))
        du = spla.spsolve(red.K_ff, red.rhs)
        if not np.all(np.isfinite(du)):
            raise SolverError("singular tangent on the carried assembly")
        u[red.free] += du
        n_solves = 1
    u[bc.dofs] = bc.values

    for _ in range(k_max):
        resid, K, new_states = _assemble_for(formulation, mesh, states,
                                             u, u_n, params)
        red = apply_dirichlet(K, resid, bc)
        rn = float(np.linalg.norm(red.rhs))
        if not err_hist:
            r1 = rn
            done = rn == 0.0 or (warm and rn <= tol * forcing)
            err = 0.0 if done else 1.0
        else:
            err = rn / r1 if r1 > 0.0 else 0.0
        err_hist.append(err)
        if err <= tol:
            if cache is not None:
                cache.resid, cache.K = resid, K
            report = NrReport(err_hist=err_hist, iterations=len(err_hist),
                              n_solves=n_solves, converged=True, r1=r1,
                              reactions=red.reactions)
            return u, new_states, report
        if len(err_hist) >= 2 and err > err_hist[-2]:
            grow += 1
            if grow >= 3:
                raise SolverError(
                    f"divergence after {n_solves} solves "
                    f"(err history {err_hist})")
        else:
            grow = 0
        du = spla.spsolve(red.K_ff, red.rhs)
        if not np.all(np.isfinite(du)):
            raise SolverError(f"singular tangent after {n_solves} solves")
        u[red.free] += du
        n_solves += 1

    raise SolverError(
        f"no convergence within {k_max} assemblies (err history {err_hist})")


# ---------------------------------------------------------------------------
# ramp driver with step bisection
# ---------------------------------------------------------------------------

@dataclass
class StepResult:
    t: float                     # pseudo-time at the end of the (sub)step
    label: int                   # nominal step index (1-based)
    u: np.ndarray
    report: NrReport
    reactions: np.ndarray        # at the prescribed dofs, per radian
    fixed: np.ndarray


@dataclass
class RampResult:
    steps: list                  # StepResult per converged (sub)step
    states: list                 # final converged GpRecord list
    u: np.ndarray                # final displacement


def solve_ramp(formulation, mesh, params, bc_of_t, n_steps, tol=1e-8,
               k_max=25, max_bisect=4, states=None, observer=None):
    """Drive the Dirichlet ramp ``bc_of_t(t)`` over t in (0, 1].

    The nominal schedule is n_steps equal increments.  A failed step is
    retried on half the increment, up to ``max_bisect`` consecutive
    halvings; converged sub-steps commit their states and appear in the
    result labelled with the nominal step they belong to.  ``observer`` is
    called as observer(step_result, states) after each commit.
    """
    states = init_states(mesh, params) if states is None else states
    u = np.zeros(mesh.ndof)
    results = []
    t = 0.0
    dt_nom = 1.0 / n_steps
    cache = AssemblyCache()
    while t < 1.0 - 1e-12:
        t_target = min(1.0, (np.floor(t / dt_nom + 1e-9) + 1) * dt_nom)
        dt = t_target - t
        halvings = 0
        while True:
            t_try = t + dt
            bc = bc_of_t(t_try)
            try:
                u_new, states_new, report = nr_solve(
                    formulation, mesh, states, params, bc, tol=tol,
                    k_max=k_max, u_init=u, cache=cache)
            except SolverError:
                halvings += 1
                if halvings > max_bisect:
                    raise
                dt *= 0.5
                continue
            label = int(np.floor(t_try / dt_nom - 1e-9)) + 1
            step = StepResult(t=t_try, label=label, u=u_new.copy(),
                              report=report, reactions=report.reactions,
                              fixed=bc.dofs)
            u, states, t = u_new, states_new, t_try
            results.append(step)
            if observer is not None:
                observer(step, states)
            break
    return RampResult(steps=results, states=states, u=u)
