"""Independent-route verification helpers, and their own verification.

Strategy:
1. the sub-stepped consistency-rate integrator against the one-shot
   return map on short plastic arcs from a feasible base state.  The
   integrator is first order, so halving the sub-step must shrink the
   disagreement roughly linearly (Richardson behaviour).
2. elastic paths where the two routes coincide to round-off.
3. the high-order quadrature oracle: exact reference volume and the
   internal-force components of the standard assembly on one element,
   elastic and fully plastic.
4. the finite-difference stiffness probe on a small elastic patch.
"""

from __future__ import annotations

import numpy as np
import pytest
from scipy import optimize

from axifep import fem_axisym as fem
from axifep import material_mcc as mat
from axifep import oracles, spectral

PARAMS = mat.make_params(E=1.375e9, nu=0.375, H=765e6, kappa=0.0,
                         alpha_h=1.0, m=1.0, p_c0=-2.4e8)
PHI_SCALE = PARAMS.p_c0 ** 2
_I3 = np.eye(3)


def b_of_eps(eps):
    return spectral.tensor_function(eps, lambda x: np.exp(2.0 * x))


def phi_of_trial(eps, z, p):
    zeta = mat.zeta_stress(eps, p)
    psi, psi_h = mat.stored_energy(eps, z, p)
    xi = mat.eshelby_zeta(zeta, psi + psi_h)
    return mat.yield_function(xi, mat.hardening_beta(z, p), p)


def feasible_base(pt_frac=0.45, margin=1e-4, p=PARAMS):
    """Strain on a deviatoric ray with Phi = -margin * p_c0^2 exactly.

    Sub-stepped flow only makes sense from a state on or inside the
    surface, so the base is placed just inside by bisecting the
    deviatoric amplitude.
    """
    eps_v = pt_frac * p.p_c0 / p.K
    base = eps_v / 3.0 * _I3
    ndir = np.diag([1.0, -0.5, -0.5])
    ndir /= np.linalg.norm(ndir)
    target = -margin * p.p_c0 ** 2

    def gap(s):
        return phi_of_trial(base + s * ndir, 0.0, p) - target

    s_star = optimize.brentq(gap, 0.0, 1.0, xtol=1e-15)
    return base + s_star * ndir


ARC = 5e-4   # strain arc length of one leg


# ---------------------------------------------------------------------------
# sub-stepped flow vs return map
# ---------------------------------------------------------------------------

class TestSubstepVsReturnMap:
    def setup_method(self):
        self.eps0 = feasible_base()
        # push outward along the deviatoric ray of the base, with some
        # shear and a touch of extra compression mixed in
        ndir = np.diag([1.0, -0.5, -0.5]) - 0.05 * _I3
        ndir[0, 2] = ndir[2, 0] = 0.15
        self.step = ARC * ndir / np.linalg.norm(ndir)
        self.eps1 = self.eps0 + self.step

    def test_arc_actually_crosses_the_surface(self):
        assert phi_of_trial(self.eps0, 0.0, PARAMS) < 0.0
        assert phi_of_trial(self.eps1, 0.0, PARAMS) > 0.0

    def test_plastic_arc_agreement(self):
        state, _ = mat.return_map(b_of_eps(self.eps1), 0.0, PARAMS)
        sub = oracles.substep_integrate([self.eps0, self.eps1], 0.0, PARAMS)
        assert state.yielded and sub.yielded
        scale = np.abs(state.zeta).max()
        assert np.abs(sub.zeta - state.zeta).max() <= 1e-5 * scale
        assert abs(sub.z - state.z) <= 1e-5

    def test_first_order_richardson(self):
        """The integrator converges linearly in 1/n_sub to its own limit.

        The return map cannot serve as the reference here: it carries its
        own one-step bias of the same order as the fine sub-step error.
        """
        ref = oracles.substep_integrate([self.eps0, self.eps1], 0.0,
                                        PARAMS, n_sub=100000)
        scale = np.abs(ref.zeta).max()

        def err(n):
            sub = oracles.substep_integrate([self.eps0, self.eps1], 0.0,
                                            PARAMS, n_sub=n)
            return np.abs(sub.zeta - ref.zeta).max() / scale

        e_coarse, e_fine = err(1000), err(10000)
        assert e_fine <= 0.2 * e_coarse

    def test_two_leg_path(self):
        """Direction change between the legs, then a one-shot comparison
        only for the final leg from the mid state."""
        mid_state, _ = mat.return_map(b_of_eps(self.eps1), 0.0, PARAMS)
        eps_mid = 0.5 * spectral.tensor_function(mid_state.b_e, np.log)
        turn = ARC * np.diag([-0.2, -0.9, -0.38]) / 1.0
        eps2 = self.eps1 + turn

        sub = oracles.substep_integrate([self.eps0, self.eps1, eps2],
                                        0.0, PARAMS)
        # chain the return map over the same two legs
        b_tr2 = b_of_eps(eps_mid + turn)
        state2, _ = mat.return_map(b_tr2, mid_state.z, PARAMS)
        scale = np.abs(state2.zeta).max()
        assert np.abs(sub.zeta - state2.zeta).max() <= 3e-5 * scale
        assert abs(sub.z - state2.z) <= 3e-5

    def test_elastic_path_is_exact(self):
        """Fully elastic legs: forward Euler has no error at all."""
        eps_a = 0.3 * self.eps0
        eps_b = 0.5 * self.eps0
        assert phi_of_trial(eps_b, 0.0, PARAMS) < 0.0
        sub = oracles.substep_integrate([eps_a, eps_b], 0.0, PARAMS,
                                        n_sub=50)
        assert not sub.yielded
        assert sub.dgam == 0.0
        np.testing.assert_allclose(sub.eps_e, eps_b, rtol=0, atol=1e-15)
        np.testing.assert_allclose(sub.zeta, mat.zeta_stress(eps_b, PARAMS),
                                   rtol=1e-13)

    def test_path_needs_two_points(self):
        with pytest.raises(ValueError):
            oracles.substep_integrate([self.eps0], 0.0, PARAMS)


# ---------------------------------------------------------------------------
# high-order quadrature
# ---------------------------------------------------------------------------

class TestQuadratureOracle:
    def test_reference_volume_single_element(self):
        mesh = fem.gen_cylinder_mesh(1.0, 2.0, 1.0, 1, 1)
        vol = oracles.quadrature_oracle(mesh, 0, np.zeros(mesh.ndof), PARAMS,
                                        "volume")
        exact = 0.5 * (2.0 ** 2 - 1.0 ** 2) * 1.0
        assert vol == pytest.approx(exact, rel=1e-12)

    def test_reference_volume_partition(self):
        """Element volumes add up to the annulus volume per radian."""
        mesh = fem.gen_cylinder_mesh(0.5, 2.5, 3.0, 3, 2)
        total = sum(
            oracles.quadrature_oracle(mesh, e, np.zeros(mesh.ndof), PARAMS,
                                      "volume", n=16)
            for e in range(mesh.n_els))
        exact = 0.5 * (2.5 ** 2 - 0.5 ** 2) * 3.0
        assert total == pytest.approx(exact, rel=1e-12)

    def test_internal_force_elastic(self):
        """3x3 product quadrature already integrates the elastic residual
        to within 1e-10 of a 64x64 grid."""
        mesh = fem.gen_cylinder_mesh(1.0, 2.0, 1.0, 1, 1)
        u = np.zeros(mesh.ndof)
        u.reshape(-1, 2)[:, 0] = -1e-3 * mesh.nodes[:, 0]
        resid, _, states = fem.assemble_ul(mesh, fem.init_states(mesh, PARAMS),
                                           u, u, PARAMS)
        assert not any(s.state.yielded for s in states)
        scale = np.abs(resid).max()
        for node in (0, 2, 5):
            for direction in (0, 1):
                q = oracles.quadrature_oracle(mesh, 0, u, PARAMS,
                                              "f_int_component",
                                              (node, direction))
                dof = 2 * mesh.elems[0][node] + direction
                assert abs(q - resid[dof]) <= 1e-10 * scale

    def test_internal_force_fully_plastic(self):
        mesh = fem.gen_cylinder_mesh(1.0, 2.0, 1.0, 1, 1)
        u = np.zeros(mesh.ndof)
        u.reshape(-1, 2)[:, 0] = 1e-3 * mesh.nodes[:, 0]
        resid, _, states = fem.assemble_ul(mesh, fem.init_states(mesh, PARAMS),
                                           u, u, PARAMS)
        assert all(s.state.yielded for s in states)
        scale = np.abs(resid).max()
        for node in (0, 5):
            for direction in (0, 1):
                q = oracles.quadrature_oracle(mesh, 0, u, PARAMS,
                                              "f_int_component",
                                              (node, direction))
                dof = 2 * mesh.elems[0][node] + direction
                assert abs(q - resid[dof]) <= 1e-6 * scale

    def test_unknown_tag_rejected(self):
        mesh = fem.gen_cylinder_mesh(1.0, 2.0, 1.0, 1, 1)
        with pytest.raises(ValueError):
            oracles.quadrature_oracle(mesh, 0, np.zeros(mesh.ndof), PARAMS,
                                      "surface")


# ---------------------------------------------------------------------------
# finite-difference stiffness probe
# ---------------------------------------------------------------------------

class TestFdGlobalStiffness:
    def test_elastic_patch(self):
        mesh = fem.gen_cylinder_mesh(1.0, 2.0, 1.0, 2, 2)
        u = np.zeros(mesh.ndof)
        u.reshape(-1, 2)[:, 0] = -2e-4 * mesh.nodes[:, 0]
        u.reshape(-1, 2)[:, 1] = 1e-4 * mesh.nodes[:, 1]
        _, _, states = fem.assemble_ul(mesh, fem.init_states(mesh, PARAMS),
                                       u, u, PARAMS)
        rep = oracles.fd_global_stiffness(mesh, states, u, PARAMS, h=1e-7)
        assert rep.max_rel_err <= 1e-6
        assert rep.n_cols == mesh.ndof
        assert rep.h == 1e-7

    def test_dof_subset(self):
        """Probing at the virgin state would straddle the yield kink (the
        surface passes through the origin), so compress the patch first."""
        mesh = fem.gen_cylinder_mesh(1.0, 2.0, 1.0, 1, 1)
        u = np.zeros(mesh.ndof)
        u.reshape(-1, 2)[:, 0] = -2e-4 * mesh.nodes[:, 0]
        _, _, states = fem.assemble_ul(mesh, fem.init_states(mesh, PARAMS),
                                       u, u, PARAMS)
        rep = oracles.fd_global_stiffness(mesh, states, u, PARAMS,
                                          dofs=np.array([0, 3, 7]))
        assert rep.n_cols == 3
        assert rep.max_rel_err <= 1e-6

    def test_plastic_probe_from_previous_commit(self):
        """Committed plastic states sit exactly on the yield surface, where
        central differences average the elastic and plastic branch tangents;
        ``u_from`` probes the converged iterate of the step instead, which is
        strictly inside the plastic branch and differences cleanly."""
        mesh = fem.gen_cylinder_mesh(10.0, 15.0, 10.0, 2, 2)
        inner = mesh.bsets["inner"]
        top = mesh.bsets["top"]
        bottom = mesh.bsets["bottom"]
        profile = (mesh.nodes[inner, 1] - 5.0) * 0.2

        def bc_of_t(t):
            return fem.merge_bcs(
                fem.DirichletBC(2 * inner, profile * t),
                fem.DirichletBC(2 * inner + 1, np.zeros(inner.size)),
                fem.DirichletBC(2 * top + 1, np.zeros(top.size)),
                fem.DirichletBC(2 * bottom + 1, np.zeros(bottom.size)))

        trail = []
        fem.solve_ramp("UL", mesh, PARAMS, bc_of_t, 3, tol=1e-10,
                       observer=lambda s, st: trail.append((s.u.copy(), st)))
        (u_prev, states_prev), (u_last, states_last) = trail[-2:]
        assert any(r.state.yielded for r in states_last)

        dofs = np.arange(0, mesh.ndof, 5)
        smooth = oracles.fd_global_stiffness(mesh, states_prev, u_last, PARAMS,
                                             h=1e-6, dofs=dofs, u_from=u_prev)
        assert smooth.max_rel_err <= 1e-6

        corner = oracles.fd_global_stiffness(mesh, states_last, u_last, PARAMS,
                                             h=1e-6, dofs=dofs)
        assert corner.max_rel_err > 1e-3
        # passing the probe point itself is the documented default
        same = oracles.fd_global_stiffness(mesh, states_last, u_last, PARAMS,
                                           h=1e-6, dofs=dofs, u_from=u_last)
        assert same.max_rel_err == corner.max_rel_err
