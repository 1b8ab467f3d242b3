"""Closed-form checks of the cylindrical-coordinate helpers.

Strategy:
1. metric / christoffel / shifter / basis_change against their textbook
   formulas at random radii, including the inverse relations.
2. the covariant derivative of a vector field with a known analytic
   gradient (rigid rotation and pure radial scaling).
3. shape_grad block layout, including the psi/r hoop coupling.
4. axis rejection: every constructor refuses radius <= r_min.
"""

from __future__ import annotations

import numpy as np
import pytest

from axifep import cylgeo

RNG = np.random.default_rng(41)
N_RADII = 50


def random_radii(n=N_RADII, lo=1e-3, hi=1e6):
    return np.exp(RNG.uniform(np.log(lo), np.log(hi), size=n))


class TestMetric:
    """g_cov = diag(1, r^2, 1) and its exact inverse."""

    def test_closed_form(self):
        for r in random_radii():
            g = cylgeo.metric(r)
            np.testing.assert_allclose(g.cov, np.diag([1.0, r * r, 1.0]),
                                       rtol=1e-13)
            np.testing.assert_allclose(g.contra,
                                       np.diag([1.0, 1.0 / (r * r), 1.0]),
                                       rtol=1e-13)

    def test_inverse_property(self):
        for r in random_radii():
            g = cylgeo.metric(r)
            np.testing.assert_allclose(g.cov @ g.contra, np.eye(3),
                                       rtol=0, atol=1e-13)

    def test_unit_radius_is_identity(self):
        g = cylgeo.metric(1.0)
        np.testing.assert_array_equal(g.cov, np.eye(3))
        np.testing.assert_array_equal(g.contra, np.eye(3))


class TestChristoffel:
    def test_components(self):
        for r in random_radii():
            chr_ = cylgeo.christoffel(r)
            assert chr_.gamma_hoop_mixed == pytest.approx(1.0 / r, rel=1e-15)
            assert chr_.gamma_r_hoophoop == pytest.approx(-r, rel=1e-15)

    def test_component_lookup_matches_array(self):
        chr_ = cylgeo.christoffel(2.5)
        arr = chr_.as_array()
        for a in range(3):
            for b in range(3):
                for c in range(3):
                    assert arr[a, b, c] == chr_.component(a, b, c)

    def test_array_sparsity(self):
        """Only Gamma^t_rt, Gamma^t_tr and Gamma^r_tt survive."""
        chr_ = cylgeo.christoffel(3.0)
        arr = chr_.as_array()
        expected = np.zeros((3, 3, 3))
        expected[1, 0, 1] = 1.0 / 3.0
        expected[1, 1, 0] = 1.0 / 3.0
        expected[0, 1, 1] = -3.0
        np.testing.assert_array_equal(arr, expected)


class TestShifter:
    def test_closed_form_and_inverse(self):
        for R, r in zip(random_radii(), random_radii()):
            S = cylgeo.shifter(R, r)
            np.testing.assert_allclose(S.mat, np.diag([1.0, R / r, 1.0]),
                                       rtol=1e-15)
            np.testing.assert_allclose(S.inverse() @ S.mat, np.eye(3),
                                       rtol=0, atol=1e-15)

    def test_identity_when_radii_coincide(self):
        S = cylgeo.shifter(7.25, 7.25)
        np.testing.assert_array_equal(S.mat, np.eye(3))


class TestBasisChange:
    def test_jacobians_are_mutual_inverses(self):
        for r in random_radii(20):
            ang = RNG.uniform(-np.pi, np.pi)
            bc = cylgeo.basis_change(r, ang)
            # the hoop row/column carry a divide-then-multiply round trip
            np.testing.assert_allclose(bc.cart_to_cyl @ bc.cyl_to_cart,
                                       np.eye(3), rtol=0, atol=1e-10)

    def test_determinant_is_radius(self):
        for r in random_radii(20):
            ang = RNG.uniform(-np.pi, np.pi)
            bc = cylgeo.basis_change(r, ang)
            assert np.linalg.det(bc.cyl_to_cart) == pytest.approx(r, rel=1e-12)

    def test_transform_of_identity(self):
        """A rigid map has identity mixed components at matching points."""
        bc = cylgeo.basis_change(4.0, 0.8)
        F = cylgeo.transform_defgrad_components(np.eye(3), bc, bc)
        np.testing.assert_allclose(F, np.eye(3), rtol=0, atol=1e-14)


class TestCovariantDerivative:
    def test_pure_radial_field(self):
        """W = c r e_r has W^r|_r = c, W^t|_t = c and nothing else."""
        c, r = 0.37, 5.2
        chr_ = cylgeo.christoffel(r)
        partials = np.zeros((3, 3))
        partials[0, 0] = c                       # dW^r/dr
        W = np.array([c * r, 0.0, 0.0])
        D = cylgeo.covariant_derivative_vector(partials, W, chr_)
        expected = np.zeros((3, 3))
        expected[0, 0] = c
        expected[1, 1] = c                       # Gamma^t_tr W^r = c
        np.testing.assert_allclose(D, expected, rtol=0, atol=1e-15)

    def test_rigid_rotation_field(self):
        """W = w e_theta (angular velocity style, W^t = w) is divergence free."""
        w, r = 1.3, 2.0
        chr_ = cylgeo.christoffel(r)
        partials = np.zeros((3, 3))              # components are constants
        W = np.array([0.0, w, 0.0])
        D = cylgeo.covariant_derivative_vector(partials, W, chr_)
        expected = np.zeros((3, 3))
        expected[1, 0] = w / r                   # Gamma^t_rt W^t
        expected[0, 1] = -r * w                  # Gamma^r_tt W^t
        np.testing.assert_allclose(D, expected, rtol=0, atol=1e-15)
        assert np.trace(D) == pytest.approx(0.0, abs=1e-15)

    def test_axial_field_unaffected(self):
        chr_ = cylgeo.christoffel(9.0)
        partials = RNG.normal(size=(3, 3))
        partials[[0, 1], :] = 0.0
        W = np.array([0.0, 0.0, 2.2])
        D = cylgeo.covariant_derivative_vector(partials, W, chr_)
        np.testing.assert_array_equal(D[2], partials[2])


class TestShapeGrad:
    def test_block_layout(self):
        chr_ = cylgeo.christoffel(2.0)
        psi, dpr, dpz = 0.5, -0.3, 0.8
        blocks = cylgeo.shape_grad(psi, (dpr, dpz), chr_)
        assert blocks.shape == (2, 3, 3)
        radial = np.zeros((3, 3))
        radial[0, 0] = dpr
        radial[0, 2] = dpz
        radial[1, 1] = psi / 2.0
        axial = np.zeros((3, 3))
        axial[2, 0] = dpr
        axial[2, 2] = dpz
        np.testing.assert_allclose(blocks[0], radial, rtol=0, atol=1e-16)
        np.testing.assert_allclose(blocks[1], axial, rtol=0, atol=1e-16)

    def test_matches_covariant_derivative(self):
        """shape_grad is the covariant derivative of psi e_r resp. psi e_z."""
        r = 3.7
        chr_ = cylgeo.christoffel(r)
        psi, dpr, dpz = 0.21, 0.9, -0.4
        blocks = cylgeo.shape_grad(psi, (dpr, dpz), chr_)

        partials = np.zeros((3, 3))
        partials[0, 0], partials[0, 2] = dpr, dpz
        D = cylgeo.covariant_derivative_vector(partials,
                                               np.array([psi, 0.0, 0.0]), chr_)
        np.testing.assert_allclose(blocks[0], D, rtol=0, atol=1e-16)

        partials = np.zeros((3, 3))
        partials[2, 0], partials[2, 2] = dpr, dpz
        D = cylgeo.covariant_derivative_vector(partials,
                                               np.array([0.0, 0.0, psi]), chr_)
        np.testing.assert_allclose(blocks[1], D, rtol=0, atol=1e-16)


class TestAxisRejection:
    """All constructors must refuse the coordinate singularity at r = 0."""

    @pytest.mark.parametrize("bad", [0.0, -1.0, np.nan, np.inf])
    def test_metric(self, bad):
        with pytest.raises(ValueError):
            cylgeo.metric(bad)

    @pytest.mark.parametrize("bad", [0.0, -0.5])
    def test_christoffel(self, bad):
        with pytest.raises(ValueError):
            cylgeo.christoffel(bad)

    def test_shifter_both_arguments(self):
        with pytest.raises(ValueError):
            cylgeo.shifter(0.0, 1.0)
        with pytest.raises(ValueError):
            cylgeo.shifter(1.0, 0.0)

    def test_r_min_threshold(self):
        with pytest.raises(ValueError):
            cylgeo.metric(1e-14, r_min=1e-12)
        cylgeo.metric(1e-11, r_min=1e-12)   # just above the cut is fine
