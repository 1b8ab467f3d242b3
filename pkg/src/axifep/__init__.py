"""Axisymmetric finite-strain elasto-plasticity in cylindrical coordinates.

Subpackages/modules:

* ``cylgeo``        cylindrical metrics, Christoffel symbols, shifter, basis changes
* ``kinematics``    deformation gradients, Cauchy-Green tensors, log strain, Jacobian split
* ``material_mcc``  Hencky elasticity + Modified Cam-Clay return map with consistent tangents
* ``fem_axisym``    Q8 mesh, UL/TL assembly, Dirichlet handling, Newton-Raphson driver
* ``oracles``       independent brute-force verifiers (FD tangents, sub-stepping, quadrature)
* ``cli``           the ``axifep`` command line front end

All tensors are stored as dense 3x3 arrays of mixed components in the
coordinate order (r, theta, z); the hoop direction is index 1.  The 2*pi
factor of the circumferential integral is dropped everywhere, so volumes,
forces and reactions are per radian of circumference.
"""

__version__ = "0.1.0"
