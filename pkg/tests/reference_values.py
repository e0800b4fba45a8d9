"""Frozen oracle values consumed by the test suite.

Every constant here was produced (and cross-verified) by a standalone oracle
script under tools/oracles/, run before the package was built:

  - tools/oracles/disk_family_oracle.py  (symbolic verification + closed forms
    + adaptive quadrature cross-check for the unit-disk solution family)
  - tools/oracles/square_green_energy_oracle.py  (collapsed eigenfunction
    series, 40-digit arithmetic, cross-checked against a from-scratch
    Richardson-extrapolated finite-difference solve)

Regenerate by running those scripts; do not edit values by hand.
"""

import math

# ---------------------------------------------------------------------------
# Unit disk, uniform density
# ---------------------------------------------------------------------------
DISK_E0 = 1.0 / (16.0 * math.pi)  # = 0.019894367886486918
DISK_DE_DLAMBDA_AT_0 = 1.0 / (192.0 * math.pi**2)  # = 5.277144981371759e-04

# ---------------------------------------------------------------------------
# Unit disk closed-form family, indexed by t = a^2:
#     u_t(r) = 2 ln((1+t)/(1+t r^2)),  lam(t) = 8 pi t/(1+t),  psi = u/lam
# ---------------------------------------------------------------------------
DISK_FAMILY_LAMBDA = {
    0.5: 8.377580409572781,
    1.0: 12.566370614359172,
    3.0: 18.84955592153876,
}
DISK_FAMILY_ENERGY = {
    0.5: 0.025830289146162706,
    1.0: 0.030740328530378128,
    3.0: 0.04500861903721337,
}
DISK_FAMILY_ENTROPY = {
    0.5: 1.1174043453085778,
    1.0: 1.0652883441695642,
    3.0: 0.834239283982916,
}

# density mass inside radius w of the center at lam = 7.9 pi (t = 79):
#     M(w) = (1+t) w^2 / (1 + t w^2)
DISK_MASS_R025_AT_79 = 0.8421052631578947
DISK_MASS_R035_AT_79 = 0.9178178412549755
DISK_MAX_U_AT_79 = 8.764053269347762

# ---------------------------------------------------------------------------
# Unit square, uniform density (collapsed series, 40-digit arithmetic)
# ---------------------------------------------------------------------------
SQUARE_E0 = 0.017572126869394213

# ---------------------------------------------------------------------------
# First Dirichlet eigenvalue anchors for the standard (unprojected) first
# eigenvalue at lam = 0:  sigma_hat_1 = |O| * lambda_1(O)
#   disk:   lambda_1 = j_{0,1}^2 (first zero of Bessel J0), |O| = pi
#   square: lambda_1 = 2 pi^2,                              |O| = 1
# ---------------------------------------------------------------------------
BESSEL_J0_FIRST_ZERO = 2.404825557695773
DISK_SIGMA_HAT_1_AT_0 = math.pi * BESSEL_J0_FIRST_ZERO**2  # = 18.168399...
SQUARE_SIGMA_HAT_1_AT_0 = 2.0 * math.pi**2  # = 19.739208...
