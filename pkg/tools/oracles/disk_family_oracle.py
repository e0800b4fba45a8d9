"""Independent oracle for the closed-form solution family on the unit disk.

The exponential mean-field problem

    -lap(psi) = exp(lam*psi) / integral(exp(lam*psi)),   psi = 0 on the boundary

has, on the unit disk, a one-parameter family of radial solutions indexed by
t = a^2 > 0:

    u_t(r)   = 2*ln((1+t) / (1+t*r^2))        (u = lam*psi)
    lam(t)   = 8*pi*t / (1+t)
    rho_t(r) = (1+t) / (pi * (1+t*r^2)^2)

This script
  1. verifies the family symbolically (sympy): substitutes u_t into the PDE,
  2. derives closed forms for energy, entropy, and mass-in-window by symbolic
     integration,
  3. cross-checks every closed form by adaptive numerical quadrature,
  4. prints the frozen constants consumed by the test suite
     (tests/reference_values.py).

Run:  python tools/oracles/disk_family_oracle.py
"""

import numpy as np
import sympy as sp
from scipy.integrate import quad

# ----------------------------------------------------------------------------
# 1. Symbolic verification of the family
# ----------------------------------------------------------------------------

def verify_family_symbolically() -> None:
    r, t = sp.symbols("r t", positive=True)
    u = 2 * sp.log((1 + t) / (1 + t * r**2))

    # Radial laplacian: u'' + u'/r
    lap_u = sp.diff(u, r, 2) + sp.diff(u, r) / r

    # integral of exp(u) over the disk (polar): 2*pi * int_0^1 exp(u) r dr
    Z = sp.integrate(2 * sp.pi * r * sp.exp(u), (r, 0, 1))
    Z = sp.simplify(Z)
    assert sp.simplify(Z - sp.pi * (1 + t)) == 0, f"Z mismatch: {Z}"

    lam = 8 * sp.pi * t / (1 + t)
    # PDE in u-form: -lap(u) = lam * exp(u)/Z
    residual = sp.simplify(-lap_u - lam * sp.exp(u) / Z)
    assert residual == 0, f"family does not satisfy the equation: {residual}"
    print("symbolic check: -lap(u_t) == lam(t)*exp(u_t)/Z(t)  ... OK")


# ----------------------------------------------------------------------------
# 2. Closed forms (derived symbolically here, then frozen)
# ----------------------------------------------------------------------------

def lam_of_t(t: float) -> float:
    return 8.0 * np.pi * t / (1.0 + t)


def energy_of_t(t: float) -> float:
    """E(t) = (1+t) * ((1+t)*ln(1+t) - t) / (8*pi*t^2)."""
    return (1.0 + t) * ((1.0 + t) * np.log1p(t) - t) / (8.0 * np.pi * t * t)


def entropy_of_t(t: float) -> float:
    """S(t) = ln(pi) + 2 - (1 + 2/t)*ln(1+t)."""
    return np.log(np.pi) + 2.0 - (1.0 + 2.0 / t) * np.log1p(t)


def mass_in_window(t: float, w: float) -> float:
    """Fraction of rho-mass inside radius w around the center."""
    return (1.0 + t) * w * w / (1.0 + t * w * w)


def derive_closed_forms_symbolically() -> None:
    r, t, w = sp.symbols("r t w", positive=True)
    rho = (1 + t) / (sp.pi * (1 + t * r**2) ** 2)
    u = 2 * sp.log((1 + t) / (1 + t * r**2))
    lam = 8 * sp.pi * t / (1 + t)
    psi = u / lam

    mass = sp.simplify(sp.integrate(2 * sp.pi * r * rho, (r, 0, 1)))
    assert mass == 1, f"mass: {mass}"

    # E = (1/2) * <psi> = (1/(2*lam)) * int rho*u
    mean_u = sp.simplify(sp.integrate(2 * sp.pi * r * rho * u, (r, 0, 1)))
    E = sp.simplify(mean_u / (2 * lam))
    E_closed = (1 + t) * ((1 + t) * sp.log(1 + t) - t) / (8 * sp.pi * t**2)
    assert sp.simplify(E - E_closed) == 0, f"energy mismatch: {E}"

    S = sp.simplify(-sp.integrate(2 * sp.pi * r * rho * sp.log(rho), (r, 0, 1)))
    S_closed = sp.log(sp.pi) + 2 - (1 + 2 / t) * sp.log(1 + t)
    assert sp.simplify(sp.expand_log(S - S_closed, force=True)) == 0, f"entropy mismatch: {S}"

    M = sp.simplify(sp.integrate(2 * sp.pi * r * rho, (r, 0, w)))
    M_closed = (1 + t) * w**2 / (1 + t * w**2)
    assert sp.simplify(M - M_closed) == 0, f"mass-in-window mismatch: {M}"

    # dE/dlam at lam=0 (t->0):  E(t) ~ 1/(16*pi) * (1 + 2*t/3), lam ~ 8*pi*t
    dE_dlam_0 = sp.limit(sp.diff(E_closed, t) / sp.diff(8 * sp.pi * t / (1 + t), t), t, 0)
    assert sp.simplify(dE_dlam_0 - 1 / (192 * sp.pi**2)) == 0, f"dE/dlam(0): {dE_dlam_0}"

    # entropy identity along the family: S = -2*lam*E + ln(Z), Z = pi*(1+t)
    ident = sp.simplify(
        sp.expand_log(S_closed + 2 * lam * E_closed - sp.log(sp.pi * (1 + t)), force=True)
    )
    assert ident == 0, f"entropy identity residual: {ident}"
    print("symbolic check: closed forms for E, S, mass window, dE/dlam(0)  ... OK")


# ----------------------------------------------------------------------------
# 3. Numerical cross-check by quadrature
# ----------------------------------------------------------------------------

def crosscheck_numerically() -> None:
    for t in (0.5, 1.0, 3.0, 79.0):
        rho = lambda r: (1 + t) / (np.pi * (1 + t * r**2) ** 2)
        u = lambda r: 2 * np.log((1 + t) / (1 + t * r**2))
        lam = lam_of_t(t)

        mass, _ = quad(lambda r: 2 * np.pi * r * rho(r), 0, 1)
        E_num, _ = quad(lambda r: 2 * np.pi * r * rho(r) * u(r) / (2 * lam), 0, 1)
        S_num, _ = quad(lambda r: -2 * np.pi * r * rho(r) * np.log(rho(r)), 0, 1)
        M_num, _ = quad(lambda r: 2 * np.pi * r * rho(r), 0, 0.25)

        assert abs(mass - 1) < 1e-12
        assert abs(E_num - energy_of_t(t)) < 1e-12, (t, E_num, energy_of_t(t))
        assert abs(S_num - entropy_of_t(t)) < 1e-11, (t, S_num, entropy_of_t(t))
        assert abs(M_num - mass_in_window(t, 0.25)) < 1e-12
    print("numerical quadrature cross-check at t in {0.5, 1, 3, 79}  ... OK")


# ----------------------------------------------------------------------------
# 4. Freeze
# ----------------------------------------------------------------------------

def main() -> None:
    verify_family_symbolically()
    derive_closed_forms_symbolically()
    crosscheck_numerically()

    print()
    print("# Frozen reference values (disk family) -- paste into tests/reference_values.py")
    print(f"DISK_E0 = {1.0 / (16.0 * np.pi)!r}                 # uniform-density energy, 1/(16*pi)")
    print(f"DISK_DE_DLAMBDA_AT_0 = {1.0 / (192.0 * np.pi**2)!r}  # 1/(192*pi^2)")
    for t in (0.5, 1.0, 3.0):
        print(f"# t = a^2 = {t}")
        print(f"DISK_FAMILY_LAMBDA[{t}] = {lam_of_t(t)!r}")
        print(f"DISK_FAMILY_ENERGY[{t}] = {energy_of_t(t)!r}")
        print(f"DISK_FAMILY_ENTROPY[{t}] = {entropy_of_t(t)!r}")
    t79 = 79.0
    print(f"# lam = 7.9*pi corresponds to t = {t79}")
    print(f"DISK_MASS_R025_AT_79 = {mass_in_window(t79, 0.25)!r}")
    print(f"DISK_MASS_R035_AT_79 = {mass_in_window(t79, 0.35)!r}")
    print(f"DISK_MAX_U_AT_79 = {2.0 * np.log1p(t79)!r}")


if __name__ == "__main__":
    main()
