"""Independent oracle for the uniform-density energy on the unit square.

The quantity of interest is

    E0 = (1/|O|^2) * (1/2) * 2 * integral over O x O of G(x,y)
       = (1/2) * int_O g,   where  -lap(g) = 1/|O| on O = (0,1)^2,  g = 0 on the
                            boundary, and |O| = 1.

Two independent computations:

  A. Exact eigenfunction series. With phi_mn = 2 sin(m pi x) sin(n pi y) and
     eigenvalues pi^2 (m^2 + n^2),

        E0 = (1/2) * sum_{m,n odd} (int phi_mn)^2 / (pi^2 (m^2+n^2))
           = (32 / pi^6) * sum_{m,n odd} 1 / (m^2 n^2 (m^2+n^2)).

     The inner sum collapses analytically: with
     sum_{n odd} 1/n^2 = pi^2/8 and sum_{n odd} 1/(n^2+m^2) =
     (pi/(4m)) tanh(pi m / 2),

        E0 = 1/24 - (8/pi^5) * sum_{m odd} tanh(pi m / 2) / m^5,

     a single series with 1/m^5 terms, evaluated here in 40-digit arithmetic
     with the exact zeta tail for tanh ~ 1.

  B. Fine-grid five-point finite differences (node-centered, written from
     scratch here, deliberately not sharing code with any package) with
     Richardson extrapolation over h, h/2 assuming O(h^2) error.

Run:  python tools/oracles/square_green_energy_oracle.py
"""

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla


def series_value(nmax: int = 501) -> float:
    import mpmath as mp

    mp.mp.dps = 40
    s = mp.mpf(0)
    for m in range(1, nmax + 1, 2):
        s += mp.tanh(mp.pi * m / 2) / mp.mpf(m) ** 5
    # tail with tanh ~ 1 (error below 1e-300 for nmax >= 501):
    # sum_{m odd > nmax} 1/m^5 = (1 - 2^-5) zeta(5) - partial
    partial = sum(mp.mpf(1) / mp.mpf(m) ** 5 for m in range(1, nmax + 1, 2))
    s += (1 - mp.mpf(2) ** -5) * mp.zeta(5) - partial
    return float(mp.mpf(1) / 24 - 8 / mp.pi**5 * s)


def raw_double_series(nmax: int) -> float:
    m = np.arange(1, nmax + 1, 2, dtype=float)
    M, N = np.meshgrid(m, m, indexing="ij")
    terms = 1.0 / (M * M * N * N * (M * M + N * N))
    return 32.0 / np.pi**6 * float(np.sort(terms.ravel()).sum())


def fd_value(n: int) -> float:
    """E0 on an n x n node-centered interior grid (h = 1/(n+1))."""
    h = 1.0 / (n + 1)
    main = 2.0 * np.ones(n)
    off = -np.ones(n - 1)
    T = sps.diags([off, main, off], [-1, 0, 1], format="csr")
    I = sps.identity(n, format="csr")
    A = ((sps.kron(I, T) + sps.kron(T, I)) / h**2).tocsc()
    rhs = np.ones(n * n)  # f = 1/|O| = 1
    g = spla.spsolve(A, rhs)
    return 0.5 * float(g.sum()) * h * h


def main() -> None:
    exact = series_value()
    assert abs(exact - series_value(301)) < 1e-16, "series not converged"
    # the raw double series must approach the collapsed one from below
    raw = raw_double_series(4001)
    assert abs(exact - raw) < 5e-12, (exact, raw)

    v1, v2, v3 = fd_value(255), fd_value(511), fd_value(1023)
    rich = v3 + (v3 - v2) / 3.0
    order = np.log2(abs(v1 - v2) / abs(v2 - v3))
    print(f"series value           : {exact!r}")
    print(f"fd h=1/256             : {v1!r}")
    print(f"fd h=1/512             : {v2!r}")
    print(f"fd h=1/1024            : {v3!r}")
    print(f"fd observed order      : {order:.3f}")
    print(f"fd Richardson          : {rich!r}")
    assert abs(rich - exact) < 1e-9, (rich, exact)
    print()
    print("# Frozen reference value (unit square) -- paste into tests/reference_values.py")
    print(f"SQUARE_E0 = {exact!r}")


if __name__ == "__main__":
    main()
