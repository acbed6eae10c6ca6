"""Eigenvalues of a periodic Jacobi (tridiagonal-plus-corner) matrix.

The ring couples site N back to site 1, so the matrix is tridiagonal except
for the corner entries. Listing the sites in the folded order
1, N, 2, N-1, 3, ... puts every ring neighbour at most two positions apart,
which gives a symmetric pentadiagonal matrix. That band is reduced to
tridiagonal form with Givens rotations (bulge chasing), and the tridiagonal
eigenvalues come from the implicit-shift QL iteration.
"""

from __future__ import annotations

import math

import numpy as np


class EigenvalueConvergenceError(ArithmeticError):
    pass


def folded_order(n: int) -> np.ndarray:
    """Site permutation 0, n-1, 1, n-2, ... that folds the ring into a band."""
    lo = np.arange((n + 1) // 2)
    hi = n - 1 - np.arange(n // 2)
    order = np.empty(n, dtype=int)
    order[0::2] = lo
    order[1::2] = hi
    return order


def periodic_to_banded(diag, off) -> list[list[float]]:
    """Dense (list of rows) folded matrix with bandwidth 2."""
    n = len(diag)
    order = folded_order(n)
    pos = np.empty(n, dtype=int)
    pos[order] = np.arange(n)
    a = [[0.0] * n for _ in range(n)]
    for site in range(n):
        i = pos[site]
        a[i][i] = float(diag[site])
    for site in range(n):
        i, j = pos[site], pos[(site + 1) % n]
        a[i][j] += float(off[site])
        a[j][i] = a[i][j]
    return a


def band_to_tridiagonal(a: list[list[float]]) -> tuple[list[float], list[float]]:
    """Givens reduction of a symmetric bandwidth-2 matrix (modified in place).

    Returns the diagonal and the subdiagonal of the orthogonally similar
    tridiagonal matrix.
    """
    n = len(a)
    for j in range(n - 2):
        i, col = j + 2, j
        while i < n:
            y = a[i][col]
            if y != 0.0:
                x = a[i - 1][col]
                r = math.hypot(x, y)
                c, s = x / r, y / r
                lo, hi = max(0, i - 5), min(n, i + 5)
                ra, rb = a[i - 1], a[i]
                for k in range(lo, hi):
                    u, v = ra[k], rb[k]
                    ra[k] = c * u + s * v
                    rb[k] = c * v - s * u
                for k in range(lo, hi):
                    row = a[k]
                    u, v = row[i - 1], row[i]
                    row[i - 1] = c * u + s * v
                    row[i] = c * v - s * u
                a[i][col] = a[col][i] = 0.0
                a[i - 1][col] = a[col][i - 1] = r
            # the rotation of rows i-1, i fills the entry two columns further out
            col, i = i - 1, i + 2
    d = [a[k][k] for k in range(n)]
    e = [a[k + 1][k] for k in range(n - 1)]
    return d, e


def tridiagonal_eigenvalues(d, e, max_iter: int = 60) -> np.ndarray:
    """Implicit-shift QL on a symmetric tridiagonal matrix; ascending eigenvalues.

    ``d`` holds the n diagonal entries, ``e`` the n - 1 off-diagonal ones.
    """
    d = [float(x) for x in d]
    n = len(d)
    e = [float(x) for x in e] + [0.0]
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= 2.2e-16 * dd:
                    break
                m += 1
            if m == l:
                break
            if it == max_iter:
                raise EigenvalueConvergenceError(
                    f"QL iteration did not converge for eigenvalue {l} after {max_iter} sweeps")
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return np.sort(np.array(d))


def periodic_jacobi_eigenvalues(diag, off) -> np.ndarray:
    """All eigenvalues (ascending) of the ring Jacobi matrix.

    ``off[k]`` couples sites k and k+1, and ``off[-1]`` couples the last site
    back to the first. For N = 2 both bonds join the same pair of sites.
    """
    n = len(diag)
    if n < 2 or len(off) != n:
        raise ValueError("need N >= 2 diagonal and N off-diagonal entries")
    a = periodic_to_banded(diag, off)
    d, e = band_to_tridiagonal(a)
    return tridiagonal_eigenvalues(d, e)
