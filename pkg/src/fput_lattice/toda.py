"""Toda-lattice spectral tools.

Flaschka's change of variables

    a_n = exp((q_n - q_{n+1}) / 2) / 2,    b_n = -p_n / 2

turns the Toda ring into an isospectral flow of the periodic Jacobi matrix
with diagonal b and off-diagonal a. The constant background (a = 1/2, b = 0)
has the single band [-1, 1]; eigenvalues outside it correspond to solitons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import LatticeState, SnapshotSeries
from .eigen import periodic_jacobi_eigenvalues

BAND = (-1.0, 1.0)
QUADRATURE_NODES = 2000


class UnphysicalStateError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class FlaschkaState:
    t: float
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("a and b must be 1-D arrays of equal length")
        if not np.all(a > 0):
            raise ValueError("Flaschka a_n must all be positive")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def jacobi(self) -> PeriodicJacobiMatrix:
        return PeriodicJacobiMatrix(self.b, self.a)


@dataclass(frozen=True, eq=False)
class PeriodicJacobiMatrix:
    """Symmetric ring matrix: diag[n] on the diagonal, off[n] coupling n and n+1.

    off[-1] is the corner entry joining the last site to the first.
    """

    diag: np.ndarray
    off: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        o = np.asarray(self.off, dtype=float)
        if d.shape != o.shape or d.ndim != 1 or d.size < 2:
            raise ValueError("diag and off must be 1-D with equal length N >= 2")
        if not np.all(o > 0):
            raise ValueError("off-diagonal entries must be positive")
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "off", o)

    @property
    def n(self) -> int:
        return self.diag.size

    def dense(self) -> np.ndarray:
        n = self.n
        m = np.diag(self.diag)
        idx = np.arange(n)
        np.add.at(m, (idx, (idx + 1) % n), self.off)
        np.add.at(m, ((idx + 1) % n, idx), self.off)
        return m


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    band_interval: tuple[float, float]
    outliers: list[tuple[float, float]] = field(default_factory=list)

    @property
    def outlier_values(self) -> np.ndarray:
        return np.array([v for v, _ in self.outliers])


def to_flaschka(state: LatticeState) -> FlaschkaState:
    diff = state.q - np.roll(state.q, -1)
    if np.max(diff) > 1400.0:
        n = int(np.argmax(diff)) + 1
        raise UnphysicalStateError(f"bond {n} stretch {diff[n - 1]:.3g} overflows exp()")
    a = 0.5 * np.exp(0.5 * diff)
    if not np.all(a > 0):
        n = int(np.flatnonzero(~(a > 0))[0]) + 1
        raise UnphysicalStateError(f"bond {n}: a_n underflowed to zero")
    return FlaschkaState(state.t, a, -0.5 * state.p)


def toda_flaschka_rhs(f: FlaschkaState) -> tuple[np.ndarray, np.ndarray]:
    """(da, db) with da_n = a_n (b_{n+1} - b_n), db_n = 2 (a_n^2 - a_{n-1}^2)."""
    a, b = f.a, f.b
    da = a * (np.roll(b, -1) - b)
    a2 = a * a
    db = 2.0 * (a2 - np.roll(a2, 1))
    return da, db


def spectrum(m: PeriodicJacobiMatrix, band: tuple[float, float] = BAND) -> SpectrumReport:
    ev = periodic_jacobi_eigenvalues(m.diag, m.off)
    lo, hi = band
    outliers = []
    for v in ev:
        if v < lo:
            outliers.append((float(v), float(lo - v)))
        elif v > hi:
            outliers.append((float(v), float(v - hi)))
    return SpectrumReport(ev, (float(ev[0]), float(ev[-1])), outliers)


def state_spectrum(state: LatticeState) -> SpectrumReport:
    return spectrum(to_flaschka(state).jacobi())


def spectral_deviation(series: SnapshotSeries) -> tuple[float, np.ndarray]:
    """Largest drift of the sorted ring spectrum from its initial value.

    Returns the maximum deviation and the per-snapshot maxima.
    """
    spectra = [state_spectrum(s).eigenvalues for s in series]
    ref = spectra[0]
    per = np.array([float(np.max(np.abs(ev - ref))) for ev in spectra])
    return float(np.max(per)), per


def _chebyshev_nodes(count: int) -> np.ndarray:
    k = np.arange(1, count + 1)
    return np.cos((2 * k - 1) * np.pi / (2 * count))


def abelian_integrals(lam: float, nodes: int | None = None) -> tuple[float, float]:
    """Real parts of int z dz / w and int dz / w from the lower band edge to lam + i0.

    Here w = -sqrt(z - 1) sqrt(z + 1) is the branch of sqrt(z^2 - 1) used on
    the single-band curve. Both integrals reduce to the logarithmic potential
    and the Cauchy transform of the arcsine density on [-1, 1], which
    Gauss-Chebyshev nodes integrate with geometric convergence for |lam| > 1.

    Returns (momentum-type integral, frequency-type integral).
    """
    if not abs(lam) > 1.0:
        raise ValueError(f"|lambda| must exceed 1 (outside the band), got {lam}")
    if nodes is None:
        # convergence rate is exp(-2 n arccosh|lam|); resolve the band edge
        kappa_lo = math.sqrt(2.0 * (abs(lam) - 1.0))
        nodes = max(QUADRATURE_NODES, min(5_000_000, math.ceil(20.0 / kappa_lo)))
    x = _chebyshev_nodes(nodes)
    gap = lam - x
    potential = math.log(2.0) + float(np.mean(np.log(np.abs(gap))))   # arccosh|lam|
    cauchy = float(np.mean(1.0 / gap))                               # sign(lam)/sqrt(lam^2-1)
    omega = -potential
    big_omega = -(lam * lam - 1.0) * cauchy
    return big_omega, omega


def predict_soliton_speed(lam: float, nodes: int | None = None) -> float:
    """Velocity (sites per unit time) of the soliton attached to eigenvalue ``lam``.

    Ratio of the two band integrals from :func:`abelian_integrals` on the
    constant background. Eigenvalues below the band give right-moving solitons
    (v > 0), those above it left-moving ones; |v| = sinh(k)/k with
    k = arccosh|lam|, tending to the sound speed 1 at the band edges.
    """
    num, den = abelian_integrals(lam, nodes)
    return -num / den
