import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fput_lattice.dynamics import (
    IntegratorConfig,
    LatticeState,
    integrate,
    make_initial_condition,
    rhs,
)
from fput_lattice.eigen import (
    EigenvalueConvergenceError,
    folded_order,
    periodic_jacobi_eigenvalues,
    tridiagonal_eigenvalues,
)
from fput_lattice.potentials import PotentialSpec
from fput_lattice.toda import (
    FlaschkaState,
    PeriodicJacobiMatrix,
    UnphysicalStateError,
    abelian_integrals,
    predict_soliton_speed,
    spectral_deviation,
    spectrum,
    state_spectrum,
    to_flaschka,
    toda_flaschka_rhs,
)

TODA = PotentialSpec.toda()


def _background(n):
    return PeriodicJacobiMatrix(np.zeros(n), np.full(n, 0.5))


# ---------------------------------------------------------------- Flaschka variables

def test_flaschka_of_rest_state():
    z = np.zeros(12)
    f = to_flaschka(LatticeState(0.0, z, z))
    np.testing.assert_array_equal(f.a, 0.5)
    np.testing.assert_array_equal(f.b, 0.0)


def test_flaschka_single_stretched_bond():
    q = np.zeros(8)
    q[4:] = -2 * math.log(2)        # q_4 - q_5 = 2 ln 2 (1-based)
    f = to_flaschka(LatticeState(0.0, q, np.zeros(8)))
    assert f.a[3] == pytest.approx(1.0, abs=1e-15)
    assert f.a[7] == pytest.approx(0.25, abs=1e-15)   # the closing bond pays it back


def test_flaschka_of_periodic_kick():
    n = 16
    f = to_flaschka(make_initial_condition("periodic_kick", n))
    expected = np.where(np.arange(1, n + 1) % 2 == 0, -0.5, 0.5)
    expected[n // 2 - 1] = -1.5
    np.testing.assert_array_equal(f.b, expected)


def test_flaschka_overflow_is_unphysical():
    q = np.zeros(8)
    q[0] = 2000.0
    with pytest.raises(UnphysicalStateError):
        to_flaschka(LatticeState(0.0, q, np.zeros(8)))


def test_flaschka_state_validation():
    with pytest.raises(ValueError):
        FlaschkaState(0.0, np.array([0.5, 0.0]), np.zeros(2))
    with pytest.raises(ValueError):
        FlaschkaState(0.0, np.full(3, 0.5), np.zeros(2))


def test_flaschka_rhs_vanishes_on_background():
    da, db = toda_flaschka_rhs(FlaschkaState(0.0, np.full(10, 0.5), np.zeros(10)))
    assert not np.any(da) and not np.any(db)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_flaschka_rhs_db_telescopes(seed):
    rng = np.random.default_rng(seed)
    f = FlaschkaState(0.0, rng.uniform(0.1, 2, 20), rng.normal(size=20))
    _, db = toda_flaschka_rhs(f)
    assert abs(math.fsum(db)) <= 1e-14 * np.sum(f.a ** 2)


def test_flaschka_rhs_is_chain_rule_image_of_lattice_rhs():
    ic = make_initial_condition("gaussian_bump", 32)
    series = integrate(ic, TODA, IntegratorConfig(t_max=6))
    for state in series:
        f = to_flaschka(state)
        d = rhs(state, TODA)
        da_chain = f.a * 0.5 * (d.dq - np.roll(d.dq, -1))
        db_chain = -0.5 * d.dp
        da, db = toda_flaschka_rhs(f)
        np.testing.assert_allclose(da, da_chain, atol=1e-12, rtol=0)
        np.testing.assert_allclose(db, db_chain, atol=1e-12, rtol=0)


# ---------------------------------------------------------------- eigenvalues

def test_two_site_ring():
    rep = spectrum(PeriodicJacobiMatrix(np.zeros(2), np.array([0.5, 0.5])))
    np.testing.assert_allclose(rep.eigenvalues, [-1.0, 1.0], atol=1e-15)
    assert rep.outliers == []


@pytest.mark.parametrize("n", [2, 3, 4, 7, 16, 64, 127, 256])
def test_constant_background_is_cosine_band(n):
    ev = spectrum(_background(n)).eigenvalues
    expected = np.sort(np.cos(2 * np.pi * np.arange(n) / n))
    np.testing.assert_allclose(ev, expected, atol=1e-10, rtol=0)


def test_background_has_no_outliers():
    rep = spectrum(_background(128))
    assert rep.outliers == []
    assert rep.band_interval[0] >= -1 - 1e-12 and rep.band_interval[1] <= 1 + 1e-12


def test_one_strong_bond_creates_symmetric_outlier_pair():
    off = np.full(64, 0.5)
    off[20] = 1.0
    m = PeriodicJacobiMatrix(np.zeros(64), off)
    rep = spectrum(m)
    assert len(rep.outliers) == 2
    (lo, mlo), (hi, mhi) = rep.outliers
    assert lo == pytest.approx(-hi, abs=1e-12)
    assert mlo == pytest.approx(-1 - lo) and mhi == pytest.approx(hi - 1)
    np.testing.assert_allclose(rep.eigenvalues, np.linalg.eigvalsh(m.dense()), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 128), seed=st.integers(0, 2**32 - 1))
def test_ring_eigenvalues_match_dense_solver(n, seed):
    rng = np.random.default_rng(seed)
    m = PeriodicJacobiMatrix(rng.normal(size=n), rng.uniform(0.05, 2.0, n))
    ours = spectrum(m).eigenvalues
    dense = np.linalg.eigvalsh(m.dense())
    norm = np.linalg.norm(m.dense(), 2)
    assert np.all(np.diff(ours) >= 0)
    assert np.max(np.abs(ours - dense)) <= 1e-10 * norm


def test_folded_order_keeps_ring_neighbours_close():
    for n in (5, 8, 33):
        order = folded_order(n)
        assert sorted(order) == list(range(n))
        pos = np.empty(n, dtype=int)
        pos[order] = np.arange(n)
        gaps = [abs(pos[i] - pos[(i + 1) % n]) for i in range(n)]
        assert max(gaps) <= 2


def test_tridiagonal_solver_and_iteration_cap():
    d, e = [2.0, -1.0, 0.5, 3.0], [0.3, 0.7, -0.2]
    t = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
    np.testing.assert_allclose(tridiagonal_eigenvalues(d, e), np.linalg.eigvalsh(t), atol=1e-14)
    with pytest.raises(EigenvalueConvergenceError):
        tridiagonal_eigenvalues(d, e, max_iter=0)


def test_jacobi_input_validation():
    with pytest.raises(ValueError):
        periodic_jacobi_eigenvalues([0.0], [0.5])
    with pytest.raises(ValueError):
        PeriodicJacobiMatrix(np.zeros(4), np.array([0.5, 0.5, 0.0, 0.5]))


def test_gaussian_bump_has_outlier_pair():
    rep = state_spectrum(make_initial_condition("gaussian_bump", 256))
    values = rep.outlier_values
    assert (values < -1).sum() >= 1 and (values > 1).sum() >= 1


def test_isospectral_along_short_toda_run():
    ic = make_initial_condition("gaussian_bump", 64)
    series = integrate(ic, TODA, IntegratorConfig(rel_tol=1e-9, abs_tol=1e-11, t_max=40,
                                                  snapshot_every=2))
    dev, per = spectral_deviation(series)
    assert per[0] == 0.0 and len(per) == len(series)
    assert dev < 1e-6


def test_spectrum_drifts_for_non_integrable_lattice():
    ic = make_initial_condition("gaussian_bump", 64)
    spec = PotentialSpec.fput_alpha(0.25)
    series = integrate(ic, spec, IntegratorConfig(t_max=40, snapshot_every=2))
    assert spectral_deviation(series)[0] > 1e-3


# ---------------------------------------------------------------- soliton speed

@pytest.mark.parametrize("kappa", [0.1, 0.5, 1.0, 2.0, 3.0])
def test_speed_magnitude_is_sinh_over_kappa(kappa):
    lam = math.cosh(kappa)
    assert abs(predict_soliton_speed(lam)) == pytest.approx(math.sinh(kappa) / kappa, abs=1e-6)
    assert abs(predict_soliton_speed(-lam)) == pytest.approx(math.sinh(kappa) / kappa, abs=1e-6)


def test_speed_examples():
    # eigenvalues below the band belong to right-movers (b = -p/2 < 0 for p > 0)
    assert predict_soliton_speed(math.cosh(1)) == pytest.approx(-1.175201, abs=1e-6)
    assert predict_soliton_speed(-math.cosh(2)) == pytest.approx(1.813430, abs=1e-6)


def test_speed_sonic_limit():
    for eps in (1e-4, 1e-6, 1e-9):
        assert abs(predict_soliton_speed(1 + eps)) == pytest.approx(1.0, abs=10 * math.sqrt(eps))
        assert abs(predict_soliton_speed(-1 - eps)) == pytest.approx(1.0, abs=10 * math.sqrt(eps))


@pytest.mark.parametrize("lam", [1.0, -1.0, 0.3, 0.0])
def test_speed_inside_band_is_domain_error(lam):
    with pytest.raises(ValueError):
        predict_soliton_speed(lam)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(1.001, 50), b=st.floats(1.001, 50))
def test_speed_is_odd_and_monotone_in_modulus(a, b):
    va, vb = predict_soliton_speed(a), predict_soliton_speed(b)
    assert predict_soliton_speed(-a) == pytest.approx(-va, rel=1e-12)
    if b > a * (1 + 1e-9):
        assert abs(vb) > abs(va)
    assert va < 0


def _quad_oracle(lam):
    """Direct quadrature of z dz / w and dz / w from the lower band edge to lam + i0."""
    quad = pytest.importorskip("scipy.integrate").quad

    def w(z):
        zc = complex(z, 1e-300)
        return -np.sqrt(zc - 1) * np.sqrt(zc + 1)

    def integral(g):
        if lam > 1:
            band = quad(lambda z: (g(z) / w(z)).real, -1, 1, limit=200)[0]
            return band + quad(lambda z: (g(z) / w(z)).real, 1, lam, limit=200)[0]
        return -quad(lambda z: (g(z) / w(z)).real, lam, -1, limit=200)[0]

    return integral(lambda z: z), integral(lambda z: 1.0)


@pytest.mark.parametrize("lam", [1.01, 1.3, math.cosh(1), 4.0, -1.05, -2.5, -math.cosh(2)])
def test_band_integrals_match_direct_quadrature(lam):
    num, den = abelian_integrals(lam)
    q_num, q_den = _quad_oracle(lam)
    assert num == pytest.approx(q_num, abs=1e-9)
    assert den == pytest.approx(q_den, abs=1e-9)
    assert predict_soliton_speed(lam) == pytest.approx(-q_num / q_den, abs=1e-8)


def test_band_integrals_closed_forms():
    lam = 2.0
    num, den = abelian_integrals(lam)
    assert den == pytest.approx(-math.acosh(lam), abs=1e-12)
    assert num == pytest.approx(-math.sqrt(lam * lam - 1), abs=1e-12)
