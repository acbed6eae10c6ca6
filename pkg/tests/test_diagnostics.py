import math

import numpy as np
import pytest
from conftest import equilibrium_series
from hypothesis import given, settings
from hypothesis import strategies as st

from fput_lattice.diagnostics import (
    conservation_report,
    hamiltonian,
    harmonic_exact,
    harmonic_frequencies,
    total_momentum,
)
from fput_lattice.dynamics import (
    IntegratorConfig,
    LatticeState,
    integrate,
    make_initial_condition,
)
from fput_lattice.potentials import PotentialSpec

TODA = PotentialSpec.toda()
HARMONIC = PotentialSpec.harmonic()


def test_hamiltonian_examples():
    z = np.zeros(16)
    assert hamiltonian(LatticeState(0.0, z, z), TODA) == 16.0
    assert hamiltonian(LatticeState(0.0, z, z), HARMONIC) == 0.0
    assert hamiltonian(make_initial_condition("periodic_kick", 8), HARMONIC) == 8.0


def test_hamiltonian_uses_cyclic_bond():
    q = np.array([0.0, 0.0, 0.0, 1.0])
    # bonds: 0, 0, 1, and the closing bond q1 - q4 = -1
    assert hamiltonian(LatticeState(0.0, q, np.zeros(4)), HARMONIC) == 1.0


def test_total_momentum_examples():
    assert total_momentum(LatticeState(0.0, np.zeros(8), np.zeros(8))) == 0.0
    for n in (8, 64, 2048):
        assert total_momentum(make_initial_condition("periodic_kick", n)) == 2.0
    assert total_momentum(make_initial_condition("gaussian_bump", 64)) == 0.0


def test_total_momentum_is_compensated():
    p = np.array([1e16, 1.0, -1e16, 1.0])
    assert total_momentum(LatticeState(0.0, np.zeros(4), p)) == 2.0


def test_equilibrium_report_has_zero_drift():
    r = conservation_report(equilibrium_series(), TODA)
    assert r.max_rel_energy_drift == 0.0 and r.max_abs_momentum_drift == 0.0
    assert len(r.times) == len(r.hamiltonian) == len(r.momentum) == 12


def test_report_requires_snapshots():
    from fput_lattice.dynamics import SnapshotSeries
    with pytest.raises(ValueError):
        conservation_report(SnapshotSeries([]), TODA)


def test_verlet_toda_energy_drift():
    ic = make_initial_condition("gaussian_bump", 128)
    series = integrate(ic, TODA, IntegratorConfig(kind="verlet", dt=0.05, t_max=200))
    assert conservation_report(series, TODA).max_rel_energy_drift <= 1e-5


def test_rk45_momentum_drift_long_run():
    ic = make_initial_condition("periodic_kick", 128)
    series = integrate(ic, TODA, IntegratorConfig(rel_tol=1e-4, t_max=800))
    assert conservation_report(series, TODA).max_abs_momentum_drift <= 1e-8


def test_report_table_format():
    series = integrate(make_initial_condition("gaussian_bump", 16), TODA,
                       IntegratorConfig(kind="verlet", t_max=2))
    table = conservation_report(series, TODA).to_table().splitlines()
    assert table[0] == "t\tH\tP"
    assert len(table) == 1 + 3 + 1
    assert table[-1].startswith("# summary\tmax_rel_energy_drift=")
    t, h, p = table[1].split("\t")
    assert float(t) == 0.0 and float(h) == hamiltonian(series[0], TODA)


def test_harmonic_frequencies():
    w = harmonic_frequencies(8)
    assert w[0] == 0.0
    assert w[4] == pytest.approx(2.0)
    np.testing.assert_allclose(w[1:], w[1:][::-1])


def test_harmonic_exact_identity_at_zero():
    ic = make_initial_condition("gaussian_bump", 32)
    assert harmonic_exact(ic, 0.0) == ic


def test_harmonic_exact_single_mode():
    n, k, t = 64, 5, 3.7
    sites = np.arange(1, n + 1)
    mode = np.cos(2 * np.pi * k * sites / n)
    out = harmonic_exact(LatticeState(0.0, mode, np.zeros(n)), t)
    w = 2 * abs(math.sin(math.pi * k / n))
    np.testing.assert_allclose(out.q, math.cos(w * t) * mode, atol=1e-13)


def test_harmonic_exact_centre_of_mass_drifts():
    n = 16
    ic = LatticeState(0.0, np.zeros(n), np.full(n, 0.5))
    out = harmonic_exact(ic, 4.0)
    np.testing.assert_allclose(out.q, 2.0, atol=1e-13)
    np.testing.assert_allclose(out.p, 0.5, atol=1e-13)


def test_harmonic_exact_matches_fine_verlet():
    ic = make_initial_condition("gaussian_bump", 32)
    series = integrate(ic, HARMONIC, IntegratorConfig(kind="rk4", dt=0.01, t_max=5))
    exact = harmonic_exact(ic, 5.0)
    assert np.max(np.abs(series[-1].q - exact.q)) < 1e-9


@settings(max_examples=40, deadline=None)
@given(t1=st.floats(0, 100), t2=st.floats(0, 100), seed=st.integers(0, 2**32 - 1))
def test_harmonic_exact_is_a_flow(t1, t2, seed):
    rng = np.random.default_rng(seed)
    ic = LatticeState(0.0, rng.normal(size=24), rng.normal(size=24))
    two = harmonic_exact(harmonic_exact(ic, t1), t2)
    one = harmonic_exact(ic, t1 + t2)
    assert np.max(np.abs(two.q - one.q)) <= 1e-12 * max(1.0, t1 + t2)
    assert np.max(np.abs(two.p - one.p)) <= 1e-12 * max(1.0, t1 + t2)


@settings(max_examples=40, deadline=None)
@given(t=st.floats(0, 1000), seed=st.integers(0, 2**32 - 1))
def test_harmonic_exact_conserves_energy(t, seed):
    rng = np.random.default_rng(seed)
    ic = LatticeState(0.0, rng.normal(size=24), rng.normal(size=24))
    h0 = hamiltonian(ic, HARMONIC)
    assert abs(hamiltonian(harmonic_exact(ic, t), HARMONIC) - h0) <= 1e-10 * abs(h0)
