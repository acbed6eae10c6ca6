import numpy as np
import pytest

from fput_lattice.dynamics import LatticeState, SnapshotSeries
from fput_lattice.potentials import Family, PotentialSpec

# one representative parameter set per family (values used in the source study
# where they give a well-posed run on the Gaussian bump)
FAMILY_PARAMS = {
    Family.FPUT_ALPHA: {"alpha": 0.25},
    Family.FPUT_BETA: {"beta": 0.01},
    Family.HARMONIC: {},
    Family.HERTZ: {"c": 1.0},
    Family.LANGMUIR: {},
    Family.LANGMUIR_CUBIC: {"alpha": 0.1},
    Family.LANGMUIR_QUARTIC: {"beta": 0.01},
    Family.LENNARD_JONES_21: {"epsilon": 10.0, "d": 10.0},
    Family.MORSE: {"gamma": 0.5, "delta": 1.0},
    Family.TODA: {},
    Family.TODA_CUBIC: {"alpha": 0.1},
    Family.TODA_QUARTIC: {"beta": 10.0},
}

ALL_SPECS = [PotentialSpec(f, p) for f, p in FAMILY_PARAMS.items()]


@pytest.fixture(params=ALL_SPECS, ids=lambda s: s.family.value)
def any_spec(request):
    return request.param


def equilibrium_series(n=32, count=12, every=1.0):
    zeros = np.zeros(n)
    return SnapshotSeries([LatticeState(k * every, zeros, zeros) for k in range(count)])
