"""Nearest-neighbour interaction potentials V(x) and their derivatives V'(x).

Every family is a pure function of the bond stretch ``x = q[n+1] - q[n]``.
Evaluation accepts scalars or numpy arrays; the vectorised path is what the
integrators use.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np


class PotentialError(ValueError):
    """Invalid potential specification or configuration fragment."""


class PotentialDomainError(ArithmeticError):
    """A bond stretch fell outside the domain of the potential.

    ``bond`` is the 1-based index n of the offending bond (q[n+1] - q[n]) when
    the evaluation came from a lattice, otherwise None.
    """

    def __init__(self, message: str, bond: int | None = None, x: float | None = None):
        super().__init__(message)
        self.bond = bond
        self.x = x


class Family(enum.Enum):
    FPUT_ALPHA = "fput_alpha"
    FPUT_BETA = "fput_beta"
    HARMONIC = "harmonic"
    HERTZ = "hertz"
    LANGMUIR = "langmuir"
    LANGMUIR_CUBIC = "langmuir_cubic"
    LANGMUIR_QUARTIC = "langmuir_quartic"
    LENNARD_JONES_21 = "lennard_jones_21"
    MORSE = "morse"
    TODA = "toda"
    TODA_CUBIC = "toda_cubic"
    TODA_QUARTIC = "toda_quartic"


PARAMETERS: dict[Family, tuple[str, ...]] = {
    Family.FPUT_ALPHA: ("alpha",),
    Family.FPUT_BETA: ("beta",),
    Family.HARMONIC: (),
    Family.HERTZ: ("c",),
    Family.LANGMUIR: (),
    Family.LANGMUIR_CUBIC: ("alpha",),
    Family.LANGMUIR_QUARTIC: ("beta",),
    Family.LENNARD_JONES_21: ("epsilon", "d"),
    Family.MORSE: ("gamma", "delta"),
    Family.TODA: (),
    Family.TODA_CUBIC: ("alpha",),
    Family.TODA_QUARTIC: ("beta",),
}

ALL_PARAMETER_NAMES = ("alpha", "beta", "c", "epsilon", "d", "gamma", "delta")


@dataclass(frozen=True)
class PotentialSpec:
    """A potential family together with its (validated) parameters."""

    family: Family
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        family = self.family
        if not isinstance(family, Family):
            try:
                family = Family(family)
            except ValueError:
                raise PotentialError(f"unknown potential family {self.family!r}") from None
            object.__setattr__(self, "family", family)
        allowed = PARAMETERS[family]
        extra = sorted(set(self.params) - set(allowed))
        if extra:
            raise PotentialError(
                f"parameter(s) {', '.join(extra)} not applicable to {family.value}"
                f" (expects: {', '.join(allowed) or 'none'})")
        missing = [k for k in allowed if k not in self.params]
        if missing:
            raise PotentialError(f"{family.value} requires parameter(s) {', '.join(missing)}")
        clean = {}
        for key in allowed:
            value = self.params[key]
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
                raise PotentialError(f"parameter {key} must be a real number, got {value!r}")
            value = float(value)
            if not math.isfinite(value):
                raise PotentialError(f"parameter {key} must be finite, got {value!r}")
            clean[key] = value
        if family is Family.LENNARD_JONES_21 and clean["d"] <= 0:
            raise PotentialError("lennard_jones_21 requires d > 0")
        object.__setattr__(self, "params", MappingProxyType(clean))

    def __getitem__(self, key: str) -> float:
        return self.params[key]

    def __hash__(self):
        return hash((self.family, tuple(sorted(self.params.items()))))

    def __eq__(self, other):
        if not isinstance(other, PotentialSpec):
            return NotImplemented
        return self.family is other.family and dict(self.params) == dict(other.params)

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"PotentialSpec({self.family.value}{', ' if args else ''}{args})"

    def to_dict(self) -> dict:
        return {"family": self.family.value, **self.params}

    # convenience constructors for the common families
    @classmethod
    def toda(cls) -> PotentialSpec:
        return cls(Family.TODA)

    @classmethod
    def harmonic(cls) -> PotentialSpec:
        return cls(Family.HARMONIC)

    @classmethod
    def fput_alpha(cls, alpha: float) -> PotentialSpec:
        return cls(Family.FPUT_ALPHA, {"alpha": alpha})

    @classmethod
    def fput_beta(cls, beta: float) -> PotentialSpec:
        return cls(Family.FPUT_BETA, {"beta": beta})


def parse_potential_spec(fragment: Mapping[str, object]) -> PotentialSpec:
    """Build a spec from a ``{"family": ..., "<param>": ...}`` mapping.

    Values may be strings (as read from a config file) or numbers. Keys may
    carry the ``potential.`` prefix used by the config grammar.
    """
    items = {}
    for key, value in fragment.items():
        key = key.removeprefix("potential.")
        items[key] = value
    if "family" not in items:
        raise PotentialError("potential fragment lacks a family")
    family_name = str(items.pop("family")).strip().lower()
    try:
        family = Family(family_name)
    except ValueError:
        names = ", ".join(f.value for f in Family)
        raise PotentialError(f"unknown potential family {family_name!r} (one of: {names})") from None
    params = {}
    for key, value in items.items():
        if key not in ALL_PARAMETER_NAMES:
            raise PotentialError(f"unknown potential parameter {key!r}")
        if isinstance(value, str):
            try:
                value = float(value)
            except ValueError:
                raise PotentialError(f"parameter {key} is not numeric: {value!r}") from None
        params[key] = value
    return PotentialSpec(family, params)


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        bad = np.flatnonzero(~np.isfinite(np.atleast_1d(arr)))[0]
        raise PotentialDomainError(
            f"non-finite bond stretch {np.atleast_1d(arr)[bad]!r}",
            bond=int(bad) + 1 if arr.ndim else None)
    return arr


def _check_lj_pole(spec: PotentialSpec, x: np.ndarray):
    hit = np.atleast_1d(x) == -spec["d"]
    if np.any(hit):
        bad = int(np.flatnonzero(hit)[0])
        raise PotentialDomainError(
            f"lennard_jones_21 singular at x = -d = {-spec['d']}",
            bond=bad + 1 if np.ndim(x) else None, x=-spec["d"])


def _hertz_power(neg_x: np.ndarray, exponent: float) -> np.ndarray:
    # |x|**exponent for x<0 via exp/log; 0 elsewhere
    out = np.zeros_like(neg_x)
    mask = neg_x < 0
    out[mask] = np.exp(exponent * np.log(-neg_x[mask]))
    return out


def _scalar_or_array(out, x):
    return float(out) if np.ndim(x) == 0 else out


def eval_potential(spec: PotentialSpec, x):
    """V(x) for the family in ``spec``; scalar in, scalar out.

    Overflow yields inf rather than a warning; the integrators test finiteness.
    """
    arr = _as_array(x)
    with np.errstate(over="ignore", invalid="ignore"):
        return _scalar_or_array(_potential(spec, arr), x)


def _potential(spec, arr):
    f = spec.family
    if f is Family.HARMONIC:
        v = 0.5 * arr ** 2
    elif f is Family.FPUT_ALPHA:
        v = 0.5 * arr ** 2 + spec["alpha"] / 3.0 * arr ** 3
    elif f is Family.FPUT_BETA:
        v = 0.5 * arr ** 2 + spec["beta"] / 4.0 * arr ** 4
    elif f is Family.HERTZ:
        v = spec["c"] * _hertz_power(np.atleast_1d(arr), 2.5).reshape(arr.shape)
    elif f is Family.LANGMUIR:
        v = np.exp(arr)
    elif f is Family.LANGMUIR_CUBIC:
        v = np.exp(arr) + spec["alpha"] * arr ** 3
    elif f is Family.LANGMUIR_QUARTIC:
        v = np.exp(arr) + spec["beta"] * arr ** 4
    elif f is Family.LENNARD_JONES_21:
        _check_lj_pole(spec, arr)
        d = spec["d"]
        v = spec["epsilon"] * (d / (d + arr) - 1.0) ** 2
    elif f is Family.MORSE:
        v = spec["gamma"] * (np.exp(-spec["delta"] * arr) - 1.0) ** 2
    elif f is Family.TODA:
        v = np.exp(-arr) + arr
    elif f is Family.TODA_CUBIC:
        v = np.exp(-arr) + arr + spec["alpha"] * arr ** 3
    elif f is Family.TODA_QUARTIC:
        v = np.exp(-arr) + arr + spec["beta"] * arr ** 4
    else:  # pragma: no cover
        raise PotentialError(f"unhandled family {f}")
    return v


def eval_dV(spec: PotentialSpec, x):
    """V'(x), i.e. minus the bond force, for the family in ``spec``.

    The Hertz derivative at x = 0 is the (continuous) one-sided limit 0.
    """
    arr = _as_array(x)
    with np.errstate(over="ignore", invalid="ignore"):
        return _scalar_or_array(_derivative(spec, arr), x)


def _derivative(spec, arr):
    f = spec.family
    if f is Family.HARMONIC:
        dv = arr.copy() if arr.ndim else arr * 1.0
    elif f is Family.FPUT_ALPHA:
        dv = arr + spec["alpha"] * arr ** 2
    elif f is Family.FPUT_BETA:
        dv = arr + spec["beta"] * arr ** 3
    elif f is Family.HERTZ:
        dv = -2.5 * spec["c"] * _hertz_power(np.atleast_1d(arr), 1.5).reshape(arr.shape)
    elif f is Family.LANGMUIR:
        dv = np.exp(arr)
    elif f is Family.LANGMUIR_CUBIC:
        dv = np.exp(arr) + 3.0 * spec["alpha"] * arr ** 2
    elif f is Family.LANGMUIR_QUARTIC:
        dv = np.exp(arr) + 4.0 * spec["beta"] * arr ** 3
    elif f is Family.LENNARD_JONES_21:
        _check_lj_pole(spec, arr)
        d = spec["d"]
        r = d / (d + arr)
        dv = -2.0 * spec["epsilon"] * (r - 1.0) * r * r / d
    elif f is Family.MORSE:
        e = np.exp(-spec["delta"] * arr)
        dv = -2.0 * spec["gamma"] * spec["delta"] * e * (e - 1.0)
    elif f is Family.TODA:
        dv = 1.0 - np.exp(-arr)
    elif f is Family.TODA_CUBIC:
        dv = 1.0 - np.exp(-arr) + 3.0 * spec["alpha"] * arr ** 2
    elif f is Family.TODA_QUARTIC:
        dv = 1.0 - np.exp(-arr) + 4.0 * spec["beta"] * arr ** 3
    else:  # pragma: no cover
        raise PotentialError(f"unhandled family {f}")
    return dv
