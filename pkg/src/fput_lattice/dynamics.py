"""Equations of motion on the periodic ring and the time integrators.

The lattice is N unit-mass particles with cyclic neighbours, x[N+1] = x[1].
States are stored 0-based internally; anything user facing (files, reports)
uses the 1-based site numbering n = 1..N.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .potentials import PotentialDomainError, PotentialSpec, eval_dV


class IntegrationError(RuntimeError):
    """Time integration could not continue.

    Attributes
    ----------
    t : float
        Time reached before the failure.
    series : SnapshotSeries or None
        Snapshots completed before the failure (partial output).
    """

    def __init__(self, message: str, t: float, series: SnapshotSeries | None = None):
        super().__init__(message)
        self.t = t
        self.series = series


class InitialCondition(enum.Enum):
    GAUSSIAN_BUMP = "gaussian_bump"
    PERIODIC_KICK = "periodic_kick"


class IntegratorKind(enum.Enum):
    RK45 = "rk45"
    VERLET = "verlet"
    RK4 = "rk4"


@dataclass(frozen=True, eq=False)
class LatticeState:
    """Positions ``q`` and velocities ``p`` of the ring at time ``t``."""

    t: float
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        p = np.array(self.p, dtype=float)
        if q.ndim != 1 or p.ndim != 1 or q.shape != p.shape:
            raise ValueError(f"q and p must be 1-D of equal length, got {q.shape} and {p.shape}")
        if q.size < 2:
            raise ValueError("a ring needs at least N = 2 sites")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p)) and math.isfinite(self.t)):
            raise ValueError("lattice state has non-finite entries")
        q.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self) -> int:
        return self.q.size

    def roll(self, k: int) -> LatticeState:
        """Rotate the ring by k sites (site n moves to n + k)."""
        return LatticeState(self.t, np.roll(self.q, k), np.roll(self.p, k))

    def with_time(self, t: float) -> LatticeState:
        return LatticeState(t, self.q, self.p)

    def __eq__(self, other):
        if not isinstance(other, LatticeState):
            return NotImplemented
        return (self.t == other.t and np.array_equal(self.q, other.q)
                and np.array_equal(self.p, other.p))


@dataclass(frozen=True)
class PhaseDerivative:
    dq: np.ndarray
    dp: np.ndarray


@dataclass(frozen=True)
class IntegratorConfig:
    kind: IntegratorKind = IntegratorKind.RK45
    rel_tol: float = 1e-4
    abs_tol: float = 1e-6
    dt: float = 0.05
    t_max: float = 800.0
    snapshot_every: float = 1.0

    def __post_init__(self):
        kind = self.kind if isinstance(self.kind, IntegratorKind) else IntegratorKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not (self.t_max >= 0 and math.isfinite(self.t_max)):
            raise ValueError(f"t_max must be finite and >= 0, got {self.t_max}")
        if not self.snapshot_every > 0:
            raise ValueError(f"snapshot_every must be > 0, got {self.snapshot_every}")
        if kind is IntegratorKind.RK45:
            if not (self.rel_tol > 0 and self.abs_tol > 0):
                raise ValueError("rel_tol and abs_tol must be > 0 for the adaptive integrator")
        else:
            if not self.dt > 0:
                raise ValueError(f"dt must be > 0, got {self.dt}")
            if self.dt > self.snapshot_every * (1 + 1e-12):
                raise ValueError("dt must not exceed snapshot_every")

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "rel_tol": self.rel_tol, "abs_tol": self.abs_tol,
                "dt": self.dt, "t_max": self.t_max, "snapshot_every": self.snapshot_every}


@dataclass
class SnapshotSeries:
    """States on the output grid 0, DT, 2 DT, ... plus run metadata."""

    states: list[LatticeState]
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.states:
            n = self.states[0].n
            if any(s.n != n for s in self.states):
                raise ValueError("all snapshots must share the ring size")
            ts = [s.t for s in self.states]
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValueError("snapshot times must be strictly increasing")

    def __len__(self):
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]

    def __iter__(self):
        return iter(self.states)

    @property
    def n(self) -> int:
        return self.states[0].n

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def q(self) -> np.ndarray:
        return np.array([s.q for s in self.states])

    @property
    def p(self) -> np.ndarray:
        return np.array([s.p for s in self.states])

    def at_time(self, t: float, tol: float = 1e-9) -> LatticeState:
        times = self.times
        i = int(np.argmin(np.abs(times - t)))
        if abs(times[i] - t) > tol:
            raise KeyError(t)
        return self.states[i]

    def roll(self, k: int) -> SnapshotSeries:
        return SnapshotSeries([s.roll(k) for s in self.states], dict(self.manifest))


def make_initial_condition(kind, n: int) -> LatticeState:
    """Gaussian bump on the trivial background, or the kicked period-2 state.

    GaussianBump:  q_n = exp(-((n - N/4)/4)^2),  p_n = 0
    PeriodicKick:  q_n = 0,  p_n = (-1)^n + 2 [n = N/2]
    with n = 1..N.
    """
    kind = kind if isinstance(kind, InitialCondition) else InitialCondition(kind)
    if n % 2 or n < 8:
        raise ValueError(f"N must be even and >= 8, got {n}")
    sites = np.arange(1, n + 1)
    if kind is InitialCondition.GAUSSIAN_BUMP:
        q = np.exp(-(((sites - n / 4) / 4.0) ** 2))
        p = np.zeros(n)
    else:
        q = np.zeros(n)
        p = np.where(sites % 2 == 0, 1.0, -1.0)
        p[n // 2 - 1] += 2.0
    return LatticeState(0.0, q, p)


def bond_stretch(q: np.ndarray) -> np.ndarray:
    """x_n = q[n+1] - q[n] with the cyclic closure q[N+1] = q[1]."""
    return np.roll(q, -1) - q


def _accel(q: np.ndarray, spec: PotentialSpec) -> np.ndarray:
    f = eval_dV(spec, bond_stretch(q))
    return f - np.roll(f, 1)


def rhs(state: LatticeState, spec: PotentialSpec) -> PhaseDerivative:
    """dq_n = p_n,  dp_n = V'(q[n+1] - q[n]) - V'(q[n] - q[n-1])."""
    return PhaseDerivative(dq=state.p.copy(), dp=_accel(state.q, spec))


def _verlet(q, p, a, spec, dt):
    p_half = p + 0.5 * dt * a
    q_new = q + dt * p_half
    a_new = _accel(q_new, spec)
    return q_new, p_half + 0.5 * dt * a_new, a_new


def step_verlet(state: LatticeState, spec: PotentialSpec, dt: float) -> LatticeState:
    """One kick-drift-kick velocity-Verlet step of size dt."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    q, p, _ = _verlet(state.q, state.p, _accel(state.q, spec), spec, dt)
    return LatticeState(state.t + dt, q, p)


def _rk4(q, p, spec, dt):
    k1q, k1p = p, _accel(q, spec)
    k2q, k2p = p + 0.5 * dt * k1p, _accel(q + 0.5 * dt * k1q, spec)
    k3q, k3p = p + 0.5 * dt * k2p, _accel(q + 0.5 * dt * k2q, spec)
    k4q, k4p = p + dt * k3p, _accel(q + dt * k3q, spec)
    q_new = q + dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    p_new = p + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    return q_new, p_new


def snapshot_grid(t_max: float, every: float) -> np.ndarray:
    count = int(math.floor(t_max / every + 1e-9))
    return every * np.arange(count + 1)


def _base_manifest(state, spec, cfg):
    return {"n_particles": state.n, "potential": spec.to_dict(), "integrator": cfg.to_dict()}


def integrate_fixed(state: LatticeState, spec: PotentialSpec, cfg: IntegratorConfig,
                    manifest: dict | None = None) -> SnapshotSeries:
    """Uniform-step integration (velocity Verlet or classical RK4)."""
    if cfg.kind is IntegratorKind.RK45:
        raise ValueError("integrate_fixed needs a verlet or rk4 configuration")
    per_snapshot = round(cfg.snapshot_every / cfg.dt)
    if per_snapshot < 1 or abs(per_snapshot * cfg.dt - cfg.snapshot_every) > 1e-9:
        raise ValueError(f"dt={cfg.dt} does not divide snapshot_every={cfg.snapshot_every}")
    grid = snapshot_grid(cfg.t_max, cfg.snapshot_every)
    info = _base_manifest(state, spec, cfg)
    info.update(manifest or {})
    info["steps"] = 0
    states = [state]
    q, p = state.q, state.p
    t0 = state.t
    try:
        a = _accel(q, spec) if cfg.kind is IntegratorKind.VERLET else None
        for k in range(1, grid.size):
            for _ in range(per_snapshot):
                if cfg.kind is IntegratorKind.VERLET:
                    q, p, a = _verlet(q, p, a, spec, cfg.dt)
                else:
                    q, p = _rk4(q, p, spec, cfg.dt)
                info["steps"] += 1
            if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
                raise IntegrationError(f"state became non-finite before t={t0 + grid[k]}",
                                       t=states[-1].t, series=SnapshotSeries(states, info))
            states.append(LatticeState(t0 + grid[k], q, p))
    except PotentialDomainError as exc:
        raise IntegrationError(f"{exc} (bond {exc.bond}) after t={states[-1].t}",
                               t=states[-1].t, series=SnapshotSeries(states, info)) from exc
    return SnapshotSeries(states, info)


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# fifth-order minus embedded fourth-order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# Shampine's 4th-order continuous extension: y(t + th h) = y + h K^T P [th, th^2, th^3, th^4]
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

# PI step-size controller constants (Hairer & Wanner's DOPRI5 choices)
_SAFETY = 0.9
_BETA = 0.04
_EXPO = 0.2 - 0.75 * _BETA
_FAC_MIN = 0.2
_FAC_MAX = 10.0


def _initial_step(fun, t0, y0, f0, rtol, atol, t_span):
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t_span)
    f1 = fun(y0 + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, t_span)


def integrate_adaptive(state: LatticeState, spec: PotentialSpec, cfg: IntegratorConfig,
                       manifest: dict | None = None) -> SnapshotSeries:
    """Dormand-Prince 5(4) with PI step control and dense output on the grid.

    A step is accepted when every component of the local error estimate is
    within ``abs_tol + rel_tol * max(|y_old|, |y_new|)``.
    """
    if cfg.kind is not IntegratorKind.RK45:
        raise ValueError("integrate_adaptive needs an rk45 configuration")
    n = state.n
    grid = state.t + snapshot_grid(cfg.t_max, cfg.snapshot_every)
    info = _base_manifest(state, spec, cfg)
    info.update(manifest or {})
    states = [state]
    t_end = grid[-1]
    if grid.size == 1:
        info.update(h0=None, steps=0, rejected=0)
        return SnapshotSeries(states, info)

    def fun(y):
        return np.concatenate((y[n:], _accel(y[:n], spec)))

    rtol, atol = cfg.rel_tol, cfg.abs_tol
    h_min = 1e-12 * cfg.t_max
    t = state.t
    y = np.concatenate((state.q, state.p))
    K = np.empty((7, 2 * n))
    steps = rejected = 0
    next_out = 1
    try:
        K[0] = fun(y)
        h = _initial_step(fun, t, y, K[0], rtol, atol, t_end - t)
        info["h0"] = float(h)
        err_old = 1e-4
        reject_last = False
        while next_out < grid.size:
            if h < h_min:
                raise IntegrationError(
                    f"step size underflow (h={h:.3g}) at t={t:.17g}; problem may be stiff",
                    t=t, series=SnapshotSeries(states, info))
            last = t + h >= t_end
            if last:
                h = t_end - t
            for i in range(1, 7):
                dy = np.dot(_A[i], K[:i]) * h
                K[i] = fun(y + dy)
            y_new = y + h * (_B[:6] @ K[:6])
            err_vec = h * (_E @ K)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            with np.errstate(invalid="ignore", over="ignore"):
                err = float(np.max(np.abs(err_vec) / scale))
            if not math.isfinite(err):
                err = 1e10
            fac11 = err ** _EXPO if err > 0 else 0.0
            if err <= 1.0:
                fac = fac11 / err_old ** _BETA
                fac = min(1.0 / _FAC_MIN, max(1.0 / _FAC_MAX, fac / _SAFETY))
                h_new = h / fac
                if reject_last:
                    h_new = min(h_new, h)
                err_old = max(err, 1e-4)
                t_new = t_end if last else t + h
                while next_out < grid.size and grid[next_out] <= t_new + 1e-12 * max(1.0, abs(t_new)):
                    tk = grid[next_out]
                    if last and next_out == grid.size - 1 or tk == t_new:
                        yk = y_new
                    else:
                        theta = (tk - t) / h
                        powers = np.array([theta, theta ** 2, theta ** 3, theta ** 4])
                        yk = y + h * ((_P @ powers) @ K)
                    states.append(LatticeState(tk, yk[:n], yk[n:]))
                    next_out += 1
                t, y = t_new, y_new
                K[0] = K[6]
                steps += 1
                reject_last = False
                h = h_new
            else:
                rejected += 1
                h = h / min(1.0 / _FAC_MIN, fac11 / _SAFETY)
                reject_last = True
    except PotentialDomainError as exc:
        raise IntegrationError(f"{exc} (bond {exc.bond}) near t={t:.17g}",
                               t=t, series=SnapshotSeries(states, info)) from exc
    info.update(steps=steps, rejected=rejected)
    return SnapshotSeries(states, info)


def integrate(state: LatticeState, spec: PotentialSpec, cfg: IntegratorConfig,
              manifest: dict | None = None) -> SnapshotSeries:
    if cfg.kind is IntegratorKind.RK45:
        return integrate_adaptive(state, spec, cfg, manifest)
    return integrate_fixed(state, spec, cfg, manifest)
