"""Run configuration: a line-oriented ``key = value`` file with dotted keys.

Example::

    # kicked Toda ring
    n_particles = 512
    potential.family = toda
    ic = periodic_kick
    t_max = 60

``[section]`` headers are also accepted and prefix the keys that follow
(``[potential]`` then ``family = toda``). Blank lines and ``#`` comments are
ignored. Every error names the key and the line it came from.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from pathlib import Path

from .dynamics import InitialCondition, IntegratorConfig, IntegratorKind, snapshot_grid
from .potentials import (
    ALL_PARAMETER_NAMES,
    PotentialError,
    PotentialSpec,
    parse_potential_spec,
)

DEFAULT_N = 2048
DEFAULT_SNAPSHOT_EVERY = 1.0
DEFAULT_T_MAX = 800.0

SCALAR_KEYS = (
    "n_particles", "potential.family", "ic", "integrator.kind", "integrator.rel_tol",
    "integrator.abs_tol", "integrator.dt", "t_max", "snapshot_every", "output_dir",
    "plot.trim_edges", "plot.times",
)
PARAM_KEYS = tuple(f"potential.{name}" for name in ALL_PARAMETER_NAMES)
KNOWN_KEYS = SCALAR_KEYS + PARAM_KEYS

COMMAND_LINE = "command line"


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | str | None = None):
        where = ""
        if key is not None:
            where = f"key {key!r}"
            if line is not None:
                where += f" ({'line ' + str(line) if isinstance(line, int) else line})"
            where += ": "
        super().__init__(where + message)
        self.detail = message
        self.key = key
        self.line = line


@dataclass(frozen=True)
class PlotOptions:
    trim_edges: int = 0
    times: tuple[float, ...] = ()


@dataclass(frozen=True)
class RunConfig:
    potential: PotentialSpec
    ic: InitialCondition
    n_particles: int = DEFAULT_N
    integrator: IntegratorConfig = field(default_factory=lambda: IntegratorConfig(
        t_max=DEFAULT_T_MAX, snapshot_every=DEFAULT_SNAPSHOT_EVERY))
    output_dir: Path = Path("runs")
    plot: PlotOptions = PlotOptions()

    def __post_init__(self):
        n = self.n_particles
        if isinstance(n, bool) or not isinstance(n, int) or n <= 0 or n % 2:
            raise ConfigError(f"must be a positive even integer, got {n!r}", "n_particles")
        if n < 8:
            raise ConfigError(f"the initial conditions need at least 8 sites, got {n}", "n_particles")
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        grid = snapshot_grid(self.integrator.t_max, self.integrator.snapshot_every)
        for t in self.plot.times:
            if not _on_grid(t, grid):
                raise ConfigError(f"time {t!r} is not on the snapshot grid "
                                  f"(multiples of {self.integrator.snapshot_every!r} up to "
                                  f"{self.integrator.t_max!r})", "plot.times")
        if not 0 <= self.plot.trim_edges < n / 2:
            raise ConfigError(f"must lie in [0, N/2), got {self.plot.trim_edges}", "plot.trim_edges")

    def manifest(self) -> dict:
        return {
            "n_particles": self.n_particles,
            "potential": self.potential.to_dict(),
            "ic": self.ic.value,
            "integrator": self.integrator.to_dict(),
            "output_dir": str(self.output_dir),
            "plot": {"trim_edges": self.plot.trim_edges, "times": list(self.plot.times)},
        }


def _on_grid(t: float, grid) -> bool:
    return any(abs(t - g) <= 1e-9 * max(1.0, abs(g)) for g in grid)


def parse_config_text(text: str, overrides: Mapping[str, str] | None = None) -> RunConfig:
    entries: dict[str, tuple[str, int | str]] = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if not section:
                raise ConfigError("empty section header", None, lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if section:
            key = f"{section}.{key}"
        if key not in KNOWN_KEYS:
            raise ConfigError("unknown key" + _suggest(key), key, lineno)
        if key in entries:
            raise ConfigError(f"duplicate key (first set on line {entries[key][1]})", key, lineno)
        entries[key] = (value, lineno)
    for key, value in (overrides or {}).items():
        if key not in KNOWN_KEYS:
            raise ConfigError("unknown key" + _suggest(key), key, COMMAND_LINE)
        entries[key] = (str(value), COMMAND_LINE)
    return _build(entries)


def load_config(path, overrides: Mapping[str, str] | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    return parse_config_text(text, overrides)


def config_from_overrides(overrides: Mapping[str, str]) -> RunConfig:
    return parse_config_text("", overrides)


def _suggest(key: str) -> str:
    import difflib
    close = difflib.get_close_matches(key, KNOWN_KEYS, n=1)
    return f" (did you mean {close[0]!r}?)" if close else ""


def _get(entries, key):
    return entries.get(key, (None, None))


def _as_float(entries, key, default=None, positive=False, nonneg=False):
    value, line = _get(entries, key)
    if value is None:
        return default
    try:
        x = float(value)
    except ValueError:
        raise ConfigError(f"expected a number, got {value!r}", key, line) from None
    if not math.isfinite(x):
        raise ConfigError(f"must be finite, got {value!r}", key, line)
    if positive and not x > 0:
        raise ConfigError(f"must be > 0, got {value!r}", key, line)
    if nonneg and x < 0:
        raise ConfigError(f"must be >= 0, got {value!r}", key, line)
    return x


def _as_int(entries, key, default):
    value, line = _get(entries, key)
    if value is None:
        return default
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"expected an integer, got {value!r}", key, line) from None


def _as_enum(entries, key, enum_cls, default=None):
    value, line = _get(entries, key)
    if value is None:
        if default is None:
            raise ConfigError("is required", key)
        return default
    try:
        return enum_cls(value.strip().lower())
    except ValueError:
        names = ", ".join(e.value for e in enum_cls)
        raise ConfigError(f"unknown value {value!r} (one of: {names})", key, line) from None


def _build(entries) -> RunConfig:
    n = _as_int(entries, "n_particles", DEFAULT_N)
    if n <= 0 or n % 2:
        raise ConfigError(f"must be a positive even integer, got {n}", "n_particles",
                          _get(entries, "n_particles")[1])
    family, family_line = _get(entries, "potential.family")
    if family is None:
        raise ConfigError("is required", "potential.family")
    fragment = {"family": family}
    for key in PARAM_KEYS:
        if key in entries:
            fragment[key] = entries[key][0]
    try:
        potential = parse_potential_spec(fragment)
    except PotentialError as exc:
        bad = next((k for k in PARAM_KEYS if k in entries and k.split(".", 1)[1] in str(exc)),
                   "potential.family")
        raise ConfigError(str(exc), bad, _get(entries, bad)[1] or family_line) from None

    ic = _as_enum(entries, "ic", InitialCondition)
    kind = _as_enum(entries, "integrator.kind", IntegratorKind, IntegratorKind.RK45)
    base = IntegratorConfig()
    integ_kwargs = dict(
        kind=kind,
        rel_tol=_as_float(entries, "integrator.rel_tol", base.rel_tol, positive=True),
        abs_tol=_as_float(entries, "integrator.abs_tol", base.abs_tol, positive=True),
        dt=_as_float(entries, "integrator.dt", base.dt, positive=True),
        t_max=_as_float(entries, "t_max", DEFAULT_T_MAX, nonneg=True),
        snapshot_every=_as_float(entries, "snapshot_every", DEFAULT_SNAPSHOT_EVERY, positive=True),
    )
    try:
        integrator = IntegratorConfig(**integ_kwargs)
    except ValueError as exc:
        key = "integrator.dt" if "dt" in str(exc) else "t_max"
        raise ConfigError(str(exc), key, _get(entries, key)[1]) from None
    if kind is not IntegratorKind.RK45:
        per = round(integrator.snapshot_every / integrator.dt)
        if per < 1 or abs(per * integrator.dt - integrator.snapshot_every) > 1e-9:
            raise ConfigError(f"dt={integrator.dt!r} must divide snapshot_every="
                              f"{integrator.snapshot_every!r}", "integrator.dt",
                              _get(entries, "integrator.dt")[1])

    times_raw, times_line = _get(entries, "plot.times")
    times: tuple[float, ...] = ()
    if times_raw:
        try:
            times = tuple(float(x) for x in times_raw.replace(",", " ").split())
        except ValueError:
            raise ConfigError(f"expected a comma-separated list of numbers, got {times_raw!r}",
                              "plot.times", times_line) from None
    plot = PlotOptions(trim_edges=_as_int(entries, "plot.trim_edges", 0), times=times)
    output_dir = _get(entries, "output_dir")[0] or "runs"
    try:
        return RunConfig(potential=potential, ic=ic, n_particles=n, integrator=integrator,
                         output_dir=Path(output_dir), plot=plot)
    except ConfigError as exc:
        raise ConfigError(exc.detail, exc.key, _get(entries, exc.key)[1]) from None


def _fmt(x: float) -> str:
    return repr(float(x))


def write_config(cfg: RunConfig) -> str:
    """Effective configuration as text that :func:`parse_config_text` reads back exactly."""
    integ = cfg.integrator
    lines = [
        f"n_particles = {cfg.n_particles}",
        f"potential.family = {cfg.potential.family.value}",
    ]
    lines += [f"potential.{k} = {_fmt(v)}" for k, v in cfg.potential.params.items()]
    lines += [
        f"ic = {cfg.ic.value}",
        f"integrator.kind = {integ.kind.value}",
        f"integrator.rel_tol = {_fmt(integ.rel_tol)}",
        f"integrator.abs_tol = {_fmt(integ.abs_tol)}",
        f"integrator.dt = {_fmt(integ.dt)}",
        f"t_max = {_fmt(integ.t_max)}",
        f"snapshot_every = {_fmt(integ.snapshot_every)}",
        f"output_dir = {cfg.output_dir}",
        f"plot.trim_edges = {cfg.plot.trim_edges}",
    ]
    if cfg.plot.times:
        lines.append("plot.times = " + ", ".join(_fmt(t) for t in cfg.plot.times))
    return "\n".join(lines) + "\n"


def with_output_dir(cfg: RunConfig, path) -> RunConfig:
    return replace(cfg, output_dir=Path(path))
