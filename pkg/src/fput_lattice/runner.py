"""Run orchestration behind the command line: simulate, verify, analyze, plot, sweep.

A run directory holds

    config.txt        effective configuration (readable by load_config)
    snapshots.ndjson  manifest record followed by one state per snapshot

and, after the later stages, the report tables they write next to it.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    DetectorConfig,
    Label,
    RegionReport,
    Segment,
    SolitonTrack,
    SpeedComparison,
    classify_regions,
    compare_speeds,
    detect_solitons,
)
from .config import RunConfig, load_config, write_config
from .diagnostics import ConservationReport, conservation_report
from .dynamics import (
    IntegrationError,
    SnapshotSeries,
    integrate,
    make_initial_condition,
)
from .potentials import Family, PotentialSpec, parse_potential_spec
from .store import SNAPSHOT_FILE, read_snapshots, write_snapshots
from .svgplot import write_svg
from .toda import SpectrumReport, state_spectrum

EXIT_OK, EXIT_THRESHOLD, EXIT_INPUT, EXIT_INTEGRATION = 0, 1, 2, 3

CONFIG_FILE = "config.txt"
CONSERVATION_FILE = "conservation.tsv"
SPECTRUM_FILE = "spectrum.tsv"
VERIFY_FILE = "verify.txt"
TRACKS_FILE = "tracks.tsv"
OBSERVATIONS_FILE = "track_observations.tsv"
REGIONS_FILE = "regions.tsv"
SPEEDS_FILE = "speeds.tsv"


class RunInputError(ValueError):
    """A run directory is missing, incomplete or does not fit the request."""


def run_id(cfg: RunConfig) -> str:
    text = write_config(cfg).replace(f"output_dir = {cfg.output_dir}\n", "")
    digest = hashlib.sha256(text.encode()).hexdigest()[:12]
    return f"{cfg.potential.family.value}-{cfg.ic.value}-n{cfg.n_particles}-{digest}"


def cmd_simulate(cfg: RunConfig) -> Path:
    """Integrate the configured run and persist it; returns the run directory.

    On an integration failure the snapshots reached so far are written with
    ``status = failed`` in the manifest and the IntegrationError is re-raised.
    """
    run_dir = cfg.output_dir / run_id(cfg)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / CONFIG_FILE).write_text(write_config(cfg), encoding="utf-8")
    manifest = {"tool": "fput_lattice", "version": __version__, "run_id": run_dir.name,
                **cfg.manifest()}
    ic = make_initial_condition(cfg.ic, cfg.n_particles)
    try:
        series = integrate(ic, cfg.potential, cfg.integrator)
    except IntegrationError as exc:
        partial = exc.series if exc.series is not None else SnapshotSeries([ic])
        manifest.update(partial.manifest)
        manifest.update(status="failed", error=str(exc), t_reached=float(exc.t))
        write_snapshots(run_dir / SNAPSHOT_FILE, partial, manifest)
        raise
    manifest.update(series.manifest)
    manifest["status"] = "complete"
    write_snapshots(run_dir / SNAPSHOT_FILE, series, manifest)
    return run_dir


def _snapshot_path(run_dir) -> Path:
    path = Path(run_dir) / SNAPSHOT_FILE
    if not path.is_file():
        raise RunInputError(f"{run_dir}: no {SNAPSHOT_FILE} (not a run directory?)")
    return path


def load_run(run_dir, require_complete: bool = True) -> tuple[SnapshotSeries, PotentialSpec]:
    series = read_snapshots(_snapshot_path(run_dir))
    status = series.manifest.get("status", "complete")
    if require_complete and status != "complete":
        raise RunInputError(f"{run_dir}: run status is {status!r}: "
                            f"{series.manifest.get('error', 'no error recorded')}")
    if len(series) == 0:
        raise RunInputError(f"{run_dir}: run holds no snapshots")
    return series, parse_potential_spec(series.manifest["potential"])


# ---------------------------------------------------------------- verify

@dataclass(frozen=True)
class VerifyThresholds:
    energy: float = 1e-5
    momentum_per_site: float = 1e-10
    spectral: float = 1e-4
    spectral_samples: int = 21


@dataclass
class VerifyResult:
    conservation: ConservationReport
    momentum_limit: float
    spectral_deviation: float | None
    failures: list[str]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.passed else EXIT_THRESHOLD


def _sample_indices(count: int, samples: int) -> list[int]:
    if samples <= 0 or samples >= count:
        return list(range(count))
    return sorted(set(np.linspace(0, count - 1, samples).round().astype(int).tolist()))


def spectrum_table(times, reports: list[SpectrumReport]) -> str:
    lines = ["t\tindex\teigenvalue\toutlier"]
    for t, rep in zip(times, reports):
        for k, ev in enumerate(rep.eigenvalues, start=1):
            lines.append(f"{t:.17g}\t{k}\t{ev:.17g}\t{int(abs(ev) > 1.0)}")
    return "\n".join(lines) + "\n"


def cmd_verify(run_dir, thresholds: VerifyThresholds = VerifyThresholds()) -> VerifyResult:
    run_dir = Path(run_dir)
    series, spec = load_run(run_dir)
    report = conservation_report(series, spec)
    (run_dir / CONSERVATION_FILE).write_text(report.to_table(), encoding="utf-8")
    m_limit = thresholds.momentum_per_site * series.n
    failures = []
    if report.max_rel_energy_drift > thresholds.energy:
        failures.append(f"relative energy drift {report.max_rel_energy_drift:.3e} "
                        f"exceeds {thresholds.energy:.3e}")
    if report.max_abs_momentum_drift > m_limit:
        failures.append(f"momentum drift {report.max_abs_momentum_drift:.3e} exceeds {m_limit:.3e}")
    deviation = None
    if spec.family is Family.TODA:
        picks = _sample_indices(len(series), thresholds.spectral_samples)
        reports = [state_spectrum(series[i]) for i in picks]
        ref = reports[0].eigenvalues
        deviation = max(float(np.max(np.abs(r.eigenvalues - ref))) for r in reports)
        (run_dir / SPECTRUM_FILE).write_text(
            spectrum_table([series[i].t for i in picks], reports), encoding="utf-8")
        if deviation > thresholds.spectral:
            failures.append(f"spectral deviation {deviation:.3e} exceeds {thresholds.spectral:.3e}")
    result = VerifyResult(report, m_limit, deviation, failures)
    (run_dir / VERIFY_FILE).write_text(format_verify(result, thresholds), encoding="utf-8")
    return result


def format_verify(result: VerifyResult, th: VerifyThresholds) -> str:
    c = result.conservation
    lines = [
        f"energy drift (relative)   {c.max_rel_energy_drift:.3e}  limit {th.energy:.3e}",
        f"momentum drift (absolute) {c.max_abs_momentum_drift:.3e}  limit {result.momentum_limit:.3e}",
    ]
    if result.spectral_deviation is not None:
        lines.append(f"spectral deviation        {result.spectral_deviation:.3e}  "
                     f"limit {th.spectral:.3e}")
    lines += [f"FAIL: {f}" for f in result.failures]
    lines.append("verify: PASS" if result.passed else "verify: FAIL")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- analyze

@dataclass
class AnalysisResult:
    tracks: list[SolitonTrack]
    regions: list[RegionReport]
    speeds: SpeedComparison | None
    notes: list[str]


def _ref_period(manifest: dict) -> int:
    return 2 if manifest.get("ic") == "periodic_kick" else 1


def tracks_tables(tracks: list[SolitonTrack]) -> tuple[str, str]:
    head = ["track\tfitted_speed\tspeed_r2\tamplitude_cv\toscillatory\tobservations"]
    obs = ["track\tt\tposition\tamplitude"]
    for k, tr in enumerate(tracks):
        head.append(f"{k}\t{tr.fitted_speed:.17g}\t{tr.speed_r2:.17g}\t{tr.amplitude_cv:.17g}"
                    f"\t{int(tr.oscillatory)}\t{len(tr.observations)}")
        obs += [f"{k}\t{t:.17g}\t{x:.17g}\t{a:.17g}" for t, x, a in tr.observations]
    return "\n".join(head) + "\n", "\n".join(obs) + "\n"


def regions_table(reports: list[RegionReport]) -> str:
    lines = ["t\tn_start\tn_end\tlabel\tresidual"]
    for rep in reports:
        for s in rep.segments:
            lines.append(f"{rep.snapshot_time:.17g}\t{s.n_start}\t{s.n_end}\t{s.label.value}"
                         f"\t{s.residual:.6e}")
    return "\n".join(lines) + "\n"


def read_regions_table(path) -> dict[float, RegionReport]:
    out: dict[float, RegionReport] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines()[1:]:
        t, a, b, label, resid = line.split("\t")
        rep = out.setdefault(float(t), RegionReport(float(t)))
        rep.segments.append(Segment(int(a), int(b), Label(label), float(resid)))
    return out


def _analysis_times(series: SnapshotSeries) -> list[float]:
    times = [float(t) for t in series.manifest.get("plot", {}).get("times", [])]
    final = float(series[-1].t)
    if final not in times:
        times.append(final)
    return times


def cmd_analyze(run_dir, cfg: DetectorConfig = DetectorConfig()) -> AnalysisResult:
    """Soliton tracks, region segmentation and (Toda) speed comparison tables.

    Regions are computed for the final snapshot and every configured plot time.
    """
    run_dir = Path(run_dir)
    series, spec = load_run(run_dir)
    period = _ref_period(series.manifest)
    notes = []
    late = len(series) - min(len(series) - 1, int(math.floor((1 - cfg.late_fraction) * len(series))))
    if late >= 10:
        tracks = detect_solitons(series, spec, ref_period=period, cfg=cfg)
    else:
        tracks = []
        notes.append(f"tracking skipped: {late} snapshots in the late window, need 10")
    regions = []
    if series.n >= 16 * period:
        for t in _analysis_times(series):
            regions.append(classify_regions(series.at_time(t), period, spec, cfg))
    else:
        notes.append(f"regions skipped: N={series.n} is below {16 * period}")
    speeds = None
    if spec.family is Family.TODA and period == 1:
        speeds = compare_speeds(tracks, state_spectrum(series[0]))
        (run_dir / SPEEDS_FILE).write_text(speeds.to_table(), encoding="utf-8")
    elif spec.family is Family.TODA:
        # the speed formula assumes the constant background and its band [-1, 1]
        notes.append("speed comparison skipped: period-2 background")
    head, obs = tracks_tables(tracks)
    (run_dir / TRACKS_FILE).write_text(head, encoding="utf-8")
    (run_dir / OBSERVATIONS_FILE).write_text(obs, encoding="utf-8")
    (run_dir / REGIONS_FILE).write_text(regions_table(regions), encoding="utf-8")
    return AnalysisResult(tracks, regions, speeds, notes)


# ---------------------------------------------------------------- plot

def cmd_plot(run_dir, times=None, trim_edges: int | None = None, regions: bool = False,
             cfg: DetectorConfig = DetectorConfig()) -> list[Path]:
    """One SVG per requested time; defaults to the configured plot times or the final state."""
    run_dir = Path(run_dir)
    series, spec = load_run(run_dir, require_complete=False)
    plot_opts = series.manifest.get("plot", {})
    if times is None or len(times) == 0:
        times = plot_opts.get("times") or [series[-1].t]
    if trim_edges is None:
        trim_edges = int(plot_opts.get("trim_edges", 0))
    available = series.times
    states = []
    for t in times:
        hit = np.flatnonzero(np.abs(available - t) <= 1e-9 * max(1.0, abs(t)))
        if hit.size == 0:
            raise RunInputError(f"time {t!r} is not on the snapshot grid; available: "
                                + _describe_times(available))
        states.append(series[int(hit[0])])
    stored = {}
    regions_path = run_dir / REGIONS_FILE
    if regions and regions_path.is_file():
        stored = read_regions_table(regions_path)
    period = _ref_period(series.manifest)
    out = []
    for state in states:
        underlay = None
        if regions:
            underlay = stored.get(state.t)
            if underlay is None:
                underlay = classify_regions(state, period, spec, cfg)
        path = run_dir / f"q_t{state.t:g}.svg"
        out.append(write_svg(path, state, trim_edges=trim_edges, regions=underlay))
    return out


def _describe_times(times) -> str:
    times = list(map(float, times))
    if len(times) <= 12:
        return ", ".join(f"{t:g}" for t in times)
    step = times[1] - times[0]
    return f"{times[0]:g}, {times[1]:g}, ..., {times[-1]:g} (step {step:g}, {len(times)} times)"


# ---------------------------------------------------------------- sweep

@dataclass
class SweepOutcome:
    source: str
    run_dir: Path | None
    exit_code: int
    message: str


def _sweep_one(source: str, overrides: dict, verify: bool) -> SweepOutcome:
    from .config import ConfigError
    try:
        cfg = load_config(source, overrides)
    except ConfigError as exc:
        return SweepOutcome(source, None, EXIT_INPUT, str(exc))
    try:
        run_dir = cmd_simulate(cfg)
    except IntegrationError as exc:
        return SweepOutcome(source, cfg.output_dir / run_id(cfg), EXIT_INTEGRATION, str(exc))
    if not verify:
        return SweepOutcome(source, run_dir, EXIT_OK, "simulated")
    result = cmd_verify(run_dir)
    return SweepOutcome(source, run_dir, result.exit_code,
                        "verify passed" if result.passed else "; ".join(result.failures))


def cmd_sweep(sources: list[str], overrides: dict | None = None, workers: int | None = None,
              verify: bool = False) -> list[SweepOutcome]:
    """Simulate independent configurations concurrently, one process per run."""
    overrides = dict(overrides or {})
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_sweep_one, str(s), overrides, verify) for s in sources]
        return [f.result() for f in futures]
