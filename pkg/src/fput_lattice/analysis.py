"""Soliton tracking and region segmentation of simulated snapshots.

Both analyses look at the bond-energy field

    e_n = p_n^2 / 2 + V(q[n+1] - q[n]),

which is invariant under uniform translation of q and localises coherent
pulses on the trivial and on the period-2 background. Site and bond indices
in the returned objects are 1-based.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import LatticeState, SnapshotSeries, bond_stretch
from .potentials import PotentialSpec, eval_potential
from .toda import SpectrumReport, predict_soliton_speed


@dataclass(frozen=True)
class DetectorConfig:
    """Thresholds of the pulse detector and region classifier.

    window : width W (sites) of the sliding windows and pulse merge distance
    iqr_factor : k in the ``median + k * IQR`` detection threshold
    rel_floor : threshold never drops below this fraction of the strongest
        pulse of the snapshot (the IQR is zero on exactly periodic backgrounds)
    smooth : box width (sites) applied to the energy field before peak search;
        None selects W on the trivial background, 2 on period-2 backgrounds
    v_max : largest admissible pulse speed (sites per unit time) when linking
    late_fraction : trailing fraction of snapshots used for tracking
    min_coverage : a track must be present in this fraction of the window
    eps_per : periodic residual tolerance relative to the background amplitude
    eps_flat : absolute flatness tolerance for Constant windows
    """

    window: int = 16
    iqr_factor: float = 6.0
    rel_floor: float = 0.5
    abs_floor: float = 1e-8
    smooth: int | None = None
    v_max: float = 5.0
    late_fraction: float = 0.25
    min_observations: int = 5
    min_coverage: float = 0.5
    eps_per: float = 0.05
    eps_flat: float = 1e-6
    oscillatory_cv: float = 0.2


@dataclass(frozen=True)
class Pulse:
    t: float
    position: float
    amplitude: float


@dataclass
class SolitonTrack:
    observations: list[tuple[float, float, float]]
    fitted_speed: float = math.nan
    speed_r2: float = math.nan
    amplitude_cv: float = math.nan
    oscillatory: bool = False

    @property
    def times(self) -> np.ndarray:
        return np.array([o[0] for o in self.observations])

    @property
    def positions(self) -> np.ndarray:
        return np.array([o[1] for o in self.observations])

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([o[2] for o in self.observations])


class Label(enum.Enum):
    CONSTANT = "Constant"
    PERIODIC2 = "Periodic2"
    MODULATED = "Modulated"
    SOLITON = "Soliton"


@dataclass(frozen=True)
class Segment:
    n_start: int
    n_end: int
    label: Label
    residual: float

    @property
    def length(self) -> int:
        return self.n_end - self.n_start + 1


@dataclass
class RegionReport:
    snapshot_time: float
    segments: list[Segment] = field(default_factory=list)

    def counts(self) -> dict[Label, int]:
        out = {label: 0 for label in Label}
        for seg in self.segments:
            out[seg.label] += 1
        return out

    def labels(self) -> list[Label]:
        return [s.label for s in self.segments]


class FitError(ValueError):
    pass


def bond_energy(state: LatticeState, spec: PotentialSpec) -> np.ndarray:
    return 0.5 * state.p ** 2 + eval_potential(spec, bond_stretch(state.q))


def _box(values: np.ndarray, width: int) -> np.ndarray:
    """Cyclic centred moving average."""
    if width <= 1:
        return values.astype(float, copy=True)
    kernel = np.full(width, 1.0 / width)
    n = values.size
    pad = width
    ext = np.concatenate((values[-pad:], values, values[:pad]))
    sm = np.convolve(ext, kernel, mode="same")
    return sm[pad:pad + n]


def _iqr(values: np.ndarray) -> float:
    hi, lo = np.percentile(values, [75, 25])
    return float(hi - lo)


def _ring_distance(a, b, n):
    d = (np.asarray(a) - np.asarray(b) + n / 2) % n - n / 2
    return d


def excess_energy(state: LatticeState, spec: PotentialSpec, ref_period: int = 1,
                  cfg: DetectorConfig = DetectorConfig()) -> tuple[np.ndarray, np.ndarray, float]:
    """Bond energy above the background median (raw and smoothed) and the threshold."""
    e = bond_energy(state, spec)
    if ref_period > 1:
        # average over one background period so the staggered pattern drops out
        e = sum(np.roll(e, -j) for j in range(ref_period)) / ref_period
    base = float(np.median(e))
    spread = _iqr(e)
    width = cfg.smooth if cfg.smooth is not None else (cfg.window if ref_period == 1 else 2)
    raw = e - base
    s = _box(raw, width)
    threshold = max(cfg.iqr_factor * spread, cfg.rel_floor * float(np.max(s)), cfg.abs_floor)
    return raw, s, threshold


def find_pulses(state: LatticeState, spec: PotentialSpec, ref_period: int = 1,
                cfg: DetectorConfig = DetectorConfig()) -> list[Pulse]:
    """Localised energy excesses of one snapshot, strongest first.

    Pulses are maxima of the smoothed excess above threshold, at least W
    sites apart. The position is the energy centroid of the sharpest raw peak
    near the smoothed maximum; the amplitude is the smoothed peak height.
    """
    raw, s, threshold = excess_energy(state, spec, ref_period, cfg)
    n = s.size
    left, right = np.roll(s, 1), np.roll(s, -1)
    cand = np.flatnonzero((s > threshold) & (s >= left) & (s > right))
    # non-maximum suppression inside the merge distance
    order = sorted(cand, key=lambda i: (-s[i], i))
    kept: list[int] = []
    for i in order:
        if all(abs(_ring_distance(i, j, n)) > cfg.window for j in kept):
            kept.append(i)
    half = cfg.window // 2
    pulses = []
    for i in kept:
        near = np.arange(i - half, i + half + 1)
        c = int(near[np.argmax(raw[near % n])])
        idx = np.arange(c - 2, c + 3)
        w = np.clip(raw[idx % n], 0.0, None)
        offset = float(np.sum(w * (idx - c)) / np.sum(w)) if np.sum(w) > 0 else 0.0
        pulses.append(Pulse(state.t, (c + offset) % n + 1.0, float(s[i])))
    return pulses


def fit_track_speed(observations) -> tuple[float, float]:
    """Least-squares speed (slope of position on time) and its r^2.

    ``observations`` are (t, position[, ...]) tuples with positions already
    unwrapped across the ring seam.
    """
    obs = list(observations)
    if len(obs) < 2:
        raise FitError("need at least two observations")
    t = np.array([o[0] for o in obs], dtype=float)
    x = np.array([o[1] for o in obs], dtype=float)
    if np.ptp(t) == 0:
        raise FitError("all observations share one time; speed undefined")
    tc = t - t.mean()
    xc = x - x.mean()
    speed = float(np.dot(tc, xc) / np.dot(tc, tc))
    ss_tot = float(np.dot(xc, xc))
    resid = xc - speed * tc
    ss_res = float(np.dot(resid, resid))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    return speed, r2


def _finish_track(obs, cfg):
    speed, r2 = fit_track_speed(obs)
    amps = np.array([o[2] for o in obs])
    mean = float(np.mean(amps))
    cv = float(np.std(amps) / mean) if mean > 0 else math.inf
    return SolitonTrack(list(obs), speed, r2, cv, cv > cfg.oscillatory_cv)


def link_pulses(frames: list[list[Pulse]], n: int, dt: float,
                cfg: DetectorConfig = DetectorConfig()) -> list[list[tuple[float, float, float]]]:
    """Greedy nearest-neighbour association of per-snapshot pulses into tracks.

    Positions are unwrapped by the minimal-image convention, so a track that
    crosses the seam keeps moving monotonically.
    """
    gate = cfg.v_max * dt
    active: list[list[tuple[float, float, float]]] = []
    done: list[list[tuple[float, float, float]]] = []
    for pulses in frames:
        pairs = []
        for ti, tr in enumerate(active):
            last_t, last_x, _ = tr[-1]
            pred = last_x
            if len(tr) >= 2:
                pred += (last_x - tr[-2][1]) / (last_t - tr[-2][0]) * dt
            for pi, pu in enumerate(pulses):
                d = abs(_ring_distance(pu.position, pred, n))
                if d <= gate:
                    pairs.append((d, ti, pi))
        pairs.sort()
        used_t, used_p = set(), set()
        still = []
        for d, ti, pi in pairs:
            if ti in used_t or pi in used_p:
                continue
            used_t.add(ti)
            used_p.add(pi)
            tr = active[ti]
            pu = pulses[pi]
            x = tr[-1][1] + _ring_distance(pu.position, tr[-1][1], n)
            tr.append((pu.t, float(x), pu.amplitude))
        for ti, tr in enumerate(active):
            (still if ti in used_t else done).append(tr)
        for pi, pu in enumerate(pulses):
            if pi not in used_p:
                still.append([(pu.t, pu.position, pu.amplitude)])
        active = still
    return done + active


def detect_solitons(series: SnapshotSeries, spec: PotentialSpec, window: float | None = None,
                    ref_period: int = 1, cfg: DetectorConfig = DetectorConfig()) -> list[SolitonTrack]:
    """Coherent pulses that persist through the late part of the run.

    ``window`` is the trailing fraction of snapshots examined (default taken
    from ``cfg.late_fraction``). Tracks are returned in order of their mean
    position.
    """
    frac = cfg.late_fraction if window is None else window
    m = len(series)
    start = min(m - 1, int(math.floor((1.0 - frac) * m)))
    late = series.states[start:]
    if len(late) < 10:
        raise ValueError(f"need at least 10 snapshots in the tracking window, got {len(late)}")
    times = np.array([s.t for s in late])
    dt = float(np.median(np.diff(times)))
    frames = [find_pulses(s, spec, ref_period, cfg) for s in late]
    raw = link_pulses(frames, series.n, dt, cfg)
    need = max(cfg.min_observations, int(math.ceil(cfg.min_coverage * len(late))))
    tracks = [_finish_track(obs, cfg) for obs in raw if len(obs) >= need]
    tracks.sort(key=lambda tr: float(np.mean(tr.positions % series.n)))
    return tracks


def _window_indices(n: int, width: int) -> np.ndarray:
    half = width // 2
    return (np.arange(n)[:, None] + np.arange(-half, width - half)[None, :]) % n


def classify_regions(snapshot: LatticeState, ref_period: int, spec: PotentialSpec | None = None,
                     cfg: DetectorConfig = DetectorConfig(),
                     soliton_sites: list[float] | None = None) -> RegionReport:
    """Segment one snapshot into Constant / Periodic2 / Modulated / Soliton runs.

    For every site a centred window of W sites measures the period residual
    (RMS of q[n] - q[n+r] about its window mean, and of p[n] - p[n+r]) and the
    local oscillation amplitude. Windows that are flat are Constant, windows
    whose residual is below ``eps_per`` times the background amplitude are
    periodic, the remainder Modulated. Sites within W/2 of a detected pulse
    (``find_pulses`` when ``spec`` is given, or explicit ``soliton_sites``)
    are labelled Soliton.
    """
    if ref_period not in (1, 2):
        raise ValueError("ref_period must be 1 or 2")
    n = snapshot.n
    if n < 16 * ref_period:
        raise ValueError(f"need N >= {16 * ref_period} for ref_period={ref_period}")
    width = min(cfg.window, n)
    win = _window_indices(n, width)
    q, p = snapshot.q, snapshot.p
    dq = q - np.roll(q, -ref_period)
    dp = p - np.roll(p, -ref_period)
    dqw, dpw = dq[win], dp[win]
    # the q difference may carry a uniform strain offset; only its variation counts
    resid = np.sqrt(0.5 * (np.var(dqw, axis=1) + np.mean(dpw ** 2, axis=1)))
    amp = np.sqrt(0.5 * (np.var(q[win], axis=1) + np.var(p[win], axis=1)))
    background = float(np.median(amp))
    eps_per = cfg.eps_per * background

    labels = np.empty(n, dtype=object)
    periodic_label = Label.CONSTANT if ref_period == 1 else Label.PERIODIC2
    flat = amp <= cfg.eps_flat
    labels[:] = Label.MODULATED
    labels[resid <= max(eps_per, cfg.eps_flat)] = periodic_label
    labels[flat] = Label.CONSTANT

    if soliton_sites is None and spec is not None:
        soliton_sites = [pu.position for pu in find_pulses(snapshot, spec, ref_period, cfg)]
        if np.all(flat):
            soliton_sites = []
    for pos in soliton_sites or []:
        centre = int(round(pos)) - 1
        for j in range(centre - width // 2, centre + width // 2 + 1):
            labels[j % n] = Label.SOLITON

    segments = _merge_runs(labels, resid)
    segments = _absorb_short(segments, resid, max(2, width // 2))
    return RegionReport(snapshot.t, segments)


def _merge_runs(labels, resid) -> list[Segment]:
    segs = []
    start = 0
    n = len(labels)
    for i in range(1, n + 1):
        if i == n or labels[i] is not labels[start]:
            segs.append(Segment(start + 1, i, labels[start], float(np.max(resid[start:i]))))
            start = i
    return segs


def _absorb_short(segs: list[Segment], resid, min_len: int) -> list[Segment]:
    """Fold runs shorter than ``min_len`` (flicker at boundaries) into a neighbour."""
    segs = list(segs)
    changed = True
    while changed and len(segs) > 1:
        changed = False
        shortest = None
        for i, s in enumerate(segs):
            if s.label is Label.SOLITON or s.length >= min_len:
                continue
            if shortest is None or s.length < segs[shortest].length:
                shortest = i
        if shortest is None:
            break
        i = shortest
        nbrs = [j for j in (i - 1, i + 1) if 0 <= j < len(segs)]
        j = max(nbrs, key=lambda k: (segs[k].label is not Label.SOLITON, segs[k].length))
        lo, hi = min(i, j), max(i, j)
        keep = segs[j].label
        merged = Segment(segs[lo].n_start, segs[hi].n_end, keep,
                         float(np.max(resid[segs[lo].n_start - 1:segs[hi].n_end])))
        segs[lo:hi + 1] = [merged]
        # re-join equal neighbours produced by the fold
        k = 0
        while k < len(segs) - 1:
            a, b = segs[k], segs[k + 1]
            if a.label is b.label:
                segs[k:k + 2] = [Segment(a.n_start, b.n_end, a.label, max(a.residual, b.residual))]
            else:
                k += 1
        changed = True
    return segs


@dataclass(frozen=True)
class SpeedMatch:
    eigenvalue: float
    predicted_speed: float
    track_index: int
    observed_speed: float

    @property
    def relative_mismatch(self) -> float:
        return abs(self.observed_speed - self.predicted_speed) / abs(self.predicted_speed)


@dataclass
class SpeedComparison:
    matches: list[SpeedMatch] = field(default_factory=list)
    unmatched_eigenvalues: list[float] = field(default_factory=list)
    unmatched_tracks: list[int] = field(default_factory=list)

    @property
    def count_mismatch(self) -> bool:
        return bool(self.unmatched_eigenvalues or self.unmatched_tracks)

    @property
    def max_relative_mismatch(self) -> float:
        return max((m.relative_mismatch for m in self.matches), default=0.0)

    def to_table(self) -> str:
        lines = ["eigenvalue\tpredicted_speed\ttrack\tobserved_speed\trelative_mismatch"]
        for m in self.matches:
            lines.append(f"{m.eigenvalue:.17g}\t{m.predicted_speed:.17g}\t{m.track_index}"
                         f"\t{m.observed_speed:.17g}\t{m.relative_mismatch:.6e}")
        for lam in self.unmatched_eigenvalues:
            lines.append(f"{lam:.17g}\t{predict_soliton_speed(lam):.17g}\t-\tnan\tnan")
        for k in self.unmatched_tracks:
            lines.append(f"nan\tnan\t{k}\t-\tnan")
        return "\n".join(lines) + "\n"


def compare_speeds(tracks: list[SolitonTrack], report: SpectrumReport) -> SpeedComparison:
    """Pair each outlier eigenvalue with the tracked soliton of closest speed.

    Pairs are formed greedily, closest relative mismatch first. Leftover
    eigenvalues or tracks are listed, not treated as an error.
    """
    predicted = [(lam, predict_soliton_speed(lam)) for lam, _ in report.outliers]
    candidates = []
    for i, (lam, v) in enumerate(predicted):
        for j, tr in enumerate(tracks):
            candidates.append((abs(tr.fitted_speed - v) / abs(v), i, j))
    candidates.sort()
    used_e, used_t, matches = set(), set(), []
    for _, i, j in candidates:
        if i in used_e or j in used_t:
            continue
        used_e.add(i)
        used_t.add(j)
        lam, v = predicted[i]
        matches.append(SpeedMatch(lam, v, j, tracks[j].fitted_speed))
    matches.sort(key=lambda m: m.eigenvalue)
    return SpeedComparison(
        matches,
        [predicted[i][0] for i in range(len(predicted)) if i not in used_e],
        [j for j in range(len(tracks)) if j not in used_t],
    )
