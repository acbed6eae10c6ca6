"""Command-line interface: ``fput-lattice simulate | verify | analyze | plot | sweep``.

Exit codes: 0 pass, 1 threshold failure, 2 input error, 3 integration failure.
"""

from __future__ import annotations

import argparse
import sys

from .analysis import Label
from .config import KNOWN_KEYS, ConfigError, config_from_overrides, load_config
from .dynamics import IntegrationError
from .potentials import PotentialError
from .runner import (
    EXIT_INPUT,
    EXIT_INTEGRATION,
    EXIT_OK,
    RunInputError,
    VerifyThresholds,
    cmd_analyze,
    cmd_plot,
    cmd_simulate,
    cmd_sweep,
    cmd_verify,
    format_verify,
)
from .store import SnapshotFormatError


def _flag(key: str) -> str:
    return "--" + key.replace(".", "-").replace("_", "-")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_argument_group("configuration overrides (take precedence over the file)")
    for key in KNOWN_KEYS:
        group.add_argument(_flag(key), dest="cfg:" + key, metavar="VALUE", default=None)
    group.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key by its dotted name")


def _overrides(args) -> dict:
    out = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    for name, value in vars(args).items():
        if name.startswith("cfg:") and value is not None:
            out[name[4:]] = value
    return out


def _times(text: str | None):
    if not text:
        return None
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"--times expects numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fput-lattice",
                                     description="Nearest-neighbour ring lattice experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a configuration into a run directory")
    p.add_argument("config", nargs="?", help="key = value configuration file")
    _add_config_flags(p)

    p = sub.add_parser("verify", help="energy / momentum / spectrum audit of a run")
    p.add_argument("run_dir")
    d = VerifyThresholds()
    p.add_argument("--energy-tol", type=float, default=d.energy)
    p.add_argument("--momentum-tol-per-site", type=float, default=d.momentum_per_site)
    p.add_argument("--spectral-tol", type=float, default=d.spectral)
    p.add_argument("--spectral-samples", type=int, default=d.spectral_samples,
                   help="snapshots whose spectrum is compared (0 = all)")

    p = sub.add_parser("analyze", help="soliton tracks, regions and speed comparison")
    p.add_argument("run_dir")

    p = sub.add_parser("plot", help="SVG plots of q_n at chosen times")
    p.add_argument("run_dir")
    p.add_argument("--times", help="comma-separated snapshot times (default: configured)")
    p.add_argument("--trim-edges", type=int, default=None)
    p.add_argument("--regions", action="store_true", help="underlay the region segmentation")

    p = sub.add_parser("sweep", help="simulate several configurations concurrently")
    p.add_argument("configs", nargs="+")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--verify", action="store_true", help="verify each run after simulating")
    _add_config_flags(p)
    return parser


def _run(args) -> int:
    if args.command == "simulate":
        overrides = _overrides(args)
        cfg = load_config(args.config, overrides) if args.config else config_from_overrides(overrides)
        run_dir = cmd_simulate(cfg)
        print(run_dir)
        return EXIT_OK
    if args.command == "verify":
        th = VerifyThresholds(args.energy_tol, args.momentum_tol_per_site, args.spectral_tol,
                              args.spectral_samples)
        result = cmd_verify(args.run_dir, th)
        print(format_verify(result, th), end="")
        return result.exit_code
    if args.command == "analyze":
        res = cmd_analyze(args.run_dir)
        print(f"tracks: {len(res.tracks)}")
        for k, tr in enumerate(res.tracks):
            print(f"  track {k}: speed {tr.fitted_speed:+.4f} r2 {tr.speed_r2:.4f} "
                  f"cv {tr.amplitude_cv:.3f}{' oscillatory' if tr.oscillatory else ''}")
        for rep in res.regions:
            counts = rep.counts()
            print(f"regions at t={rep.snapshot_time:g}: "
                  + " ".join(f"{lab.value}={counts[lab]}" for lab in Label))
        if res.speeds is not None:
            print(res.speeds.to_table(), end="")
        for note in res.notes:
            print(f"note: {note}")
        return EXIT_OK
    if args.command == "plot":
        for path in cmd_plot(args.run_dir, _times(args.times), args.trim_edges, args.regions):
            print(path)
        return EXIT_OK
    outcomes = cmd_sweep(args.configs, _overrides(args), args.workers, args.verify)
    for o in outcomes:
        print(f"{o.source}\t{o.run_dir or '-'}\texit={o.exit_code}\t{o.message}")
    return max((o.exit_code for o in outcomes), default=EXIT_OK)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (ConfigError, PotentialError, SnapshotFormatError, RunInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except IntegrationError as exc:
        print(f"integration failed at t={exc.t:.17g}: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION


if __name__ == "__main__":
    sys.exit(main())
