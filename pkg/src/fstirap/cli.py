"""Command-line front end: ``fstirap <mode> --config run.json``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import FORMATS, PROTOCOLS, SCHEMA, RunConfig, load_config
from .exceptions import ConfigError, FstirapError
from .fields import classify_sequence, pulses_atom1, pulses_atom2
from .io import atomic_write_json, atomic_write_text
from .propagator import (PulseHamiltonian, adiabaticity_check, initial_state,
                         instantaneous_eigen_diagnostics, propagate, trajectory_csv)
from .protocols import atom_atom_protocol, atom_photon_protocol, photon_photon_protocol
from .scan import grid_csv, grid_svg, locate_operating_points, scan

log = logging.getLogger("fstirap")

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def _population_svg(traj) -> str:
    import io

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "fstirap"
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for k, label in enumerate(traj.basis):
        ax.plot(traj.times * 1e6, traj.populations[:, k], label=f"|{label}>")
    ax.set_xlabel(r"$t$ ($\mu$s)")
    ax.set_ylabel("population")
    ax.legend()
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def _simulate(cfg: RunConfig, out: Path) -> tuple[list[str], int]:
    pulses = pulses_atom1(cfg.geometry) if cfg.pulses == "atom1" else pulses_atom2(cfg.geometry)
    ham = PulseHamiltonian(pulses)
    kw = {} if cfg.max_step is None else {"max_step": cfg.max_step}
    traj = propagate(ham, initial_state(cfg.initial), pulses.support, rel_tol=cfg.rel_tol,
                     abs_tol=cfg.abs_tol, n_samples=cfg.samples, **kw)
    diag = instantaneous_eigen_diagnostics(ham, traj)
    written = []
    if "csv" in cfg.formats:
        atomic_write_text(out / "trajectory.csv", trajectory_csv(traj, diag.dark_overlap))
        written.append("trajectory.csv")
    if "json" in cfg.formats:
        final = traj.final
        summary = {
            "pulses": cfg.pulses,
            "initial": cfg.initial,
            "window_s": list(pulses.support),
            "final_populations": {str(b): float(p) for b, p in zip(final.basis,
                                                                    final.populations())},
            "max_excited_population": float(traj.populations[:, 1].max()),
            "norm_drift": traj.norm_drift,
        }
        atomic_write_json(out / "simulate.json", _json_safe(summary))
        written.append("simulate.json")
    if "svg" in cfg.formats:
        atomic_write_text(out / "populations.svg", _population_svg(traj))
        written.append("populations.svg")
    return written, EXIT_OK


def _protocol(cfg: RunConfig, out: Path) -> tuple[list[str], int]:
    kw = dict(rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol)
    if cfg.protocol == "atom-photon":
        result = atom_photon_protocol(cfg.geometry, **kw)
    elif cfg.protocol == "atom-atom":
        result = atom_atom_protocol(cfg.geometry, cfg.geometry2, **kw)
    else:
        result = photon_photon_protocol(cfg.geometry, cfg.geometry2, **kw)
    for msg in result.warnings:
        log.warning(msg)
    name = f"protocol_{cfg.protocol.replace('-', '_')}.json"
    atomic_write_json(out / name, _json_safe(result.to_dict()))
    return [name], EXIT_OK


def _scan(cfg: RunConfig, out: Path) -> tuple[list[str], int]:
    grid = scan(cfg.geometry, cfg.z0_range, cfg.d_range, cfg.resolution,
                workers=cfg.workers, rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol)
    points = locate_operating_points(grid, cfg.target_P, cfg.tol_P, cfg.tol_e)
    written = []
    if "csv" in cfg.formats:
        atomic_write_text(out / "scan.csv", grid_csv(grid))
        written.append("scan.csv")
    if "json" in cfg.formats:
        atomic_write_json(out / "operating_points.json", {
            "target_P": cfg.target_P, "tol_P": cfg.tol_P, "tol_e": cfg.tol_e,
            "failures": grid.failures,
            "points": [p.to_dict() for p in points],
        })
        written.append("operating_points.json")
    if "svg" in cfg.formats:
        atomic_write_text(out / "scan.svg", grid_svg(grid, points))
        written.append("scan.svg")
    if grid.failures:
        log.error("%d scan cells failed; see the status column", grid.failures)
        return written, EXIT_NUMERIC
    return written, EXIT_OK


def _classify(cfg: RunConfig, out: Path) -> tuple[list[str], int]:
    pulses = pulses_atom1(cfg.geometry) if cfg.pulses == "atom1" else pulses_atom2(cfg.geometry)
    seq = classify_sequence(pulses, cfg.epsilon_rel, trailing_fraction=cfg.trailing_fraction,
                            stability=cfg.stability)
    atomic_write_json(out / "classify.json", _json_safe(seq.to_dict()))
    return ["classify.json"], EXIT_OK


def _adiabaticity(cfg: RunConfig, out: Path) -> tuple[list[str], int]:
    report = adiabaticity_check(cfg.geometry, cfg.t_int)
    atomic_write_json(out / "adiabaticity.json", report.to_dict())
    return ["adiabaticity.json"], EXIT_OK


DISPATCH = {
    "simulate": _simulate,
    "protocol": _protocol,
    "scan": _scan,
    "classify": _classify,
    "adiabaticity": _adiabaticity,
}


def run(config_path, mode: str | None = None, *, out_dir=None, workers=None, samples=None,
        formats=None, protocol=None) -> int:
    """Load, validate and execute one configuration; return the process exit code."""
    start = time.perf_counter()
    try:
        cfg = load_config(config_path, mode, protocol)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if out_dir is not None:
        cfg.out_dir = str(out_dir)
    if workers is not None:
        cfg.workers = workers
    if samples is not None:
        cfg.samples = samples
    if formats:
        cfg.formats = list(dict.fromkeys(formats))
    out = Path(cfg.out_dir)

    try:
        written, status = DISPATCH[cfg.mode](cfg, out)
    except FstirapError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    manifest = {
        "tool": "fstirap",
        "tool_version": __version__,
        "mode": cfg.mode,
        "config": cfg.to_document(),
        "outputs": written,
        "exit_status": status,
        "wall_time_s": time.perf_counter() - start,
    }
    atomic_write_json(out / "manifest.json", _json_safe(manifest))
    for name in written:
        print(out / name)
    return status


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="JSON run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
    common.add_argument("--workers", type=int, metavar="N", help="scan worker processes")
    common.add_argument("--samples", type=int, metavar="N", help="trajectory samples")
    common.add_argument("--format", action="append", choices=FORMATS, dest="formats",
                        help="output format; repeat for several")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="fstirap", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="dispatch on the config's mode")
    sub.add_parser("simulate", parents=[common], help="propagate one atom and record populations")
    proto = sub.add_parser("protocol", parents=[common], help="run an entanglement protocol")
    proto.add_argument("which", choices=PROTOCOLS)
    sub.add_parser("scan", parents=[common], help="(z0, d) grid scan")
    sub.add_parser("classify", parents=[common], help="characterize the pulse sequence")
    sub.add_parser("adiabaticity", parents=[common], help="pulse-area products")
    sub.add_parser("schema", help="print the configuration JSON schema")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "schema":
        print(json.dumps(SCHEMA, indent=2))
        return EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    mode = None if args.command == "run" else args.command
    return run(args.config, mode, out_dir=args.out, workers=args.workers,
               samples=args.samples, formats=args.formats,
               protocol=getattr(args, "which", None))


if __name__ == "__main__":
    sys.exit(main())
