"""
Grid scans of the atom-photon protocol over trajectory offset ``z0`` and
cavity-laser distance ``d``, and selection of operating points from a grid.
"""

from __future__ import annotations

import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import FstirapError
from .fields import FieldGeometry
from .io import atomic_write_text, fmt
from .protocols import atom_photon_protocol

log = logging.getLogger(__name__)

CSV_COLUMNS = ("z0_m", "d_m", "P_g10", "P_g21", "P_e0", "concurrence", "status")


@dataclass(eq=False)
class ScanGrid:
    """Final populations on a ``(z0, d)`` grid; arrays are indexed ``[i_z0, i_d]``.

    Failed cells hold NaN and ``status == "failed"``.
    """

    z0_values: np.ndarray
    d_values: np.ndarray
    P_g10: np.ndarray
    P_g21: np.ndarray
    P_e0: np.ndarray
    concurrence: np.ndarray
    status: np.ndarray

    @property
    def shape(self):
        return (len(self.z0_values), len(self.d_values))

    @property
    def failures(self) -> int:
        return int(np.count_nonzero(self.status != "ok"))

    def cells(self):
        """Row-major iteration (z0 outer) over ``(z0, d, record)``."""
        for i, z0 in enumerate(self.z0_values):
            for j, d in enumerate(self.d_values):
                yield z0, d, {
                    "P_g10": self.P_g10[i, j],
                    "P_g21": self.P_g21[i, j],
                    "P_e0": self.P_e0[i, j],
                    "concurrence": self.concurrence[i, j],
                    "status": self.status[i, j],
                }


def _cell(args):
    geom, rel_tol, abs_tol = args
    try:
        res = atom_photon_protocol(geom, rel_tol=rel_tol, abs_tol=abs_tol)
    except (FstirapError, ValueError, FloatingPointError) as exc:
        log.warning("cell z0=%g d=%g failed: %s", geom.z0, geom.d, exc)
        return None
    s = res.final_state
    return (s.population(("g1", 0)), s.population(("g2", 1)), s.population(("e", 0)),
            res.concurrence)


def scan(base_geom: FieldGeometry, z0_range=(0.0, 60e-6), d_range=(0.0, 60e-6),
         resolution=(101, 101), *, workers: int = 1, rel_tol: float = 1e-10,
         abs_tol: float = 1e-12, z0_values=None, d_values=None) -> ScanGrid:
    """Run the atom-photon protocol on every ``(z0, d)`` grid point.

    Cells are independent; with ``workers > 1`` they are distributed over a
    process pool and reassembled in row-major order, so the result does not
    depend on the worker count. Explicit ``z0_values``/``d_values`` override
    the ranges.
    """
    nz, nd = resolution
    if z0_values is None:
        if nz < 2:
            raise ValueError("resolution must be >= 2 per axis")
        z0_values = np.linspace(*z0_range, nz)
    if d_values is None:
        if nd < 2:
            raise ValueError("resolution must be >= 2 per axis")
        d_values = np.linspace(*d_range, nd)
    z0_values = np.asarray(z0_values, float)
    d_values = np.asarray(d_values, float)
    if not (np.all(np.isfinite(z0_values)) and np.all(np.isfinite(d_values))):
        raise ValueError("scan ranges must be finite")

    jobs = [(base_geom.replace(z0=float(z0), d=float(d)), rel_tol, abs_tol)
            for z0 in z0_values for d in d_values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        results = [_cell(job) for job in jobs]

    shape = (len(z0_values), len(d_values))
    data = np.full((4,) + shape, np.nan)
    status = np.full(shape, "ok", dtype=object)
    for k, res in enumerate(results):
        i, j = divmod(k, shape[1])
        if res is None:
            status[i, j] = "failed"
        else:
            data[:, i, j] = res
    grid = ScanGrid(z0_values, d_values, data[0], data[1], data[2], data[3], status)
    if grid.failures:
        log.warning("%d of %d scan cells failed", grid.failures, len(jobs))
    return grid


@dataclass(frozen=True)
class OperatingPoint:
    z0: float
    d: float
    P_g10: float
    P_e0: float
    score: float

    def to_dict(self) -> dict:
        return {"z0_m": self.z0, "d_m": self.d, "P_g10": self.P_g10, "P_e0": self.P_e0,
                "score": self.score}


def locate_operating_points(grid: ScanGrid, target_P: float = 0.5, tol_P: float = 0.01,
                            tol_e: float = 0.01) -> list[OperatingPoint]:
    """Cells with ``|P_g10 - target_P| < tol_P`` and ``P_e0 < tol_e``, best first.

    The score is ``|P_g10 - target_P| + P_e0``; ties keep row-major order.
    """
    points = []
    for z0, d, rec in grid.cells():
        if rec["status"] != "ok":
            continue
        dev = abs(rec["P_g10"] - target_P)
        if dev < tol_P and rec["P_e0"] < tol_e:
            points.append(OperatingPoint(float(z0), float(d), float(rec["P_g10"]),
                                         float(rec["P_e0"]), float(dev + rec["P_e0"])))
    points.sort(key=lambda p: p.score)
    return points


def grid_csv(grid: ScanGrid) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for z0, d, rec in grid.cells():
        if rec["status"] == "ok":
            values = [fmt(rec[k]) for k in ("P_g10", "P_g21", "P_e0", "concurrence")]
        else:
            values = ["", "", "", ""]
        lines.append(",".join([fmt(z0), fmt(d), *values, rec["status"]]))
    return "\n".join(lines) + "\n"


def write_grid_csv(grid: ScanGrid, path):
    return atomic_write_text(path, grid_csv(grid))


def read_grid_csv(path) -> ScanGrid:
    """Load a grid written by :func:`write_grid_csv`."""
    import csv

    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    z0 = np.unique([float(r["z0_m"]) for r in rows])
    d = np.unique([float(r["d_m"]) for r in rows])
    shape = (len(z0), len(d))
    data = {k: np.full(shape, np.nan) for k in ("P_g10", "P_g21", "P_e0", "concurrence")}
    status = np.full(shape, "failed", dtype=object)
    zi = {v: i for i, v in enumerate(z0)}
    di = {v: j for j, v in enumerate(d)}
    for r in rows:
        i, j = zi[float(r["z0_m"])], di[float(r["d_m"])]
        status[i, j] = r["status"]
        if r["status"] == "ok":
            for k in data:
                data[k][i, j] = float(r[k])
    return ScanGrid(z0, d, data["P_g10"], data["P_g21"], data["P_e0"],
                    data["concurrence"], status)


def grid_svg(grid: ScanGrid, points=()) -> str:
    """Two-panel heatmap (``|1/2 - P_g10|`` and ``P_e0``) with operating points marked."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "fstirap"
    extent = [grid.d_values[0] * 1e6, grid.d_values[-1] * 1e6,
              grid.z0_values[0] * 1e6, grid.z0_values[-1] * 1e6]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.2))
    panels = ((np.abs(0.5 - grid.P_g10), r"$|1/2 - P_{g_1,0}|$"),
              (grid.P_e0, r"$P_{e,0}$"))
    for ax, (values, title) in zip(axes, panels):
        im = ax.imshow(values, origin="lower", extent=extent, aspect="auto",
                       cmap="gray", interpolation="nearest")
        ax.set_xlabel(r"$d$ ($\mu$m)")
        ax.set_ylabel(r"$z_0$ ($\mu$m)")
        ax.set_title(title)
        fig.colorbar(im, ax=ax)
        if points:
            ax.plot([p.d * 1e6 for p in points], [p.z0 * 1e6 for p in points], "o",
                    color="white", markeredgecolor="black", markersize=5)
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def write_grid_svg(grid: ScanGrid, path, points=()):
    return atomic_write_text(path, grid_svg(grid, points))
