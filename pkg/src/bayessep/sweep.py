"""Point evaluation and parameter sweeps, with CSV output."""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .measurements import mse_homodyne, mse_pnr, pnr_kmax
from .personick import auto_cutoff, build_gamma_numeric, solve_B
from .priors import DisplacedHalfGaussianPrior, HalfGaussianPrior, UnreachableMoments, invert_moments

__all__ = ["Grid", "SweepConfig", "COLUMNS", "FIGURE_GRIDS", "evaluate_point", "run_sweep",
           "write_csv", "read_csv"]

COLUMNS = ["mu_t", "sigma_t2", "mu", "sigma", "cutoff_used", "frame_r", "mmse", "mse_spade",
           "mse_di", "ratio_di_over_spade", "dropped_eigenpairs", "quadrature_flags", "error"]

MODES = ("fig1", "fig2_fixed_mean", "fig3_fixed_variance", "custom")


@dataclass(frozen=True)
class Grid:
    start: float
    stop: float
    count: int
    log: bool = False

    @classmethod
    def parse(cls, text: str) -> "Grid":
        """``start:stop:count`` with an optional ``:log`` suffix."""
        parts = text.split(":")
        if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] not in ("log", "lin")):
            raise ValueError(f"grid must be start:stop:count[:log], got {text!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        return cls(start, stop, count, len(parts) == 4 and parts[3] == "log")

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("grid count must be >= 1")
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise ValueError("grid ends must be finite")
        if self.log and not (self.start > 0 and self.stop > 0):
            raise ValueError("log grid needs positive ends")

    def values(self) -> np.ndarray:
        if self.log:
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)

    def __str__(self):
        return f"{self.start:g}:{self.stop:g}:{self.count}" + (":log" if self.log else "")


# Sweep ranges used for the three comparison figures (mode, fixed value, grid).
FIGURE_GRIDS = {
    "fig1": [("fig1", None, Grid(0.1, 3.0, 16))],
    "fig2": [("fig2_fixed_mean", 1.0, Grid(0.05, 0.9, 16)),
             ("fig2_fixed_mean", 2.0, Grid(0.2, 2.0, 16))],
    "fig3": [("fig3_fixed_variance", 1.0, Grid(1.1, 5.0, 16)),
             ("fig3_fixed_variance", 0.2, Grid(0.5, 5.0, 16)),
             ("fig3_fixed_variance", 0.05, Grid(0.25, 5.0, 16))],
}


@dataclass(frozen=True)
class SweepConfig:
    mode: str
    grid: Grid
    fixed: float | None = None
    cutoff: str | int = "auto"
    k_max: int | None = None
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode != "fig1" and self.fixed is None:
            raise ValueError(f"mode {self.mode} needs a fixed value")
        if self.cutoff != "auto" and (int(self.cutoff) != self.cutoff or int(self.cutoff) < 1):
            raise ValueError("cutoff must be 'auto' or a positive integer")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def points(self):
        """``(kind, a, b)`` tuples; see :func:`evaluate_point`."""
        for v in self.grid.values():
            v = float(v)
            if self.mode == "fig1":
                yield ("half-gaussian", v, None)
            elif self.mode == "fig2_fixed_mean":
                yield ("moments", self.fixed, v)
            elif self.mode == "fig3_fixed_variance":
                yield ("moments", v, self.fixed)
            else:  # custom: displaced prior with fixed mu, sweeping sigma
                yield ("displaced", self.fixed, v)


def _prior_from(kind, a, b):
    if kind == "half-gaussian":
        return HalfGaussianPrior(a)
    if kind == "displaced":
        return DisplacedHalfGaussianPrior(a, b)
    if kind == "moments":
        return DisplacedHalfGaussianPrior(*invert_moments(a, b))
    raise ValueError(f"unknown point kind {kind!r}")


def evaluate_point(kind: str, a: float, b: float | None = None, cutoff="auto",
                   k_max: int | None = None) -> dict:
    """One CSV row.

    ``kind`` is ``'half-gaussian'`` (``a = sigma``), ``'displaced'``
    (``a = mu``, ``b = sigma``) or ``'moments'`` (``a = mu_t``,
    ``b = sigma_t^2``, inverted to ``mu, sigma``).  Failures are recorded
    in the ``error`` column instead of raised.
    """
    row = dict.fromkeys(COLUMNS, "")
    if kind == "moments":
        row["mu_t"], row["sigma_t2"] = a, b
    try:
        prior = _prior_from(kind, a, b)
    except UnreachableMoments as exc:
        row["error"] = f"unreachable moments (residual {exc.residual:.3g})"
        return row
    except ValueError as exc:
        row["error"] = str(exc)
        return row
    m = prior.moments()
    row.update(mu_t=m.mean, sigma_t2=m.variance, mu=prior.mu, sigma=prior.sigma)
    flags = []
    if prior.mu < 0:
        flags.append("mu<0")
    try:
        if cutoff == "auto":
            sel = auto_cutoff(prior)
            sol, row["cutoff_used"], row["frame_r"] = sel.solution, sel.cutoff, sel.frame_r
        else:
            sol = solve_B(build_gamma_numeric(prior, int(cutoff)))
            row["cutoff_used"], row["frame_r"] = int(cutoff), 0.0
        row["mmse"] = sol.mmse
        row["dropped_eigenpairs"] = sol.dropped_pairs
        km = pnr_kmax(prior) if k_max is None else int(k_max)
        flags.append(f"kmax={km}")
        row["mse_spade"] = mse_pnr(prior, km)
        row["mse_di"] = mse_homodyne(prior)
        row["ratio_di_over_spade"] = row["mse_di"] / row["mse_spade"]
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["quadrature_flags"] = ";".join(flags)
    return row


def _eval_tuple(args):
    return evaluate_point(*args)


def run_sweep(config: SweepConfig) -> list[dict]:
    """Evaluate every grid point; rows come back in grid order."""
    jobs = [(kind, a, b, config.cutoff, config.k_max) for kind, a, b in config.points()]
    if config.workers == 1 or len(jobs) == 1:
        return [_eval_tuple(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(_eval_tuple, jobs))


def _fmt(v):
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(rows, path_or_file, config: SweepConfig | None = None):
    """Write rows with a commented header recording the version and config."""
    buf = io.StringIO()
    buf.write(f"# bayessep {__version__}\n")
    if config is not None:
        echo = {k: (str(v) if isinstance(v, Grid) else v) for k, v in asdict(config).items()}
        echo["grid"] = str(config.grid)
        buf.write("# config: " + " ".join(f"{k}={v}" for k, v in echo.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in COLUMNS])
    text = buf.getvalue()
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        tmp = f"{path_or_file}.tmp{os.getpid()}"
        with open(tmp, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path_or_file)


def read_csv(path) -> list[dict]:
    """Parse a file written by :func:`write_csv`; numeric fields become floats."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    out = []
    for row in csv.DictReader(lines):
        parsed = {}
        for k, v in row.items():
            try:
                parsed[k] = float(v) if v != "" else None
            except ValueError:
                parsed[k] = v
        out.append(parsed)
    return out
