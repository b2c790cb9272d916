"""Post-processing of trajectories: mode content, growth fits, steadiness."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pde import Trajectory


class LinearWindowError(RuntimeError):
    """Too few snapshots fall inside the requested linear-growth window."""


def cosine_coefficients(field: np.ndarray) -> np.ndarray:
    """Coefficients a_n of the cell-centered cosine basis, n = 0..N-1.

    a_0 is the mean; for n >= 1, a_n = (2/N) sum_i f_i cos(n pi (i+1/2)/N).
    The basis is exactly orthogonal on the grid, so a pure basis function
    yields a single nonzero coefficient up to roundoff.
    """
    f = np.asarray(field, dtype=float)
    n_cells = f.shape[-1]
    i = np.arange(n_cells) + 0.5
    n = np.arange(n_cells)
    table = np.cos(np.outer(n, i) * (np.pi / n_cells))
    coeffs = (2.0 / n_cells) * table @ f
    coeffs[0] *= 0.5
    return coeffs


def cosine_modes(field: np.ndarray, length: float) -> np.ndarray:
    """Mode energies for n = 0..N//2; their sum over n >= 1 equals the variance."""
    if not length > 0:
        raise ValueError("length must be positive")
    a = cosine_coefficients(field)
    energies = 0.5 * a * a
    energies[0] = a[0] * a[0]
    return energies[: len(a) // 2 + 1]


def dominant_mode(energies: np.ndarray) -> int:
    """Index n >= 1 with the largest energy; 0 if there is no fluctuation energy."""
    tail = np.asarray(energies)[1:]
    if tail.size == 0 or float(np.max(tail)) <= 1e-300:
        return 0
    return int(np.argmax(tail)) + 1


def mode_amplitude_series(traj: Trajectory, mode: int, species: str = "u") -> np.ndarray:
    """|a_mode| of one species at every snapshot."""
    stack = traj.series(species)
    n_cells = stack.shape[1]
    i = np.arange(n_cells) + 0.5
    basis = np.cos(mode * np.pi * i / n_cells)
    if mode == 0:
        return np.abs(stack.mean(axis=1))
    return np.abs((2.0 / n_cells) * stack @ basis)


@dataclass(frozen=True)
class GrowthFit:
    rate: float
    mode: int
    t_window: tuple[float, float]
    n_points: int


def fit_growth(
    traj: Trajectory,
    mode: int,
    lower: float | None = None,
    upper: float | None = None,
    min_snapshots: int = 10,
    species: str = "u",
) -> GrowthFit:
    """Least-squares exponential rate of a mode amplitude over its linear window.

    The window keeps the longest contiguous block of snapshots with amplitude
    in [lower, upper], which excludes both the initial projection transient
    and late saturation. The default bounds are 10x the initial amplitude and
    5% of the initial spatial mean; override them when the seeded amplitude
    is already a sizeable fraction of the cap.
    """
    amps = mode_amplitude_series(traj, mode, species)
    if lower is None:
        lower = 10.0 * amps[0]
    if upper is None:
        upper = 0.05 * float(np.mean(traj.series(species)[0]))
    ok = (amps >= lower) & (amps <= upper) & (amps > 0)
    best_start, best_len = 0, 0
    start = None
    for i, flag in enumerate(np.append(ok, False)):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if i - start > best_len:
                best_start, best_len = start, i - start
            start = None
    if best_len < min_snapshots:
        raise LinearWindowError(
            f"only {best_len} contiguous snapshots inside amplitude window [{lower:.3g}, {upper:.3g}]"
        )
    sel = slice(best_start, best_start + best_len)
    t = traj.times[sel]
    rate = float(np.polyfit(t, np.log(amps[sel]), 1)[0])
    return GrowthFit(rate=rate, mode=mode, t_window=(float(t[0]), float(t[-1])), n_points=best_len)


@dataclass(frozen=True)
class SteadyReport:
    steady: bool
    residual: float
    window: tuple[float, float]


def steady_check(traj: Trajectory, window: float, tol: float) -> SteadyReport:
    """True when the max-norm change across the trailing window is below tol * scale."""
    if not window > 0:
        raise ValueError("window must be positive")
    t_end = float(traj.times[-1])
    sel = traj.times >= t_end - window
    if int(sel.sum()) < 2:
        raise ValueError("window must contain at least two snapshots")
    residual = 0.0
    scale = 0.0
    for name in traj.species:
        stack = traj.data[name][sel]
        scale = max(scale, float(np.max(np.abs(stack))))
        residual = max(residual, float(np.max(np.abs(stack - stack[-1]))))
    scale = max(scale, 1e-30)
    rel = residual / scale
    return SteadyReport(steady=rel <= tol, residual=rel, window=(t_end - window, t_end))


@dataclass(frozen=True)
class PatternReport:
    """Summary of the spatial structure at the end of a run."""

    final_amplitude: float
    dominant_mode: int
    mode_share: float
    steady: bool
    steady_residual: float
    growth_rate: float = math.nan
    growth_mode: int = 0


def pattern_report(
    traj: Trajectory,
    steady_window: float | None = None,
    steady_tol: float = 1e-6,
    fit_mode: int | None = None,
    fit_lower: float | None = None,
    fit_upper: float | None = None,
) -> PatternReport:
    """Amplitude, dominant mode, steadiness, and (optionally) a growth fit for u."""
    final_u = traj.series("u")[-1]
    amplitude = float(np.max(final_u) - np.min(final_u))
    energies = cosine_modes(final_u, traj.grid.length)
    mode = dominant_mode(energies)
    tail_total = float(np.sum(energies[1:]))
    share = float(energies[mode] / tail_total) if mode >= 1 and tail_total > 0 else 0.0

    span = float(traj.times[-1] - traj.times[0])
    if steady_window is not None:
        window = steady_window
    else:
        # wide enough to always catch at least the two trailing snapshots
        window = max(0.2 * span, 1.0000001 * float(traj.times[-1] - traj.times[-2]))
    steady = steady_check(traj, window, steady_tol)

    rate = math.nan
    used_mode = 0
    if fit_mode is not None:
        try:
            fit = fit_growth(traj, fit_mode, lower=fit_lower, upper=fit_upper)
            rate, used_mode = fit.rate, fit.mode
        except LinearWindowError:
            pass
    return PatternReport(
        final_amplitude=amplitude,
        dominant_mode=mode,
        mode_share=share,
        steady=steady.steady,
        steady_residual=steady.residual,
        growth_rate=rate,
        growth_mode=used_mode,
    )
