"""Empirical check that the exchange systems approach their cross-diffusion limits.

Both systems are run from matched initial data on the same grid with a
shared step size, so the measured gap isolates the dependence on the
exchange time scale. No rate is asserted; the observed order is reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .pde import Controls, Grid1D, ModelSpec, SimState, Trajectory, fast_variant, limit_variant, partitioned_fields, simulate

NORMS = ("l2_final", "sup_l2")


@dataclass
class SweepResult:
    epsilons: list[float]
    errors: list[float]
    orders: list[float]
    norm: str
    manifests: list[dict]
    limit_trajectory: Trajectory
    fast_trajectories: list[Trajectory]


def matched_initial(model_fast: ModelSpec, base: SimState | dict) -> SimState:
    """Fast-system state on the balanced-exchange manifold matching base (u, v)."""
    if isinstance(base, SimState):
        t0, fields = base.t, base.fields
    else:
        t0, fields = 0.0, base
    return SimState(t0, partitioned_fields(model_fast, fields["u"], fields["v"]))


def l2_norm(field: np.ndarray, dx: float) -> float:
    return float(math.sqrt(dx * np.sum(np.asarray(field, dtype=float) ** 2)))


def _gap(fast: Trajectory, limit: Trajectory, norm: str) -> float:
    du = fast.series("u") - limit.series("u")
    dx = limit.grid.dx
    if norm == "l2_final":
        return l2_norm(du[-1], dx)
    return max(l2_norm(row, dx) for row in du)


def epsilon_sweep(
    model: ModelSpec,
    grid: Grid1D,
    base: SimState | dict,
    t_end: float,
    epsilons: list[float],
    controls: Controls | None = None,
    norm: str = "l2_final",
) -> SweepResult:
    """Run the limit system once and the exchange system per epsilon; report gaps.

    epsilons must be strictly decreasing. Unless overridden, both systems are
    stepped with the single step size dictated by the stiffer (exchange)
    diffusion constants, so spatial and temporal discretization errors cancel
    in the gap to leading order.
    """
    eps = [float(e) for e in epsilons]
    if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be positive and strictly decreasing")
    if norm not in NORMS:
        raise ValueError(f"norm must be one of {NORMS}")

    model_limit = limit_variant(model)
    model_fast0 = fast_variant(model, eps[0])

    if controls is None:
        p = model.params
        if model_fast0.variant == "skt_fast_plus":
            k_eff = max(p.d_u + p.d12, p.d_v)
        elif model_fast0.variant == "skt_fast_minus":
            k_eff = max(p.d_u, p.d_v)
        else:
            k_eff = max(model.dds.d_a, model.dds.d_b, p.d_v)
        dt_shared = 0.8 * grid.dx**2 / (2.0 * k_eff)
        controls = Controls(dt_max=dt_shared, snapshot_dt=t_end / 10.0)

    if isinstance(base, SimState):
        base_state = base
    else:
        base_state = SimState(0.0, dict(base))

    limit_traj = simulate(model_limit, grid, base_state, t_end, controls)

    errors: list[float] = []
    manifests: list[dict] = []
    fast_trajs: list[Trajectory] = []
    for e in eps:
        m = replace(model_fast0, epsilon=e)
        fast0 = matched_initial(m, base_state)
        traj = simulate(m, grid, fast0, t_end, controls)
        fast_trajs.append(traj)
        errors.append(_gap(traj, limit_traj, norm))
        manifests.append(
            {
                "variant": m.variant,
                "epsilon": e,
                "grid": {"length": grid.length, "n": grid.n},
                "t_end": t_end,
                "dt_max": controls.dt_max,
                "method": controls.method,
                "steps": traj.diagnostics["steps"],
                "norm": norm,
            }
        )

    orders = [
        math.log(errors[i] / errors[i + 1]) / math.log(eps[i] / eps[i + 1])
        if errors[i] > 0 and errors[i + 1] > 0
        else math.nan
        for i in range(len(eps) - 1)
    ]
    return SweepResult(
        epsilons=eps,
        errors=errors,
        orders=orders,
        norm=norm,
        manifests=manifests,
        limit_trajectory=limit_traj,
        fast_trajectories=fast_trajs,
    )
