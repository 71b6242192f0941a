"""Explicit time stepping with the Conserve correction at every stage."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .collision import CollisionWorkspace, q_u
from .conserve import ConstraintSystem, conserve_discrete
from .grid import State, VelocityGrid
from .kernel import KernelSpec


@dataclass
class IntegratorConfig:
    method: str = "rk4"
    dt: float | None = None  # None = auto
    t_end: float = 1.0
    cfl: float = 0.1
    conserve_every_stage: bool = True

    def __post_init__(self):
        if self.method not in ("euler", "rk2", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")


def rhs(s: State, ws: CollisionWorkspace, cs: ConstraintSystem) -> np.ndarray:
    """Conserved collision operator Q_c(g) = Conserve(Q_u(g))."""
    return conserve_discrete(q_u(s, ws), cs)


def auto_dt(s: State, spec: KernelSpec, grid: VelocityGrid, cfl: float = 0.1) -> float:
    """CFL-style step from the worst-case loss frequency m0 (2 sqrt(d) L)^lam."""
    m0 = float(np.sum(s.values) * grid.cell_weight)
    if m0 <= 0:
        raise ValueError("state has nonpositive mass")
    nu_max = m0 * (2.0 * np.sqrt(grid.d) * grid.L) ** spec.lam
    return cfl / nu_max


class BlowupError(RuntimeError):
    """Raised when the step produces non-finite values; carries the last good state."""

    def __init__(self, last_good: State):
        super().__init__(f"non-finite values detected at t={last_good.t}")
        self.last_good = last_good


def step(s: State, cfg: IntegratorConfig, ws: CollisionWorkspace, cs: ConstraintSystem, dt: float) -> State:
    """Advance one step of the chosen explicit method."""
    g0 = s.values

    def f(vals: np.ndarray, t: float) -> np.ndarray:
        if not np.all(np.isfinite(vals)):
            raise BlowupError(s)
        st = State(s.grid, vals, t)
        qu = q_u(st, ws)
        if not np.all(np.isfinite(qu)):
            raise BlowupError(s)
        return conserve_discrete(qu, cs) if cfg.conserve_every_stage else qu

    if cfg.method == "euler":
        incr = dt * f(g0, s.t)
    elif cfg.method == "rk2":  # Heun
        k1 = f(g0, s.t)
        k2 = f(g0 + dt * k1, s.t + dt)
        incr = dt * (k1 + k2) / 2.0
    else:  # classic RK4
        k1 = f(g0, s.t)
        k2 = f(g0 + 0.5 * dt * k1, s.t + 0.5 * dt)
        k3 = f(g0 + 0.5 * dt * k2, s.t + 0.5 * dt)
        k4 = f(g0 + dt * k3, s.t + dt)
        incr = dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0

    if not cfg.conserve_every_stage:
        incr = conserve_discrete(incr, cs)
    new_vals = g0 + incr
    if not np.all(np.isfinite(new_vals)):
        raise BlowupError(s)
    return State(s.grid, new_vals, s.t + dt)


@dataclass
class RunSummary:
    final: State
    times: list[float] = field(default_factory=list)
    invariants: list[np.ndarray] = field(default_factory=list)
    n_steps: int = 0
    wall_time: float = 0.0
    aborted: bool = False


def run(
    initial: State,
    cfg: IntegratorConfig,
    ws: CollisionWorkspace,
    cs: ConstraintSystem,
    spec: KernelSpec,
    sinks=(),
    cadence: int = 1,
) -> RunSummary:
    """Integrate to t_end, invoking diagnostic sinks every ``cadence`` steps."""
    t0 = time.perf_counter()
    dt = cfg.dt if cfg.dt is not None else auto_dt(initial, spec, initial.grid, cfg.cfl)
    s = initial
    summary = RunSummary(final=s)
    summary.times.append(s.t)
    summary.invariants.append(cs.moments(s.values))
    for sink in sinks:
        sink(s)
    n_steps = max(0, int(np.ceil((cfg.t_end - initial.t) / dt - 1e-12)))
    for i in range(n_steps):
        dt_i = min(dt, cfg.t_end - s.t)
        if dt_i <= 0:
            break
        try:
            s = step(s, cfg, ws, cs, dt_i)
        except BlowupError as exc:
            summary.final = exc.last_good
            summary.aborted = True
            summary.wall_time = time.perf_counter() - t0
            return summary
        summary.n_steps += 1
        if (i + 1) % cadence == 0 or i == n_steps - 1:
            summary.times.append(s.t)
            summary.invariants.append(cs.moments(s.values))
            for sink in sinks:
                sink(s)
    summary.final = s
    summary.wall_time = time.perf_counter() - t0
    return summary
