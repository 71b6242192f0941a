"""Command-line driver: run, sweep, and table-cache management.

Outputs per run: ``moments.csv`` (time series), ``manifest.json`` (fully
resolved config plus derived quantities), and optionally ``final.bspc``
(raw field snapshot).  CSV bytes are deterministic for identical configs
except the single timestamped header line.
"""

from __future__ import annotations

import argparse
import datetime
import json
import struct
import sys
import os
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, parse_config
from .collision import CollisionWorkspace, q_u
from .conserve import build_constraints
from .diagnostics import entropy, maxwellian, moments, negative_part_norm
from .grid import State, VelocityGrid, choose_domain
from .integrate import IntegratorConfig, auto_dt, run
from .kernel import KernelSpec, TableQuadrature, build_weight_table, load_table, save_table, table_key

_SNAP_MAGIC = b"BSPC"
_SNAP_VERSION = 1
CACHE_ENV = "BOLTZSPEC_CACHE_DIR"


def write_snapshot(path: str | Path, s: State) -> None:
    """magic "BSPC", u32 version, u32 d, u32 n, f64 L, f64 t, n^d f64 row-major."""
    g = s.grid
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_SNAP_MAGIC)
        fh.write(struct.pack("<IIIdd", _SNAP_VERSION, g.d, g.n, g.L, s.t))
        fh.write(np.ascontiguousarray(s.values, dtype="<f8").tobytes())


def read_snapshot(path: str | Path) -> State:
    with open(path, "rb") as fh:
        if fh.read(4) != _SNAP_MAGIC:
            raise ValueError(f"{path}: not a field snapshot")
        version, d, n, L, t = struct.unpack("<IIIdd", fh.read(28))
        if version != _SNAP_VERSION:
            raise ValueError(f"{path}: unsupported snapshot version {version}")
        grid = VelocityGrid(d, L, n)
        vals = np.frombuffer(fh.read(grid.size * 8), dtype="<f8").reshape(grid.shape)
    return State(grid, vals.copy(), t)


def cache_root(cfg: RunConfig | None = None) -> Path:
    if cfg is not None and cfg.cache_dir:
        return Path(cfg.cache_dir)
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "boltzspec"


def mixture_invariants(cfg: RunConfig) -> tuple[float, np.ndarray, float]:
    """(m0, u0, T0) of the configured Gaussian mixture."""
    m0 = sum(c.mass for c in cfg.ic_components)
    u0 = sum(c.mass * np.asarray(c.velocity, dtype=float)[: cfg.d] for c in cfg.ic_components) / m0
    e2 = sum(
        c.mass * (cfg.d * c.temperature + float(np.sum(np.asarray(c.velocity, dtype=float)[: cfg.d] ** 2)))
        for c in cfg.ic_components
    )
    T0 = (e2 / m0 - float(u0 @ u0)) / cfg.d
    return m0, u0, T0


def build_grid(cfg: RunConfig) -> VelocityGrid:
    if cfg.ic_kind == "file":
        s = read_snapshot(cfg.ic_path)
        if s.grid.d != cfg.d:
            raise ValueError(f"snapshot dimension {s.grid.d} != configured d={cfg.d}")
        return VelocityGrid(cfg.d, s.grid.L, cfg.n)
    if cfg.L is not None:
        return VelocityGrid(cfg.d, cfg.L, cfg.n)
    m0, u0, T0 = mixture_invariants(cfg)
    choice = choose_domain(m0, u0, T0, mu=cfg.mu, d=cfg.d)
    return VelocityGrid(cfg.d, choice.L, cfg.n)


def build_initial(cfg: RunConfig, grid: VelocityGrid) -> State:
    if cfg.ic_kind == "file":
        s = read_snapshot(cfg.ic_path)
        if s.grid != grid:
            s = resample(s, grid)
        return s
    vals = np.zeros(grid.shape)
    for c in cfg.ic_components:
        vals = vals + maxwellian(grid, c.mass, np.asarray(c.velocity, dtype=float)[: grid.d], c.temperature).values
    return State(grid, vals)


def resample(s: State, new_grid: VelocityGrid) -> State:
    """Evaluate the band-limited interpolant of s on another grid's nodes.

    Direct mode summation g(v) = (2 pi)^{-d/2} sum_k ghat_k e^{i zeta_k v}
    (dzeta)^d, separable per axis; exact when the grids coincide.
    """
    g = s.grid
    if new_grid.d != g.d:
        raise ValueError("dimension mismatch in resample")
    coeffs = s.coeffs
    const = g.dzeta**g.d / (2.0 * np.pi) ** (g.d / 2)
    # per-axis evaluation matrices (n_new, n_old)
    P = np.exp(1j * np.outer(new_grid.nodes, g.modes))
    out = coeffs
    for ax in range(g.d):
        out = np.moveaxis(np.tensordot(P, np.moveaxis(out, ax, 0), axes=(1, 0)), 0, ax)
    return State(new_grid, (out * const).real, s.t)


def get_table(cfg: RunConfig, grid: VelocityGrid, spec: KernelSpec, log=print):
    """Cache-aware table lookup; returns (table, cache_hit)."""
    quad = TableQuadrature()
    key = table_key(grid, spec, quad, grid.L)
    path = cache_root(cfg) / f"{key}.bwtb"
    table = load_table(path, grid, key)
    if table is not None:
        log(f"weight table: cache hit ({path})")
        return table, True
    log(f"weight table: cache miss, building (mode={cfg.table_mode})")
    table = build_weight_table(grid, spec, mode=cfg.table_mode, quad_spec=quad)
    save_table(table, path)
    return table, False


def _csv_row(vals) -> str:
    return ",".join(f"{v:.17g}" for v in vals)


class SeriesWriter:
    """Streams the moment time series to CSV as the run progresses."""

    def __init__(self, path: Path, grid: VelocityGrid, M0: State, ws: CollisionWorkspace):
        self.path = path
        self.M0 = M0
        self.ws = ws
        self.fh = open(path, "w")
        stamp = datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        self.fh.write(f"# boltzspec moments v1 generated {stamp}\n")
        axes = "xyz"[: grid.d]
        cols = ["t", "mass"] + [f"momentum_{a}" for a in axes] + ["energy", "L2_error_vs_M0", "neg_mass", "entropy"]
        self.fh.write(",".join(cols) + "\n")

    def __call__(self, s: State) -> None:
        mom = moments(s)
        err = s.grid.l2_norm(s.values - self.M0.values)
        row = [s.t, mom.mass, *mom.momentum, mom.energy, err, negative_part_norm(s), entropy(s)]
        self.fh.write(_csv_row(row) + "\n")
        self.fh.flush()

    def close(self) -> None:
        self.fh.close()


def cmd_run(cfg: RunConfig, log=print) -> int:
    outdir = Path(cfg.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    grid = build_grid(cfg)
    spec = KernelSpec(lam=cfg.lam, beta=cfg.beta, d=cfg.d)
    table, cache_hit = get_table(cfg, grid, spec, log)
    ws = CollisionWorkspace(grid, table)
    cs = build_constraints(grid, "elastic" if cfg.beta == 1.0 else "inelastic")
    initial = build_initial(cfg, grid)
    m = moments(initial)
    u0 = m.momentum / m.mass
    T0 = (m.energy / m.mass - float(u0 @ u0)) / grid.d
    M0 = maxwellian(grid, m.mass, u0, T0)

    icfg = IntegratorConfig(
        method=cfg.method,
        dt=cfg.dt,
        t_end=cfg.t_end,
        cfl=cfg.cfl,
        conserve_every_stage=cfg.conserve_every_stage,
    )
    dt = cfg.dt if cfg.dt is not None else auto_dt(initial, spec, grid, cfg.cfl)
    writer = SeriesWriter(outdir / "moments.csv", grid, M0, ws)
    try:
        summary = run(initial, icfg, ws, cs, spec, sinks=[writer], cadence=cfg.cadence)
    finally:
        writer.close()

    if cfg.snapshot_final:
        write_snapshot(outdir / "final.bspc", summary.final)
    manifest = {
        "config": cfg.resolved(),
        "derived": {
            "L": grid.L,
            "dt": dt,
            "n_steps": summary.n_steps,
            "table_cache_hit": cache_hit,
            "table_key": table.key,
            "wall_time": summary.wall_time,
            "aborted": summary.aborted,
        },
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if summary.aborted:
        log(f"run aborted at t={summary.final.t}: non-finite values (partial outputs kept)")
        return 1
    log(f"run complete: {summary.n_steps} steps to t={summary.final.t:.6g} in {summary.wall_time:.1f}s")
    return 0


def _sweep_configs(cfg: RunConfig, axis: str, values: list[float]):
    for v in values:
        sub = RunConfig(**vars(cfg))
        if axis == "N":
            sub.n = int(v)
        elif axis == "L":
            sub.L = float(v)
        else:  # dt
            sub.dt = float(v)
        sub.directory = str(Path(cfg.directory) / f"{axis}={v:g}")
        yield v, sub


def cmd_sweep(cfg: RunConfig, axis: str, values: list[float], log=print) -> int:
    if axis not in ("N", "L", "dt"):
        raise ValueError(f"sweep axis must be N, L or dt, got {axis!r}")
    outdir = Path(cfg.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    finals: dict[float, State | None] = {}
    status = 0
    for v, sub in _sweep_configs(cfg, axis, values):
        rc = cmd_run(sub, log=log)
        final = None
        drift = np.nan
        wall = np.nan
        if rc == 0:
            final = read_snapshot(Path(sub.directory) / "final.bspc")
            series = np.genfromtxt(Path(sub.directory) / "moments.csv", delimiter=",", skip_header=2)
            series = np.atleast_2d(series)
            inv0 = series[0, 1 : 2 + sub.d + 1]
            invT = series[-1, 1 : 2 + sub.d + 1]
            # momentum components sit at rounding scale; normalize against
            # the larger of the column's own magnitude and the mass scale
            scale = np.maximum(np.abs(inv0), abs(inv0[0]))
            drift = float(np.max(np.abs(invT - inv0) / scale))
            with open(Path(sub.directory) / "manifest.json") as fh:
                wall = json.load(fh)["derived"]["wall_time"]
        else:
            status = 1
        finals[v] = final
        rows.append([v, drift, wall, rc])

    # error against the finest run (largest N / finest dt / largest L)
    ref_v = min(values) if axis == "dt" else max(values)
    ref = finals.get(ref_v)
    table_rows = []
    for v, drift, wall, rc in rows:
        err = np.nan
        if rc == 0 and ref is not None:
            s = finals[v]
            if s.grid == ref.grid:
                err = ref.grid.l2_norm(s.values - ref.values)
            else:
                err = ref.grid.l2_norm(resample(s, ref.grid).values - ref.values)
        table_rows.append([v, err, drift, wall, rc])

    # observed order from successive error ratios (meaningful for dt sweeps)
    orders = [np.nan] * len(table_rows)
    for i in range(len(table_rows) - 1):
        v0, e0 = table_rows[i][0], table_rows[i][1]
        v1, e1 = table_rows[i + 1][0], table_rows[i + 1][1]
        if e0 > 0 and e1 > 0 and v0 != v1:
            orders[i + 1] = float(np.log(e0 / e1) / np.log(v0 / v1))

    with open(outdir / "sweep.csv", "w") as fh:
        stamp = datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        fh.write(f"# boltzspec sweep axis={axis} v1 generated {stamp}\n")
        fh.write("value,L2_error_vs_ref,invariant_drift,observed_order,wall_time,status\n")
        for row, order in zip(table_rows, orders):
            fh.write(_csv_row([row[0], row[1], row[2], order, row[3]]) + f",{int(row[4])}\n")
    log(f"sweep complete: {len(values)} runs, table at {outdir / 'sweep.csv'}")
    return status


def cmd_table_cache(action: str, cfg: RunConfig | None, log=print) -> int:
    root = cache_root(cfg)
    if action == "clear":
        count = 0
        if root.exists():
            for p in root.glob("*.bwtb"):
                p.unlink()
                count += 1
        log(f"cleared {count} cached tables from {root}")
        return 0
    if cfg is None:
        log("table-cache build requires a config file")
        return 2
    grid = build_grid(cfg)
    spec = KernelSpec(lam=cfg.lam, beta=cfg.beta, d=cfg.d)
    _, hit = get_table(cfg, grid, spec, log)
    log("table already cached" if hit else "table built and cached")
    return 0


def _load_config(path: str) -> RunConfig:
    return parse_config(Path(path).read_text())


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="boltzspec", description="Conservative spectral Boltzmann solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation from a config file")
    p_run.add_argument("config")

    p_sweep = sub.add_parser("sweep", help="convergence sweep over N, L or dt")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--axis", required=True, choices=["N", "L", "dt"])
    p_sweep.add_argument("--values", required=True, help="comma-separated values, e.g. 8,12,16")
    p_sweep.add_argument("--parallel", action="store_true", help="reserved; runs stay sequential")

    p_cache = sub.add_parser("table-cache", help="manage the weight-table cache")
    p_cache.add_argument("action", choices=["build", "clear"])
    p_cache.add_argument("config", nargs="?")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(_load_config(args.config))
        if args.command == "sweep":
            values = [float(v) for v in args.values.split(",")]
            return cmd_sweep(_load_config(args.config), args.axis, values)
        cfg = _load_config(args.config) if args.config else None
        return cmd_table_cache(args.action, cfg)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
