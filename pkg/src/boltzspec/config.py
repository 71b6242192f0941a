"""Declarative run configuration: TOML parsing with exhaustive validation.

Every field has a default except the initial condition.  Validation collects
all errors before reporting so a config with three typos is fixed in one
round trip, and unknown keys are rejected to catch misspellings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import tomli

_KNOWN = {
    "physics": {"d", "lam", "lambda", "beta", "angular"},
    "initial": {"kind", "mass", "velocity", "temperature", "components", "path"},
    "domain": {"L", "mu"},
    "grid": {"n"},
    "integrator": {"method", "dt", "t_end", "cfl", "conserve_every_stage"},
    "output": {"directory", "cadence", "snapshot_final"},
    "table": {"mode", "cache_dir"},
}


@dataclass
class GaussianIC:
    mass: float = 1.0
    velocity: list[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    temperature: float = 1.0


@dataclass
class RunConfig:
    d: int = 3
    lam: float = 1.0
    beta: float = 1.0
    angular: str = "isotropic"
    ic_kind: str = "maxwellian"
    ic_components: list[GaussianIC] = field(default_factory=list)
    ic_path: str | None = None
    L: float | None = None  # None = auto via mu
    mu: float = 1e-4
    n: int = 16
    method: str = "rk4"
    dt: float | None = None
    t_end: float = 1.0
    cfl: float = 0.1
    conserve_every_stage: bool = True
    directory: str = "out"
    cadence: int = 1
    snapshot_final: bool = True
    table_mode: str = "reduced"
    cache_dir: str | None = None

    def resolved(self) -> dict:
        """Fully-resolved nested mapping (defaults included) for the manifest."""
        return {
            "physics": {"d": self.d, "lam": self.lam, "beta": self.beta, "angular": self.angular},
            "initial": {
                "kind": self.ic_kind,
                "components": [
                    {"mass": c.mass, "velocity": list(c.velocity), "temperature": c.temperature}
                    for c in self.ic_components
                ],
                "path": self.ic_path,
            },
            "domain": {"L": self.L, "mu": self.mu},
            "grid": {"n": self.n},
            "integrator": {
                "method": self.method,
                "dt": self.dt,
                "t_end": self.t_end,
                "cfl": self.cfl,
                "conserve_every_stage": self.conserve_every_stage,
            },
            "output": {
                "directory": self.directory,
                "cadence": self.cadence,
                "snapshot_final": self.snapshot_final,
            },
            "table": {"mode": self.table_mode, "cache_dir": self.cache_dir},
        }


class ConfigError(ValueError):
    """All validation failures for one config, reported together."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid config:\n" + "\n".join(f"  - {e}" for e in self.errors))


def _num(raw, section, key, errors, lo=None, hi=None, lo_open=False, hi_open=False, integer=False):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        errors.append(f"{section}.{key}: expected a number, got {raw!r}")
        return None
    if integer and (not isinstance(raw, int) or raw != int(raw)):
        errors.append(f"{section}.{key}: expected an integer, got {raw!r}")
        return None
    v = float(raw)
    if lo is not None and (v <= lo if lo_open else v < lo):
        errors.append(f"{section}.{key}: value {raw} below allowed range")
        return None
    if hi is not None and (v >= hi if hi_open else v > hi):
        errors.append(f"{section}.{key}: value {raw} above allowed range")
        return None
    return int(v) if integer else v


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML config; raises ConfigError listing all problems."""
    errors: list[str] = []
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError([f"TOML syntax: {exc}"]) from exc

    for section, table in data.items():
        if section not in _KNOWN:
            errors.append(f"unknown section [{section}]")
            continue
        if not isinstance(table, dict):
            errors.append(f"[{section}]: expected a table")
            continue
        for key in table:
            if key not in _KNOWN[section]:
                errors.append(f"unknown key {section}.{key}")

    cfg = RunConfig()
    phys = data.get("physics", {})
    if isinstance(phys, dict):
        if "d" in phys:
            v = _num(phys["d"], "physics", "d", errors, integer=True)
            if v is not None:
                if v not in (2, 3):
                    errors.append(f"physics.d: dimension must be 2 or 3, got {v}")
                else:
                    cfg.d = v
        lam_key = "lam" if "lam" in phys else ("lambda" if "lambda" in phys else None)
        if lam_key is not None:
            raw = phys[lam_key]
            v = _num(raw, "physics", lam_key, errors, lo=0.0, hi=1.0)
            if v is None and isinstance(raw, (int, float)) and not isinstance(raw, bool):
                errors[-1] = f"physics.{lam_key}: potential exponent must be in [0, 1], got {raw}"
            elif v is not None:
                cfg.lam = v
        if "beta" in phys:
            v = _num(phys["beta"], "physics", "beta", errors, lo=0.5, hi=1.0, lo_open=True)
            if v is None and isinstance(phys["beta"], (int, float)) and not isinstance(phys["beta"], bool):
                errors[-1] = f"physics.beta: restitution must be in (1/2, 1], got {phys['beta']}"
            elif v is not None:
                cfg.beta = v
        if "angular" in phys:
            if phys["angular"] != "isotropic":
                errors.append(f"physics.angular: only 'isotropic' is supported, got {phys['angular']!r}")

    if "initial" not in data:
        errors.append("missing required section [initial]")
    init = data.get("initial", {})
    if isinstance(init, dict) and init:
        kind = init.get("kind", "maxwellian")
        if kind not in ("maxwellian", "sum-of-gaussians", "file"):
            errors.append(f"initial.kind: unknown kind {kind!r}")
        else:
            cfg.ic_kind = kind
        if kind == "file":
            if not isinstance(init.get("path"), str):
                errors.append("initial.path: file IC requires a string path")
            else:
                cfg.ic_path = init["path"]
        elif kind == "sum-of-gaussians":
            comps = init.get("components")
            if not isinstance(comps, list) or not comps:
                errors.append("initial.components: sum-of-gaussians requires a nonempty array of tables")
            else:
                for i, comp in enumerate(comps):
                    if not isinstance(comp, dict):
                        errors.append(f"initial.components[{i}]: expected a table")
                        continue
                    for key in comp:
                        if key not in ("mass", "velocity", "temperature"):
                            errors.append(f"unknown key initial.components[{i}].{key}")
                    gic = GaussianIC()
                    m = _num(comp.get("mass", 1.0), "initial", f"components[{i}].mass", errors, lo=0.0, lo_open=True)
                    T = _num(
                        comp.get("temperature", 1.0), "initial", f"components[{i}].temperature", errors, lo=0.0, lo_open=True
                    )
                    if m is not None:
                        gic.mass = m
                    if T is not None:
                        gic.temperature = T
                    vel = comp.get("velocity", [0.0] * cfg.d)
                    if not isinstance(vel, list) or not all(
                        isinstance(x, (int, float)) and not isinstance(x, bool) for x in vel
                    ):
                        errors.append(f"initial.components[{i}].velocity: expected a list of numbers")
                    else:
                        gic.velocity = [float(x) for x in vel]
                    cfg.ic_components.append(gic)
        else:  # maxwellian
            gic = GaussianIC()
            m = _num(init.get("mass", 1.0), "initial", "mass", errors, lo=0.0, lo_open=True)
            T = _num(init.get("temperature", 1.0), "initial", "temperature", errors, lo=0.0, lo_open=True)
            if m is not None:
                gic.mass = m
            if T is not None:
                gic.temperature = T
            vel = init.get("velocity", [0.0] * cfg.d)
            if not isinstance(vel, list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in vel
            ):
                errors.append("initial.velocity: expected a list of numbers")
            else:
                gic.velocity = [float(x) for x in vel]
            cfg.ic_components = [gic]

    dom = data.get("domain", {})
    if isinstance(dom, dict):
        if "L" in dom:
            v = _num(dom["L"], "domain", "L", errors, lo=0.0, lo_open=True)
            if v is not None:
                cfg.L = v
        if "mu" in dom:
            v = _num(dom["mu"], "domain", "mu", errors, lo=0.0, hi=1.0, lo_open=True, hi_open=True)
            if v is not None:
                cfg.mu = v

    gsec = data.get("grid", {})
    if isinstance(gsec, dict) and "n" in gsec:
        v = _num(gsec["n"], "grid", "n", errors, lo=4, integer=True)
        if v is not None:
            if v % 2:
                errors.append(f"grid.n: must be even, got {v}")
            else:
                cfg.n = v

    isec = data.get("integrator", {})
    if isinstance(isec, dict):
        if "method" in isec:
            if isec["method"] not in ("euler", "rk2", "rk4"):
                errors.append(f"integrator.method: unknown method {isec['method']!r}")
            else:
                cfg.method = isec["method"]
        if "dt" in isec:
            v = _num(isec["dt"], "integrator", "dt", errors, lo=0.0, lo_open=True)
            if v is not None:
                cfg.dt = v
        if "t_end" in isec:
            v = _num(isec["t_end"], "integrator", "t_end", errors, lo=0.0)
            if v is not None:
                cfg.t_end = v
        if "cfl" in isec:
            v = _num(isec["cfl"], "integrator", "cfl", errors, lo=0.0, lo_open=True)
            if v is not None:
                cfg.cfl = v
        if "conserve_every_stage" in isec:
            if not isinstance(isec["conserve_every_stage"], bool):
                errors.append("integrator.conserve_every_stage: expected a boolean")
            else:
                cfg.conserve_every_stage = isec["conserve_every_stage"]

    osec = data.get("output", {})
    if isinstance(osec, dict):
        if "directory" in osec:
            if not isinstance(osec["directory"], str):
                errors.append("output.directory: expected a string")
            else:
                cfg.directory = osec["directory"]
        if "cadence" in osec:
            v = _num(osec["cadence"], "output", "cadence", errors, lo=1, integer=True)
            if v is not None:
                cfg.cadence = v
        if "snapshot_final" in osec:
            if not isinstance(osec["snapshot_final"], bool):
                errors.append("output.snapshot_final: expected a boolean")
            else:
                cfg.snapshot_final = osec["snapshot_final"]

    tsec = data.get("table", {})
    if isinstance(tsec, dict):
        if "mode" in tsec:
            if tsec["mode"] not in ("full", "reduced"):
                errors.append(f"table.mode: expected 'full' or 'reduced', got {tsec['mode']!r}")
            else:
                cfg.table_mode = tsec["mode"]
        if "cache_dir" in tsec:
            if not isinstance(tsec["cache_dir"], str):
                errors.append("table.cache_dir: expected a string")
            else:
                cfg.cache_dir = tsec["cache_dir"]

    if errors:
        raise ConfigError(errors)
    return cfg
