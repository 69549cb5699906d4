"""Run configuration: TOML file + CLI overrides, with per-experiment defaults."""
from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field as dc_field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .control import min_control_rate
from .errors import ConfigError
from .field import ChemoField
from .grid import InitialLaw, Mesh
from .model import Domain, ModelParams

EXPERIMENTS = ("trajectory", "sweep", "vr", "variance-study", "limit-check")


@dataclass
class SweepAxes:
    epsilons: tuple = (0.05, 0.1, 0.2, 0.4)
    taus: tuple = (1.0,)
    tbars: tuple = (10.0, 20.0, 30.0)


@dataclass
class VRSettings:
    dx: float = 0.1
    dt_pde: float = 0.1
    t_bar_end: float = 50.0
    reinit: bool = True
    # reinitialisation interval as a multiple k of particle substeps, k*dt = dt_pde
    reinit_every: int = 1
    reinit_mode: str = "sync"
    estimator: str = "histogram"
    bandwidth: float | None = None
    # None means a single snapshot at t_bar_end
    snapshots: tuple | None = None
    realizations: int = 100

    @property
    def snapshot_times(self) -> tuple:
        return (self.t_bar_end,) if self.snapshots is None else tuple(self.snapshots)


@dataclass
class LimitSettings:
    epsilons: tuple = (0.8, 0.4, 0.2, 0.1)
    tbar: float = 2.0
    dx: float = 0.2
    dt_sde: float = 1e-3


@dataclass
class RunConfig:
    experiment: str = "trajectory"
    params: ModelParams = dc_field(default_factory=ModelParams)
    domain: Domain = dc_field(default_factory=Domain)
    field: ChemoField = dc_field(default_factory=ChemoField.bimodal)
    law: InitialLaw = dc_field(default_factory=InitialLaw)
    N: int = 1
    seed: int = 1
    t_end: float | None = None
    sweep: SweepAxes = dc_field(default_factory=SweepAxes)
    vr: VRSettings = dc_field(default_factory=VRSettings)
    limit: LimitSettings = dc_field(default_factory=LimitSettings)
    out: str = "out"

    @property
    def mesh(self) -> Mesh:
        dx = self.limit.dx if self.experiment == "limit-check" else self.vr.dx
        return Mesh.for_domain(self.domain, dx)

    def to_dict(self) -> dict:
        d = {"experiment": self.experiment, "N": self.N, "seed": self.seed,
             "t_end": self.t_end}
        d["model"] = dataclasses.asdict(self.params)
        d["domain"] = dataclasses.asdict(self.domain)
        d["field"] = self.field.to_terms()
        d["init"] = dataclasses.asdict(self.law)
        if self.experiment == "sweep":
            d["sweep"] = dataclasses.asdict(self.sweep)
        if self.experiment in ("vr", "variance-study"):
            d["vr"] = dataclasses.asdict(self.vr)
        if self.experiment == "limit-check":
            d["limit"] = dataclasses.asdict(self.limit)
        return d

    def header_lines(self) -> list[str]:
        """Flattened key=value lines (no run-time or worker information)."""
        out = []

        def walk(prefix, obj):
            if isinstance(obj, dict):
                for k in obj:
                    walk(f"{prefix}.{k}" if prefix else k, obj[k])
            else:
                out.append(f"{prefix}={_fmt(obj)}")

        walk("", self.to_dict())
        return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_fmt(x) for x in v) + "]"
    return str(v)


def default_config(experiment: str) -> RunConfig:
    """Default run configuration for each experiment."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
    if experiment == "trajectory":
        p = ModelParams(epsilon=0.2, tau=1.0, lambda0=1.0, b=1.0, dt=0.1)
        return RunConfig(experiment, p, Domain(20.0, "reflecting"), ChemoField.bimodal(5.0, 1.0),
                         InitialLaw("point", x0=8.0, v0=1.0), N=1, t_end=30.0 / 0.2 ** 2)
    if experiment == "sweep":
        return RunConfig(experiment, ModelParams(), Domain(20.0, "reflecting"),
                         ChemoField.bimodal(1.0, 1.0), InitialLaw("point", x0=8.0, v0=1.0),
                         N=10000)
    if experiment in ("vr", "variance-study"):
        p = ModelParams(epsilon=0.5, tau=1.0, lambda0=1.0, b=1.0, dt=0.1)
        return RunConfig(experiment, p, Domain(20.0, "periodic"), ChemoField.bimodal(2.0, 1.0),
                         InitialLaw("uniform", lo=13.0, hi=15.0, v0=None), N=5000)
    p = ModelParams(epsilon=0.4, tau=1.0, lambda0=1.0, b=1.0, dt=0.1)
    return RunConfig(experiment, p, Domain(20.0, "periodic"), ChemoField.bimodal(2.0, 1.0),
                     InitialLaw("uniform", lo=13.0, hi=15.0, v0=None), N=100000)


_SECTIONS = {
    "model": ("params", ModelParams),
    "domain": ("domain", Domain),
    "init": ("law", InitialLaw),
    "sweep": ("sweep", SweepAxes),
    "vr": ("vr", VRSettings),
    "limit": ("limit", LimitSettings),
}


def _merge(obj, table: dict, where: str):
    names = {f.name for f in dataclasses.fields(obj)}
    unknown = set(table) - names
    if unknown:
        raise ConfigError(f"unknown keys in [{where}]: {sorted(unknown)}")
    vals = {k: tuple(v) if isinstance(v, list) else v for k, v in table.items()}
    if where == "init" and vals.get("v0") == "random":
        vals["v0"] = None
    try:
        return dataclasses.replace(obj, **vals)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from exc


def from_mapping(data: dict, experiment: str | None = None) -> RunConfig:
    data = dict(data)
    exp = experiment or data.pop("experiment", None) or "trajectory"
    data.pop("experiment", None)
    cfg = default_config(exp)
    for key, (attr, _) in _SECTIONS.items():
        if key in data:
            setattr(cfg, attr, _merge(getattr(cfg, attr), data.pop(key), key))
    if "field" in data:
        try:
            cfg.field = ChemoField.from_terms(data.pop("field"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"[[field]]: {exc}") from exc
    for key in ("N", "seed", "t_end", "out"):
        if key in data:
            setattr(cfg, key, data.pop(key))
    if data:
        raise ConfigError(f"unknown top-level keys: {sorted(data)}")
    return cfg


def load_config(path: str | None, experiment: str | None = None) -> RunConfig:
    if path is None:
        return default_config(experiment or "trajectory")
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return from_mapping(data, experiment)


def validate(cfg: RunConfig) -> None:
    """Reject configurations that would fail mid-run."""
    if cfg.N < 1:
        raise ConfigError("N must be at least 1")
    if not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    L = cfg.domain.length
    if cfg.law.kind == "point" and not 0 <= cfg.law.x0 <= L:
        raise ConfigError("x0 lies outside the domain")
    if cfg.law.kind == "uniform" and (cfg.law.lo < 0 or cfg.law.hi > L):
        raise ConfigError("initial interval lies outside the domain")
    eps_list = [cfg.params.epsilon]
    tau_list = [cfg.params.tau]
    if cfg.experiment == "sweep":
        eps_list, tau_list = list(cfg.sweep.epsilons), list(cfg.sweep.taus)
        if not eps_list or not tau_list or not cfg.sweep.tbars:
            raise ConfigError("sweep axes must be non-empty")
    if cfg.experiment == "limit-check":
        eps_list = list(cfg.limit.epsilons)
    for eps in eps_list:
        for tau in tau_list:
            p = cfg.params.replace(epsilon=eps, tau=tau)
            if p.floor <= 0.0 and min_control_rate(p, cfg.field, cfg.domain) <= 0.0:
                raise ConfigError(
                    f"control rate is non-positive somewhere for eps={eps}, tau={tau}; "
                    "set model.rate_floor")
    if cfg.experiment in ("vr", "variance-study", "limit-check"):
        mesh = cfg.mesh  # raises on non-integer L/dx
        if mesh.bc != cfg.domain.bc:
            raise ConfigError("mesh/domain bc mismatch")
    if cfg.experiment in ("vr", "variance-study"):
        v = cfg.vr
        if cfg.params.epsilon * v.dt_pde / v.dx > 1.0 + 1e-12:
            raise ConfigError("CFL condition eps*dt_pde/dx <= 1 violated")
        if v.reinit_every < 1:
            raise ConfigError("reinit_every must be >= 1")
        if not math.isclose(v.reinit_every * cfg.params.dt, v.dt_pde, rel_tol=1e-9):
            raise ConfigError("reinit interval must satisfy k*dt = dt_pde")
        steps = v.t_bar_end / (cfg.params.epsilon ** 2 * v.dt_pde)
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigError("t_bar_end must be a multiple of eps^2*dt_pde")
        if cfg.experiment == "variance-study" and v.realizations < 2:
            raise ConfigError("variance study needs at least 2 realizations")
        for t in v.snapshot_times:
            if not 0 <= t <= v.t_bar_end:
                raise ConfigError("snapshot times must lie in [0, t_bar_end]")
