"""Asymptotic variance reduction: a deterministic grid measure for the control
process corrected by the histogram difference of coupled particle pairs."""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .density import histogram, kde, signed_difference, silverman_bandwidth
from .ensemble import Ensemble, advance, init_ensemble, reinitialize
from .errors import ConfigError
from .field import ChemoField
from .grid import GridDensity, InitialLaw, Mesh
from .kinetic import KineticSolver
from .model import Domain, ModelParams

Z95 = 1.96
ESTIMATORS = ("histogram", "kde")


@dataclass
class VRState:
    mu_bar: GridDensity
    ensemble: Ensemble
    dt_ri_diffusive: float
    solver: KineticSolver
    steps: int = 0
    reinit_mode: str = "sync"
    estimator: str = "histogram"
    bandwidth: float | None = None
    last_correction_mass: float = 0.0

    @property
    def eps2(self) -> float:
        return self.ensemble.params.epsilon ** 2

    @property
    def t_bar(self) -> float:
        return self.steps * self.dt_ri_diffusive

    @property
    def t_phys(self) -> float:
        return self.steps * self.dt_ri_diffusive / self.eps2

    @property
    def mesh(self) -> Mesh:
        return self.mu_bar.mesh

    def negativity(self) -> float:
        """Mass of the negative part of the position density n_bar."""
        n = self.mu_bar.n
        return float(-np.sum(n[n < 0]) * self.mesh.dx)


@dataclass
class Snapshot:
    t_bar: float
    n_bar: np.ndarray
    n_plain: np.ndarray
    n_control_pde: np.ndarray


def total_variation(a: GridDensity, b: GridDensity) -> float:
    a.mesh.check_same(b.mesh)
    d = np.abs(a.p_plus - b.p_plus) + np.abs(a.p_minus - b.p_minus)
    return 0.5 * float(np.sum(d) * a.mesh.dx)


def vr_init(initial_density: GridDensity, law: InitialLaw, N: int, seed: int,
            params: ModelParams, field: ChemoField, domain: Domain,
            dt_ri_diffusive: float | None = None, dt_pde: float = 0.1,
            tv_tolerance: float = 1e-9, reinit_mode: str = "sync",
            estimator: str = "histogram", bandwidth: float | None = None) -> VRState:
    """mu_bar starts at the exact initial density; the ensemble is drawn from ``law``.

    The default reinitialisation interval is one grid step, eps^2 * dt_pde.
    """
    mesh = initial_density.mesh
    if mesh.bc != domain.bc or abs(mesh.length - domain.length) > 1e-12:
        raise ConfigError("mesh and domain disagree")
    tv = total_variation(initial_density, GridDensity.from_law(law, mesh))
    if tv > tv_tolerance:
        raise ConfigError(f"initial density differs from the sampler law (TV = {tv:.3g})")
    if dt_ri_diffusive is None:
        dt_ri_diffusive = params.epsilon ** 2 * dt_pde
    if not dt_ri_diffusive > 0:
        raise ConfigError("reinitialisation interval must be positive")
    if estimator not in ESTIMATORS:
        raise ConfigError(f"estimator must be one of {ESTIMATORS}")
    solver = KineticSolver(mesh, params, field, dt_pde)
    e = init_ensemble(law, N, seed, params, domain, field)
    return VRState(initial_density.copy(), e, float(dt_ri_diffusive), solver,
                   reinit_mode=reinit_mode, estimator=estimator, bandwidth=bandwidth)


def particle_density(x, v, mesh: Mesh, estimator: str = "histogram",
                     bandwidth: float | None = None) -> GridDensity:
    if estimator == "histogram":
        return histogram(x, v, mesh)
    return kde(x, v, mesh, bandwidth)


def _correction(s: VRState) -> GridDensity:
    e = s.ensemble
    h = s.bandwidth
    if s.estimator == "kde" and h is None:
        # one kernel for both ensembles so the difference is a pure coupling term
        h = silverman_bandwidth(e.internal.x)
    I, C = e.internal, e.control
    # identical pairs cancel exactly; only diverged ones carry a correction
    moved = np.nonzero((I.x != C.x) | (I.v != C.v))[0]
    if moved.size == 0:
        return GridDensity.zeros(s.mesh)
    d = particle_density(I.x[moved], I.v[moved], s.mesh, s.estimator, h)
    dc = particle_density(C.x[moved], C.v[moved], s.mesh, s.estimator, h)
    return signed_difference(d, dc).scaled(moved.size / e.size)


def vr_step(s: VRState) -> VRState:
    """Advance particles and mu_bar over one interval, add the particle
    correction and reinitialise the control particles (in place)."""
    t0 = s.t_phys
    s.steps += 1
    t1 = s.t_phys
    advance(s.ensemble, t1)
    s.mu_bar = s.solver.evolve(s.mu_bar, t1 - t0)
    corr = _correction(s)
    s.last_correction_mass = corr.mass
    s.mu_bar = s.mu_bar + corr
    reinitialize(s.ensemble, s.reinit_mode)
    return s


def peek(s: VRState, t_bar: float) -> GridDensity:
    """Estimate at a time inside the current interval, without reinitialising.

    Moves the ensemble clock to t_bar; the next vr_step continues from there.
    """
    t_phys = t_bar / s.eps2
    if t_phys < s.t_phys - 1e-9:
        raise ValueError("cannot peek into the past")
    advance(s.ensemble, max(t_phys, s.ensemble.t))
    return s.solver.evolve(s.mu_bar, t_phys - s.t_phys) + _correction(s)


def vr_run(s: VRState, t_bar_end: float, snapshot_times=(),
           control_pde: GridDensity | None = None) -> tuple[VRState, list[Snapshot]]:
    """Repeat vr_step up to t_bar_end, recording position densities at
    ``snapshot_times`` (the plain histogram and the control-PDE density too)."""
    n_steps = int(round(t_bar_end / s.dt_ri_diffusive))
    if abs(n_steps * s.dt_ri_diffusive - t_bar_end) > 1e-9 * max(1.0, t_bar_end):
        raise ConfigError("t_bar_end is not a multiple of the reinitialisation interval")
    pending = sorted(float(t) for t in snapshot_times)
    if pending and (pending[0] < 0 or pending[-1] > t_bar_end + 1e-12):
        raise ConfigError("snapshot times must lie in [0, t_bar_end]")
    pde = control_pde
    pde_t = 0.0
    snaps: list[Snapshot] = []

    def record(t, est):
        nonlocal pde, pde_t
        if pde is not None:
            pde = s.solver.evolve(pde, (t - pde_t) / s.eps2)
            pde_t = t
        h = particle_density(s.ensemble.internal.x, s.ensemble.internal.v, s.mesh,
                             s.estimator, s.bandwidth)
        snaps.append(Snapshot(t, est.n.copy(), h.n.copy(),
                              pde.n.copy() if pde is not None else np.full(s.mesh.size, np.nan)))

    while True:
        # snapshots falling on or before the current step boundary
        while pending and pending[0] <= s.t_bar + 1e-12 * max(1.0, s.t_bar):
            t = pending.pop(0)
            record(t, s.mu_bar if abs(t - s.t_bar) <= 1e-12 * max(1.0, t) else peek(s, t))
        if s.steps >= n_steps:
            break
        nxt = (s.steps + 1) * s.dt_ri_diffusive
        while pending and pending[0] < nxt - 1e-12 * max(1.0, nxt):
            t = pending.pop(0)
            record(t, peek(s, t))
        vr_step(s)
    return s, snaps


@dataclass
class EstimatorStats:
    tag: str
    mean: np.ndarray
    var: np.ndarray
    R: int

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(self.var / self.R)

    @property
    def ci(self) -> tuple[np.ndarray, np.ndarray]:
        return self.mean - Z95 * self.se, self.mean + Z95 * self.se

    @property
    def mean_var(self) -> float:
        return float(np.mean(self.var))


@dataclass
class VarianceStudy:
    x: np.ndarray
    plain: EstimatorStats
    reinit: EstimatorStats
    noreinit: EstimatorStats
    control_pde: np.ndarray
    samples: dict = dc_field(default_factory=dict)

    @property
    def estimators(self):
        return (self.plain, self.reinit, self.noreinit)


@dataclass(frozen=True)
class VRConfig:
    params: ModelParams = ModelParams(epsilon=0.5, tau=1.0, lambda0=1.0, dt=0.1)
    field: ChemoField = ChemoField.bimodal(alpha=2.0)
    domain: Domain = Domain(20.0, "periodic")
    law: InitialLaw = InitialLaw("uniform", lo=13.0, hi=15.0, v0=None)
    N: int = 5000
    dx: float = 0.1
    dt_pde: float = 0.1
    t_bar_end: float = 50.0
    dt_ri_diffusive: float | None = None
    reinit_mode: str = "sync"
    estimator: str = "histogram"
    bandwidth: float | None = None

    @property
    def mesh(self) -> Mesh:
        return Mesh.for_domain(self.domain, self.dx)


def _stats(tag, arr):
    return EstimatorStats(tag, arr.mean(axis=0), arr.var(axis=0, ddof=1), arr.shape[0])


def single_realization(cfg: VRConfig, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(plain histogram, VR with reinit, VR without reinit) position densities at t_bar_end."""
    mesh = cfg.mesh
    g0 = GridDensity.from_law(cfg.law, mesh)
    s = vr_init(g0, cfg.law, cfg.N, seed, cfg.params, cfg.field, cfg.domain,
                cfg.dt_ri_diffusive, cfg.dt_pde, reinit_mode=cfg.reinit_mode,
                estimator=cfg.estimator, bandwidth=cfg.bandwidth)
    vr_run(s, cfg.t_bar_end)
    plain = particle_density(s.ensemble.internal.x, s.ensemble.internal.v, mesh,
                             cfg.estimator, cfg.bandwidth).n
    s0 = vr_init(g0, cfg.law, cfg.N, seed, cfg.params, cfg.field, cfg.domain,
                 cfg.t_bar_end, cfg.dt_pde, estimator=cfg.estimator, bandwidth=cfg.bandwidth)
    vr_run(s0, cfg.t_bar_end)
    return plain, s.mu_bar.n.copy(), s0.mu_bar.n.copy()


def vr_variance_study(cfg: VRConfig, R: int, seed: int = 0, keep_samples: bool = False,
                      seeds=None) -> VarianceStudy:
    """Run R realizations (seeds seed, seed+1, ...) and collect per-cell stats."""
    if R < 2:
        raise ConfigError("a variance study needs R >= 2")
    seeds = [seed + r for r in range(R)] if seeds is None else list(seeds)
    if len(seeds) != R:
        raise ConfigError("need exactly R seeds")
    rows = [single_realization(cfg, sd) for sd in seeds]
    plain, re, nore = (np.array(a) for a in zip(*rows))
    mesh = cfg.mesh
    pde = KineticSolver(mesh, cfg.params, cfg.field, cfg.dt_pde).evolve(
        GridDensity.from_law(cfg.law, mesh), cfg.t_bar_end / cfg.params.epsilon ** 2)
    out = VarianceStudy(mesh.centers, _stats("plain", plain), _stats("vr_reinit", re),
                        _stats("vr_noreinit", nore), pde.n.copy())
    if keep_samples:
        out.samples = {"plain": plain, "vr_reinit": re, "vr_noreinit": nore}
    return out
