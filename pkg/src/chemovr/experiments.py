"""Experiment drivers writing CSV files with '#'-prefixed provenance headers."""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import __version__
from .config import RunConfig, validate
from .control import advance_until as control_advance, new_control
from .density import histogram, l1_distance
from .ensemble import advance, coupling_stats, init_ensemble
from .field import value
from .grid import GridDensity
from .internal import advance_until as internal_advance, new_internal
from .kinetic import KineticSolver, limit_pde_evolve, limit_sde_sample_many
from .streams import CoupledStream
from .vr import VRConfig, vr_init, vr_run, vr_variance_study


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    r2: float
    residuals: np.ndarray


def fit_slope(points, log_log: bool = True) -> SlopeFit:
    """Ordinary least squares y = slope * x + intercept (on logs if ``log_log``)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValueError("need at least three (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if log_log:
        if np.any(x <= 0) or np.any(y <= 0):
            raise ValueError("log-log fit needs positive values")
        x, y = np.log(x), np.log(y)
    if np.ptp(x) == 0:
        raise ValueError("degenerate abscissae")
    res = stats.linregress(x, y)
    resid = y - (res.slope * x + res.intercept)
    r2 = min(1.0, max(0.0, res.rvalue ** 2))
    return SlopeFit(float(res.slope), float(res.intercept), float(r2), resid)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: str, cfg: RunConfig, columns, rows) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# chemovr {__version__}\n")
        for line in cfg.header_lines():
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def _out(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.out, name)


def run_trajectory(cfg: RunConfig, record_dt: float | None = None) -> dict:
    """One coupled pair, sampled every ``record_dt`` (default: the substep)."""
    validate(cfg)
    p, f, d = cfg.params, cfg.field, cfg.domain
    stream = CoupledStream(cfg.seed, 0)
    x0 = cfg.law.x0 if cfg.law.kind == "point" else 0.5 * (cfg.law.lo + cfg.law.hi)
    pi = new_internal(x0, stream, f, cfg.law.v0)
    pc = new_control(x0, stream, cfg.law.v0)
    t_end = cfg.t_end if cfg.t_end is not None else 30.0 / p.epsilon ** 2
    step = p.dt if record_dt is None else record_dt
    n = int(round(t_end / step))
    rows = [(0.0, pi.x, pc.x, pi.y(f), pi.v, pc.v)]
    for k in range(1, n + 1):
        t = t_end if k == n else k * step
        pi = internal_advance(pi, p, f, d, t, stream)
        pc = control_advance(pc, p, f, d, t, stream)
        rows.append((t, pi.x, pc.x, pi.y(f), pi.v, pc.v))
    path = write_csv(_out(cfg, "trajectory.csv"), cfg,
                     ("t", "x_internal", "x_control", "y", "v_internal", "v_control"), rows)
    return {"trajectory": path, "rows": np.array(rows)}


def coupling_sweep(cfg: RunConfig, record: bool = False):
    """(rows, fits, per-particle differences) for the configured sweep axes."""
    validate(cfg)
    rows, dx_rows = [], []
    tbars = sorted(cfg.sweep.tbars)
    for tau in cfg.sweep.taus:
        for eps in cfg.sweep.epsilons:
            p = cfg.params.replace(epsilon=eps, tau=tau)
            e = init_ensemble(cfg.law, cfg.N, cfg.seed, p, cfg.domain, cfg.field)
            for tb in tbars:
                advance(e, tb / eps ** 2)
                c = coupling_stats(e, keep_values=record)
                rows.append((eps, tau, tb, c.mean_abs_dx, c.mean_sq_dx, cfg.N, cfg.seed))
                if record:
                    dx_rows.extend((eps, tau, tb, i, v) for i, v in enumerate(c.dx))
    fits = []
    arr = np.array([r[:5] for r in rows])
    for tau in cfg.sweep.taus:
        for tb in tbars:
            sel = arr[(arr[:, 1] == tau) & (arr[:, 2] == tb)]
            if sel.shape[0] < 3:
                continue
            for name, col, power in (("mean_abs_dx", 3, 1.0), ("rms_dx", 4, 0.5)):
                if np.any(sel[:, col] <= 0):
                    continue
                fit = fit_slope(np.column_stack((sel[:, 0], sel[:, col] ** power)))
                fits.append((tau, tb, name, fit))
    return rows, fits, dx_rows


def run_coupling_sweep(cfg: RunConfig, record: bool = False) -> dict:
    rows, fits, dx_rows = coupling_sweep(cfg, record)
    out = {"rows": rows, "fits": fits}
    out["sweep"] = write_csv(_out(cfg, "sweep.csv"), cfg,
                             ("epsilon", "tau", "tbar", "mean_abs_dx", "mean_sq_dx", "N", "seed"),
                             rows)
    out["fit"] = write_csv(_out(cfg, "sweep_fit.csv"), cfg,
                           ("tau", "tbar", "quantity", "slope", "intercept", "r2"),
                           [(t, tb, q, f.slope, f.intercept, f.r2) for t, tb, q, f in fits])
    if record:
        out["dx"] = write_csv(_out(cfg, "sweep_dx.csv"), cfg,
                              ("epsilon", "tau", "tbar", "particle", "dx"), dx_rows)
    return out


def vr_config(cfg: RunConfig, reinit: bool | None = None) -> VRConfig:
    v = cfg.vr
    reinit = v.reinit if reinit is None else reinit
    dt_ri = (cfg.params.epsilon ** 2 * v.reinit_every * cfg.params.dt) if reinit else v.t_bar_end
    return VRConfig(cfg.params, cfg.field, cfg.domain, cfg.law, cfg.N, v.dx, v.dt_pde,
                    v.t_bar_end, dt_ri, v.reinit_mode, v.estimator, v.bandwidth)


def run_vr_density(cfg: RunConfig, record: bool = False) -> dict:
    """One realization of the variance-reduced estimate with snapshots."""
    validate(cfg)
    vc = vr_config(cfg)
    mesh = vc.mesh
    g0 = GridDensity.from_law(cfg.law, mesh)
    s = vr_init(g0, cfg.law, cfg.N, cfg.seed, cfg.params, cfg.field, cfg.domain,
                vc.dt_ri_diffusive, vc.dt_pde, reinit_mode=vc.reinit_mode,
                estimator=vc.estimator, bandwidth=vc.bandwidth)
    s, snaps = vr_run(s, vc.t_bar_end, cfg.vr.snapshot_times, control_pde=g0)
    rows = []
    for sn in snaps:
        rows.extend(zip([sn.t_bar] * mesh.size, mesh.centers, sn.n_bar, sn.n_plain,
                        sn.n_control_pde))
    out = {"snapshots": snaps, "state": s}
    out["vr"] = write_csv(_out(cfg, "vr_snapshots.csv"), cfg,
                          ("t_bar", "x", "n_bar", "n_plain", "n_control_pde"), rows)
    e = s.ensemble
    out["summary"] = write_csv(
        _out(cfg, "vr_summary.csv"), cfg,
        ("t_bar", "mass", "negative_mass", "clip_events", "max_jump_error"),
        [(s.t_bar, s.mu_bar.mass, s.negativity(), int(e.clip_events.sum()),
          float(e.max_jump_error.max()))])
    if record:
        out["particles"] = write_csv(
            _out(cfg, "vr_particles.csv"), cfg,
            ("particle", "x_internal", "v_internal", "y", "x_control", "v_control"),
            zip(e.particle_ids, e.internal.x, e.internal.v, e.y(), e.control.x, e.control.v))
    return out


def run_variance_study(cfg: RunConfig) -> dict:
    validate(cfg)
    vc = vr_config(cfg, reinit=True)
    st = vr_variance_study(vc, cfg.vr.realizations, seed=cfg.seed)
    rows = []
    for est in st.estimators:
        lo, hi = est.ci
        rows.extend(zip(st.x, est.mean, est.var, lo, hi, [est.tag] * len(st.x)))
    zero = np.zeros_like(st.x)
    rows.extend(zip(st.x, st.control_pde, zero, st.control_pde, st.control_pde,
                    ["control_pde"] * len(st.x)))
    out = {"study": st}
    out["variance"] = write_csv(_out(cfg, "variance_study.csv"), cfg,
                                ("x", "mean", "var", "ci_lo", "ci_hi", "estimator"), rows)
    base = st.plain.mean_var
    out["ratios"] = write_csv(
        _out(cfg, "variance_ratios.csv"), cfg, ("estimator", "mean_var", "ratio_to_plain"),
        [(e.tag, e.mean_var, e.mean_var / base if base > 0 else float("nan"))
         for e in st.estimators])
    return out


def limit_check(cfg: RunConfig):
    """L1 distances of both particle models (and the limit SDE) to the limit PDE."""
    validate(cfg)
    mesh = cfg.mesh
    lim = cfg.limit
    n0 = GridDensity.from_law(cfg.law, mesh).n
    n_lim = limit_pde_evolve(n0, cfg.params, cfg.field, lim.tbar, mesh)
    rows = []
    for eps in lim.epsilons:
        p = cfg.params.replace(epsilon=eps)
        e = init_ensemble(cfg.law, cfg.N, cfg.seed, p, cfg.domain, cfg.field)
        advance(e, lim.tbar / eps ** 2)
        hi = histogram(e.internal.x, e.internal.v, mesh).n
        hc = histogram(e.control.x, e.control.v, mesh).n
        kin = KineticSolver(mesh, p, cfg.field, min(0.1, 0.5 * mesh.dx / eps)).evolve(
            GridDensity.from_law(cfg.law, mesh), lim.tbar / eps ** 2).n
        rows.append((eps, "internal", l1_distance(hi, n_lim, mesh.dx)))
        rows.append((eps, "control", l1_distance(hc, n_lim, mesh.dx)))
        rows.append((eps, "kinetic_pde", l1_distance(kin, n_lim, mesh.dx)))
    x0 = init_ensemble(cfg.law, cfg.N, cfg.seed, cfg.params, cfg.domain, cfg.field).internal.x
    xs = limit_sde_sample_many(x0, cfg.params, cfg.field, lim.tbar, cfg.seed,
                               dt_sde=lim.dt_sde, domain=cfg.domain)
    hs = histogram(xs, np.ones_like(xs), mesh).n
    rows.append((0.0, "limit_sde", l1_distance(hs, n_lim, mesh.dx)))
    return rows


def run_limit_check(cfg: RunConfig) -> dict:
    rows = limit_check(cfg)
    path = write_csv(_out(cfg, "limit_check.csv"), cfg, ("epsilon", "model", "l1"), rows)
    return {"rows": rows, "limit": path}


RUNNERS = {
    "trajectory": run_trajectory,
    "sweep": run_coupling_sweep,
    "vr": run_vr_density,
    "variance-study": run_variance_study,
    "limit-check": run_limit_check,
}
