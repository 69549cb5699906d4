"""Deterministic solvers for the control kinetic system and its diffusion limit.

Kinetic system (velocities +-1, speed eps):

    d_t p+ + eps d_x p+ = -lam(x,+1)/2 p+ + lam(x,-1)/2 p-
    d_t p- - eps d_x p- =  lam(x,+1)/2 p+ - lam(x,-1)/2 p-

Transport uses the third-order upwind-biased scheme written in flux form,
F_{i+1/2} = eps * (-u_{i-1} + 5 u_i + 2 u_{i+1}) / 6 for rightward transport
(mirrored for leftward), and time stepping is classical RK4.

Limit equation in diffusive time: d_t n = (1/lambda0) d_x (D d_x n - D A0 n).
"""
from __future__ import annotations

import math

import numba
import numpy as np

from .control import control_rate, drift_field
from .errors import CFLError, StabilityError
from .field import ChemoField, _gradient
from .grid import GridDensity, Mesh
from .model import Domain, ModelParams, _apply_bc
from .streams import PURPOSE_SDE, CoupledStream, _normal_pair

# covariance of the uniform law on {-1, +1}
DIFFUSION_1D = 1.0


def _ghosts(pp, pm, bc):
    """Pad both directions with two ghost cells per side."""
    if bc == "periodic":
        ep = np.concatenate((pp[-2:], pp, pp[:2]))
        em = np.concatenate((pm[-2:], pm, pm[:2]))
    else:
        # specular walls: a + particle leaving is a - particle entering
        ep = np.concatenate((pm[1::-1], pp, pm[:-3:-1]))
        em = np.concatenate((pp[1::-1], pm, pp[:-3:-1]))
    return ep, em


class KineticSolver:
    """Control kinetic system on a fixed mesh with rates cached at cell centres."""

    def __init__(self, mesh: Mesh, params: ModelParams, field: ChemoField, dt_pde: float = 0.1):
        self.mesh = mesh
        self.params = params
        self.field = field
        self.dt_pde = float(dt_pde)
        x = mesh.centers
        self.half_lam_plus = 0.5 * np.asarray(control_rate(params, field, x, 1.0), dtype=float)
        self.half_lam_minus = 0.5 * np.asarray(control_rate(params, field, x, -1.0), dtype=float)
        self.check_cfl(self.dt_pde)

    def check_cfl(self, dt: float) -> None:
        c = self.params.epsilon * dt / self.mesh.dx
        if c > 1.0 + 1e-12:
            raise CFLError(f"CFL number eps*dt/dx = {c:.4g} exceeds 1")

    def rhs_arrays(self, pp, pm):
        eps = self.params.epsilon
        dx = self.mesh.dx
        ep, em = _ghosts(pp, pm, self.mesh.bc)
        # faces j = 0..M, face j sits between cells j-1 and j
        fp = eps * (-ep[:-3] + 5.0 * ep[1:-2] + 2.0 * ep[2:-1]) / 6.0
        fm = -eps * (2.0 * em[1:-2] + 5.0 * em[2:-1] - em[3:]) / 6.0
        turn = self.half_lam_plus * pp - self.half_lam_minus * pm
        dp = -(fp[1:] - fp[:-1]) / dx - turn
        dm = -(fm[1:] - fm[:-1]) / dx + turn
        return dp, dm

    def rk4_arrays(self, pp, pm, dt):
        k1p, k1m = self.rhs_arrays(pp, pm)
        k2p, k2m = self.rhs_arrays(pp + 0.5 * dt * k1p, pm + 0.5 * dt * k1m)
        k3p, k3m = self.rhs_arrays(pp + 0.5 * dt * k2p, pm + 0.5 * dt * k2m)
        k4p, k4m = self.rhs_arrays(pp + dt * k3p, pm + dt * k3m)
        return (pp + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
                pm + dt / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m))

    def step(self, g: GridDensity, dt: float | None = None) -> GridDensity:
        dt = self.dt_pde if dt is None else float(dt)
        self.check_cfl(dt)
        pp, pm = self.rk4_arrays(g.p_plus, g.p_minus, dt)
        return GridDensity(g.mesh, pp, pm)

    def evolve(self, g: GridDensity, duration: float) -> GridDensity:
        """Apply RK4 steps of dt_pde covering ``duration`` exactly."""
        if duration < 0:
            raise ValueError("duration must be non-negative")
        dt = self.dt_pde
        nfull = int(math.floor(duration / dt * (1.0 + 1e-12)))
        rem = duration - nfull * dt
        pp, pm = g.p_plus, g.p_minus
        for _ in range(nfull):
            pp, pm = self.rk4_arrays(pp, pm, dt)
        if rem > 1e-12 * dt:
            pp, pm = self.rk4_arrays(pp, pm, rem)
        return GridDensity(g.mesh, pp, pm)


def rhs(g: GridDensity, params: ModelParams, field: ChemoField) -> GridDensity:
    solver = KineticSolver.__new__(KineticSolver)
    solver.mesh, solver.params, solver.field = g.mesh, params, field
    x = g.mesh.centers
    solver.half_lam_plus = 0.5 * np.asarray(control_rate(params, field, x, 1.0), dtype=float)
    solver.half_lam_minus = 0.5 * np.asarray(control_rate(params, field, x, -1.0), dtype=float)
    dp, dm = solver.rhs_arrays(g.p_plus, g.p_minus)
    return GridDensity(g.mesh, dp, dm)


def rk4_step(g: GridDensity, params: ModelParams, field: ChemoField, dt_pde: float) -> GridDensity:
    return KineticSolver(g.mesh, params, field, dt_pde).step(g)


def evolve(g: GridDensity, params: ModelParams, field: ChemoField, duration: float,
           dt_pde: float = 0.1) -> GridDensity:
    return KineticSolver(g.mesh, params, field, dt_pde).evolve(g, duration)


def limit_drift(params: ModelParams, field: ChemoField, x):
    """A0(x); A does not depend on eps here, so A0 = A."""
    return drift_field(params, field, x)


def limit_pde_stable_dt(params: ModelParams, mesh: Mesh) -> float:
    return 0.4 * params.lambda0 * mesh.dx ** 2 / (2.0 * DIFFUSION_1D)


def _limit_rhs(n, a_face, mesh: Mesh, lam0: float):
    dx = mesh.dx
    D = DIFFUSION_1D
    if mesh.bc == "periodic":
        left = np.roll(n, 1)
        flux = (D / lam0) * ((n - left) / dx - a_face[:-1] * 0.5 * (n + left))
        flux = np.append(flux, flux[0])
    else:
        inner = (D / lam0) * ((n[1:] - n[:-1]) / dx - a_face[1:-1] * 0.5 * (n[1:] + n[:-1]))
        flux = np.concatenate(([0.0], inner, [0.0]))
    return (flux[1:] - flux[:-1]) / dx


def limit_pde_evolve(n0, params: ModelParams, field: ChemoField, duration_diffusive: float,
                     mesh: Mesh, dt: float | None = None) -> np.ndarray:
    """Second-order conservative finite differences + RK4 in diffusive time."""
    n = np.asarray(n0, dtype=np.float64).copy()
    bound = limit_pde_stable_dt(params, mesh)
    if dt is None:
        dt = bound
    elif dt > bound * (1 + 1e-12):
        raise StabilityError(f"dt = {dt} exceeds the stability bound {bound}")
    a_face = limit_drift(params, field, mesh.edges)
    lam0 = params.lambda0
    nfull = int(math.floor(duration_diffusive / dt * (1.0 + 1e-12)))
    steps = [dt] * nfull
    rem = duration_diffusive - nfull * dt
    if rem > 1e-12 * dt:
        steps.append(rem)
    for h in steps:
        k1 = _limit_rhs(n, a_face, mesh, lam0)
        k2 = _limit_rhs(n + 0.5 * h * k1, a_face, mesh, lam0)
        k3 = _limit_rhs(n + 0.5 * h * k2, a_face, mesh, lam0)
        k4 = _limit_rhs(n + h * k3, a_face, mesh, lam0)
        n = n + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return n


@numba.njit(cache=True)
def _sde_many(xs, pids, nsteps, dt, last_dt, coef, lam0, fa, fb, fc, L, bc, seed):
    out = np.empty_like(xs)
    sig = np.sqrt(2.0 * 1.0 / lam0)
    for i in range(xs.shape[0]):
        x = xs[i]
        for k in range(nsteps + (1 if last_dt > 0.0 else 0)):
            h = dt if k < nsteps else last_dt
            xi, _ = _normal_pair(seed, pids[i], k, 2)
            x = x + coef * _gradient(x, fa, fb, fc) / lam0 * h + sig * np.sqrt(h) * xi
            x, _v = _apply_bc(x, 1.0, L, bc)
        out[i] = x
    return out


def limit_sde_sample_many(x0, params: ModelParams, field: ChemoField, duration_diffusive: float,
                          seed: int, particle_ids=None, dt_sde: float = 1e-3,
                          domain: Domain = Domain()) -> np.ndarray:
    """Euler-Maruyama for dX = D A0(X)/lambda0 dt + sqrt(2D/lambda0) dW, many particles."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    pids = np.arange(x0.shape[0], dtype=np.int64) if particle_ids is None else \
        np.asarray(particle_ids, dtype=np.int64)
    nsteps = int(math.floor(duration_diffusive / dt_sde * (1.0 + 1e-12)))
    last = duration_diffusive - nsteps * dt_sde
    if last <= 1e-12 * dt_sde:
        last = 0.0
    fa, fb, fc = field.arrays
    return _sde_many(x0, pids, nsteps, dt_sde, last, params.drift_coefficient * DIFFUSION_1D,
                     params.lambda0, fa, fb, fc, domain.length, domain.bc_code, seed)


def limit_sde_sample(x0: float, params: ModelParams, field: ChemoField,
                     duration_diffusive: float, stream: CoupledStream,
                     dt_sde: float = 1e-3, domain: Domain = Domain()) -> float:
    return float(limit_sde_sample_many(np.array([x0]), params, field, duration_diffusive,
                                       stream.master_seed, [stream.particle_id], dt_sde,
                                       domain)[0])
