"""Uniform 1D mesh, per-direction grid densities and initial laws."""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigError, MeshMismatchError
from .model import Domain


@dataclass(frozen=True)
class Mesh:
    """Cell-centred mesh on [0, length); cell i covers [i*dx, (i+1)*dx)."""

    length: float
    dx: float
    bc: str = "periodic"

    def __post_init__(self):
        if not (self.length > 0 and self.dx > 0):
            raise ValueError("length and dx must be positive")
        ratio = self.length / self.dx
        if abs(ratio - round(ratio)) > 1e-12 * max(1.0, ratio):
            raise ValueError(f"length/dx = {ratio!r} is not an integer")
        Domain(self.length, self.bc)  # validates the bc tag

    @classmethod
    def for_domain(cls, domain: Domain, dx: float) -> "Mesh":
        return cls(domain.length, dx, domain.bc)

    @property
    def size(self) -> int:
        return int(round(self.length / self.dx))

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.size) + 0.5) * self.dx

    @property
    def edges(self) -> np.ndarray:
        return np.arange(self.size + 1) * self.dx

    def check_same(self, other: "Mesh") -> None:
        if (self.size != other.size or abs(self.length - other.length) > 1e-12
                or self.bc != other.bc):
            raise MeshMismatchError(f"mesh mismatch: {self} vs {other}")


@dataclass
class GridDensity:
    """Per-direction densities p+ and p- (per unit length) on a mesh.

    Values may be negative when the object holds a signed measure such as the
    variance-reduced estimate.
    """

    mesh: Mesh
    p_plus: np.ndarray
    p_minus: np.ndarray

    def __post_init__(self):
        self.p_plus = np.asarray(self.p_plus, dtype=np.float64)
        self.p_minus = np.asarray(self.p_minus, dtype=np.float64)
        if self.p_plus.shape != (self.mesh.size,) or self.p_minus.shape != (self.mesh.size,):
            raise MeshMismatchError("density arrays do not match the mesh size")

    @property
    def x(self) -> np.ndarray:
        return self.mesh.centers

    @property
    def n(self) -> np.ndarray:
        """Position density p+ + p-."""
        return self.p_plus + self.p_minus

    @property
    def mass(self) -> float:
        return float(np.sum(self.p_plus + self.p_minus) * self.mesh.dx)

    def copy(self) -> "GridDensity":
        return GridDensity(self.mesh, self.p_plus.copy(), self.p_minus.copy())

    def __add__(self, other: "GridDensity") -> "GridDensity":
        self.mesh.check_same(other.mesh)
        return GridDensity(self.mesh, self.p_plus + other.p_plus, self.p_minus + other.p_minus)

    def __sub__(self, other: "GridDensity") -> "GridDensity":
        self.mesh.check_same(other.mesh)
        return GridDensity(self.mesh, self.p_plus - other.p_plus, self.p_minus - other.p_minus)

    def scaled(self, a: float) -> "GridDensity":
        return GridDensity(self.mesh, a * self.p_plus, a * self.p_minus)

    @classmethod
    def zeros(cls, mesh: Mesh) -> "GridDensity":
        return cls(mesh, np.zeros(mesh.size), np.zeros(mesh.size))

    @classmethod
    def from_law(cls, law: "InitialLaw", mesh: Mesh) -> "GridDensity":
        """Exact cell averages of ``law``."""
        masses = law.cell_masses(mesh)
        if law.v0 is None:
            wp = wm = 0.5
        else:
            wp, wm = (1.0, 0.0) if law.v0 > 0 else (0.0, 1.0)
        return cls(mesh, wp * masses / mesh.dx, wm * masses / mesh.dx)


@dataclass(frozen=True)
class InitialLaw:
    """Initial position/direction law of the particles.

    ``kind='uniform'`` draws positions uniformly in [lo, hi];
    ``kind='point'`` puts every particle at x0. ``v0=None`` draws directions
    uniformly from {-1, +1}; otherwise every particle starts with v0.
    """

    kind: str = "point"
    x0: float = 8.0
    lo: float = 13.0
    hi: float = 15.0
    v0: float | None = 1.0

    def __post_init__(self):
        if self.kind not in ("point", "uniform"):
            raise ConfigError(f"unknown initial law {self.kind!r}")
        if self.kind == "uniform" and not self.hi > self.lo:
            raise ConfigError("uniform law needs hi > lo")
        if self.v0 is not None and self.v0 not in (-1, 1, -1.0, 1.0):
            raise ConfigError("v0 must be -1, +1 or None")

    def positions(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms in (0, 1) to positions."""
        if self.kind == "point":
            return np.full(u.shape, float(self.x0))
        return self.lo + (self.hi - self.lo) * u

    def cell_masses(self, mesh: Mesh) -> np.ndarray:
        e = mesh.edges
        if self.kind == "point":
            # lower-index cell on ties, matching the histogram rule
            idx = int(np.clip(np.ceil(self.x0 / mesh.dx) - 1, 0, mesh.size - 1))
            out = np.zeros(mesh.size)
            out[idx] = 1.0
            return out
        overlap = np.clip(np.minimum(e[1:], self.hi) - np.maximum(e[:-1], self.lo), 0.0, None)
        return overlap / (self.hi - self.lo)
