"""Chemoattractant concentration as a finite sum of Gaussian bumps."""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np


@dataclass(frozen=True)
class ChemoField:
    """S(x) = sum_i alpha_i * exp(-beta_i * (x - center_i)**2).

    An empty field is the constant S = 0 (no gradient anywhere).
    """

    alpha: tuple = ()
    beta: tuple = ()
    center: tuple = ()

    def __post_init__(self):
        if not (len(self.alpha) == len(self.beta) == len(self.center)):
            raise ValueError("alpha, beta and center must have the same length")
        for a, b in zip(self.alpha, self.beta):
            if a < 0:
                raise ValueError(f"amplitude must be non-negative, got {a}")
            if b <= 0:
                raise ValueError(f"width must be positive, got {b}")
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @classmethod
    def from_terms(cls, terms) -> "ChemoField":
        """Build from a list of ``{alpha, beta, center}`` mappings (config format)."""
        terms = list(terms)
        return cls(
            alpha=tuple(t["alpha"] for t in terms),
            beta=tuple(t["beta"] for t in terms),
            center=tuple(t["center"] for t in terms),
        )

    @classmethod
    def bimodal(cls, alpha=5.0, beta=1.0, centers=(7.5, 12.5)) -> "ChemoField":
        return cls((alpha,) * len(centers), (beta,) * len(centers), tuple(centers))

    def to_terms(self) -> list[dict]:
        return [
            {"alpha": a, "beta": b, "center": c}
            for a, b, c in zip(self.alpha, self.beta, self.center)
        ]

    @property
    def arrays(self):
        """(alpha, beta, center) as float64 arrays, the form the kernels take."""
        return (
            np.asarray(self.alpha, dtype=np.float64),
            np.asarray(self.beta, dtype=np.float64),
            np.asarray(self.center, dtype=np.float64),
        )

    @property
    def is_constant(self) -> bool:
        return all(a == 0.0 for a in self.alpha)

    def max_abs_gradient(self, lo: float, hi: float, n: int = 20001) -> float:
        """Grid scan of |S'| over [lo, hi]."""
        x = np.linspace(lo, hi, n)
        return float(np.max(np.abs(gradient(self, x)))) if len(self.alpha) else 0.0


def value(field: ChemoField, x):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    for a, b, c in zip(field.alpha, field.beta, field.center):
        out = out + a * np.exp(-b * (x - c) ** 2)
    return out if out.ndim else float(out)


def gradient(field: ChemoField, x):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    for a, b, c in zip(field.alpha, field.beta, field.center):
        d = x - c
        out = out - 2.0 * a * b * d * np.exp(-b * d * d)
    return out if out.ndim else float(out)


@numba.njit(cache=True)
def _value(x, fa, fb, fc):
    s = 0.0
    for i in range(fa.shape[0]):
        d = x - fc[i]
        s += fa[i] * np.exp(-fb[i] * d * d)
    return s


@numba.njit(cache=True)
def _gradient(x, fa, fb, fc):
    s = 0.0
    for i in range(fa.shape[0]):
        d = x - fc[i]
        s -= 2.0 * fa[i] * fb[i] * d * np.exp(-fb[i] * d * d)
    return s
