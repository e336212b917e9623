"""Extension of lattice symbols to R^d by smooth bumps, and the average-matching check.

A symbol ``sigma`` on ``Z^d`` is spread to the whole space as

    K_e(xi) = sum over chi of sigma(chi) * h(|chi - xi|),

where the radial bump ``h`` equals 1 up to radius 1/8 and vanishes from
radius 1/4 on.  Bumps at distinct lattice points never overlap, so at most
one term of the sum is nonzero.  Continuous averages of ``K_e`` over large
balls should then agree with ``c`` times the volume-normalized lattice sum,
``c`` being the integral of the bump.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import InvalidArgumentError, PreconditionError
from .lattice import GrowthFunction, ball_average, ball_volume, enumerate_ball, exact_sum, real_divide
from .measures import Symbol
from .wiener import _check_unit, _map

INNER_RADIUS = 0.125
OUTER_RADIUS = 0.25
MIN_RESOLUTION = 8
DEFAULT_RESOLUTION = 16
MIN_RADIUS = 10.0
SLAB_WIDTH = 256


def _psi(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def _exp_step(u: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    a, b = _psi(u), _psi(1.0 - u)
    return a / (a + b)


def _quintic_step(u: np.ndarray) -> np.ndarray:
    """C^2 step ``6u^5 - 15u^4 + 10u^3`` clamped to [0, 1]."""
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (u * (6.0 * u - 15.0) + 10.0)


_RECIPES = {"exp": _exp_step, "quintic": _quintic_step}


@dataclass(frozen=True)
class BumpSpec:
    """Radial profile ``h``; ``h = 1`` on ``[0, 1/8]`` and ``h = 0`` on ``[1/4, inf)``."""

    recipe: str = "exp"

    def __post_init__(self):
        if self.recipe not in _RECIPES:
            raise InvalidArgumentError(f"unknown bump recipe {self.recipe!r}; choose from {sorted(_RECIPES)}")

    def __call__(self, rho):
        rho_arr = np.abs(np.asarray(rho, dtype=float))
        u = (OUTER_RADIUS - rho_arr) / (OUTER_RADIUS - INNER_RADIUS)
        out = _RECIPES[self.recipe](np.atleast_1d(u).astype(float))
        out = np.where(rho_arr.reshape(out.shape) <= INNER_RADIUS, 1.0, out)
        out = np.where(rho_arr.reshape(out.shape) >= OUTER_RADIUS, 0.0, out)
        return float(out[0]) if np.ndim(rho) == 0 else out.reshape(rho_arr.shape)

    def integral(self, d: int) -> float:
        """``int_{R^d} h(|x|) dx`` by adaptive radial quadrature."""
        if d < 1:
            raise InvalidArgumentError("dimension must be at least 1")
        sphere = 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)
        inner = INNER_RADIUS ** d / d
        shell, _ = integrate.quad(lambda r: self(r) * r ** (d - 1), INNER_RADIUS, OUTER_RADIUS,
                                  epsabs=1e-14, epsrel=1e-12, limit=200)
        return sphere * (inner + shell)

    def corner_constant(self, d: int) -> float:
        """``c_1``: the bump integrated over the part of ``B(0, 1/4)`` in the positive unit cube."""
        return self.integral(d) / 2 ** d


def make_bump(recipe: str = "exp") -> BumpSpec:
    return BumpSpec(recipe)


@dataclass(frozen=True)
class ExtendedSymbol:
    base: Symbol
    bump: BumpSpec = BumpSpec()

    def evaluate(self, xi: np.ndarray) -> np.ndarray:
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        nearest = np.rint(xi)
        dist = np.sqrt(np.einsum("ij,ij->i", xi - nearest, xi - nearest))
        out = np.zeros(xi.shape[0], dtype=complex)
        hit = np.flatnonzero(dist < OUTER_RADIUS)
        if hit.size:
            out[hit] = self.base.evaluate(nearest[hit].astype(np.int64)) * self.bump(dist[hit])
        return out

    def __call__(self, xi) -> complex:
        return complex(self.evaluate(np.asarray(xi, dtype=float)[None])[0])


def extended_eval(E: ExtendedSymbol, xi) -> complex:
    return E(xi)


def continuous_average(E: ExtendedSymbol, center, radius: float, resolution: int = DEFAULT_RESOLUTION,
                       *, threads: int = 1) -> complex:
    """Midpoint rule for the mean of ``E`` over ``B(center, radius)``.

    The nodes are the cell centers ``(k + 1/2) / resolution`` that fall
    inside the ball; the integral is divided by the exact ball volume.  The
    grid is cut into slabs along the first axis so memory stays bounded.
    """
    if resolution < MIN_RESOLUTION:
        raise InvalidArgumentError(
            f"quadrature resolution {resolution} leaves the bump under-resolved; use at least {MIN_RESOLUTION}")
    center = np.asarray(center, dtype=float)
    n = int(resolution)
    grid_center = center * n - 0.5
    grid_radius = radius * n
    lo = math.floor(grid_center[0] - grid_radius) - 1
    hi = math.ceil(grid_center[0] + grid_radius) + 1
    slabs = [(a, min(a + SLAB_WIDTH - 1, hi)) for a in range(lo, hi + 1, SLAB_WIDTH)]

    def slab_sum(bounds):
        ball = enumerate_ball(grid_center, grid_radius, first_axis=bounds)
        if ball.count == 0:
            return 0.0, 0.0
        nodes = (ball.points + 0.5) / n
        total = exact_sum(E.evaluate(nodes))
        return total.real, total.imag

    parts = _map(slab_sum, slabs, threads)
    total = complex(math.fsum(p[0] for p in parts), math.fsum(p[1] for p in parts))
    return real_divide(total, float(n) ** center.size * ball_volume(center.size, radius))


@dataclass(frozen=True)
class TransferenceReport:
    c1: float
    c: float
    lattice_avg: complex
    continuous_avg: complex
    residual: float
    t: float
    radius: float
    resolution: int

    def to_dict(self) -> dict:
        return {
            "c1": self.c1,
            "c": self.c,
            "lattice_avg": {"re": self.lattice_avg.real, "im": self.lattice_avg.imag},
            "continuous_avg": {"re": self.continuous_avg.real, "im": self.continuous_avg.imag},
            "residual": self.residual,
            "t": self.t,
            "radius": self.radius,
            "resolution": self.resolution,
        }


def transference_average_check(sigma: Symbol, omega, growth: GrowthFunction, t: float,
                               resolution: int = DEFAULT_RESOLUTION, *, bump: BumpSpec | None = None,
                               threads: int = 1) -> TransferenceReport:
    """Compare the continuous mean of ``K_e`` on ``B(t omega, r(t))`` with ``c`` times the lattice sum over volume."""
    if resolution < MIN_RESOLUTION:
        raise InvalidArgumentError(
            f"quadrature resolution {resolution} leaves the bump under-resolved; use at least {MIN_RESOLUTION}")
    w = _check_unit(omega)
    r = float(growth(t))
    if r < MIN_RADIUS:
        raise PreconditionError(f"r(t) = {r:g} is below {MIN_RADIUS:g}; take a larger t")
    bump = bump or BumpSpec()
    d = w.size
    c1 = bump.corner_constant(d)
    c = 2 ** d * c1
    center = t * w
    lattice = c * ball_average(sigma, enumerate_ball(center, r), norm="volume")
    cont = continuous_average(ExtendedSymbol(sigma, bump), center, r, resolution, threads=threads)
    return TransferenceReport(c1=c1, c=c, lattice_avg=complex(lattice), continuous_avg=complex(cont),
                              residual=float(abs(cont - lattice)), t=float(t), radius=r, resolution=int(resolution))


@dataclass(frozen=True)
class TransferenceTrend:
    reports: tuple[TransferenceReport, ...]
    decreasing: bool
    noise: float

    def to_dict(self) -> dict:
        return {"reports": [rep.to_dict() for rep in self.reports], "decreasing": self.decreasing,
                "noise": self.noise}


def transference_trend(sigma: Symbol, omega, growth: GrowthFunction, ts, resolution: int = DEFAULT_RESOLUTION,
                       *, bump: BumpSpec | None = None, noise: float = 0.2, threads: int = 1) -> TransferenceTrend:
    """Residuals along increasing ``t``; ``decreasing`` allows each step to grow by at most ``noise``."""
    ts = sorted(float(t) for t in ts)
    reports = tuple(transference_average_check(sigma, omega, growth, t, resolution, bump=bump, threads=threads)
                    for t in ts)
    res = [rep.residual for rep in reports]
    ok = all(b <= a * (1.0 + noise) for a, b in zip(res, res[1:]))
    return TransferenceTrend(reports, ok, noise)
