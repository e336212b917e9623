"""Moving-ball averages of lattice symbols and the quantities built from them.

The central object is the sequence of averages of a symbol over
``B_d(t * omega, r(t))`` along a schedule of ``t`` values.  Limits are
extrapolated with the model ``avg(t) ~ L + C / r(t)``; the model is a
diagnostic, the raw samples are always kept.
"""
from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (ConsolidationError, DegenerateFitWarning, EmptyDomainError,
                     InvalidArgumentError)
from .lattice import (DEFAULT_POINT_CAP, GrowthFunction, ball_average, default_schedule,
                      enumerate_ball)
from .measures import (MIN_ATOM_SEPARATION, AtomicMeasure, AtomicTransform, Sum, Symbol,
                       SquaredModulus, autocorrelation_mass, modulate, torus_distance)

DIRECTION_TOL = 0.02
ATOM_THRESHOLD = 0.05


@dataclass(frozen=True)
class Sample:
    t: float
    r: float
    count: int
    average: complex


@dataclass(frozen=True)
class WienerEstimate:
    direction: tuple[float, ...]
    growth: GrowthFunction
    samples: tuple[Sample, ...]
    extrapolated_limit: complex
    fit_residual: float

    @property
    def last_sample(self) -> complex:
        return self.samples[-1].average

    def rows(self):
        """CSV rows ``direction, t, r, count, re, im``."""
        label = " ".join(f"{x:.12g}" for x in self.direction)
        for s in self.samples:
            yield [label, repr(s.t), repr(s.r), s.count, repr(s.average.real), repr(s.average.imag)]


def unit_vector(omega) -> np.ndarray:
    w = np.asarray(omega, dtype=float)
    n = float(np.linalg.norm(w))
    if n == 0:
        raise InvalidArgumentError("direction must be nonzero")
    return w / n


def _check_unit(omega) -> np.ndarray:
    w = np.asarray(omega, dtype=float)
    if abs(float(np.linalg.norm(w)) - 1.0) > 1e-12:
        raise InvalidArgumentError(f"direction {w.tolist()} is not a unit vector")
    return w


def _t_values(sched) -> list[float]:
    ts = []
    for item in sched:
        ts.append(float(item[0]) if isinstance(item, (tuple, list)) else float(item))
    if not ts:
        raise InvalidArgumentError("schedule is empty")
    return ts


def fit_limit(rs: Sequence[float], values: Sequence[complex]) -> tuple[complex, float]:
    """Fit ``values ~ L + C / r``; returns ``(L, rms residual)``.

    Rows are weighted by ``r`` (noise taken proportional to ``1 / r``) so that
    the small, noisy balls at the start of a schedule do not drag the limit.
    """
    rs = np.asarray(rs, dtype=float)
    values = np.asarray(values, dtype=complex)
    if len(values) < 3:
        warnings.warn("fewer than 3 samples; using the last sample as the limit", DegenerateFitWarning,
                      stacklevel=3)
        return complex(values[-1]), 0.0
    design = np.column_stack([np.ones_like(rs), 1.0 / rs])
    coef, *_ = np.linalg.lstsq(design * rs[:, None], values * rs, rcond=None)
    resid = values - design @ coef
    return complex(coef[0]), float(np.sqrt(np.mean(np.abs(resid) ** 2)))


def _map(func, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def wiener_average_sequence(s: Symbol, omega, growth: GrowthFunction, sched=None, *,
                            norm: str = "count", threads: int = 1,
                            cap: int = DEFAULT_POINT_CAP) -> WienerEstimate:
    """Averages of ``s`` over ``B_d(t omega, r(t))`` for each ``t`` of ``sched``."""
    w = _check_unit(omega)
    if len(w) != s.d:
        raise InvalidArgumentError(f"direction has dimension {len(w)}, symbol has {s.d}")
    ts = _t_values(sched if sched is not None else default_schedule(growth))

    def one(t):
        r = float(growth(t))
        ball = enumerate_ball(t * w, r, cap=cap)
        return Sample(t=t, r=r, count=ball.count, average=ball_average(s, ball, norm))

    samples = tuple(_map(one, ts, threads))
    limit, resid = fit_limit([x.r for x in samples], [x.average for x in samples])
    return WienerEstimate(direction=tuple(float(x) for x in w), growth=growth, samples=samples,
                          extrapolated_limit=limit, fit_residual=resid)


@dataclass(frozen=True)
class DirectionVerdict:
    directions: tuple[tuple[float, ...], ...]
    limits: tuple[complex, ...]
    deviations: dict = field(repr=False)
    max_deviation: float
    verdict: str
    tolerance: float
    estimates: tuple[WienerEstimate, ...] = field(repr=False, default=())

    @property
    def consistent(self) -> bool:
        return self.verdict == "consistent"

    def to_dict(self) -> dict:
        return {
            "directions": [list(d) for d in self.directions],
            "limits": [[z.real, z.imag] for z in self.limits],
            "pairwise_deviations": [[i, j, v] for (i, j), v in sorted(self.deviations.items())],
            "max_deviation": self.max_deviation,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
        }


def direction_dependence_test(s: Symbol, directions, growth: GrowthFunction, sched=None,
                              tol: float = DIRECTION_TOL, *, threads: int = 1,
                              use: str = "limit", norm: str = "count") -> DirectionVerdict:
    """Compare Wiener limits of ``s`` across ``directions``.

    ``use="limit"`` compares extrapolated limits, ``use="last"`` the samples
    at the largest ``t``.
    """
    directions = [tuple(_check_unit(d)) for d in directions]
    if len(directions) < 2:
        raise InvalidArgumentError("need at least two directions")
    if use not in ("limit", "last"):
        raise InvalidArgumentError(f"use must be 'limit' or 'last', got {use!r}")
    estimates = tuple(_map(lambda d: wiener_average_sequence(s, d, growth, sched, norm=norm), directions, threads))
    limits = tuple(e.extrapolated_limit if use == "limit" else e.last_sample for e in estimates)
    deviations = {(i, j): abs(limits[i] - limits[j])
                  for i, j in itertools.combinations(range(len(limits)), 2)}
    worst = max(deviations.values())
    return DirectionVerdict(directions=tuple(directions), limits=limits, deviations=deviations,
                            max_deviation=float(worst),
                            verdict="consistent" if worst <= tol else "direction_dependent",
                            tolerance=tol, estimates=estimates)


@dataclass(frozen=True)
class TheoremReport:
    limit: complex
    last_sample: complex
    mass: float
    abs_error: float
    rel_error: float
    estimate: WienerEstimate = field(repr=False)

    def to_dict(self) -> dict:
        return {"limit": [self.limit.real, self.limit.imag],
                "last_sample": [self.last_sample.real, self.last_sample.imag],
                "sum_abs_sq": self.mass, "abs_error": self.abs_error, "rel_error": self.rel_error}


def wiener_theorem_check(mu: AtomicMeasure, omega, growth: GrowthFunction, sched=None, *,
                         threads: int = 1) -> TheoremReport:
    """Wiener limit of ``|mu^|^2`` against ``sum_j |a_j|^2``."""
    est = wiener_average_sequence(SquaredModulus(AtomicTransform(mu)), omega, growth, sched,
                                  threads=threads)
    mass = autocorrelation_mass(mu)
    err = abs(est.extrapolated_limit - mass)
    return TheoremReport(limit=est.extrapolated_limit, last_sample=est.last_sample, mass=mass,
                         abs_error=err, rel_error=err / mass if mass else err, estimate=est)


def atom_mass_estimate(s: Symbol, tau, omega, growth: GrowthFunction, sched=None, *,
                       threads: int = 1) -> WienerEstimate:
    return wiener_average_sequence(modulate(s, tau), omega, growth, sched, threads=threads)


def atom_mass_recovery(s: Symbol, tau, omega, growth: GrowthFunction, sched=None, *,
                       threads: int = 1) -> complex:
    """Wiener limit of ``chi -> s(chi) exp(i <chi, tau>)``; the mass of an atom at ``tau``."""
    return atom_mass_estimate(s, tau, omega, growth, sched, threads=threads).extrapolated_limit


@dataclass(frozen=True)
class DiscretePartReport:
    measure: AtomicMeasure
    candidate_masses: tuple[tuple[complex, ...], ...]
    direction_dependent: bool
    max_direction_spread: float
    residual_limit: float

    def to_dict(self) -> dict:
        return {"measure": self.measure.to_dict(),
                "candidate_masses": [[[z.real, z.imag] for z in row] for row in self.candidate_masses],
                "direction_dependent": self.direction_dependent,
                "max_direction_spread": self.max_direction_spread,
                "residual_limit": self.residual_limit}


def discrete_part_scan(s: Symbol, candidates, growth: GrowthFunction, sched=None, *,
                       directions=None, threshold: float = ATOM_THRESHOLD,
                       tol: float = DIRECTION_TOL, threads: int = 1) -> DiscretePartReport:
    """Recover the atomic part of ``s`` on a finite candidate set.

    Masses are read along the first direction; the remaining directions only
    feed the direction-dependence flag.  The residual is the Wiener limit of
    ``|s - recovered^|^2`` along the first direction.
    """
    candidates = [tuple(float(x) for x in c) for c in candidates]
    for i, j in itertools.combinations(range(len(candidates)), 2):
        if torus_distance(candidates[i], candidates[j]) < MIN_ATOM_SEPARATION:
            raise ConsolidationError(f"candidates {i} and {j} coincide on the torus")
    if directions is None:
        directions = [np.eye(s.d)[0]]
    directions = [tuple(_check_unit(d)) for d in directions]

    def masses_for(tau):
        return tuple(atom_mass_recovery(s, tau, d, growth, sched) for d in directions)

    table = tuple(_map(masses_for, candidates, threads))
    spread = 0.0
    for row in table:
        for a, b in itertools.combinations(row, 2):
            spread = max(spread, abs(a - b))
    kept = [(tau, row[0]) for tau, row in zip(candidates, table) if abs(row[0]) > threshold]
    recovered = AtomicMeasure.from_atoms(kept, d=s.d)
    residual_symbol = SquaredModulus(Sum((s, AtomicTransform(recovered)), weights=(1.0, -1.0)))
    residual = wiener_average_sequence(residual_symbol, directions[0], growth, sched).extrapolated_limit
    return DiscretePartReport(measure=recovered, candidate_masses=table,
                              direction_dependent=spread > tol, max_direction_spread=float(spread),
                              residual_limit=float(residual.real))


# ---------------------------------------------------------------------------
# averaged symbol and its Lipschitz certificate
# ---------------------------------------------------------------------------

def averaged_symbol(s: Symbol, eps: float):
    """``xi -> `` average of ``s`` over the lattice points of ``B(xi, eps |xi|)``."""
    if not 0.0 < eps < 0.5:
        raise InvalidArgumentError("eps must lie in (0, 1/2)")

    def m_eps(xi) -> complex:
        xi = np.asarray(xi, dtype=float)
        radius = eps * float(np.linalg.norm(xi))
        ball = enumerate_ball(xi, radius)
        if ball.count == 0:
            raise EmptyDomainError(f"B({xi.tolist()}, {radius:.3g}) holds no lattice point")
        return ball_average(s, ball, "count")

    return m_eps


@dataclass(frozen=True)
class LipschitzReport:
    eps: float
    n_pairs: int
    empirical_constant: float
    bound: float
    holds: bool
    worst_pair: tuple[tuple[float, ...], tuple[float, ...]]

    def to_dict(self) -> dict:
        return {"eps": self.eps, "n_pairs": self.n_pairs, "empirical_constant": self.empirical_constant,
                "bound": self.bound, "holds": self.holds,
                "worst_pair": [list(self.worst_pair[0]), list(self.worst_pair[1])]}


def sample_pairs(d: int, eps: float, n_pairs: int, seed: int = 0, r_min: float = 100.0,
                 r_max: float = 400.0):
    """Pairs with ``r_min <= |xi1| <= r_max`` and ``|xi1 - xi2| <= eps |xi1| / 2``."""
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n_pairs):
        u = rng.normal(size=d)
        xi1 = rng.uniform(r_min, r_max) * u / np.linalg.norm(u)
        v = rng.normal(size=d)
        step = eps * np.linalg.norm(xi1) / 2 * rng.uniform() ** (1.0 / d)
        pairs.append((xi1, xi1 + step * v / np.linalg.norm(v)))
    return pairs


def lipschitz_certificate(s: Symbol, eps: float, pairs=None, *, n_pairs: int = 1000, seed: int = 0,
                          r_min: float = 100.0, r_max: float = 400.0, threads: int = 1,
                          bound_factor: float = 4.0) -> LipschitzReport:
    """Empirical constant ``max |m(xi1) - m(xi2)| |xi1| / |xi1 - xi2|`` over sampled pairs.

    ``holds`` compares it with ``bound_factor * sup|s| / eps``.
    """
    m = averaged_symbol(s, eps)
    if pairs is None:
        pairs = sample_pairs(s.d, eps, n_pairs, seed, r_min, r_max)
    for xi1, xi2 in pairs:
        n1 = float(np.linalg.norm(xi1))
        if n1 < 1 or float(np.linalg.norm(np.subtract(xi1, xi2))) > eps * n1 / 2 * (1 + 1e-12):
            raise InvalidArgumentError("pairs need |xi1| >= 1 and |xi1 - xi2| <= eps |xi1| / 2")

    def ratio(pair):
        xi1, xi2 = (np.asarray(p, float) for p in pair)
        step = float(np.linalg.norm(xi1 - xi2))
        if step == 0:
            return 0.0
        return abs(m(xi1) - m(xi2)) * float(np.linalg.norm(xi1)) / step

    ratios = _map(ratio, pairs, threads)
    k = int(np.argmax(ratios)) if ratios else 0
    c_emp = float(max(ratios, default=0.0))
    bound = bound_factor * s.sup_bound() / eps
    worst = tuple(tuple(float(x) for x in p) for p in pairs[k]) if pairs else ((), ())
    return LipschitzReport(eps=eps, n_pairs=len(pairs), empirical_constant=c_emp, bound=bound,
                           holds=math.isfinite(c_emp) and c_emp <= bound, worst_pair=worst)
