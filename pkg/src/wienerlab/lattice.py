"""Lattice points in Euclidean balls, ball averages and growth functions.

Membership of a point ``chi`` in the closed ball ``B(c, r)`` is decided on
squared distances.  Every float is a dyadic rational, so when the floating
point comparison falls inside a narrow guard band the point is re-checked
with :class:`fractions.Fraction` arithmetic.  Enumeration is therefore exact
for every center given as floats, ints or fractions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyDomainError, InvalidArgumentError, ResourceLimitError

DEFAULT_POINT_CAP = 10**8
GUARD_BAND = 2.0**-40


# ---------------------------------------------------------------------------
# growth functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthFunction:
    """Radius schedule ``r(t)`` of the moving balls ``B(t*omega, r(t))``.

    ``kind`` is one of ``"sqrt"``, ``"linear"`` (``r = eps * t``) or
    ``"custom"`` (piecewise linear through a table of ``(t, r)`` knots,
    constant outside the table).
    """

    kind: str
    eps: float | None = None
    table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind == "sqrt":
            return
        if self.kind == "linear":
            if self.eps is None or not 0.0 < self.eps < 0.5:
                raise InvalidArgumentError(f"linear growth needs eps in (0, 1/2), got {self.eps}")
            return
        if self.kind == "custom":
            if len(self.table) < 2:
                raise InvalidArgumentError("custom growth needs at least two (t, r) knots")
            ts = [p[0] for p in self.table]
            rs = [p[1] for p in self.table]
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise InvalidArgumentError("custom growth knots must have increasing t")
            if any(b < a for a, b in zip(rs, rs[1:])) or rs[0] <= 0:
                raise InvalidArgumentError("custom growth must be positive and nondecreasing")
            return
        raise InvalidArgumentError(f"unknown growth kind {self.kind!r}")

    @classmethod
    def sqrt(cls) -> "GrowthFunction":
        return cls("sqrt")

    @classmethod
    def linear(cls, eps: float) -> "GrowthFunction":
        return cls("linear", eps=float(eps))

    @classmethod
    def custom(cls, table) -> "GrowthFunction":
        return cls("custom", table=tuple((float(t), float(r)) for t, r in table))

    @classmethod
    def parse(cls, text: str) -> "GrowthFunction":
        """Parse ``"sqrt"`` or ``"linear:0.1"``."""
        name, _, arg = text.partition(":")
        if name == "sqrt" and not arg:
            return cls.sqrt()
        if name == "linear" and arg:
            return cls.linear(float(arg))
        raise InvalidArgumentError(f"cannot parse growth {text!r}")

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr <= 0):
            raise InvalidArgumentError("growth functions are evaluated at t > 0")
        if self.kind == "sqrt":
            out = np.sqrt(t_arr)
        elif self.kind == "linear":
            out = self.eps * t_arr
        else:
            ts, rs = zip(*self.table)
            out = np.interp(t_arr, ts, rs)
        return float(out) if np.ndim(out) == 0 else out

    def to_dict(self) -> dict:
        if self.kind == "sqrt":
            return {"kind": "sqrt"}
        if self.kind == "linear":
            return {"kind": "linear", "eps": self.eps}
        return {"kind": "custom", "table": [list(p) for p in self.table]}

    @classmethod
    def from_dict(cls, data: dict) -> "GrowthFunction":
        kind = data["kind"]
        if kind == "custom":
            return cls.custom(data["table"])
        if kind == "linear":
            return cls.linear(data["eps"])
        return cls(kind)

    def label(self) -> str:
        if self.kind == "linear":
            return f"linear:{self.eps:g}"
        return self.kind


def schedule(growth: GrowthFunction, t_min: float, t_max: float, n_steps: int) -> list[tuple[float, float]]:
    """Geometrically spaced ``t`` values paired with ``r(t)``."""
    if not (0 < t_min < t_max):
        raise InvalidArgumentError("schedule needs 0 < t_min < t_max")
    if n_steps < 2:
        raise InvalidArgumentError("schedule needs at least two steps")
    ts = np.geomspace(t_min, t_max, n_steps)
    ts[0], ts[-1] = t_min, t_max
    return [(float(t), float(growth(t))) for t in ts]


def default_schedule(growth: GrowthFunction, t_min: float = 1e2, t_max: float = 1e5,
                     per_decade: int = 8) -> list[tuple[float, float]]:
    decades = math.log10(t_max / t_min)
    n = max(2, int(round(decades * per_decade)) + 1)
    return schedule(growth, t_min, t_max, n)


# ---------------------------------------------------------------------------
# lattice balls
# ---------------------------------------------------------------------------

def ball_volume(d: int, radius: float) -> float:
    """Lebesgue measure of a Euclidean ball in dimension ``d``."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * float(radius) ** d


@dataclass(frozen=True)
class LatticeBall:
    """Integer points of a closed Euclidean ball, in lexicographic order."""

    center: tuple[float, ...]
    radius: float
    points: np.ndarray = field(repr=False)
    continuous_volume: float
    ambiguous_resolved: int = 0

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def count(self) -> int:
        return int(self.points.shape[0])


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    return Fraction(float(x))


class _Membership:
    """Closed-ball membership with exact fallback near the sphere."""

    def __init__(self, center_q: Sequence[Fraction], radius_q: Fraction):
        self.center_q = list(center_q)
        self.center_f = np.array([float(c) for c in center_q])
        self.r2_q = radius_q * radius_q
        self.r2_f = float(radius_q) ** 2
        self.band = GUARD_BAND * max(self.r2_f, 1.0)
        self.ambiguous = 0

    def partial_d2(self, pts: np.ndarray) -> np.ndarray:
        k = pts.shape[1]
        diff = pts.astype(float) - self.center_f[:k]
        return np.einsum("ij,ij->i", diff, diff)

    def inside(self, pts: np.ndarray) -> np.ndarray:
        d2 = self.partial_d2(pts)
        gap = d2 - self.r2_f
        result = gap <= 0.0
        unsure = np.flatnonzero(np.abs(gap) <= self.band)
        if unsure.size:
            self.ambiguous += int(unsure.size)
            k = pts.shape[1]
            for i in unsure:
                exact = sum((Fraction(int(p)) - c) ** 2 for p, c in zip(pts[i], self.center_q[:k]))
                result[i] = exact <= self.r2_q
        return result


def enumerate_ball(center, radius, cap: int = DEFAULT_POINT_CAP, *,
                   first_axis: tuple[int, int] | None = None) -> LatticeBall:
    """All ``chi`` in ``Z^d`` with ``|chi - center| <= radius``.

    ``first_axis=(lo, hi)`` keeps only the slab ``lo <= chi_1 <= hi``, which
    lets callers walk through very large balls piece by piece.  Raises
    :class:`ResourceLimitError` when the result would hold more than ``cap``
    points.
    """
    center_list = list(center) if not isinstance(center, np.ndarray) else list(center.ravel())
    d = len(center_list)
    if d <= 0:
        raise InvalidArgumentError("dimension must be at least 1")
    if radius < 0 or not math.isfinite(float(radius)):
        raise InvalidArgumentError(f"radius must be finite and nonnegative, got {radius}")
    center_q = [_as_fraction(c) for c in center_list]
    member = _Membership(center_q, _as_fraction(radius))

    prefixes = np.zeros((1, 0), dtype=np.int64)
    for k in range(d):
        if prefixes.shape[0] == 0:
            break
        rem = member.r2_f - member.partial_d2(prefixes)
        half = np.sqrt(np.clip(rem, 0.0, None))
        c = member.center_f[k]
        lo = np.floor(c - half).astype(np.int64) - 1
        hi = np.ceil(c + half).astype(np.int64) + 1
        if k == 0 and first_axis is not None:
            lo = np.maximum(lo, int(first_axis[0]))
            hi = np.minimum(hi, int(first_axis[1]))
        lengths = np.maximum(hi - lo + 1, 0)
        total = int(lengths.sum())
        if total - 4 * prefixes.shape[0] > cap:
            raise ResourceLimitError(
                f"ball of radius {radius} holds more than the point cap of {cap}", cap=cap)
        starts = np.repeat(lo, lengths)
        offsets = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(lengths) - lengths, lengths)
        candidates = np.empty((total, k + 1), dtype=np.int64)
        candidates[:, :k] = np.repeat(prefixes, lengths, axis=0)
        candidates[:, k] = starts + offsets
        prefixes = candidates[member.inside(candidates)]

    if prefixes.shape[0] > cap:
        raise ResourceLimitError(f"ball of radius {radius} holds more than the point cap of {cap}", cap=cap)
    if prefixes.shape[1] != d:
        prefixes = np.zeros((0, d), dtype=np.int64)
    prefixes.setflags(write=False)
    return LatticeBall(
        center=tuple(float(c) for c in center_q),
        radius=float(radius),
        points=prefixes,
        continuous_volume=ball_volume(d, float(radius)),
        ambiguous_resolved=member.ambiguous,
    )


# ---------------------------------------------------------------------------
# averages
# ---------------------------------------------------------------------------

def exact_sum(values: np.ndarray):
    """Correctly rounded sum over the first axis.

    ``math.fsum`` makes the result independent of point order and of how
    work is split between threads.
    """
    values = np.asarray(values)
    if values.ndim == 1:
        if np.iscomplexobj(values):
            return complex(math.fsum(values.real), math.fsum(values.imag))
        return math.fsum(values)
    flat = values.reshape(values.shape[0], -1)
    out = np.empty(flat.shape[1], dtype=complex if np.iscomplexobj(values) else float)
    for j in range(flat.shape[1]):
        col = np.ascontiguousarray(flat[:, j])
        if np.iscomplexobj(col):
            out[j] = complex(math.fsum(col.real), math.fsum(col.imag))
        else:
            out[j] = math.fsum(col)
    return out.reshape(values.shape[1:])


def real_divide(total, scale: float):
    """Divide real and imaginary parts separately.

    numpy's complex-by-real division goes through the general complex
    quotient and can be off by an ulp even for ``49 / 49``.
    """
    if np.ndim(total) == 0:
        total = complex(total)
        return complex(total.real / scale, total.imag / scale)
    total = np.asarray(total)
    out = np.empty(total.shape, dtype=complex)
    out.real = total.real / scale
    out.imag = total.imag / scale
    return out


def _normalizer(ball: LatticeBall, norm: str) -> float:
    if norm == "count":
        if ball.count == 0:
            raise EmptyDomainError(f"ball around {ball.center} of radius {ball.radius} has no lattice points")
        return float(ball.count)
    if norm == "volume":
        if ball.continuous_volume <= 0:
            raise EmptyDomainError("ball has zero volume")
        return ball.continuous_volume
    raise InvalidArgumentError(f"norm must be 'count' or 'volume', got {norm!r}")


def ball_average(symbol, ball: LatticeBall, norm: str = "count") -> complex:
    """Average of ``symbol`` over the lattice points of ``ball``.

    ``symbol`` is anything with an ``evaluate(points) -> complex array``
    method (see :mod:`wienerlab.measures`) or a plain callable doing the same.
    """
    scale = _normalizer(ball, norm)
    evaluate: Callable = getattr(symbol, "evaluate", symbol)
    if ball.count == 0:
        return 0j
    values = np.asarray(evaluate(ball.points), dtype=complex)
    return real_divide(exact_sum(values), scale)


def matrix_ball_average(matrix_values: Callable[[np.ndarray], np.ndarray], ball: LatticeBall,
                        norm: str = "count") -> np.ndarray:
    """Entrywise average of a matrix valued function over the ball."""
    scale = _normalizer(ball, norm)
    values = np.asarray(matrix_values(ball.points), dtype=complex)
    return real_divide(exact_sum(values), scale)
