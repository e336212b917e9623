"""Atomic measures on the torus and bounded symbols on the integer lattice.

Symbols are small immutable trees.  Leaves are closed-form families
(atomic Fourier transforms, orthant indicators, shell oscillators,
0-homogeneous functions, tabulated grids); inner nodes combine them
(weighted sums, pointwise products, conjugation, squared modulus).  Every
node evaluates on an ``(n, d)`` integer array in one vectorized call and
carries a sup-norm bound.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, InvalidArgumentError

TWO_PI = 2.0 * math.pi
MIN_ATOM_SEPARATION = 1e-9


def torus_distance(a, b) -> float:
    """Euclidean distance between two points of ``[0, 2pi)^d`` taken mod ``2pi``."""
    diff = np.mod(np.asarray(a, float) - np.asarray(b, float), TWO_PI)
    diff = np.minimum(diff, TWO_PI - diff)
    return float(np.sqrt(np.sum(diff * diff)))


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite sum of point masses ``sum_j a_j delta_{tau_j}`` on ``T^d``."""

    d: int
    positions: tuple[tuple[float, ...], ...] = ()
    masses: tuple[complex, ...] = ()

    def __post_init__(self):
        if self.d < 1:
            raise InvalidArgumentError("dimension must be at least 1")
        if len(self.positions) != len(self.masses):
            raise InvalidArgumentError("positions and masses must have equal length")
        for p in self.positions:
            if len(p) != self.d:
                raise InvalidArgumentError(f"atom position {p} is not {self.d}-dimensional")
        for i in range(len(self.positions)):
            for j in range(i):
                if torus_distance(self.positions[i], self.positions[j]) <= MIN_ATOM_SEPARATION:
                    raise InvalidArgumentError(
                        f"atoms {j} and {i} are closer than {MIN_ATOM_SEPARATION}; merge them explicitly")

    @classmethod
    def from_atoms(cls, atoms, d: int | None = None) -> "AtomicMeasure":
        """Build from an iterable of ``(position, mass)`` pairs."""
        atoms = list(atoms)
        if d is None:
            if not atoms:
                raise InvalidArgumentError("dimension needed for an empty measure")
            d = len(atoms[0][0])
        return cls(d=d,
                   positions=tuple(tuple(float(x) for x in p) for p, _ in atoms),
                   masses=tuple(complex(m) for _, m in atoms))

    @classmethod
    def dirac(cls, position, mass: complex = 1.0) -> "AtomicMeasure":
        return cls.from_atoms([(position, mass)])

    def __len__(self) -> int:
        return len(self.masses)

    @property
    def position_array(self) -> np.ndarray:
        return np.array(self.positions, dtype=float).reshape(len(self), self.d)

    @property
    def mass_array(self) -> np.ndarray:
        return np.array(self.masses, dtype=complex)

    def total_variation(self) -> float:
        return float(sum(abs(m) for m in self.masses))

    def to_dict(self) -> dict:
        return {"d": self.d,
                "atoms": [{"tau": list(p), "re": m.real, "im": m.imag}
                          for p, m in zip(self.positions, self.masses)]}

    @classmethod
    def from_dict(cls, data: dict) -> "AtomicMeasure":
        return cls.from_atoms(
            [(a["tau"], complex(a.get("re", 0.0), a.get("im", 0.0))) for a in data.get("atoms", [])],
            d=int(data["d"]))


def atomic_fourier_values(mu: AtomicMeasure, points: np.ndarray) -> np.ndarray:
    """``sum_j a_j exp(-i <chi, tau_j>)`` at every row ``chi`` of ``points``."""
    points = np.atleast_2d(np.asarray(points))
    out = np.zeros(points.shape[0], dtype=complex)
    for tau, a in zip(mu.positions, mu.masses):
        phase = points.astype(float) @ np.asarray(tau, dtype=float)
        out += a * np.exp(-1j * phase)
    return out


def atomic_fourier(mu: AtomicMeasure) -> Callable[[object], complex]:
    """The Fourier transform of ``mu`` as a function of one lattice point."""
    def transform(chi) -> complex:
        return complex(atomic_fourier_values(mu, np.asarray(chi, dtype=np.int64)[None, :])[0])
    return transform


def autocorrelation_mass(mu: AtomicMeasure) -> float:
    """Mass of ``mu * conj(mu(-.))`` at the origin, i.e. ``sum |a_j|^2``."""
    return float(math.fsum(abs(a) ** 2 for a in mu.masses))


def autocorrelation_measure(mu: AtomicMeasure) -> list[tuple[np.ndarray, complex]]:
    """All atoms of ``mu * conj(mu(-.))`` as an unmerged list of ``(tau_j - tau_k, a_j conj(a_k))``."""
    out = []
    for tj, aj in zip(mu.positions, mu.masses):
        for tk, ak in zip(mu.positions, mu.masses):
            out.append((np.asarray(tj) - np.asarray(tk), aj * np.conj(ak)))
    return out


# ---------------------------------------------------------------------------
# symbols
# ---------------------------------------------------------------------------

class Symbol:
    """Bounded complex function on ``Z^d``."""

    d: int

    def evaluate(self, points: np.ndarray) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def sup_bound(self) -> float:  # pragma: no cover - interface
        raise NotImplementedError

    def to_dict(self) -> dict:  # pragma: no cover - interface
        raise NotImplementedError

    def __call__(self, chi) -> complex:
        return symbol_eval(self, chi)

    def _check_points(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points))
        if points.shape[1] != self.d:
            raise InvalidArgumentError(f"expected points of dimension {self.d}, got {points.shape[1]}")
        return points


def symbol_eval(s: Symbol, chi) -> complex:
    return complex(s.evaluate(np.asarray(chi, dtype=np.int64)[None, :])[0])


def symbol_sup_bound(s: Symbol) -> float:
    return s.sup_bound()


@dataclass(frozen=True)
class AtomicTransform(Symbol):
    measure: AtomicMeasure

    @property
    def d(self) -> int:
        return self.measure.d

    def evaluate(self, points):
        return atomic_fourier_values(self.measure, self._check_points(points))

    def sup_bound(self):
        return self.measure.total_variation()

    def to_dict(self):
        return {"kind": "atomic", "measure": self.measure.to_dict()}


@dataclass(frozen=True)
class OrthantIndicator(Symbol):
    """Indicator of ``{chi : signs[k] * chi[k] >= 0 for all k}``."""

    signs: tuple[int, ...]

    def __post_init__(self):
        if not self.signs or any(s not in (1, -1) for s in self.signs):
            raise InvalidArgumentError("orthant signs must be a nonempty tuple of +1/-1")

    @classmethod
    def positive(cls, d: int) -> "OrthantIndicator":
        return cls(tuple([1] * d))

    @property
    def d(self) -> int:
        return len(self.signs)

    def evaluate(self, points):
        points = self._check_points(points)
        inside = np.all(points * np.asarray(self.signs) >= 0, axis=1)
        return inside.astype(complex)

    def sup_bound(self):
        return 1.0

    def to_dict(self):
        return {"kind": "orthant", "signs": list(self.signs)}


@dataclass(frozen=True)
class ShellOscillator(Symbol):
    """Value ``sigma[n]`` on the slab ``|chi[axis]| in [t_n (1-w), t_n (1+w)]``, 0 elsewhere.

    With ``one_sided=True`` only the half ``chi[axis] > 0`` of each slab
    carries the value.  Comparisons use integer arithmetic where possible so
    radii up to ``2**53`` stay exact.
    """

    d: int
    sigma: tuple[float, ...]
    radii: tuple[int, ...]
    axis: int = 0
    width: float = 0.1
    one_sided: bool = False

    def __post_init__(self):
        if len(self.sigma) != len(self.radii):
            raise InvalidArgumentError("sigma and radii must have equal length")
        if not 0 <= self.axis < self.d:
            raise InvalidArgumentError(f"axis {self.axis} out of range for d={self.d}")
        if not 0.0 <= self.width < 1.0:
            raise InvalidArgumentError("shell width must lie in [0, 1)")
        for a, b in zip(self.radii, self.radii[1:]):
            if not a * (1 + self.width) < b * (1 - self.width):
                raise InvalidArgumentError(f"shells at {a} and {b} overlap for width {self.width}")

    def evaluate(self, points):
        points = self._check_points(points)
        coord = points[:, self.axis]
        x = np.abs(coord).astype(float)
        out = np.zeros(points.shape[0], dtype=complex)
        for s, t in zip(self.sigma, self.radii):
            inside = (x >= t * (1 - self.width)) & (x <= t * (1 + self.width))
            if self.one_sided:
                inside &= coord > 0
            out[inside] = s
        return out

    def sup_bound(self):
        return max((abs(s) for s in self.sigma), default=0.0)

    def to_dict(self):
        return {"kind": "shell", "d": self.d, "sigma": list(self.sigma), "radii": list(self.radii),
                "axis": self.axis, "width": self.width, "one_sided": self.one_sided}


def _direction_component(omega, index):
    return omega[:, index]


def _direction_component_sq(omega, index):
    return omega[:, index] ** 2


def _direction_sign(omega, index):
    return np.sign(omega[:, index])


DIRECTION_FUNCTIONS = {
    "component": (_direction_component, 1.0),
    "component_sq": (_direction_component_sq, 1.0),
    "sign": (_direction_sign, 1.0),
}


@dataclass(frozen=True)
class HomogeneousScalar(Symbol):
    """``f(chi / |chi|)`` for a named direction function; 0 at the origin."""

    d: int
    name: str
    index: int = 0

    def __post_init__(self):
        if self.name not in DIRECTION_FUNCTIONS:
            raise InvalidArgumentError(f"unknown direction function {self.name!r}")
        if not 0 <= self.index < self.d:
            raise InvalidArgumentError("direction function index out of range")

    def evaluate(self, points):
        points = self._check_points(points).astype(float)
        norms = np.sqrt(np.einsum("ij,ij->i", points, points))
        safe = np.where(norms > 0, norms, 1.0)
        func = DIRECTION_FUNCTIONS[self.name][0]
        out = np.asarray(func(points / safe[:, None], self.index), dtype=complex)
        out[norms == 0] = 0
        return out

    def sup_bound(self):
        return DIRECTION_FUNCTIONS[self.name][1]

    def to_dict(self):
        return {"kind": "homogeneous", "d": self.d, "name": self.name, "index": self.index}


@dataclass(frozen=True)
class Tabulated(Symbol):
    """Values on the box ``origin + [0, shape)``; lookups outside raise :class:`DomainError`."""

    origin: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != len(self.origin):
            raise InvalidArgumentError("tabulated values must have one axis per dimension")
        self.values.setflags(write=False)

    @property
    def d(self) -> int:
        return len(self.origin)

    def evaluate(self, points):
        idx = self._check_points(points) - np.asarray(self.origin)
        shape = np.asarray(self.values.shape)
        bad = np.any((idx < 0) | (idx >= shape), axis=1)
        if np.any(bad):
            first = np.asarray(points)[np.flatnonzero(bad)[0]]
            raise DomainError(f"lattice point {first.tolist()} lies outside the tabulated extent")
        return self.values[tuple(idx.T)].astype(complex)

    def sup_bound(self):
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def to_dict(self):
        return {"kind": "tabulated", "origin": list(self.origin), "shape": list(self.values.shape),
                "re": self.values.real.ravel().tolist(), "im": self.values.imag.ravel().tolist()}

    def __hash__(self):
        return hash((self.origin, self.values.tobytes()))

    def __eq__(self, other):
        return (isinstance(other, Tabulated) and self.origin == other.origin
                and np.array_equal(self.values, other.values))


def _common_dimension(terms) -> int:
    if not terms:
        raise InvalidArgumentError("combination needs at least one term")
    dims = {t.d for t in terms}
    if len(dims) != 1:
        raise InvalidArgumentError(f"terms have mismatched dimensions {sorted(dims)}")
    return dims.pop()


@dataclass(frozen=True)
class Sum(Symbol):
    terms: tuple[Symbol, ...]
    weights: tuple[complex, ...] | None = None

    def __post_init__(self):
        _common_dimension(self.terms)
        if self.weights is not None and len(self.weights) != len(self.terms):
            raise InvalidArgumentError("one weight per term")

    @property
    def d(self):
        return self.terms[0].d

    def _weights(self):
        return self.weights if self.weights is not None else (1.0,) * len(self.terms)

    def evaluate(self, points):
        points = self._check_points(points)
        out = np.zeros(points.shape[0], dtype=complex)
        for w, t in zip(self._weights(), self.terms):
            out += w * t.evaluate(points)
        return out

    def sup_bound(self):
        return float(sum(abs(w) * t.sup_bound() for w, t in zip(self._weights(), self.terms)))

    def to_dict(self):
        out = {"kind": "sum", "terms": [t.to_dict() for t in self.terms]}
        if self.weights is not None:
            out["weights"] = [[complex(w).real, complex(w).imag] for w in self.weights]
        return out


@dataclass(frozen=True)
class Product(Symbol):
    terms: tuple[Symbol, ...]

    def __post_init__(self):
        _common_dimension(self.terms)

    @property
    def d(self):
        return self.terms[0].d

    def evaluate(self, points):
        points = self._check_points(points)
        out = np.ones(points.shape[0], dtype=complex)
        for t in self.terms:
            out = out * t.evaluate(points)
        return out

    def sup_bound(self):
        return float(math.prod(t.sup_bound() for t in self.terms))

    def to_dict(self):
        return {"kind": "product", "terms": [t.to_dict() for t in self.terms]}


@dataclass(frozen=True)
class Conjugate(Symbol):
    term: Symbol

    @property
    def d(self):
        return self.term.d

    def evaluate(self, points):
        return np.conj(self.term.evaluate(points))

    def sup_bound(self):
        return self.term.sup_bound()

    def to_dict(self):
        return {"kind": "conj", "term": self.term.to_dict()}


@dataclass(frozen=True)
class SquaredModulus(Symbol):
    term: Symbol

    @property
    def d(self):
        return self.term.d

    def evaluate(self, points):
        v = self.term.evaluate(points)
        return (v.real ** 2 + v.imag ** 2).astype(complex)

    def sup_bound(self):
        return self.term.sup_bound() ** 2

    def to_dict(self):
        return {"kind": "sqmod", "term": self.term.to_dict()}


# convenience constructors ---------------------------------------------------

def constant_symbol(value: complex, d: int) -> AtomicTransform:
    """The constant ``value``, realized as ``value * delta_0``."""
    return AtomicTransform(AtomicMeasure(d=d, positions=((0.0,) * d,), masses=(complex(value),)))


def zero_symbol(d: int) -> AtomicTransform:
    return AtomicTransform(AtomicMeasure(d=d))


def modulate(s: Symbol, tau) -> Symbol:
    """``chi -> s(chi) * exp(i <chi, tau>)``, shifting an atom at ``tau`` to the origin."""
    tau = np.mod(-np.asarray(tau, dtype=float), TWO_PI)
    return Product((s, AtomicTransform(AtomicMeasure.dirac(tuple(tau)))))


def counterexample_kernel(d: int) -> Sum:
    """``2 * 1_{[0, inf)^d} - 1``: unimodular, yet its orthant part has no Wiener limit."""
    return Sum((OrthantIndicator.positive(d), constant_symbol(1.0, d)), weights=(2.0, -1.0))


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def _complex_from_pair(pair) -> complex:
    if isinstance(pair, (list, tuple)):
        return complex(pair[0], pair[1])
    return complex(pair)


def symbol_from_dict(data: dict) -> Symbol:
    kind = data.get("kind")
    if kind == "atomic":
        return AtomicTransform(AtomicMeasure.from_dict(data["measure"]))
    if kind == "orthant":
        return OrthantIndicator(tuple(int(s) for s in data["signs"]))
    if kind == "shell":
        return ShellOscillator(d=int(data["d"]), sigma=tuple(float(s) for s in data["sigma"]),
                               radii=tuple(int(r) for r in data["radii"]), axis=int(data.get("axis", 0)),
                               width=float(data.get("width", 0.1)),
                               one_sided=bool(data.get("one_sided", False)))
    if kind == "homogeneous":
        return HomogeneousScalar(d=int(data["d"]), name=data["name"], index=int(data.get("index", 0)))
    if kind == "tabulated":
        shape = tuple(int(s) for s in data["shape"])
        values = (np.asarray(data["re"], float) + 1j * np.asarray(data.get("im", [0.0] * math.prod(shape)),
                                                                 float)).reshape(shape)
        return Tabulated(origin=tuple(int(o) for o in data["origin"]), values=values)
    if kind == "sum":
        weights = data.get("weights")
        return Sum(tuple(symbol_from_dict(t) for t in data["terms"]),
                   None if weights is None else tuple(_complex_from_pair(w) for w in weights))
    if kind == "product":
        return Product(tuple(symbol_from_dict(t) for t in data["terms"]))
    if kind == "conj":
        return Conjugate(symbol_from_dict(data["term"]))
    if kind == "sqmod":
        return SquaredModulus(symbol_from_dict(data["term"]))
    raise InvalidArgumentError(f"unknown symbol kind {kind!r}")


def dumps(obj) -> str:
    return json.dumps(obj.to_dict(), sort_keys=True)


def load_measure(path) -> AtomicMeasure:
    with open(path) as fh:
        return AtomicMeasure.from_dict(json.load(fh))


def load_symbol(path) -> Symbol:
    with open(path) as fh:
        return symbol_from_dict(json.load(fh))
