"""Greedy sign sequences, lacunary frequency ladders and Riesz-product expansions.

Notation: for a ladder ``a_1, ..., a_N`` in ``Z^d`` a *pattern* is a tuple
``(e_1, ..., e_n)`` with entries in ``{-1, 0, 1}`` and ``e_n != 0``; its
frequency is ``sum_j e_j a_j`` and its weight is ``prod_{e_j != 0} i / (4 j)``.
The Riesz product uses the factor ``1 + (i / n) cos <x, a_n>``, which is what
makes the torus convolution of the two products carry exactly these weights.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (InternalError, InvalidArgumentError, InvariantViolationError,
                     PreconditionError, ResourceLimitError, UnsatisfiableAtScaleError)
from .measures import ShellOscillator, Symbol

N_GUARD = 16
INT64_MAX = 2**63 - 1


# ---------------------------------------------------------------------------
# greedy sequence
# ---------------------------------------------------------------------------

def log_floor(N: int) -> float:
    return math.log(N) / (2 * math.pi)


@dataclass(frozen=True)
class GreedyResult:
    sigma: tuple[int, ...]
    partial_sums: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return len(self.sigma)

    @property
    def S(self) -> complex:
        return complex(self.partial_sums[-1]) if self.N else 0j

    @property
    def floor(self) -> float:
        return log_floor(self.N)


def partial_sum(sigma) -> complex:
    """``sum_n sigma_n / (2n) prod_{j<n} (1 + i / (2j))`` for an arbitrary 0/1 sequence."""
    total, prod = 0j, 1 + 0j
    for n, s in enumerate(sigma, start=1):
        total += s * prod / (2 * n)
        prod *= 1 + 0.5j / n
    return total


def greedy_sigma(N: int) -> GreedyResult:
    """Choose each ``sigma_n`` in ``{0, 1}`` to maximize ``|S_n|``.

    The result always satisfies ``|S_N| >= ln N / (2 pi)``; a violation means
    the recursion itself is broken and raises :class:`InternalError`.
    """
    if N < 1:
        raise InvalidArgumentError("N must be a positive integer")
    sigma = np.zeros(N, dtype=np.int8)
    sums = np.empty(N, dtype=complex)
    total, prod = 0j, 1 + 0j
    for n in range(1, N + 1):
        candidate = total + prod / (2 * n)
        if abs(candidate) > abs(total):
            sigma[n - 1] = 1
            total = candidate
        sums[n - 1] = total
        prod *= 1 + 0.5j / n
    result = GreedyResult(sigma=tuple(int(s) for s in sigma), partial_sums=sums)
    if abs(result.S) < result.floor:
        raise InternalError(f"greedy sum {abs(result.S)} is below ln N / 2pi = {result.floor} at N={N}")
    return result


# ---------------------------------------------------------------------------
# ladders and predicates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RieszProductSpec:
    sigma: tuple[int, ...]
    frequencies: tuple[tuple[int, ...], ...]
    l: int = 1
    asymmetric: bool = False

    def __post_init__(self):
        if len(self.sigma) != len(self.frequencies) or not self.sigma:
            raise InvalidArgumentError("need one frequency per sigma entry and N >= 1")
        if any(s not in (0, 1) for s in self.sigma):
            raise InvalidArgumentError("sigma entries must be 0 or 1")
        if len({len(a) for a in self.frequencies}) != 1:
            raise InvalidArgumentError("frequencies must share one dimension")
        if any(a[0] == 0 for a in self.frequencies):
            raise InvalidArgumentError("first coordinates of the frequencies must be nonzero")
        if not predicate_P2(self.frequencies):
            raise InvalidArgumentError("frequencies violate 4|a_n(1)| < |a_{n+1}(1)|")

    @property
    def N(self) -> int:
        return len(self.sigma)

    @property
    def d(self) -> int:
        return len(self.frequencies[0])

    @property
    def freq_array(self) -> np.ndarray:
        return np.array(self.frequencies, dtype=np.int64)

    def to_dict(self) -> dict:
        return {"N": self.N, "sigma": list(self.sigma), "frequencies": [list(a) for a in self.frequencies],
                "l": self.l, "asymmetric": self.asymmetric}


def predicate_P2(frequencies) -> bool:
    return all(4 * abs(a[0]) < abs(b[0]) for a, b in zip(frequencies, frequencies[1:]))


def _prefix_sums(freqs: np.ndarray, n: int) -> np.ndarray:
    """All ``sum_{j<n} e_j a_j`` for ``e in {-1,0,1}^(n-1)``, digit order as in :func:`_patterns`."""
    sums = np.zeros((1, freqs.shape[1]), dtype=np.int64)
    for j in range(n - 1):
        sums = np.concatenate([sums - freqs[j], sums, sums + freqs[j]])
    return sums


def _patterns(n: int) -> np.ndarray:
    """Rows ``(e_1, ..., e_{n-1})`` matching :func:`_prefix_sums`."""
    pats = np.zeros((1, 0), dtype=np.int8)
    for _ in range(n - 1):
        k = pats.shape[0]
        col = np.repeat(np.array([-1, 0, 1], dtype=np.int8), k)
        pats = np.column_stack([np.tile(pats, (3, 1)), col])
    return pats


def _guard(N: int, allow_large: bool):
    if N > N_GUARD and not allow_large:
        raise ResourceLimitError(f"3^N enumeration with N={N} exceeds the guard N <= {N_GUARD}", cap=N_GUARD)


def _p4_holds(first: np.ndarray, other: np.ndarray, N: int, l: int) -> np.ndarray:
    """Row-wise ``4^N (1 + |x_s|^l) < |x_1|^l``; logs first, exact integers near ties."""
    with np.errstate(divide="ignore"):
        lhs = l * np.log(first.astype(float))
        rhs = N * math.log(4.0) + np.logaddexp(0.0, l * np.log(other.astype(float)))
    ok = lhs > rhs
    close = np.flatnonzero(np.abs(lhs - rhs) < 1e-9 * np.maximum(1.0, np.abs(rhs)))
    for i in close:
        ok[i] = 4**N * (1 + int(other[i]) ** l) < int(first[i]) ** l
    return ok


def check_ladder(frequencies, l: int, allow_large: bool = False) -> dict:
    """Evaluate (P2), (P3) and (P4) exhaustively; returns a report dict."""
    N = len(frequencies)
    _guard(N, allow_large)
    arr = np.array(frequencies, dtype=np.int64)
    p3_fail, p4_fail = [], []
    for n in range(1, N + 1):
        sums = _prefix_sums(arr, n) + arr[n - 1]
        first = np.abs(sums[:, 0])
        if np.any(first == 0):
            p3_fail.append(n)
        if l < 1:
            p4_fail.append(n)
            continue
        if arr.shape[1] < 2:
            continue
        other = np.abs(sums[:, 1:]).max(axis=1)
        if not np.all(_p4_holds(first, other, N, l)):
            p4_fail.append(n)
    return {"P2": predicate_P2(frequencies), "P3": not p3_fail, "P4": not p4_fail,
            "P3_failing": p3_fail, "P4_failing": p4_fail, "l": l}


@dataclass(frozen=True)
class FrequencyLadder:
    radii: tuple[int, ...]
    frequencies: tuple[tuple[int, ...], ...]
    report: dict


def build_frequencies(N: int, l: int = 1, base: int = 100, d: int = 2, ratio: int = 5) -> FrequencyLadder:
    """Ladder ``a_n = t_n e_1`` with ``t_{n+1} = ratio * t_n`` and ``t_1 >= base``.

    ``t_1`` is raised above ``base`` when needed so that (P4) holds:
    on the first axis the smallest ``|a_n(1) + sum e_j a_j(1)|`` is
    ``t_n - sum_{j<n} t_j``, which must exceed ``4^(N/l)``.
    """
    if N < 1 or base < 2 or ratio < 5:
        raise InvalidArgumentError("need N >= 1, base >= 2 and ratio >= 5")
    if l < 1:
        raise InvalidArgumentError("l = 0 makes (P4) unsatisfiable; use l >= 1")
    t1 = base

    def smallest_gap(t1):
        ts = [t1 * ratio**k for k in range(N)]
        return min(t - sum(ts[:k]) for k, t in enumerate(ts)), ts

    if d >= 2:
        while True:
            gap, _ = smallest_gap(t1)
            if gap**l > 4**N:
                break
            t1 = max(t1 + 1, int(math.ceil(t1 * (4 ** (N / l) / gap))))
    ts = [t1 * ratio**k for k in range(N)]
    failing = [n for n, t in enumerate(ts, start=1) if t > INT64_MAX // 2]
    if failing:
        raise UnsatisfiableAtScaleError(
            f"ladder entries exceed machine-integer range at n = {failing}", failing=failing)
    freqs = tuple(tuple([t] + [0] * (d - 1)) for t in ts)
    if N <= N_GUARD:
        report = check_ladder(freqs, l)
    else:
        gap, _ = smallest_gap(t1)
        report = {"P2": predicate_P2(freqs), "P3": gap > 0, "P4": d < 2 or gap**l > 4**N,
                  "P3_failing": [], "P4_failing": [], "l": l}
    return FrequencyLadder(radii=tuple(ts), frequencies=freqs, report=report)


def shell_symbol(spec: RieszProductSpec, width: float = 0.3) -> ShellOscillator:
    """Shell oscillator taking the value ``sigma_n`` around ``|a_n(1)|``.

    For a ratio-5 ladder every pattern frequency ending at ``n`` has first
    coordinate within ``t_n / 4`` of ``+-t_n``, so ``width >= 1/4`` puts it
    on the right shell.
    """
    return ShellOscillator(d=spec.d, sigma=tuple(float(s) for s in spec.sigma),
                           radii=tuple(abs(a[0]) for a in spec.frequencies), axis=0, width=width,
                           one_sided=spec.asymmetric)


def riesz_spec(N: int, l: int = 1, base: int = 100, d: int = 2, asymmetric: bool = False) -> RieszProductSpec:
    """Greedy sigma plus a (P2)-(P4) ladder."""
    greedy = greedy_sigma(N)
    ladder = build_frequencies(N, l=l, base=base, d=d)
    return RieszProductSpec(sigma=greedy.sigma, frequencies=ladder.frequencies, l=l, asymmetric=asymmetric)


@dataclass(frozen=True)
class P1Report:
    holds: bool
    worst_deviation: float
    witness: tuple[int, ...] | None
    tolerance: float
    asymmetric: bool
    checked: int

    def to_dict(self) -> dict:
        return {"holds": self.holds, "worst_deviation": self.worst_deviation,
                "witness": None if self.witness is None else list(self.witness),
                "tolerance": self.tolerance, "asymmetric": self.asymmetric, "checked": self.checked}


def check_P1(m: Symbol, spec: RieszProductSpec, tol: float | None = None, *,
             asymmetric: bool | None = None, allow_large: bool = False) -> P1Report:
    """Exhaustive check of ``|m(e_n a_n + sum e_j a_j) - target_n| < tol`` over all patterns.

    ``target_n = sigma_n`` (symmetric) or ``(1 + e_n) / 2 * sigma_n`` (asymmetric).
    """
    N = spec.N
    _guard(N, allow_large)
    tol = 4.0**-N if tol is None else tol
    asym = spec.asymmetric if asymmetric is None else asymmetric
    freqs = spec.freq_array
    worst, witness, checked = -1.0, None, 0
    for n in range(1, N + 1):
        prefix = _prefix_sums(freqs, n)
        for e_n in (-1, 1):
            points = prefix + e_n * freqs[n - 1]
            target = spec.sigma[n - 1] * ((1 + e_n) / 2 if asym else 1.0)
            dev = np.abs(m.evaluate(points) - target)
            checked += len(dev)
            k = int(np.argmax(dev))
            if dev[k] > worst:
                worst = float(dev[k])
                witness = tuple(int(x) for x in _patterns(n)[k]) + (e_n,)
    return P1Report(holds=worst < tol, worst_deviation=worst, witness=witness if worst >= tol else None,
                    tolerance=tol, asymmetric=asym, checked=checked)


def check_P1prime(m: Symbol, spec: RieszProductSpec, tol: float | None = None, **kw) -> P1Report:
    return check_P1(m, spec, tol, asymmetric=True, **kw)


# ---------------------------------------------------------------------------
# spectrum polynomials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumPolynomial:
    """Trigonometric polynomial ``sum_k c_k exp(i <x, lambda_k>)`` with pattern provenance."""

    frequencies: np.ndarray
    coefficients: np.ndarray
    patterns: np.ndarray = field(repr=False)

    @property
    def d(self) -> int:
        return self.frequencies.shape[1]

    def __len__(self) -> int:
        return len(self.coefficients)

    def value_at_zero(self) -> complex:
        c = self.coefficients
        return complex(math.fsum(c.real), math.fsum(c.imag))

    def as_dict(self) -> dict:
        return {tuple(int(x) for x in f): complex(c) for f, c in zip(self.frequencies, self.coefficients)}

    def evaluate(self, x) -> np.ndarray:
        """Direct summation at real points ``x`` of shape ``(n, d)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        phase = x @ self.frequencies.T.astype(float)
        return np.exp(1j * phase) @ self.coefficients

    def evaluate_grid_points(self, indices, M: int) -> np.ndarray:
        """Direct summation at ``x = 2 pi k / M`` with exact integer phases."""
        k = np.atleast_2d(np.asarray(indices, dtype=np.int64))
        lam = np.mod(self.frequencies, M)
        phase_int = np.mod(k @ lam.T, M)
        return np.exp(2j * np.pi * phase_int / M) @ self.coefficients

    def grid_values(self, M: int) -> np.ndarray:
        """Values on the uniform ``M^d`` grid of the torus by one inverse FFT."""
        if M**self.d > 2**26:
            raise ResourceLimitError(f"grid of {M}^{self.d} points is too large", cap=2**26)
        spectrum = np.zeros((M,) * self.d, dtype=complex)
        np.add.at(spectrum, tuple(np.mod(self.frequencies, M).T), self.coefficients)
        return np.fft.ifftn(spectrum) * M**self.d

    def csv_rows(self):
        for f, c, p in zip(self.frequencies, self.coefficients, self.patterns):
            prov = "".join({-1: "-", 0: "0", 1: "+"}[int(e)] for e in p)
            yield [*(int(x) for x in f), repr(float(c.real)), repr(float(c.imag)), prov]


def _expansion(spec: RieszProductSpec, allow_large: bool = False):
    """Frequencies, weights and padded patterns of all ``3^N - 1`` patterns, grouped by ``n``."""
    N = spec.N
    _guard(N, allow_large)
    freqs = spec.freq_array
    out_f, out_w, out_p, out_n, out_last = [], [], [], [], []
    pref_sum = np.zeros((1, spec.d), dtype=np.int64)
    pref_w = np.ones(1, dtype=complex)
    pref_p = np.zeros((1, 0), dtype=np.int8)
    for n in range(1, N + 1):
        step = 1j / (4 * n)
        for e_n in (-1, 1):
            out_f.append(pref_sum + e_n * freqs[n - 1])
            out_w.append(pref_w * step)
            pats = np.zeros((len(pref_w), N), dtype=np.int8)
            pats[:, : n - 1] = pref_p
            pats[:, n - 1] = e_n
            out_p.append(pats)
            out_n.append(np.full(len(pref_w), n))
            out_last.append(np.full(len(pref_w), e_n))
        k = len(pref_w)
        pref_sum = np.concatenate([pref_sum - freqs[n - 1], pref_sum, pref_sum + freqs[n - 1]])
        pref_w = np.concatenate([pref_w * step, pref_w, pref_w * step])
        col = np.repeat(np.array([-1, 0, 1], dtype=np.int8), k)
        pref_p = np.column_stack([np.tile(pref_p, (3, 1)), col])
    f = np.concatenate(out_f)
    if len(np.unique(f, axis=0)) != len(f):
        raise InvariantViolationError("two sign patterns share a frequency although (P2) holds")
    return f, np.concatenate(out_w), np.concatenate(out_p), np.concatenate(out_n), np.concatenate(out_last)


def target_polynomial(m: Symbol, spec: RieszProductSpec, *, allow_large: bool = False) -> SpectrumPolynomial:
    """Spectrum of ``m(D)(R_N * G_N)``: coefficient ``m(lambda) * weight`` at each pattern frequency."""
    f, w, p, _, _ = _expansion(spec, allow_large)
    return SpectrumPolynomial(frequencies=f, coefficients=m.evaluate(f) * w, patterns=p)


def comparison_polynomial(spec: RieszProductSpec, *, allow_large: bool = False) -> SpectrumPolynomial:
    """``Z`` (or ``Z'`` for asymmetric specs): ``sigma_n`` (times ``(1 + e_n)/2``) times the weight."""
    f, w, p, n, last = _expansion(spec, allow_large)
    sigma = np.asarray(spec.sigma, dtype=float)[n - 1]
    if spec.asymmetric:
        sigma = sigma * (1 + last) / 2
    return SpectrumPolynomial(frequencies=f, coefficients=sigma * w, patterns=p)


def product_expansion(spec: RieszProductSpec, m: Symbol | None = None) -> dict:
    """Fourier coefficients of ``m(D)(R_N * G_N)`` by multiplying the products out factor by factor.

    Independent of the pattern bookkeeping above; used as a cross-check.
    """
    def expand(coef_of_n):
        poly = {(0,) * spec.d: 1 + 0j}
        for n, a in enumerate(spec.frequencies, start=1):
            c = coef_of_n(n)
            factor = {(0,) * spec.d: 1 + 0j, tuple(a): c, tuple(-x for x in a): c}
            new: dict = {}
            for f1, c1 in poly.items():
                for f2, c2 in factor.items():
                    key = tuple(x + y for x, y in zip(f1, f2))
                    new[key] = new.get(key, 0j) + c1 * c2
            poly = new
        poly[(0,) * spec.d] -= 1
        return poly

    riesz = expand(lambda n: 0.5j / n)
    g = expand(lambda n: 0.5 + 0j)
    out = {}
    for key, c in riesz.items():
        value = c * g.get(key, 0j)
        if value != 0:
            out[key] = value
    if m is not None:
        keys = list(out)
        vals = m.evaluate(np.array(keys, dtype=np.int64)) if keys else []
        out = {k: out[k] * v for k, v in zip(keys, vals)}
    return out


# ---------------------------------------------------------------------------
# certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlowupCertificate:
    N: int
    bound_a: float
    bound_a_limit: float
    bound_b: float
    floor: float
    grid_sup: float
    value_at_zero: float
    grid_size: int
    pass_a: bool
    pass_b: bool
    pass_c: bool
    p1: P1Report

    @property
    def passed(self) -> bool:
        return self.pass_a and self.pass_b and self.pass_c

    def to_dict(self) -> dict:
        return {"N": self.N, "bound_a": self.bound_a, "bound_a_limit": self.bound_a_limit,
                "bound_b": self.bound_b, "floor": self.floor, "grid_sup": self.grid_sup,
                "value_at_zero": self.value_at_zero, "grid_size": self.grid_size,
                "pass_a": self.pass_a, "pass_b": self.pass_b, "pass_c": self.pass_c, "pass": self.passed,
                "p1": self.p1.to_dict()}


def blowup_certificate(m: Symbol, spec: RieszProductSpec, p1: P1Report | None, grid_size: int = 256, *,
                       allow_large: bool = False) -> BlowupCertificate:
    """Certify ``sup |m(D)(R_N * G_N)| >= ln N / (2 pi) - 1``.

    ``p1`` must come from :func:`check_P1` (or :func:`check_P1prime`) for the
    same ``m`` and ``spec``.  A failed ``p1`` is accepted; the certificate then
    reports which of its parts break.
    """
    if p1 is None:
        raise PreconditionError("run check_P1 (or check_P1prime) on (m, spec) before requesting a certificate")
    T = target_polynomial(m, spec, allow_large=allow_large)
    Z = comparison_polynomial(spec, allow_large=allow_large)
    diff = np.abs(T.coefficients - Z.coefficients)
    bound_a = math.fsum(diff)
    limit_a = (3 / 4) ** spec.N
    z0 = abs(Z.value_at_zero())
    floor = log_floor(spec.N)
    t0 = abs(T.value_at_zero())
    grid_sup = max(float(np.max(np.abs(T.grid_values(grid_size)))), t0) if spec.d <= 3 else t0
    return BlowupCertificate(N=spec.N, bound_a=bound_a, bound_a_limit=limit_a, bound_b=z0, floor=floor,
                             grid_sup=grid_sup, value_at_zero=t0, grid_size=grid_size,
                             pass_a=bound_a <= limit_a, pass_b=z0 >= floor, pass_c=grid_sup >= floor - 1,
                             p1=p1)


def spectrum_size_bound(N: int) -> int:
    return 3**N - 1


def all_patterns(N: int):
    """Every pattern with a nonzero last entry, for ``n = 1..N`` (reference enumeration)."""
    for n in range(1, N + 1):
        for head in itertools.product((-1, 0, 1), repeat=n - 1):
            for last in (-1, 1):
                yield head + (last,)
