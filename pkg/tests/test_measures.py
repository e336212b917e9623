import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wienerlab.errors import DomainError, InvalidArgumentError
from wienerlab.measures import (AtomicMeasure, AtomicTransform, Conjugate, HomogeneousScalar, OrthantIndicator,
                                Product, ShellOscillator, SquaredModulus, Sum, Tabulated, atomic_fourier,
                                atomic_fourier_values, autocorrelation_mass, autocorrelation_measure,
                                constant_symbol, counterexample_kernel, dumps, load_measure, load_symbol, modulate,
                                symbol_eval, symbol_from_dict, symbol_sup_bound, torus_distance)

TWO_MEASURE = AtomicMeasure.from_atoms([((1.0, 2.0), 1.0), ((3.0, 1.0), 0.5j)])


def lattice_points(rng, n=50, d=2, scale=1000):
    return rng.integers(-scale, scale, size=(n, d))


# --- atomic_fourier -------------------------------------------------------------

def test_dirac_at_origin_is_one_everywhere():
    f = atomic_fourier(AtomicMeasure.dirac((0.0, 0.0)))
    for chi in [(0, 0), (5, -3), (1000, 17)]:
        assert f(chi) == 1


def test_dirac_at_pi_alternates():
    f = atomic_fourier(AtomicMeasure.dirac((math.pi, 0.0)))
    assert f((1, 0)) == pytest.approx(-1, abs=1e-15)


def test_transform_at_origin_sums_masses():
    assert atomic_fourier(TWO_MEASURE)((0, 0)) == 1 + 0.5j


def test_sign_convention_is_exp_minus_i():
    tau = (0.3, -1.1)
    chi = np.array([4, 7])
    value = atomic_fourier(AtomicMeasure.dirac(tau))(chi)
    assert value == pytest.approx(np.exp(-1j * (chi @ np.array(tau))), abs=1e-14)


@given(st.integers(0, 2**32 - 1))
def test_transform_periodic_in_positions(seed):
    rng = np.random.default_rng(seed)
    pos = rng.uniform(0, 2 * np.pi, size=(3, 2))
    masses = rng.normal(size=3) + 1j * rng.normal(size=3)
    mu = AtomicMeasure.from_atoms(zip(pos, masses))
    shift = pos.copy()
    shift[1, 0] += 2 * np.pi
    shift[2, 1] -= 2 * np.pi
    nu = AtomicMeasure.from_atoms(zip(shift, masses))
    pts = lattice_points(rng, scale=200)
    assert np.allclose(atomic_fourier_values(mu, pts), atomic_fourier_values(nu, pts), atol=1e-9)


@given(st.integers(0, 2**32 - 1))
def test_transform_bounded_by_total_variation(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 6))
    mu = AtomicMeasure.from_atoms(zip(rng.uniform(0, 6, size=(k, 2)), rng.normal(size=k) + 1j * rng.normal(size=k)))
    vals = atomic_fourier_values(mu, lattice_points(rng))
    assert np.all(np.abs(vals) <= mu.total_variation() * (1 + 1e-12))


# --- autocorrelation --------------------------------------------------------------

def test_autocorrelation_mass_examples():
    assert autocorrelation_mass(AtomicMeasure.dirac((0.0, 0.0))) == 1
    assert autocorrelation_mass(TWO_MEASURE) == 1.25
    assert autocorrelation_mass(AtomicMeasure(d=2)) == 0


@given(st.integers(0, 2**32 - 1))
def test_squared_modulus_matches_autocorrelation_oracle(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 5))
    mu = AtomicMeasure.from_atoms(zip(rng.uniform(0, 2 * np.pi, size=(k, 2)),
                                      rng.normal(size=k) + 1j * rng.normal(size=k)))
    pts = lattice_points(rng, scale=300)
    direct = SquaredModulus(AtomicTransform(mu)).evaluate(pts)
    oracle = np.zeros(len(pts), dtype=complex)
    for tau, a in autocorrelation_measure(mu):
        oracle += a * np.exp(-1j * (pts @ tau))
    assert np.allclose(direct, oracle, atol=1e-10)


# --- measure validation -------------------------------------------------------------

def test_close_atoms_are_rejected():
    with pytest.raises(InvalidArgumentError):
        AtomicMeasure.from_atoms([((0.0, 0.0), 1.0), ((1e-10, 0.0), 1.0)])


def test_atoms_equal_modulo_two_pi_are_rejected():
    with pytest.raises(InvalidArgumentError):
        AtomicMeasure.from_atoms([((0.0, 0.0), 1.0), ((2 * math.pi, 0.0), 1.0)])


def test_torus_distance_wraps():
    assert torus_distance((0.1, 0.0), (2 * math.pi - 0.1, 0.0)) == pytest.approx(0.2)


def test_measure_json_roundtrip(tmp_path):
    path = tmp_path / "mu.json"
    path.write_text(json.dumps(TWO_MEASURE.to_dict()))
    assert load_measure(path) == TWO_MEASURE
    doc = json.loads(path.read_text())
    assert doc["d"] == 2 and doc["atoms"][1] == {"tau": [3.0, 1.0], "re": 0.0, "im": 0.5}


# --- symbols -----------------------------------------------------------------------

def test_counterexample_squared_modulus_is_one():
    s = SquaredModulus(counterexample_kernel(2))
    rng = np.random.default_rng(0)
    pts = np.vstack([lattice_points(rng), [[0, 0], [-1, 5], [3, -2], [0, -7]]])
    assert np.all(s.evaluate(pts) == 1)
    assert np.all(np.abs(counterexample_kernel(3).evaluate(lattice_points(rng, d=3))) == 1)


def test_sum_of_orthants_is_two_inside():
    o = OrthantIndicator.positive(2)
    assert symbol_eval(Sum((o, o)), (4, 9)) == 2


def test_conjugate_of_dirac_transform():
    tau = (0.7, 1.9)
    chi = (3, -8)
    value = symbol_eval(Conjugate(AtomicTransform(AtomicMeasure.dirac(tau))), chi)
    assert value == pytest.approx(np.exp(1j * (3 * 0.7 - 8 * 1.9)), abs=1e-14)


def test_orthant_includes_axes_and_respects_signs():
    o = OrthantIndicator((1, -1))
    assert o((0, 0)) == 1 and o((4, -3)) == 1 and o((4, 3)) == 0 and o((4, 0)) == 1


def test_shell_oscillator_values():
    s = ShellOscillator(d=2, sigma=(1.0, 0.0, 1.0), radii=(10, 100, 1000), width=0.1)
    assert s((10, 5)) == 1 and s((-11, 0)) == 1 and s((12, 0)) == 0 and s((100, 0)) == 0 and s((950, 3)) == 1
    one = ShellOscillator(d=2, sigma=(1.0,), radii=(10,), width=0.1, one_sided=True)
    assert one((10, 0)) == 1 and one((-10, 0)) == 0


def test_shell_overlap_rejected():
    with pytest.raises(InvalidArgumentError):
        ShellOscillator(d=2, sigma=(1.0, 1.0), radii=(10, 12), width=0.2)


def test_homogeneous_scalars():
    s = HomogeneousScalar(2, "component_sq", 0)
    assert s((3, 4)) == pytest.approx(9 / 25)
    assert s((0, 0)) == 0
    assert HomogeneousScalar(2, "sign", 1)((5, -2)) == -1
    assert s((30, 40)) == s((3, 4))


def test_tabulated_lookup_and_domain_error():
    t = Tabulated((-1, -1), np.arange(9, dtype=float).reshape(3, 3))
    assert t((0, 0)) == 4
    with pytest.raises(DomainError):
        t((2, 0))


def test_product_and_weighted_sum():
    a = constant_symbol(2.0, 2)
    o = OrthantIndicator.positive(2)
    assert symbol_eval(Product((a, o)), (1, 1)) == 2
    assert symbol_eval(Sum((a, o), weights=(0.5, -3.0)), (1, 1)) == -2


def test_sup_bounds_combine():
    a = constant_symbol(2.0, 2)
    o = OrthantIndicator.positive(2)
    assert symbol_sup_bound(Sum((a, o), weights=(1.0, -3.0))) == 5
    assert symbol_sup_bound(Product((a, o))) == 2
    assert symbol_sup_bound(SquaredModulus(a)) == 4
    assert symbol_sup_bound(AtomicTransform(TWO_MEASURE)) == 1.5


@given(st.integers(0, 2**32 - 1))
def test_values_respect_sup_bound(seed):
    rng = np.random.default_rng(seed)
    mu = AtomicMeasure.from_atoms(zip(rng.uniform(0, 6, size=(2, 2)), rng.normal(size=2)))
    s = Sum((SquaredModulus(AtomicTransform(mu)), counterexample_kernel(2), HomogeneousScalar(2, "component", 1)),
            weights=(0.5, 1j, -2.0))
    vals = s.evaluate(lattice_points(rng))
    assert np.all(np.abs(vals) <= s.sup_bound() * (1 + 1e-12))


def test_dimension_mismatch_rejected():
    with pytest.raises(InvalidArgumentError):
        Sum((OrthantIndicator.positive(2), OrthantIndicator.positive(3)))
    with pytest.raises(InvalidArgumentError):
        OrthantIndicator.positive(2).evaluate(np.zeros((1, 3), dtype=int))


def test_modulate_moves_atom_to_origin():
    mu = AtomicMeasure.from_atoms([((1.0, 2.0), 0.3), ((4.0, 0.5), 0.9)])
    m = modulate(AtomicTransform(mu), (1.0, 2.0))
    chi = np.array([[7, -11]])
    expected = 0.3 + 0.9 * np.exp(-1j * (chi @ np.array([3.0, -1.5])))
    assert m.evaluate(chi)[0] == pytest.approx(expected[0], abs=1e-12)


@pytest.mark.parametrize("symbol", [
    AtomicTransform(TWO_MEASURE),
    OrthantIndicator((1, -1)),
    ShellOscillator(d=2, sigma=(1.0, 0.0), radii=(10, 60), width=0.3, one_sided=True),
    HomogeneousScalar(3, "component", 2),
    Tabulated((0, 0), np.array([[1.0, 2.0j], [3.0, -1.0]])),
    Sum((OrthantIndicator.positive(2), constant_symbol(1.0, 2)), weights=(2.0, -1.0)),
    Product((OrthantIndicator.positive(2), Conjugate(AtomicTransform(TWO_MEASURE)))),
    SquaredModulus(counterexample_kernel(2)),
])
def test_symbol_json_roundtrip(symbol, tmp_path):
    path = tmp_path / "s.json"
    path.write_text(dumps(symbol))
    back = load_symbol(path)
    assert back == symbol
    pts = np.array([[0, 0], [1, 0], [0, 1], [-5, 12]])[:, : symbol.d] if symbol.d == 2 else np.array([[1, 2, 3]])
    if isinstance(symbol, Tabulated):
        pts = np.array([[0, 0], [1, 1]])
    assert np.array_equal(back.evaluate(pts), symbol.evaluate(pts))


def test_unknown_symbol_kind_rejected():
    with pytest.raises(InvalidArgumentError):
        symbol_from_dict({"kind": "wavelet"})
