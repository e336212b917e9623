import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import seeded_measure
from wienerlab.errors import ConsolidationError, DegenerateFitWarning, EmptyDomainError, InvalidArgumentError
from wienerlab.lattice import GrowthFunction, ball_average, enumerate_ball, schedule
from wienerlab.measures import (AtomicMeasure, AtomicTransform, OrthantIndicator, ShellOscillator, SquaredModulus,
                                Sum, constant_symbol, counterexample_kernel, modulate)
from wienerlab.wiener import (averaged_symbol, atom_mass_estimate, atom_mass_recovery, direction_dependence_test,
                              discrete_part_scan, fit_limit, lipschitz_certificate, sample_pairs, unit_vector,
                              wiener_average_sequence, wiener_theorem_check)

SQRT = GrowthFunction.sqrt()
SHORT = schedule(SQRT, 1e4, 1e5, 3)
E1 = (1.0, 0.0)
DIAG = tuple(unit_vector((1, 1)))
ANTI = tuple(-x for x in DIAG)
TWO_MEASURE = AtomicMeasure.from_atoms([((1.0, 2.0), 1.0), ((3.0, 1.0), 0.5j)])


# --- averages along a direction -------------------------------------------------

def test_constant_symbol_samples_and_limit():
    est = wiener_average_sequence(constant_symbol(0.75 - 0.25j, 2), DIAG, SQRT, schedule(SQRT, 1e2, 1e4, 5))
    assert all(s.average == 0.75 - 0.25j for s in est.samples)
    assert est.extrapolated_limit == pytest.approx(0.75 - 0.25j, abs=1e-14)
    assert est.fit_residual >= 0


@pytest.mark.filterwarnings("ignore::wienerlab.errors.DegenerateFitWarning")
def test_orthant_inside_along_diagonal():
    est = wiener_average_sequence(OrthantIndicator.positive(2), DIAG, SQRT, [1e6], norm="count")
    assert est.last_sample == 1


def test_orthant_along_axis_matches_count_oracle():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateFitWarning)
        est = wiener_average_sequence(OrthantIndicator.positive(2), E1, SQRT, [1e6])
    ball = enumerate_ball((1e6, 0.0), 1e3)
    oracle = np.count_nonzero(ball.points[:, 1] >= 0) / ball.count
    assert est.last_sample.real == oracle
    assert abs(oracle - 0.5) <= 0.01


def test_samples_follow_the_schedule():
    est = wiener_average_sequence(OrthantIndicator.positive(2), DIAG, SQRT, schedule(SQRT, 1e2, 1e3, 3))
    for s in est.samples:
        assert s.r == pytest.approx(math.sqrt(s.t))
        assert s.count == enumerate_ball(np.array(DIAG) * s.t, s.r).count


def test_non_unit_direction_rejected():
    with pytest.raises(InvalidArgumentError):
        wiener_average_sequence(constant_symbol(1.0, 2), (1.0, 1.0), SQRT, [1e2, 1e3, 1e4])


def test_fit_warns_on_short_schedule():
    with pytest.warns(DegenerateFitWarning):
        est = wiener_average_sequence(constant_symbol(2.0, 2), E1, SQRT, [1e2, 1e3])
    assert est.extrapolated_limit == est.last_sample


def test_fit_recovers_exact_model():
    rs = np.array([10.0, 30.0, 100.0, 300.0])
    limit, resid = fit_limit(rs, 0.3 + 0.1j + (2 - 1j) / rs)
    assert limit == pytest.approx(0.3 + 0.1j, abs=1e-12)
    assert resid < 1e-12


# --- direction dependence ---------------------------------------------------------

def test_counterexample_squared_modulus_is_consistent():
    v = direction_dependence_test(SquaredModulus(counterexample_kernel(2)), [DIAG, ANTI, E1], SQRT, SHORT)
    assert v.consistent
    assert all(abs(z - 1) <= 1e-12 for z in v.limits)


@pytest.mark.filterwarnings("ignore::wienerlab.errors.DegenerateFitWarning")
def test_orthant_is_direction_dependent():
    v = direction_dependence_test(OrthantIndicator.positive(2), [DIAG, ANTI], SQRT, [1e6], use="last")
    assert v.verdict == "direction_dependent"
    assert v.limits == (1, 0)
    assert v.max_deviation == 1


def test_dirac_transform_is_consistent():
    v = direction_dependence_test(AtomicTransform(AtomicMeasure.dirac((0.0, 0.0))), [DIAG, ANTI, E1], SQRT, SHORT)
    assert v.consistent
    assert all(z == pytest.approx(1, abs=1e-12) for z in v.limits)


def test_verdict_matches_tolerance_rule():
    v = direction_dependence_test(OrthantIndicator.positive(2), [DIAG, E1], SQRT, SHORT, tol=0.6)
    assert v.consistent == (v.max_deviation <= 0.6)
    assert set(v.to_dict()) >= {"limits", "pairwise_deviations", "max_deviation", "verdict", "tolerance"}


def test_direction_test_needs_two_directions():
    with pytest.raises(InvalidArgumentError):
        direction_dependence_test(constant_symbol(1.0, 2), [E1], SQRT, SHORT)


# --- Wiener's theorem and atom masses ------------------------------------------

def test_theorem_check_dirac():
    rep = wiener_theorem_check(AtomicMeasure.dirac((0.0, 0.0)), DIAG, SQRT, SHORT)
    assert rep.mass == 1
    assert rep.abs_error == pytest.approx(0, abs=1e-14)


def test_theorem_check_two_atoms():
    rep = wiener_theorem_check(TWO_MEASURE, unit_vector((3, 1)), SQRT, SHORT)
    assert rep.mass == 1.25
    assert rep.rel_error <= 0.02
    assert abs(rep.last_sample - 1.25) / 1.25 <= 0.02


@pytest.mark.parametrize("a", [0.3, 1.0, 2 - 1j, 0.7j])
def test_single_atom_squared_modulus_is_constant(a):
    rep = wiener_theorem_check(AtomicMeasure.from_atoms([((0.4, 5.0), a)]), E1, SQRT, SHORT)
    assert abs(rep.limit - abs(a) ** 2) <= 1e-10


def test_atom_mass_recovery_examples():
    s = AtomicTransform(TWO_MEASURE)
    assert atom_mass_recovery(AtomicTransform(AtomicMeasure.dirac((0.0, 0.0))), (0.0, 0.0), E1, SQRT,
                              SHORT) == pytest.approx(1, abs=1e-14)
    assert abs(atom_mass_recovery(s, (3.0, 1.0), DIAG, SQRT, SHORT) - 0.5j) <= 0.02
    lone = AtomicTransform(AtomicMeasure.dirac((1.0, 2.0)))
    assert abs(atom_mass_recovery(lone, (0.0, 0.0), DIAG, SQRT, SHORT)) <= 0.02


def test_modulation_consistency_is_exact():
    s = AtomicTransform(TWO_MEASURE)
    tau = (3.0, 1.0)
    direct = atom_mass_estimate(s, tau, DIAG, SQRT, SHORT)
    pre = atom_mass_estimate(modulate(s, tau), (0.0, 0.0), DIAG, SQRT, SHORT)
    assert [x.average for x in direct.samples] == [x.average for x in pre.samples]


# --- discrete part --------------------------------------------------------------

@pytest.mark.parametrize("seed", [1, 2, 3])
def test_discrete_part_round_trip(seed):
    mu = seeded_measure(seed)
    rep = discrete_part_scan(AtomicTransform(mu), mu.positions, SQRT, SHORT, directions=[DIAG])
    assert len(rep.measure) == len(mu)
    recovered = dict(zip(rep.measure.positions, rep.measure.masses))
    for tau, a in zip(mu.positions, mu.masses):
        assert abs(recovered[tau] - a) <= 0.02 * abs(a)
    assert rep.residual_limit <= 1e-3


def test_orthant_discrete_part_is_flagged():
    rep = discrete_part_scan(OrthantIndicator.positive(2), [(0.0, 0.0)], SQRT, [1e5, 3e5, 1e6],
                             directions=[E1, DIAG])
    assert abs(rep.candidate_masses[0][0] - 0.5) <= 0.01
    assert rep.direction_dependent


def test_zero_symbol_has_empty_discrete_part():
    rep = discrete_part_scan(constant_symbol(0.0, 2), [(0.0, 0.0), (1.0, 1.0)], SQRT, SHORT)
    assert len(rep.measure) == 0


def test_coincident_candidates_rejected():
    with pytest.raises(ConsolidationError):
        discrete_part_scan(constant_symbol(0.0, 2), [(0.0, 0.0), (2 * math.pi, 0.0)], SQRT, SHORT)


# --- structural invariants --------------------------------------------------------

@settings(max_examples=15)
@given(st.integers(-8, 8), st.integers(-8, 8), st.integers(0, 2**16))
def test_linearity_with_dyadic_weights_is_exact(p, q, seed):
    a, b = p / 4, q / 8
    rng = np.random.default_rng(seed)
    center = rng.uniform(-1e4, 1e4, size=2)
    ball = enumerate_ball(center, float(rng.uniform(5, 40)))
    s1, s2 = OrthantIndicator.positive(2), SquaredModulus(counterexample_kernel(2))
    lhs = ball_average(Sum((s1, s2), weights=(a, b)), ball)
    assert lhs == a * ball_average(s1, ball) + b * ball_average(s2, ball)


@given(st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 2**16))
def test_linearity_general_weights(a, b, seed):
    rng = np.random.default_rng(seed)
    mu = seeded_measure(seed)
    ball = enumerate_ball(rng.uniform(-1e3, 1e3, size=2), 20.0)
    s1, s2 = AtomicTransform(mu), OrthantIndicator((1, -1))
    lhs = ball_average(Sum((s1, s2), weights=(a, b)), ball)
    assert abs(lhs - (a * ball_average(s1, ball) + b * ball_average(s2, ball))) <= 1e-14


@pytest.mark.parametrize("seed", [4, 5, 6])
def test_fit_residual_shrinks_with_longer_schedule(seed):
    s = SquaredModulus(AtomicTransform(seeded_measure(seed)))
    w = unit_vector((3, 4))
    short = wiener_average_sequence(s, w, SQRT, schedule(SQRT, 1e1, 1e3, 9))
    longer = wiener_average_sequence(s, w, SQRT, schedule(SQRT, 1e2, 1e4, 9))
    assert longer.fit_residual < short.fit_residual


def test_thread_count_does_not_change_bits():
    s = SquaredModulus(AtomicTransform(seeded_measure(9)))
    one = direction_dependence_test(s, [DIAG, ANTI, E1], SQRT, SHORT, threads=1)
    many = direction_dependence_test(s, [DIAG, ANTI, E1], SQRT, SHORT, threads=4)
    assert one.limits == many.limits
    assert [e.samples for e in one.estimates] == [e.samples for e in many.estimates]


# --- averaged symbol ---------------------------------------------------------------

def test_averaged_constant_symbol_has_zero_constant():
    rep = lipschitz_certificate(constant_symbol(1.0, 2), 0.1, n_pairs=50)
    assert rep.empirical_constant == 0
    assert averaged_symbol(constant_symbol(1.0, 2), 0.1)((120.5, -33.0)) == 1


def test_orthant_lipschitz_constant_within_bound():
    rep = lipschitz_certificate(OrthantIndicator.positive(2), 0.1, n_pairs=300, seed=1)
    assert math.isfinite(rep.empirical_constant)
    assert rep.holds and rep.bound == pytest.approx(40)


def test_averaged_shell_symbol_follows_shell_values():
    shell = ShellOscillator(d=2, sigma=(1.0, 0.0, 1.0), radii=(100, 500, 2500), width=0.3)
    m = averaged_symbol(shell, 0.05)
    for t, sig in zip(shell.radii, shell.sigma):
        assert m((t, 0.0)) == sig


def test_averaged_symbol_empty_ball_and_eps_range():
    with pytest.raises(EmptyDomainError):
        averaged_symbol(constant_symbol(1.0, 2), 0.1)((0.5, 0.5))
    with pytest.raises(InvalidArgumentError):
        averaged_symbol(constant_symbol(1.0, 2), 0.5)


def test_sampled_pairs_satisfy_constraints():
    for xi1, xi2 in sample_pairs(3, 0.2, 200, seed=4):
        n1 = np.linalg.norm(xi1)
        assert 100 <= n1 <= 400
        assert np.linalg.norm(xi1 - xi2) <= 0.1 * n1 * (1 + 1e-12)
