import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wienerlab.measures import AtomicMeasure, torus_distance

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def seeded_measure(seed: int, d: int = 2, max_atoms: int = 5, min_dist: float = 0.3) -> AtomicMeasure:
    """Up to ``max_atoms`` atoms with real masses in [0.2, 1] and pairwise torus distance >= ``min_dist``."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_atoms + 1))
    positions: list[np.ndarray] = []
    while len(positions) < n:
        cand = rng.uniform(0.0, 2 * np.pi, size=d)
        if all(torus_distance(cand, p) >= min_dist for p in positions):
            positions.append(cand)
    masses = rng.uniform(0.2, 1.0, size=n)
    return AtomicMeasure.from_atoms(zip(positions, masses), d=d)


def min_separation(mu: AtomicMeasure) -> float:
    return min((torus_distance(a, b) for a, b in itertools.combinations(mu.positions, 2)), default=np.inf)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
