import numpy as np
import pytest

from narrative_media.model_core import ModelError, Narrative
from narrative_media.rational_mix import (
    best_two_item_menu,
    crossover_lambda,
    lambda_sweep,
    mixed_objective,
    mixed_objective_derivative,
    optimize_mixed,
    singleton_values,
)


def test_lambda_zero_reduces_to_homogeneous_payoff():
    q = np.linspace(0, 1, 101)
    for c in (0.1, 0.3):
        homog = 0.5 * (0.5 + 0.5 * q / (1 + q) - c * (1 + q))
        assert np.max(np.abs(mixed_objective(q, c, 0.0) - homog)) <= 1e-15


def test_value_example():
    assert mixed_objective(0.5, 0.2, 0.1) == pytest.approx(0.175, abs=1e-15)


def test_derivative_matches_differences():
    h = 1e-6
    for q in np.linspace(0.05, 0.95, 7):
        for c in (0.05, 0.2, 0.45):
            for lam in (0.0, 0.3, 0.9):
                fd = (mixed_objective(q + h, c, lam) - mixed_objective(q - h, c, lam)) / (2 * h)
                assert abs(fd - mixed_objective_derivative(q, c, lam)) <= 1e-6


def test_small_lambda_optimum():
    sol = optimize_mixed(0.2, 0.1)
    assert sol.N is Narrative.EMPOWERING
    assert sol.q == pytest.approx(0.5, abs=1e-3)
    assert sol.aggregate == pytest.approx(0.175, abs=1e-6)


def test_large_lambda_optimum():
    for lam in (0.9, 0.99):
        sol = optimize_mixed(0.2, lam)
        assert sol.N is Narrative.FATALISTIC
        assert sol.q == pytest.approx(0.0, abs=1e-3)
        assert sol.U_nr == pytest.approx(lam / 4, abs=1e-9)


def test_fully_rational():
    for c in (0.1, 0.3):
        sol = optimize_mixed(c, 1.0)
        assert sol.aggregate == pytest.approx(0.25 - c / 2, abs=1e-12)


@pytest.mark.parametrize("c,lam", [(0.2, 0.0), (0.2, 0.37), (0.1, 0.8), (0.4, 0.5)])
def test_aggregate_decomposes(c, lam):
    sol = optimize_mixed(c, lam)
    assert abs(sol.aggregate - (lam * sol.U_r + (1 - lam) * sol.U_nr)) <= 1e-12
    assert 0.0 <= sol.q <= 1.0


def test_lambda_to_zero_limit():
    c = 0.2
    q0 = np.sqrt(1 / (2 * c)) - 1
    gaps = [abs(optimize_mixed(c, lam).q - q0) for lam in (0.1, 0.01, 0.001)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-3


def test_continuity_in_lambda():
    lams = np.linspace(0, 1, 101)
    vals = np.array([s.aggregate for s in lambda_sweep(0.2, lams)])
    assert np.max(np.abs(np.diff(vals))) < 0.01


def test_crossover():
    # at lambda = 0.6 the EMPOWERING first-order point hits q = 0 and both values equal 0.15
    assert crossover_lambda(0.2) == pytest.approx(0.6, abs=1e-9)
    assert optimize_mixed(0.2, 0.55).N is Narrative.EMPOWERING
    assert optimize_mixed(0.2, 0.65).N is Narrative.FATALISTIC


@pytest.mark.parametrize("c,lam", [(0.2, 0.1), (0.2, 0.5), (0.1, 0.9), (0.3, 0.3)])
def test_singleton_sufficiency(c, lam):
    single = optimize_mixed(c, lam, step=0.01).aggregate
    pair, _ = best_two_item_menu(c, lam)
    assert pair <= single + 1e-6


def test_singleton_values_vectorized():
    agg, ur, unr, a = singleton_values(np.array([0.0, 0.5]), "empowering", 0.2, 0.1)
    assert agg.shape == (2,)
    assert agg[1] == pytest.approx(0.175, abs=1e-12)


def test_input_ranges():
    with pytest.raises(ModelError, match="c"):
        optimize_mixed(0.6, 0.5)
    with pytest.raises(ModelError, match="lambda"):
        optimize_mixed(0.2, 1.5)
