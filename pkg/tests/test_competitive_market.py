import numpy as np
import pytest

from narrative_media.competitive_market import (
    A_RULES,
    competitive_equilibrium,
    deviation_values,
    verify_competitive,
)
from narrative_media.distributions import from_table
from narrative_media.menu_design import AggregateBehavior, optimize_menu
from narrative_media.model_core import ModelError, Narrative


def test_uniform_cutoff():
    prof = competitive_equilibrium("uniform")
    assert prof.cutoff == pytest.approx(1 / 3, abs=1e-12)
    assert prof.residual < 1e-10
    assert prof.cutoff > 3 / 11  # above the monopoly cutoff


def test_power_cutoff():
    prof = competitive_equilibrium("power:2")
    assert abs(prof.cutoff - (np.sqrt(2.0) - 1.0)) < 1e-10
    assert abs(2 * prof.cutoff + prof.cutoff**2 - 1) < 1e-10


def test_table_cutoff():
    # piecewise-linear F: 0.8 c on [0, 0.5], then up to 1 at c = 1; root of 2c + 0.8c = 1
    F = from_table([0.0, 0.5, 1.0], [0.0, 0.4, 1.0])
    prof = competitive_equilibrium(F)
    assert prof.cutoff == pytest.approx(1 / 2.8, abs=1e-12)


def test_sigma_consistency():
    prof = competitive_equilibrium("uniform")
    assert prof.sigma == prof.cdf(prof.cutoff)
    assert prof.aggregate().p1 == prof.sigma
    high = prof.nodes > prof.cutoff
    assert np.all(prof.utilities[high] == prof.sigma / 4)
    low = prof.nodes <= prof.cutoff
    assert np.allclose(prof.utilities[low], 0.25 - prof.nodes[low] / 2)


def test_verification_clean():
    for F in ("uniform", "power:2", "power:0.5"):
        assert verify_competitive(competitive_equilibrium(F)) == []


def test_perturbed_cutoff_violations():
    prof = competitive_equilibrium("uniform").with_cutoff(0.5)
    viol = verify_competitive(prof)
    cs = np.array(sorted({v.c for v in viol}))
    # sigma = 1/2: TRUE gives 1/4 - c/2, FATALISTIC gives 1/8; they cross at c = 1/4
    grid = np.linspace(0, 1, 201)
    assert np.array_equal(cs, grid[(grid > 0.25 + 1e-12) & (grid <= 0.5)])
    assert set(grid[(grid > 1 / 3) & (grid < 0.5)]) <= set(cs)
    assert all("FATALISTIC" in v.detail for v in viol if v.kind == "deviation")


def test_denial_half_of_fatalistic():
    sigma = 1 / 3
    c = np.linspace(0.34, 1.0, 12)
    vals, cols = deviation_values(c, AggregateBehavior(sigma, 0.0))
    idle = [j for j, col in enumerate(cols) if col[3] == (0, 0)]
    fat = max(vals[0, j] for j in idle if cols[j][2] is Narrative.FATALISTIC)
    den = max(vals[0, j] for j in idle if cols[j][2] is Narrative.DENIAL)
    assert fat == pytest.approx(sigma / 4, abs=1e-15)
    assert den == pytest.approx(fat / 2, abs=1e-15)


def test_deviation_grid_shape():
    vals, cols = deviation_values([0.1, 0.2], AggregateBehavior(0.3, 0.0))
    assert vals.shape == (2, 21 * 21 * 4 * len(A_RULES))
    with pytest.raises(ModelError, match="step"):
        deviation_values([0.1], AggregateBehavior(0.3, 0.0), step=0.3)


def test_competition_underperforms_monopoly():
    comp = competitive_equilibrium("uniform")
    assert comp.aggregate_utility == pytest.approx(1 / 9, abs=1e-9)
    mono = optimize_menu(oracle=False)
    assert comp.aggregate_utility <= mono.utility


def test_bad_cutoff():
    with pytest.raises(ModelError, match="cutoff"):
        competitive_equilibrium("uniform").with_cutoff(1.2)
