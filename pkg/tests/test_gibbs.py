import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fermiwick.errors import InvalidArgumentError
from fermiwick.gibbs import exact_occupation, exact_pair_occupation, exact_partition_function, moments
from fermiwick.spectra import ModeEnergies, free_occupation, free_partition_function

from conftest import enumerate_moments, random_pairs

# 4-state enumeration at eps=(1, 2), eps_12=0.5, frozen from the conftest oracle
WORKED = ModeEnergies.from_terms([1.0, 2.0], {(0, 1): 0.5})
WORKED_Z = 1.5334121078303737
WORKED_N1 = 0.25960198342049096
WORKED_N2 = 0.1079505410278412
WORKED_N12 = 0.01969293399218349


def test_worked_point_partition_function():
    z = exact_partition_function(WORKED)
    assert z == pytest.approx(WORKED_Z, abs=1e-14)
    assert z == pytest.approx(1 + math.exp(-1) + math.exp(-2) + math.exp(-3.5), abs=1e-14)


def test_worked_point_occupations():
    assert exact_occupation(WORKED, 0) == pytest.approx(WORKED_N1, abs=1e-15)
    assert exact_occupation(WORKED, 1) == pytest.approx(WORKED_N2, abs=1e-15)
    assert exact_pair_occupation(WORKED, 0, 1) == pytest.approx(WORKED_N12, abs=1e-15)


def test_frozen_values_match_oracle():
    z, occ, both = enumerate_moments([1.0, 2.0], {(0, 1): 0.5})
    assert (z, occ[0], occ[1], both[0][1]) == pytest.approx((WORKED_Z, WORKED_N1, WORKED_N2, WORKED_N12), abs=1e-15)


def test_zero_energies():
    assert exact_partition_function(ModeEnergies(np.zeros(3))) == pytest.approx(8.0, abs=1e-14)
    mom = moments(ModeEnergies(np.zeros(3)))
    np.testing.assert_allclose(mom.occupation, 0.5)
    np.testing.assert_allclose(mom.pair_occupation[0, 1], 0.25)


def test_e0_scales_partition_function():
    m = ModeEnergies([0.3, 0.7], e0=1.5)
    assert exact_partition_function(m) == pytest.approx(math.exp(-1.5) * free_partition_function([0.3, 0.7]))
    # densities do not depend on the shift
    assert exact_occupation(m, 0) == pytest.approx(free_occupation(0.3), abs=1e-15)


def test_matches_enumeration(rng):
    for n in range(1, 7):
        single = rng.uniform(-3, 3, n)
        pair = random_pairs(rng, n, 1.0)
        m = ModeEnergies.from_terms(single, pair)
        z, occ, both = enumerate_moments(single, pair)
        mom = moments(m)
        assert mom.partition_function == pytest.approx(z, rel=1e-13)
        np.testing.assert_allclose(mom.occupation, occ, atol=1e-14)
        np.testing.assert_allclose(mom.pair_occupation, both, atol=1e-14)


def test_large_energies_do_not_overflow():
    m = ModeEnergies.from_terms([-700.0, -705.0, 690.0], {(0, 1): 2.0})
    mom = moments(m)
    assert np.all(np.isfinite(mom.occupation))
    assert math.isfinite(mom.log_z)
    assert mom.occupation[0] == pytest.approx(1.0)


def test_errors():
    with pytest.raises(InvalidArgumentError):
        exact_occupation(WORKED, 2)
    with pytest.raises(InvalidArgumentError):
        exact_pair_occupation(WORKED, 1, 1)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=1, max_size=6))
def test_free_occupation_consistency(eps):
    mom = moments(ModeEnergies(eps))
    np.testing.assert_allclose(mom.occupation, [free_occupation(e) for e in eps], atol=1e-13)
    assert mom.partition_function == pytest.approx(free_partition_function(eps), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**31))
def test_densities_are_probabilities(n, seed):
    r = np.random.default_rng(seed)
    mom = moments(ModeEnergies.from_terms(r.uniform(-5, 5, n), random_pairs(r, n, 3.0)))
    p = mom.pair_occupation
    assert np.all(p >= -1e-15) and np.all(p <= 1 + 1e-15)
    # <n_k n_l> <= min(<n_k>, <n_l>)
    assert np.all(p <= np.minimum.outer(mom.occupation, mom.occupation) + 1e-14)
