import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fermiwick.errors import CapacityError, InvalidArgumentError, MalformedSpectrumError
from fermiwick.spectra import (
    EntanglementSpectrum,
    ModeEnergies,
    bits_to_mask,
    format_spectrum,
    free_occupation,
    free_partition_function,
    mask_to_bits,
    mode_energies_to_spectrum,
    read_spectrum,
    spectrum_to_mode_energies,
)

from conftest import level_energy

finite = st.floats(-5, 5, allow_nan=False)


def test_bitstring_position_is_mode_index():
    assert bits_to_mask("10") == 1
    assert bits_to_mask("01") == 2
    assert mask_to_bits(5, 4) == "1010"


def test_level_energies_match_term_sum(rng):
    single = rng.uniform(-2, 2, 4)
    pair = {(0, 1): 0.3, (1, 3): -0.7, (2, 3): 0.1}
    higher = {(0, 1, 2): 0.25}
    m = ModeEnergies.from_terms(single, pair, higher, e0=0.4)
    levels = m.level_energies()
    for mask in range(16):
        n = [(mask >> i) & 1 for i in range(4)]
        assert levels[mask] == pytest.approx(level_energy(single, pair, n, 0.4, higher), abs=1e-14)


def test_two_mode_spectrum():
    s = mode_energies_to_spectrum(ModeEnergies.from_terms([1.0, 2.0], {(0, 1): 0.5}))
    np.testing.assert_allclose(s.energy_by_label(), [0.0, 1.0, 2.0, 3.5], atol=1e-15)


def test_inversion_recovers_terms():
    m = ModeEnergies.from_terms([1.0, 2.0, 3.0], {(0, 1): 0.01, (1, 2): -0.2}, {(0, 1, 2): 0.05}, e0=0.3)
    back = spectrum_to_mode_energies(mode_energies_to_spectrum(m))
    np.testing.assert_allclose(back.single, m.single, atol=1e-13)
    assert back.e0 == pytest.approx(0.3, abs=1e-13)
    assert back.pair_energy(0, 1) == pytest.approx(0.01, abs=1e-13)
    assert back.pair_energy(0, 2) == pytest.approx(0.0, abs=1e-13)
    assert back.higher[0b111] == pytest.approx(0.05, abs=1e-13)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 7), st.data())
def test_roundtrip_property(n, data):
    vec = np.array(data.draw(st.lists(finite, min_size=1 << n, max_size=1 << n)))
    s = EntanglementSpectrum(vec, np.arange(1 << n), n)
    m = spectrum_to_mode_energies(s)
    np.testing.assert_allclose(m.level_energies(), vec, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(finite, min_size=1, max_size=8))
def test_free_spectrum_normalizes_to_free_z(eps):
    m = ModeEnergies(eps)
    s = mode_energies_to_spectrum(m, normalized=True)
    assert math.fsum(s.probabilities) == pytest.approx(1.0, abs=1e-12)
    log_z = s.energies[0]  # vacuum level carries ln Z after normalization
    assert log_z == pytest.approx(math.log(free_partition_function(eps)), abs=1e-12)


def test_free_partition_function_examples():
    assert free_partition_function([0.0, 0.0]) == 4.0
    assert free_partition_function([1.0]) == pytest.approx(1 + math.exp(-1), abs=1e-15)


def test_free_occupation_extremes():
    assert free_occupation(0.0) == 0.5
    assert free_occupation(800.0) == 0.0 or free_occupation(800.0) < 1e-300
    assert free_occupation(-800.0) == 1.0
    with pytest.raises(InvalidArgumentError):
        free_occupation(math.nan)


@settings(max_examples=200, deadline=None)
@given(st.floats(-700, 700))
def test_free_occupation_symmetry(e):
    assert free_occupation(e) + free_occupation(-e) == pytest.approx(1.0, abs=1e-15)


def test_capacity_guard():
    with pytest.raises(CapacityError):
        ModeEnergies(np.zeros(21))


def test_invalid_terms():
    with pytest.raises(InvalidArgumentError):
        ModeEnergies.from_terms([1.0, 2.0], {(0, 0): 1.0})
    with pytest.raises(InvalidArgumentError):
        ModeEnergies.from_terms([1.0, 2.0], {(0, 2): 1.0})
    with pytest.raises(InvalidArgumentError):
        ModeEnergies([1.0, math.inf])


def test_scaled_interactions():
    m = ModeEnergies.from_terms([1.0, 2.0], {(0, 1): 0.5})
    assert m.with_interactions_scaled(0.1).pair_energy(0, 1) == pytest.approx(0.05)
    assert m.with_interactions_scaled(0.0).is_free()


def test_normalized_flag_is_checked():
    with pytest.raises(InvalidArgumentError):
        EntanglementSpectrum([0.0, 0.0], normalized=True)
    s = EntanglementSpectrum([0.0, 0.0]).normalize()
    assert s.normalized
    np.testing.assert_allclose(s.probabilities, [0.5, 0.5])


def test_read_labeled_file():
    text = "# two modes\n00,0.1\n10,1.1\n\n01,2.1\n11,3.6\n"
    s = read_spectrum(io.StringIO(text))
    assert s.n_modes == 2 and s.is_complete
    np.testing.assert_allclose(s.energy_by_label(), [0.1, 1.1, 2.1, 3.6])


def test_read_unlabeled_file():
    s = read_spectrum(["0.5", "1.5"])
    assert s.labels is None and len(s) == 2


@pytest.mark.parametrize("text, line", [
    ("00,0.1\n00,1.0\n", 2),
    ("00,0.1\n1.0\n", 2),
    ("00,0.1\n100,1.0\n", 2),
    ("00,abc\n", 1),
    ("0.1\n\n# c\n0.2,0.3,0.4\n", 4),
    ("00,inf\n", 1),
    ("0a,1\n", 1),
])
def test_malformed_lines_report_line_number(text, line):
    with pytest.raises(MalformedSpectrumError) as info:
        read_spectrum(io.StringIO(text))
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_empty_file():
    with pytest.raises(MalformedSpectrumError):
        read_spectrum(io.StringIO("# nothing\n\n"))


def test_format_round_trips_exactly(rng):
    m = ModeEnergies.from_terms(rng.uniform(-3, 3, 3), {(0, 2): 0.123456789})
    s = mode_energies_to_spectrum(m, normalized=True)
    back = read_spectrum(io.StringIO(format_spectrum(s)))
    np.testing.assert_array_equal(back.energies, s.energies)
    np.testing.assert_array_equal(back.labels, s.labels)
    assert back.normalized
