import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynephase.errors import TruncationError, ValidationError
from dynephase.states import (
    NumberStateVector,
    coherent_state,
    coherent_tail_mass,
    number_state,
    photon_number_variance,
    required_truncation,
    rotate,
)


def test_vacuum():
    s = coherent_state(0.0, 10)
    assert np.array_equal(s.amplitudes, np.eye(11)[0])


def test_normalisation():
    s = coherent_state(2.0, 100)
    assert math.fsum(s.amplitudes**2) == pytest.approx(1.0, abs=1e-12)


def test_ratio_identity():
    s = coherent_state(5.0, 100)
    assert s.amplitudes[25] / s.amplitudes[24] == pytest.approx(1.0, rel=1e-12)
    n = np.arange(100)
    assert np.allclose(s.amplitudes[1:] / s.amplitudes[:-1], 5.0 / np.sqrt(n + 1), rtol=1e-12)


@given(st.floats(min_value=0.05, max_value=6.0))
def test_positive_and_log_concave(beta):
    s = coherent_state(beta, 120)
    a = s.amplitudes
    assert np.all(a > 0)
    r = a[1:] / a[:-1]
    assert np.all(np.diff(r) < 0)


def test_truncation_error_names_requirement():
    with pytest.raises(TruncationError) as ei:
        coherent_state(5.0, 30)
    need = ei.value.required_truncation
    assert need == required_truncation(5.0)
    assert coherent_tail_mass(5.0, need) < 1e-10 <= coherent_tail_mass(5.0, need - 1)
    coherent_state(5.0, need)


def test_tail_mass_direct_sum():
    direct = math.fsum(math.exp(-9.0 + 2 * n * math.log(3.0) - math.lgamma(n + 1)) for n in range(31, 400))
    assert coherent_tail_mass(3.0, 30) == pytest.approx(direct, rel=1e-12)


@pytest.mark.parametrize("theta", [0.0, 2 * math.pi])
def test_trivial_rotations(theta):
    s = coherent_state(1.3, 40)
    assert np.allclose(rotate(s, theta).amplitudes, s.amplitudes, atol=1e-12, rtol=0)


@given(st.floats(-20, 20))
def test_rotation_preserves_modulus(theta):
    s = coherent_state(2.1, 60)
    r = rotate(s, theta)
    assert np.allclose(np.abs(r.amplitudes), s.amplitudes, rtol=1e-15, atol=0)
    assert math.fsum(np.abs(r.amplitudes) ** 2) == pytest.approx(1.0, abs=1e-14)
    # composing rotations adds angles
    assert np.allclose(rotate(r, 1.0).amplitudes, rotate(s, theta + 1.0).amplitudes, atol=1e-12)


def test_number_variance():
    assert photon_number_variance(coherent_state(0.0, 5)) == 0.0
    assert photon_number_variance(number_state(7, 20)) == 0.0
    assert photon_number_variance(coherent_state(3.0, 100)) == pytest.approx(9.0, abs=1e-9)


def test_vector_validation_and_json():
    with pytest.raises(ValidationError):
        NumberStateVector(np.array([1.0, 1.0]))
    with pytest.raises(ValidationError):
        NumberStateVector(np.array([np.nan]))
    with pytest.raises(ValidationError):
        number_state(5, 3)
    s = coherent_state(1.0, 12)
    back = NumberStateVector.from_json(s.to_json())
    assert np.array_equal(back.amplitudes, s.amplitudes)
    assert s.to_dict()["truncation"] == 12
    assert s.padded(20).truncation == 20
