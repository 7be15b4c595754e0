import cmath
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynephase import asymptotics, pom
from dynephase.errors import DomainError, IntegrityError, ValidationError
from dynephase.moments import build_moment_table

from test_moments import exact_moments

# Mark II entries from an independent 40-digit mpmath evaluation of the double
# binomial series (101 terms per factor, rational moments).
MARK2_ORACLE = {
    (0, 1): 0.957823040944934,
    (0, 2): 0.942809041582063,
    (3, 8): 0.909412167844703,
    (0, 8): 0.725735259422137,
    (0, 20): 0.455945421736354,
    (10, 30): 0.767494664709525,
    (0, 99): 0.065933321948957,
    (0, 100): 0.0646962722203327,
    (1, 100): 0.0703605176325341,
    (49, 100): 0.780342839366351,
    (50, 100): 0.790065734678212,
    (60, 99): 0.878384448845424,
    (99, 100): 0.999939760522797,
}


def mark1_exact(m, n, moments):
    """``sum_pq N_mp N_nq M[p, q] / sqrt(m! n!)`` with integer N and rational M."""
    tot = Fraction(0)
    for p in range(m // 2 + 1):
        for q in range(n // 2 + 1):
            tot += pom._gamma_int(m, p) * pom._gamma_int(n, q) * moments[p, q]
    with mpmath.workdps(40):
        return float(mpmath.mpf(tot.numerator) / tot.denominator / mpmath.sqrt(math.factorial(m) * math.factorial(n)))


def test_canonical():
    assert np.array_equal(pom.h_canonical(0).entries, [[1.0]])
    assert np.all(pom.h_canonical(7).entries == 1.0)


class TestHeterodyne:
    def test_first_entry(self):
        assert pom.h_heterodyne(3).entries[0, 1] == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-15)

    def test_against_mpmath(self):
        h = pom.h_heterodyne(160).entries
        rng = np.random.default_rng(0)
        with mpmath.workdps(40):
            for m, n in rng.integers(0, 161, size=(60, 2)):
                ref = mpmath.gamma(mpmath.mpf(int(m) + int(n)) / 2 + 1) / mpmath.sqrt(
                    mpmath.factorial(int(m)) * mpmath.factorial(int(n))
                )
                assert h[m, n] == pytest.approx(float(ref), rel=2e-16)

    def test_lngamma_method_close(self):
        a = pom.h_heterodyne(120).entries
        b = pom.h_heterodyne(120, method="lngamma").entries
        assert np.allclose(a, b, rtol=1e-12, atol=0)
        with pytest.raises(ValidationError):
            pom.h_heterodyne(4, method="nope")


class TestGamma:
    def test_values(self):
        assert float(pom.gamma_coeff(0, 0)) == 1.0
        assert float(pom.gamma_coeff(2, 1)) == pytest.approx(math.sqrt(2) / 2, rel=1e-15)
        assert float(pom.gamma_coeff(4, 2)) == pytest.approx(math.sqrt(24) / 8, rel=1e-15)

    @pytest.mark.parametrize("m,p", [(3, 2), (0, 1), (4, -1)])
    def test_domain(self, m, p):
        with pytest.raises(DomainError):
            pom.gamma_coeff(m, p)

    @given(st.integers(0, 60).flatmap(lambda m: st.tuples(st.just(m), st.integers(0, m // 2))))
    def test_integer_form(self, mp):
        m, p = mp
        assert float(pom.gamma_coeff(m, p)) == pytest.approx(pom._gamma_int(m, p) / math.sqrt(math.factorial(m)), rel=1e-12)


class TestMark1:
    def test_exact_rational_oracle(self):
        ex = exact_moments(20)
        h = pom.h_mark1(40).entries
        for m in range(0, 13):
            for n in range(m, 13):
                assert h[m, n] == pytest.approx(mark1_exact(m, n, ex), rel=1e-15, abs=1e-16)
        for m, n in [(0, 40), (7, 33), (20, 40), (39, 40)]:
            assert h[m, n] == pytest.approx(mark1_exact(m, n, ex), rel=1e-14)

    def test_low_photon_block_is_canonical(self):
        h = pom.h_mark1(5).entries
        assert np.all(np.abs(h[:2, :2] - 1.0) <= 1e-10)

    def test_h_bounded_by_asymptote(self):
        h = pom.h_mark1(100)
        assert h.h(99) / asymptotics.h_asymptotic("mark1", 99) == pytest.approx(1.0, abs=0.15)

    def test_insufficient_moments(self):
        with pytest.raises(ValidationError):
            pom.h_mark1(20, moments=build_moment_table(5))


@pytest.fixture(scope="module")
def h(h100):
    return h100["mark2"]


class TestMark2:
    def test_oracle(self, h):
        for (m, n), ref in MARK2_ORACLE.items():
            assert h.entries[m, n] == pytest.approx(ref, abs=1e-9)

    def test_metadata(self, h):
        assert h.meta["series_terms"] == 100
        assert h.meta["tail_estimate"] < pom.TAIL_TOLERANCE
        assert h.meta["min_eigenvalue"] > -1e-8

    def test_series_convergence(self):
        a = pom.h_mark2(40, series_terms=100).entries
        b = pom.h_mark2(40, series_terms=200).entries
        assert np.max(np.abs(a - b)) <= 1e-9

    def test_one_term_is_mark1(self):
        a = pom.h_mark2(20, series_terms=1, check_tail=False).entries
        assert np.array_equal(a, pom.h_mark1(20).entries)

    def test_default_terms_grow_with_dim(self):
        assert pom.default_series_terms(100) == 100
        assert pom.default_series_terms(200) == 150

    def test_dominates_heterodyne_in_low_block(self, h100):
        ii = h100["mark2"].entries[:9, :9]
        het = h100["heterodyne"].entries[:9, :9]
        assert np.all(ii >= het - 1e-9)
        assert np.all(ii > 0.7)

    def test_h_near_asymptote(self, h):
        assert h.h(99) / asymptotics.h_asymptotic("mark2", 99) == pytest.approx(1.0, abs=0.15)


@pytest.mark.parametrize("scheme", pom.SCHEMES)
def test_general_invariants(scheme, h100):
    h = h100[scheme]
    e = h.entries
    assert np.array_equal(e, e.T)
    assert np.all(np.diag(e) == 1.0)
    assert np.all(e <= 1.0 + 1e-8) and np.all(e >= 0.0)
    assert h.meta.get("diag_deviation", 0.0) <= 1e-8
    hh = h.h()
    assert np.all(hh >= -1e-12)
    m = np.arange(10, 100)
    assert np.max(hh[10:100] * np.sqrt(m)) <= 1.0


def test_hmatrix_validation():
    with pytest.raises(ValidationError):
        pom.HMatrix("mark1", np.array([[1.0, 0.5], [0.4, 1.0]]))
    with pytest.raises(ValidationError):
        pom.HMatrix("mark1", np.array([[1.0, 0.5], [0.5, 0.9]]))
    with pytest.raises(IntegrityError):
        pom.HMatrix("mark1", np.array([[1.0, 1.5], [1.5, 1.0]]))
    with pytest.raises(ValidationError):
        pom.canonical_scheme("homodyne")
    assert pom.canonical_scheme("het") == "heterodyne"


def test_serialisation_round_trip():
    h = pom.build_h("heterodyne", 6)
    back = pom.HMatrix.from_json(h.to_json())
    assert np.array_equal(back.entries, h.entries)
    lines = h.to_csv().splitlines()
    assert lines[0] == "# scheme=heterodyne dim=6"
    assert lines[1] == "m," + ",".join(f"n{i}" for i in range(7))
    assert len(lines) == 9


def test_cache_slices_larger_matrix():
    big = pom.build_h("mark1", 30)
    small = pom.build_h("mark1", 10)
    assert np.array_equal(small.entries, big.entries[:11, :11])
    assert big.truncated(30) is big
    with pytest.raises(ValidationError):
        small.truncated(11)


class TestSqueezed:
    def test_no_squeezing(self):
        p = pom.squeezed_params(0.3 + 0.2j, 0)
        assert p.alpha == 0.3 + 0.2j and p.epsilon == 0

    def test_example(self):
        p = pom.squeezed_params(1, 0.5)
        assert p.alpha == pytest.approx(2.0)
        assert p.epsilon == pytest.approx(-math.atanh(0.5))

    @given(st.floats(0, 2 * math.pi), st.floats(-0.99, 0.99))
    def test_feedback_variables(self, phi, c):
        a = cmath.exp(1j * phi)
        p = pom.squeezed_params(a, cmath.exp(2j * phi) * c)
        assert p.alpha == pytest.approx(a * (1 + c) / (1 - c * c), rel=1e-12, abs=1e-12)

    def test_small_b_continuous(self):
        b = 1e-9 * (1 + 1j)
        assert pom.squeezed_params(1, b).epsilon == pytest.approx(-b, rel=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            pom.squeezed_params(1, 1.0)

    def test_weights(self):
        assert pom.coherent_weight(0.0, 1.3, 0.4 + 0.1j) == 1.0
        assert pom.coherent_weight(1.7, 0.0, 0.0) == pytest.approx(math.exp(-1.7**2 + 2 * 1.7))
        for c in (-0.6, 0.0, 0.8):
            r = pom.coherent_weight(2.5, math.pi, c) / pom.coherent_weight(2.5, 0.0, c)
            assert r == pytest.approx(math.exp(-10.0), rel=1e-12)
        arr = pom.coherent_weight(1.0, np.zeros(3), np.zeros(3))
        assert arr.shape == (3,)

    def test_overlap(self):
        assert pom.squeezed_overlap(0, 0, 0) == 1.0
        assert pom.squeezed_overlap(1, -1, 0) == pytest.approx(math.exp(-4.0))
        assert pom.squeezed_overlap(1.5, -1.5, 0) == pytest.approx(math.exp(-9.0))


def test_clear_caches_rebuilds_identically():
    a = pom.build_h("mark1", 12).entries.copy()
    pom.clear_caches()
    b = pom.build_h("mark1", 12)
    assert np.array_equal(a, b.entries)
    assert pom.build_h("mark1", 10).dim == 10
