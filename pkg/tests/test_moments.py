import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from dynephase.errors import ValidationError
from dynephase.moments import build_moment_table, cached_moment_table, moment


def exact_moments(K):
    """Rational moments from the recursion with an exact boundary."""
    M = {}
    for n in range(K + 1):
        df = 1
        for j in range(1, 2 * n + 2, 2):
            df *= j
        M[n, 0] = M[0, n] = Fraction(1, df)
    for s in range(2, 2 * K + 1):
        for n in range(1, K + 1):
            m = s - n
            if 1 <= m <= K:
                M[n, m] = (n * M[n - 1, m] + m * M[n, m - 1]) / (2 * (n - m) ** 2 + n + m)
    return M


@pytest.fixture(scope="module")
def table():
    return build_moment_table(60)


def test_first_moments(table):
    assert moment(table, 1, 0) == moment(table, 0, 1) == moment(table, 1, 1) == pytest.approx(1 / 3, rel=1e-15)
    assert moment(table, 0, 0) == 1.0
    assert moment(table, 3, 0) == pytest.approx(1 / 105, rel=1e-15)
    assert moment(table, 5, 0) == pytest.approx(1 / 10395, rel=1e-15)
    assert moment(table, 2, 1) == pytest.approx(11 / 75, rel=1e-15)


def test_against_rationals(table):
    ex = exact_moments(20)
    for (n, m), q in ex.items():
        if n + m <= 20:
            # the double-double pair carries far more than double precision
            got = Fraction(float(table.values[n, m])) + Fraction(float(table.residual[n, m]))
            assert abs(got - q) / q < Fraction(1, 10**28), (n, m)


def test_boundary_double_factorial(table):
    df = 1.0
    for n in range(21):
        assert table.values[n, 0] == pytest.approx(1.0 / df, rel=1e-14)
        df *= 2 * n + 3


def test_table_invariants(table):
    v = table.values
    assert np.array_equal(v, v.T)
    assert np.all(v > 0) and np.all(v <= 1)
    # along a row the moments fall off away from the diagonal (not from m = 0:
    # M[2, 0] = 1/15 < M[2, 1] = 11/75)
    for n in range(v.shape[0]):
        assert np.all(np.diff(v[n, n:]) <= 0)
        assert np.all(np.diff(v[n, : n + 1]) >= 0)
    # all higher moments are at most 1/3
    n, m = np.indices(v.shape)
    assert np.all(v[(n + m) >= 1] <= 1 / 3 + 1e-16)


def test_shell_maxima_decrease(table):
    v = table.values
    shell_max = [max(v[n, s - n] for n in range(max(0, s - 60), min(s, 60) + 1)) for s in range(1, 60)]
    # the diagonal step of the recursion gives M[n, n] = M[n, n-1], so shell
    # maxima come in equal pairs and fall strictly between pairs
    assert all(b <= a for a, b in zip(shell_max, shell_max[1:]))
    assert all(b < a for a, b in zip(shell_max[::2], shell_max[2::2]))
    for n in range(1, 61):
        assert v[n, n] == pytest.approx(v[n, n - 1], rel=1e-15)


def test_time_dependent_equations_reproduce_recursion(table):
    """Integrate the moment ODEs in t = ln v from v = 1e-9 to 1."""
    K = 6
    idx = [(n, m) for n in range(K + 1) for m in range(K + 1) if 1 <= n + m <= K]
    pos = {p: i for i, p in enumerate(idx)}

    def rhs(t, y):
        v = math.exp(t)
        out = np.empty_like(y)
        for (n, m), i in pos.items():
            src = 0.0
            if n:
                src += n * (y[pos[n - 1, m]] if (n - 1, m) in pos else 1.0)
            if m:
                src += m * (y[pos[n, m - 1]] if (n, m - 1) in pos else 1.0)
            out[i] = -2.0 * (n - m) ** 2 * y[i] + v * src
        return out

    sol = solve_ivp(rhs, (math.log(1e-9), 0.0), np.zeros(len(idx)), method="Radau", rtol=1e-11, atol=1e-14)
    assert sol.success
    for (n, m), i in pos.items():
        assert sol.y[i, -1] == pytest.approx(table[n, m], abs=1e-6, rel=1e-6)


def test_lookup_errors(table):
    with pytest.raises(IndexError):
        moment(table, 61, 0)
    with pytest.raises(IndexError):
        moment(table, -1, 0)
    with pytest.raises(ValidationError):
        build_moment_table(-1)


def test_symmetry_lookup(table):
    for n in range(0, 61, 7):
        for m in range(0, 61, 5):
            assert moment(table, n, m) == moment(table, m, n)


def test_cache_and_csv():
    t = cached_moment_table(10)
    assert t.max_order >= 10
    assert cached_moment_table(5) is t
    lines = build_moment_table(2).to_csv().splitlines()
    assert lines[0] == "n,m0,m1,m2"
    assert lines[2].startswith("1,0.33333333333333331,0.33333333333333331")
