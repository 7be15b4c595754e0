"""Double-double arithmetic.

A value is carried as an unevaluated pair ``hi + lo`` with ``|lo| <= ulp(hi)/2``,
giving roughly 32 significant digits.  Products use Dekker splitting rather
than a fused multiply-add so that the scalar (numba) and vectorised (numpy)
paths perform the same IEEE operations.

Scalar helpers are numba-compiled when available; the ``v*`` functions are
their elementwise numpy twins.
"""

import numpy as np

from ._accel import jit

_SPLITTER = 134217729.0  # 2**27 + 1


@jit(inline="always")
def two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


@jit(inline="always")
def quick_two_sum(a, b):
    s = a + b
    err = b - (s - a)
    return s, err


@jit(inline="always")
def split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


@jit(inline="always")
def two_prod(a, b):
    p = a * b
    ah, al = split(a)
    bh, bl = split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


@jit(inline="always")
def dd_add(ah, al, bh, bl):
    # IEEE-style add: keeps full accuracy under heavy cancellation
    s, e = two_sum(ah, bh)
    t, f = two_sum(al, bl)
    e += t
    s, e = quick_two_sum(s, e)
    e += f
    return quick_two_sum(s, e)


@jit(inline="always")
def dd_mul(ah, al, bh, bl):
    p, e = two_prod(ah, bh)
    e += ah * bl + al * bh
    return quick_two_sum(p, e)


@jit(inline="always")
def dd_mul_d(ah, al, b):
    p, e = two_prod(ah, b)
    e += al * b
    return quick_two_sum(p, e)


@jit(inline="always")
def dd_div_d(ah, al, b):
    q1 = ah / b
    p, e = two_prod(q1, b)
    s, f = two_sum(ah, -p)
    f -= e
    f += al
    q2 = (s + f) / b
    return quick_two_sum(q1, q2)


# -- vectorised twins --------------------------------------------------------

def vtwo_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def vquick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def vsplit(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def vtwo_prod(a, b):
    p = a * b
    ah, al = vsplit(a)
    bh, bl = vsplit(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def vdd_add(ah, al, bh, bl):
    s, e = vtwo_sum(ah, bh)
    t, f = vtwo_sum(al, bl)
    e = e + t
    s, e = vquick_two_sum(s, e)
    e = e + f
    return vquick_two_sum(s, e)


def vdd_mul(ah, al, bh, bl):
    p, e = vtwo_prod(ah, bh)
    e = e + (ah * bl + al * bh)
    return vquick_two_sum(p, e)


def vdd_sum(hi, lo, axis=-1):
    """Pairwise double-double reduction along ``axis``."""
    hi = np.moveaxis(np.asarray(hi, dtype=float), axis, -1)
    lo = np.moveaxis(np.asarray(lo, dtype=float), axis, -1)
    while hi.shape[-1] > 1:
        if hi.shape[-1] % 2:
            pad = [(0, 0)] * (hi.ndim - 1) + [(0, 1)]
            hi = np.pad(hi, pad)
            lo = np.pad(lo, pad)
        hi, lo = vdd_add(hi[..., 0::2], lo[..., 0::2], hi[..., 1::2], lo[..., 1::2])
    return hi[..., 0], lo[..., 0]


def from_fraction(q):
    """Nearest double-double to a rational (``fractions.Fraction`` or int)."""
    from fractions import Fraction

    q = Fraction(q)
    hi = float(q)
    lo = float(q - Fraction(hi))
    return hi, lo
