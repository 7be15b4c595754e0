"""Ostensible moments of the adaptive feedback variable C.

The moments ``M[n, m] = <C^n (C*)^m>_Q`` at unit scaled time obey the
closed recursion

    M[n, m] = (n M[n-1, m] + m M[n, m-1]) / (2 (n - m)^2 + n + m),

with ``M[0, 0] = 1`` (hence ``M[n, 0] = 1/(2n+1)!!``).  The recursion only
adds positive numbers and divides by integers, so it is numerically benign.
The table keeps a double-double residual alongside each entry because the
mark II POM sums these moments against binomial coefficients of very
different magnitudes.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import _dd
from ._accel import jit
from .errors import ValidationError

DEFAULT_MAX_ORDER = 60


@jit
def _moment_recursion(K):
    hi = np.zeros((K + 1, K + 1))
    lo = np.zeros((K + 1, K + 1))
    hi[0, 0] = 1.0
    for s in range(1, 2 * K + 1):
        for n in range(max(0, s - K), min(s, K) + 1):
            m = s - n
            ah = 0.0
            al = 0.0
            if n > 0:
                ah, al = _dd.dd_mul_d(hi[n - 1, m], lo[n - 1, m], float(n))
            if m > 0:
                bh, bl = _dd.dd_mul_d(hi[n, m - 1], lo[n, m - 1], float(m))
                ah, al = _dd.dd_add(ah, al, bh, bl)
            den = float(2 * (n - m) * (n - m) + n + m)
            hi[n, m], lo[n, m] = _dd.dd_div_d(ah, al, den)
    return hi, lo


@dataclass(frozen=True, eq=False)
class MomentTable:
    """Square table of ostensible moments ``M[n, m]``, ``0 <= n, m <= max_order``.

    Attributes
    ----------
    max_order : int
    values : ndarray, shape (max_order+1, max_order+1)
        Moments rounded to double precision.
    residual : ndarray
        ``values + residual`` is the double-double value of each moment.
    """

    max_order: int
    values: np.ndarray
    residual: np.ndarray

    def __post_init__(self):
        self.values.setflags(write=False)
        self.residual.setflags(write=False)

    def __getitem__(self, idx):
        n, m = idx
        return moment(self, n, m)

    def to_csv(self):
        """Rows ``n``, columns ``m``; 17 significant digits."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n"] + [f"m{m}" for m in range(self.max_order + 1)])
        for n in range(self.max_order + 1):
            writer.writerow([n] + ["%.17g" % x for x in self.values[n]])
        return buf.getvalue()


def build_moment_table(max_order=DEFAULT_MAX_ORDER):
    """Fill the moment table by dynamic programming over ``n + m`` shells.

    Parameters
    ----------
    max_order : int
        Largest index ``K`` in either slot.

    Returns
    -------
    MomentTable
    """
    max_order = int(max_order)
    if max_order < 0:
        raise ValidationError("max_order must be non-negative")
    hi, lo = _moment_recursion(max_order)
    return MomentTable(max_order, hi, lo)


_CACHE = {}


def cached_moment_table(max_order):
    """Shared table covering at least ``max_order`` (tables are immutable)."""
    for k, t in _CACHE.items():
        if k >= max_order:
            return t
    t = build_moment_table(max(max_order, DEFAULT_MAX_ORDER))
    _CACHE.clear()
    _CACHE[t.max_order] = t
    return t


def clear_moment_cache():
    """Forget the shared table built by :func:`cached_moment_table`."""
    _CACHE.clear()


def moment(table, n, m):
    """Look up ``M[n, m]``; raises ``IndexError`` outside the table."""
    if not (0 <= n <= table.max_order and 0 <= m <= table.max_order):
        raise IndexError(f"moment ({n}, {m}) outside table of order {table.max_order}")
    return float(table.values[n, m])
