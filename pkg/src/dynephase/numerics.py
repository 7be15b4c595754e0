"""Special functions and the extreme-eigenpair solver used throughout.

The eigensolver follows the classical recipe for "largest eigenpair of a
small real symmetric matrix": reduce to tridiagonal form with Householder
reflections, locate the top eigenvalue by Sturm-sequence bisection, then
recover the eigenvector by inverse iteration with a pivoted tridiagonal
solve.  Everything is O(n^3) with small constants; matrices here have
dimension of a few hundred at most.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConvergenceError, DomainError, ValidationError

__all__ = [
    "ln_gamma",
    "confluent_1f1",
    "airy_ai",
    "airy_first_zero",
    "SignedLogValue",
    "signed_log_sum",
    "EigenPair",
    "sym_max_eigpair",
    "tridiagonal_max_eigpair",
    "householder_tridiagonalize",
]


def ln_gamma(x):
    """Natural logarithm of the gamma function for ``x > 0``."""
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"ln_gamma requires finite x > 0, got {x!r}")
    return float(special.gammaln(x))


def confluent_1f1(a, b, x, max_terms=10000, rtol=1e-17):
    """Kummer's function ``1F1(a; b; x)`` by its ascending series.

    Parameters
    ----------
    a, b : float
        Parameters; ``b`` must not be a non-positive integer.
    x : float
        Argument, ``x >= 0``.
    max_terms : int
        Term cap; exceeding it raises ``ConvergenceError``.

    Notes
    -----
    Terms are generated by the ratio ``t_{k+1}/t_k = (a+k) x / ((b+k)(k+1))``
    and summed with ``math.fsum``.  Summation stops once the ratio has
    dropped below one and the current term is negligible.
    """
    a, b, x = float(a), float(b), float(x)
    if b <= 0 and b == math.floor(b):
        raise DomainError("confluent_1f1: b must not be a non-positive integer")
    if x < 0 or not math.isfinite(x):
        raise DomainError("confluent_1f1: x must be finite and non-negative")
    term = 1.0
    terms = [1.0]
    for k in range(max_terms):
        ratio = (a + k) * x / ((b + k) * (k + 1))
        term *= ratio
        if term == 0.0:
            return math.fsum(terms)
        terms.append(term)
        if abs(ratio) < 1.0 and abs(term) <= rtol * abs(math.fsum(terms)):
            return math.fsum(terms)
    raise ConvergenceError("confluent_1f1 series did not converge", iterations=max_terms)


def airy_ai(z):
    """Airy function ``Ai(z)`` (thin wrapper over :func:`scipy.special.airy`)."""
    return float(special.airy(float(z))[0])


_AIRY_Z1 = float(special.ai_zeros(1)[0][0])


def airy_first_zero():
    """First (least negative) zero of ``Ai``, approximately -2.33811."""
    return _AIRY_Z1


# -- signed log-magnitude arithmetic ---------------------------------------------

@dataclass(frozen=True)
class SignedLogValue:
    """A real number stored as ``sign * exp(log_magnitude)``.

    ``sign == 0`` encodes exact zero (``log_magnitude`` is then ``-inf``).
    """

    log_magnitude: float
    sign: int

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValidationError("sign must be -1, 0 or +1")
        if self.sign == 0 and self.log_magnitude != -math.inf:
            object.__setattr__(self, "log_magnitude", -math.inf)

    @classmethod
    def zero(cls):
        return cls(-math.inf, 0)

    @classmethod
    def from_float(cls, x):
        if x == 0:
            return cls.zero()
        return cls(math.log(abs(x)), 1 if x > 0 else -1)

    def is_zero(self):
        return self.sign == 0

    def __mul__(self, other):
        if not isinstance(other, SignedLogValue):
            other = SignedLogValue.from_float(float(other))
        if self.sign == 0 or other.sign == 0:
            return SignedLogValue.zero()
        return SignedLogValue(self.log_magnitude + other.log_magnitude, self.sign * other.sign)

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, SignedLogValue):
            other = SignedLogValue.from_float(float(other))
        return signed_log_sum([self, other])

    __radd__ = __add__

    def __neg__(self):
        return SignedLogValue(self.log_magnitude, -self.sign)

    def __float__(self):
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_magnitude)


def signed_log_sum(terms):
    """Sum signed log-magnitude values without leaving log space.

    The terms are shifted by the largest log-magnitude, exponentiated and
    summed exactly (``math.fsum``), so the result is independent of term
    order and immune to overflow.
    """
    live = [t for t in terms if t.sign != 0]
    if not live:
        return SignedLogValue.zero()
    shift = max(t.log_magnitude for t in live)
    total = math.fsum(t.sign * math.exp(t.log_magnitude - shift) for t in live)
    if total == 0.0:
        return SignedLogValue.zero()
    return SignedLogValue(math.log(abs(total)) + shift, 1 if total > 0 else -1)


# -- extreme eigenpairs -------------------------------------------------------------

@dataclass(frozen=True)
class EigenPair:
    """Eigenvalue with a unit eigenvector whose first nonzero entry is positive."""

    value: float
    vector: np.ndarray
    residual: float = 0.0
    iterations: int = 0


def _sturm_count(d, e2, x):
    """Number of eigenvalues of the tridiagonal matrix strictly below ``x``."""
    count = 0
    q = d[0] - x
    if q < 0:
        count += 1
    tiny = 1e-300
    for i in range(1, d.shape[0]):
        if q == 0.0:
            q = tiny
        q = (d[i] - x) - e2[i - 1] / q
        if q < 0:
            count += 1
    return count


def _orient(v):
    """Normalise and flip so the first non-negligible entry is positive."""
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    scale = np.max(np.abs(v))
    idx = np.flatnonzero(np.abs(v) > 1e-12 * scale)
    if idx.size and v[idx[0]] < 0:
        v = -v
    return v


def _solve_tridiagonal_pivoted(sub, diag, sup, rhs):
    """Gaussian elimination with partial pivoting for a tridiagonal system."""
    n = diag.shape[0]
    a = np.zeros(n)  # main diagonal of U
    b = np.zeros(n)  # first superdiagonal of U
    c = np.zeros(n)  # second superdiagonal of U (fill-in from pivoting)
    x = rhs.astype(float).copy()
    a[:] = diag
    b[: n - 1] = sup
    lower = np.zeros(n)
    lower[1:] = sub
    for i in range(n - 1):
        if abs(lower[i + 1]) > abs(a[i]):
            # swap rows i and i+1
            a[i], lower[i + 1] = lower[i + 1], a[i]
            b[i], a[i + 1] = a[i + 1], b[i]
            if i + 2 < n:
                c[i], b[i + 1] = b[i + 1], c[i]
            x[i], x[i + 1] = x[i + 1], x[i]
        if a[i] == 0.0:
            a[i] = 1e-300
        f = lower[i + 1] / a[i]
        a[i + 1] -= f * b[i]
        if i + 2 < n:
            b[i + 1] -= f * c[i]
        x[i + 1] -= f * x[i]
    if a[n - 1] == 0.0:
        a[n - 1] = 1e-300
    x[n - 1] /= a[n - 1]
    if n > 1:
        x[n - 2] = (x[n - 2] - b[n - 2] * x[n - 1]) / a[n - 2]
    for i in range(n - 3, -1, -1):
        x[i] = (x[i] - b[i] * x[i + 1] - c[i] * x[i + 2]) / a[i]
    return x


def tridiagonal_max_eigpair(diag, offdiag, tol=1e-12, max_iter=200):
    """Largest eigenpair of the symmetric tridiagonal matrix ``(diag, offdiag)``.

    Parameters
    ----------
    diag : array_like, shape (n,)
    offdiag : array_like, shape (n-1,)
    tol : float
        Residual tolerance relative to ``max(1, ||T||)``.
    max_iter : int
        Cap on bisection steps and on inverse-iteration sweeps.

    Returns
    -------
    EigenPair
    """
    d = np.asarray(diag, dtype=float)
    e = np.asarray(offdiag, dtype=float)
    n = d.shape[0]
    if n == 0 or e.shape[0] != n - 1:
        raise ValidationError("tridiagonal shape mismatch")
    if n == 1:
        return EigenPair(float(d[0]), np.ones(1), 0.0, 0)

    ae = np.abs(e)
    radius = np.zeros(n)
    radius[:-1] += ae
    radius[1:] += ae
    lo = float(np.min(d - radius))
    hi = float(np.max(d + radius))
    norm = max(abs(lo), abs(hi))
    e2 = e * e

    # Largest eigenvalue = inf{x : count(x) == n}; bisect to machine resolution.
    it = 0
    while it < 4 * max_iter:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _sturm_count(d, e2, mid) == n:
            hi = mid
        else:
            lo = mid
        it += 1
    lam = 0.5 * (lo + hi)

    # Inverse iteration; the shift sits within rounding of the eigenvalue.
    shift = lam + 2.0 * np.finfo(float).eps * max(norm, 1.0)
    x = np.ones(n) / math.sqrt(n)
    tnorm = max(norm, 1.0)
    res = math.inf
    for sweep in range(1, max_iter + 1):
        y = _solve_tridiagonal_pivoted(e, d - shift, e, x)
        nrm = np.linalg.norm(y)
        if not np.isfinite(nrm) or nrm == 0:
            raise ConvergenceError("inverse iteration broke down", iterations=sweep)
        x = y / nrm
        tx = d * x
        tx[:-1] += e * x[1:]
        tx[1:] += e * x[:-1]
        rq = float(x @ tx)
        res = float(np.linalg.norm(tx - rq * x))
        if res <= tol * tnorm and sweep >= 2:
            break
    else:
        raise ConvergenceError(
            f"inverse iteration residual {res:.3g} above tolerance", iterations=max_iter
        )
    return EigenPair(lam, _orient(x), res, sweep)


def householder_tridiagonalize(a):
    """Reduce a symmetric matrix to tridiagonal form, ``A = Q T Q^T``.

    Returns
    -------
    diag, offdiag : ndarray
        The tridiagonal ``T``.
    reflectors : list of (k, v)
        Householder vectors; apply with :func:`_apply_reflectors`.
    """
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[0]
    reflectors = []
    for k in range(n - 2):
        x = a[k + 1 :, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0 or np.all(x[1:] == 0.0):
            continue
        if x[0] > 0:
            alpha = -alpha
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        sub = a[k + 1 :, k + 1 :]
        p = sub @ v
        kk = v @ p
        q = p - kk * v
        sub -= 2.0 * (np.outer(v, q) + np.outer(q, v))
        a[k + 1 :, k] = 0.0
        a[k, k + 1 :] = 0.0
        a[k + 1, k] = a[k, k + 1] = alpha
        reflectors.append((k, v))
    return np.diag(a).copy(), np.diag(a, 1).copy(), reflectors


def _apply_reflectors(reflectors, y):
    y = y.copy()
    for k, v in reversed(reflectors):
        seg = y[k + 1 :]
        seg -= 2.0 * v * (v @ seg)
    return y


def sym_max_eigpair(matrix, kind="dense", tol=1e-12, max_iter=200):
    """Largest eigenvalue of a real symmetric matrix and its eigenvector.

    Parameters
    ----------
    matrix : array_like, shape (n, n)
        Real symmetric matrix.  With ``kind="tridiagonal"`` only the main and
        first off-diagonal are read (anything else must be zero).
    kind : {"dense", "tridiagonal"}
    tol : float
        Residual tolerance: ``||M v - lambda v|| <= tol * max(1, ||M||)``.

    Returns
    -------
    EigenPair
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValidationError("matrix must be square with dimension >= 1")
    if kind not in ("dense", "tridiagonal"):
        raise ValidationError(f"unknown matrix kind {kind!r}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > 1e-12 * scale:
        raise ValidationError("matrix is not symmetric")
    m = 0.5 * (m + m.T)
    n = m.shape[0]
    mnorm = max(1.0, float(np.linalg.norm(m, 2))) if n <= 512 else scale * n

    if kind == "tridiagonal":
        band = np.triu(m, 2)
        if np.any(np.abs(band) > 1e-12 * scale):
            raise ValidationError("matrix is not tridiagonal")
        pair = tridiagonal_max_eigpair(np.diag(m), np.diag(m, 1), tol, max_iter)
        vec = pair.vector
    else:
        d, e, refl = householder_tridiagonalize(m)
        pair = tridiagonal_max_eigpair(d, e, tol, max_iter)
        vec = _orient(_apply_reflectors(refl, pair.vector))

    res = float(np.linalg.norm(m @ vec - pair.value * vec))
    if res > tol * mnorm:
        raise ConvergenceError(
            f"eigenpair residual {res:.3g} exceeds {tol:g}*||M||", iterations=pair.iterations
        )
    return EigenPair(pair.value, vec, res, pair.iterations)
