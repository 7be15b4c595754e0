"""H matrices of covariant phase measurements, and squeezed-state helpers.

A phase-shift-covariant, unbiased phase POM is fixed by a real symmetric
matrix ``H`` with unit diagonal,

    F(phi) = (1/2pi) sum_{m,n} H_mn e^{i phi (m-n)} |m><n| .

Four schemes are provided:

``canonical``
    ``H_mn = 1``.
``heterodyne``
    ``H_mn = Gamma((m+n)/2 + 1) / sqrt(m! n!)``.
``mark1``
    Adaptive dyne detection with estimate ``phi_hat``:
    ``H_mn = sum_pq gamma_mp gamma_nq M[p, q]``.
``mark2``
    Adaptive dyne detection with estimate ``phi_hat + arg(1 + C)``; the
    non-polynomial factor ``((1+C)/(1+C*))^{(n-m)/2}`` is expanded in a
    double binomial series with ``series_terms`` terms per factor.

The adaptive matrices are accumulated in double-double arithmetic.  The
mark II terms reach ~1e11 in magnitude for ``|m - n| ~ 100`` while the
entries are O(0.1), so plain double precision loses several digits.
"""

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from . import _dd
from ._accel import jit, numba, resolve
from .errors import ConvergenceError, DomainError, IntegrityError, ValidationError
from .moments import MomentTable, cached_moment_table, clear_moment_cache
from .numerics import SignedLogValue

SCHEMES = ("canonical", "heterodyne", "mark1", "mark2")
SCHEME_ALIASES = {
    "can": "canonical",
    "canonical": "canonical",
    "het": "heterodyne",
    "heterodyne": "heterodyne",
    "mark1": "mark1",
    "markI": "mark1",
    "I": "mark1",
    "mark2": "mark2",
    "markII": "mark2",
    "II": "mark2",
}

DEFAULT_SERIES_TERMS = 100
TAIL_TOLERANCE = 1e-9
DIAGONAL_TOLERANCE = 1e-8

# 50 digits of pi for the exact heterodyne entries
_PI = Decimal("3.14159265358979323846264338327950288419716939937510")

__all__ = [
    "SCHEMES",
    "HMatrix",
    "canonical_scheme",
    "h_canonical",
    "h_heterodyne",
    "gamma_coeff",
    "h_mark1",
    "h_mark2",
    "default_series_terms",
    "build_h",
    "clear_caches",
    "SqueezedParams",
    "squeezed_params",
    "coherent_weight",
    "squeezed_overlap",
]


def canonical_scheme(name):
    """Normalise a scheme name (accepts short aliases such as ``het``)."""
    try:
        return SCHEME_ALIASES[str(name)]
    except KeyError:
        raise ValidationError(f"unknown scheme {name!r}; expected one of {SCHEMES}") from None


@dataclass(frozen=True, eq=False)
class HMatrix:
    """Real symmetric ``(dim+1) x (dim+1)`` matrix with unit diagonal.

    Attributes
    ----------
    scheme : str
    entries : ndarray
        Read-only matrix, indices ``0..dim``.
    meta : dict
        Construction diagnostics (e.g. ``diag_deviation`` before clamping,
        ``series_terms`` and ``tail_estimate`` for mark II).
    """

    scheme: str
    entries: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValidationError("H matrix must be square")
        if not np.array_equal(e, e.T):
            raise ValidationError("H matrix must be symmetric")
        if np.any(np.diag(e) != 1.0):
            raise ValidationError("H matrix diagonal must be exactly one")
        if e.size and (e.min() < 0.0 or e.max() > 1.0 + DIAGONAL_TOLERANCE):
            raise IntegrityError("H matrix entries must lie in [0, 1]")
        if e.flags.writeable:
            e = e.copy()
            e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def dim(self):
        """Largest photon-number index represented."""
        return self.entries.shape[0] - 1

    def h(self, n=None):
        """Sub-diagonal deficit ``h(n) = 1 - H_{n,n+1}`` (all ``n`` if omitted)."""
        sub = 1.0 - np.diag(self.entries, 1)
        return sub if n is None else float(sub[n])

    def truncated(self, dim):
        """Leading ``(dim+1) x (dim+1)`` block (entries do not depend on ``dim``)."""
        if dim > self.dim:
            raise ValidationError(f"cannot truncate H of dim {self.dim} to {dim}")
        if dim == self.dim:
            return self
        return HMatrix(self.scheme, self.entries[: dim + 1, : dim + 1], dict(self.meta))

    def to_csv(self):
        buf = io.StringIO()
        buf.write(f"# scheme={self.scheme} dim={self.dim}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["m"] + [f"n{n}" for n in range(self.dim + 1)])
        for m, row in enumerate(self.entries):
            writer.writerow([m] + ["%.17g" % x for x in row])
        return buf.getvalue()

    def to_json(self):
        return json.dumps(
            {
                "scheme": self.scheme,
                "dim": int(self.dim),
                "entries": [[float("%.17g" % x) for x in row] for row in self.entries],
            }
        )

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        ent = np.asarray(data["entries"], dtype=float)
        if ent.shape != (data["dim"] + 1, data["dim"] + 1):
            raise ValidationError("dim does not match entries")
        return cls(canonical_scheme(data["scheme"]), ent)


def _finalize(scheme, raw, meta):
    """Validate the diagonal, clamp it to one and wrap."""
    raw = np.array(raw, dtype=float)
    dev = float(np.max(np.abs(np.diag(raw) - 1.0))) if raw.size else 0.0
    if dev > DIAGONAL_TOLERANCE:
        raise IntegrityError(f"{scheme}: |H_nn - 1| = {dev:.3g} exceeds {DIAGONAL_TOLERANCE:g}")
    np.fill_diagonal(raw, 1.0)
    raw = 0.5 * (raw + raw.T)
    np.clip(raw, 0.0, None, out=raw)
    meta = dict(meta)
    meta["diag_deviation"] = dev
    return HMatrix(scheme, raw, meta)


def _check_dim(dim):
    dim = int(dim)
    if dim < 0:
        raise ValidationError("dim must be non-negative")
    return dim


# -- canonical and heterodyne --------------------------------------------------------

def h_canonical(dim):
    """All-ones H matrix of the ideal (canonical) phase measurement."""
    dim = _check_dim(dim)
    return HMatrix("canonical", np.ones((dim + 1, dim + 1)), {"diag_deviation": 0.0})


def _heterodyne_exact(dim):
    # H_mn^2 is rational (m+n even) or pi times a rational (m+n odd), so the
    # entries can be formed from integers and one correctly rounded sqrt.
    fact = [math.factorial(i) for i in range(2 * dim + 3)]
    h = np.ones((dim + 1, dim + 1))
    with localcontext() as ctx:
        ctx.prec = 40
        for m in range(dim + 1):
            for n in range(m + 1, dim + 1):
                if (m + n) % 2 == 0:
                    s = (m + n) // 2
                    sq = Decimal(fact[s] ** 2) / Decimal(fact[m] * fact[n])
                else:
                    j = (m + n + 1) // 2  # Gamma(j + 1/2) = (2j)! sqrt(pi) / (4^j j!)
                    num = fact[2 * j] ** 2
                    den = 16**j * fact[j] ** 2 * fact[m] * fact[n]
                    sq = Decimal(num) / Decimal(den) * _PI
                h[m, n] = h[n, m] = float(sq.sqrt())
    return h


def _heterodyne_lngamma(dim):
    n = np.arange(dim + 1, dtype=float)
    lg = gammaln(n + 1.0)
    s = 0.5 * (n[:, None] + n[None, :]) + 1.0
    return np.exp(gammaln(s) - 0.5 * lg[:, None] - 0.5 * lg[None, :])


def h_heterodyne(dim, method="exact"):
    """Heterodyne H matrix ``Gamma((m+n)/2+1)/sqrt(m! n!)``.

    Parameters
    ----------
    dim : int
    method : {"exact", "lngamma"}
        ``exact`` forms each squared entry from integers (and pi) and takes
        one high-precision square root: entries are correctly rounded.
        ``lngamma`` exponentiates log-gamma differences; its relative error
        grows to ~1e-13 near ``n = 150``.
    """
    dim = _check_dim(dim)
    if method == "exact":
        raw = _heterodyne_exact(dim)
    elif method == "lngamma":
        raw = _heterodyne_lngamma(dim)
    else:
        raise ValidationError(f"unknown heterodyne method {method!r}")
    return _finalize("heterodyne", raw, {"method": method})


# -- adaptive schemes ----------------------------------------------------------------

def _gamma_int(m, p):
    """Integer ``m! / ((m-2p)! p! 2^p)``, i.e. ``gamma_mp * sqrt(m!)``."""
    return math.factorial(m) // (math.factorial(m - 2 * p) * math.factorial(p) * 2**p)


def gamma_coeff(m, p):
    """Expansion coefficient ``gamma_mp = sqrt(m!) / (2^p (m-2p)! p!)`` in log form."""
    m, p = int(m), int(p)
    if p < 0 or 2 * p > m:
        raise DomainError(f"gamma_coeff requires 0 <= 2p <= m, got m={m}, p={p}")
    log_mag = 0.5 * math.lgamma(m + 1) - p * math.log(2.0) - math.lgamma(m - 2 * p + 1) - math.lgamma(p + 1)
    return SignedLogValue(log_mag, 1)


@lru_cache(maxsize=8)
def _gamma_table_dd(dim):
    """Double-double ``gamma_mp`` for ``0 <= m <= dim``, ``0 <= p <= dim//2``."""
    width = dim // 2 + 1
    hi = np.zeros((dim + 1, width))
    lo = np.zeros((dim + 1, width))
    with localcontext() as ctx:
        ctx.prec = 50
        for m in range(dim + 1):
            root = Decimal(math.factorial(m)).sqrt()
            for p in range(m // 2 + 1):
                g = Decimal(_gamma_int(m, p)) / root
                h = float(g)
                hi[m, p] = h
                lo[m, p] = float(g - Decimal(h))
    hi.setflags(write=False)
    lo.setflags(write=False)
    return hi, lo


@jit
def _binomial_series_dd(x, count):
    """Double-double ``binom(x, a)`` for ``a < count`` by the product recurrence."""
    hi = np.zeros(count)
    lo = np.zeros(count)
    if count > 0:
        hi[0] = 1.0
    for a in range(1, count):
        th, tl = _dd.dd_mul_d(hi[a - 1], lo[a - 1], x - a + 1.0)
        hi[a], lo[a] = _dd.dd_div_d(th, tl, float(a))
    return hi, lo


@jit
def _convolve_dd(gh, gl, ng, ch, cl, nc):
    out_h = np.zeros(ng + nc - 1)
    out_l = np.zeros(ng + nc - 1)
    for p in range(ng):
        for a in range(nc):
            th, tl = _dd.dd_mul(gh[p], gl[p], ch[a], cl[a])
            out_h[p + a], out_l[p + a] = _dd.dd_add(out_h[p + a], out_l[p + a], th, tl)
    return out_h, out_l


@jit
def _bilinear_dd(uh, ul, mh, ml, wh, wl):
    sh = 0.0
    sl = 0.0
    for i in range(uh.shape[0]):
        rh = 0.0
        rl = 0.0
        for j in range(wh.shape[0]):
            th, tl = _dd.dd_mul(mh[i, j], ml[i, j], wh[j], wl[j])
            rh, rl = _dd.dd_add(rh, rl, th, tl)
        th, tl = _dd.dd_mul(uh[i], ul[i], rh, rl)
        sh, sl = _dd.dd_add(sh, sl, th, tl)
    return sh + sl


def _adaptive_kernel_py(dim, terms, check_terms, gh, gl, mh, ml):
    """Upper triangle of the adaptive H matrix plus the partial-sum tail estimate.

    For each ``k = n - m >= 0`` the row vectors ``u = gamma_m * binom(k/2, .)``
    and ``w = gamma_n * binom(-k/2, .)`` are formed by convolution and
    contracted against the moment table: ``H_mn = u^T M w``.  When
    ``check_terms > 0`` the same contraction is repeated with the shorter
    series so that ``|H(terms) - H(check_terms)|`` estimates the truncation
    error.
    """
    h = np.zeros((dim + 1, dim + 1))
    tail = np.zeros((dim + 1, dim + 1))
    for k in prange(dim + 1):
        ch, cl = _binomial_series_dd(0.5 * k, terms)
        dh, dl = _binomial_series_dd(-0.5 * k, terms)
        for m in range(dim + 1 - k):
            n = m + k
            uh, ul = _convolve_dd(gh[m], gl[m], m // 2 + 1, ch, cl, terms)
            wh, wl = _convolve_dd(gh[n], gl[n], n // 2 + 1, dh, dl, terms)
            val = _bilinear_dd(uh, ul, mh, ml, wh, wl)
            h[m, n] = val
            if check_terms > 0:
                uh, ul = _convolve_dd(gh[m], gl[m], m // 2 + 1, ch, cl, check_terms)
                wh, wl = _convolve_dd(gh[n], gl[n], n // 2 + 1, dh, dl, check_terms)
                tail[m, n] = abs(val - _bilinear_dd(uh, ul, mh, ml, wh, wl))
    return h, tail


if numba is not None:
    prange = numba.prange
    _adaptive_kernel_nb = numba.njit(parallel=True, cache=True)(_adaptive_kernel_py)
else:  # pragma: no cover
    prange = range
    _adaptive_kernel_nb = None


def _vconvolve(g_hi, g_lo, c_hi, c_lo):
    """Batched double-double convolution; ``g`` has shape (rows, P)."""
    rows, width = g_hi.shape
    nc = c_hi.shape[0]
    out_h = np.zeros((rows, width + nc - 1))
    out_l = np.zeros_like(out_h)
    for p in range(width):
        th, tl = _dd.vdd_mul(g_hi[:, p : p + 1], g_lo[:, p : p + 1], c_hi[None, :], c_lo[None, :])
        sh, sl = _dd.vdd_add(out_h[:, p : p + nc], out_l[:, p : p + nc], th, tl)
        out_h[:, p : p + nc] = sh
        out_l[:, p : p + nc] = sl
    return out_h, out_l


def _vbilinear(uh, ul, mh, ml, wh, wl):
    """Batched ``u_r^T M w_r`` in double-double; returns doubles, shape (rows,)."""
    lu, lw = uh.shape[1], wh.shape[1]
    mh = mh[:lu, :lw]
    ml = ml[:lu, :lw]
    th, tl = _dd.vdd_mul(mh[None, :, :], ml[None, :, :], wh[:, None, :], wl[:, None, :])
    rh, rl = _dd.vdd_sum(th, tl, axis=-1)
    th, tl = _dd.vdd_mul(uh, ul, rh, rl)
    sh, sl = _dd.vdd_sum(th, tl, axis=-1)
    return sh + sl


def _adaptive_kernel_np(dim, terms, check_terms, gh, gl, mh, ml, chunk=16):
    h = np.zeros((dim + 1, dim + 1))
    tail = np.zeros((dim + 1, dim + 1))
    for k in range(dim + 1):
        ch, cl = _binomial_series_dd(0.5 * k, terms)
        dh, dl = _binomial_series_dd(-0.5 * k, terms)
        for start in range(0, dim + 1 - k, chunk):
            ms = np.arange(start, min(start + chunk, dim + 1 - k))
            ns = ms + k
            uh, ul = _vconvolve(gh[ms], gl[ms], ch, cl)
            wh, wl = _vconvolve(gh[ns], gl[ns], dh, dl)
            vals = _vbilinear(uh, ul, mh, ml, wh, wl)
            h[ms, ns] = vals
            if check_terms > 0:
                uh, ul = _vconvolve(gh[ms], gl[ms], ch[:check_terms], cl[:check_terms])
                wh, wl = _vconvolve(gh[ns], gl[ns], dh[:check_terms], dl[:check_terms])
                tail[ms, ns] = np.abs(vals - _vbilinear(uh, ul, mh, ml, wh, wl))
    return h, tail


def _adaptive_matrix(dim, terms, check_terms, moments, use_numba):
    need = dim // 2 + terms - 1
    if moments is None:
        moments = cached_moment_table(need)
    if not isinstance(moments, MomentTable):
        raise ValidationError("moments must be a MomentTable")
    if moments.max_order < need:
        raise ValidationError(
            f"moment table of order {moments.max_order} too small; need {need} "
            f"for dim={dim} with {terms} series terms"
        )
    gh, gl = _gamma_table_dd(dim)
    mh, ml = moments.values, moments.residual
    if resolve(use_numba):
        upper, tail = _adaptive_kernel_nb(dim, terms, check_terms, gh, gl, mh, ml)
    else:
        upper, tail = _adaptive_kernel_np(dim, terms, check_terms, gh, gl, mh, ml)
    full = np.triu(upper) + np.triu(upper, 1).T
    return full, tail


def _psd_floor(raw, scheme):
    """Smallest eigenvalue; warn if the matrix is measurably indefinite."""
    lam = float(np.linalg.eigvalsh(raw)[0]) if raw.shape[0] > 1 else 1.0
    if lam < -DIAGONAL_TOLERANCE:
        warnings.warn(f"{scheme} H matrix has eigenvalue {lam:.3g} < 0", RuntimeWarning, stacklevel=3)
    return lam


def h_mark1(dim, moments=None, use_numba=None):
    """Adaptive mark I H matrix ``sum_pq gamma_mp gamma_nq M[p, q]``.

    Parameters
    ----------
    dim : int
    moments : MomentTable, optional
        Must cover order ``dim // 2``; a shared table is used if omitted.
    use_numba : bool, optional
        Override the backend chosen by ``DYNEPHASE_NUMBA``.
    """
    dim = _check_dim(dim)
    raw, _ = _adaptive_matrix(dim, 1, 0, moments, use_numba)
    meta = {"min_eigenvalue": _psd_floor(raw, "mark1")}
    return _finalize("mark1", raw, meta)


def default_series_terms(dim):
    """Series length per binomial factor for the mark II matrix.

    100 terms suffice up to ``dim = 133``; beyond that the ``(1+C)^{k/2}``
    factor for large ``k`` needs more, and ``0.75 * dim`` keeps the
    partial-sum tail estimate below 1e-9 (checked to ``dim = 200``).
    """
    return max(DEFAULT_SERIES_TERMS, int(math.ceil(0.75 * dim)))


def h_mark2(dim, moments=None, series_terms=None, check_tail=True, use_numba=None):
    """Adaptive mark II H matrix via a truncated double binomial series.

    Parameters
    ----------
    dim : int
    moments : MomentTable, optional
        Must cover order ``dim // 2 + series_terms - 1``.
    series_terms : int, optional
        Terms per binomial factor; default :func:`default_series_terms`.
    check_tail : bool
        Estimate the truncation error as ``|H(S) - H(ceil(0.8 S))|`` and
        raise ``ConvergenceError`` when it exceeds 1e-9.

    Notes
    -----
    Every term of the expansion is real (the moment table is real and
    symmetric), so the matrix is real by construction; only ``m <= n`` is
    computed and then mirrored.  With ``series_terms=1`` the expansion
    collapses to the mark I matrix.
    """
    dim = _check_dim(dim)
    terms = default_series_terms(dim) if series_terms is None else int(series_terms)
    if terms < 1:
        raise ValidationError("series_terms must be >= 1")
    check = 0
    if check_tail:
        check = min(terms - 1, int(math.ceil(0.8 * terms)))
        if check < 1:
            raise ValidationError("tail check needs series_terms >= 2 (or check_tail=False)")
    raw, tail = _adaptive_matrix(dim, terms, check, moments, use_numba)
    bound = float(tail.max()) if check_tail and tail.size else 0.0
    if check_tail and not bound <= TAIL_TOLERANCE:
        i, j = np.unravel_index(int(np.argmax(tail)), tail.shape)
        raise ConvergenceError(
            f"mark II series tail estimate {bound:.3g} at H[{i},{j}] exceeds {TAIL_TOLERANCE:g} "
            f"with {terms} terms; increase series_terms",
            iterations=terms,
            bound=bound,
        )
    meta = {
        "series_terms": terms,
        "tail_estimate": bound if check_tail else None,
        "imag_residue": 0.0,
        "min_eigenvalue": _psd_floor(raw, "mark2"),
    }
    return _finalize("mark2", raw, meta)


_H_CACHE = {}


def build_h(scheme, dim, series_terms=None, moments=None):
    """Build (or fetch from a per-process cache) the H matrix of ``scheme``.

    Matrices are immutable and their entries do not depend on ``dim``, so
    a cached larger matrix is sliced when possible.
    """
    scheme = canonical_scheme(scheme)
    dim = _check_dim(dim)
    if scheme == "canonical":
        return h_canonical(dim)
    key = (scheme, series_terms if scheme == "mark2" else None)
    cached = _H_CACHE.get(key)
    if cached is not None and cached.dim >= dim and moments is None:
        return cached.truncated(dim)
    if scheme == "heterodyne":
        h = h_heterodyne(dim)
    elif scheme == "mark1":
        h = h_mark1(dim, moments)
    else:
        h = h_mark2(dim, moments, series_terms)
    if moments is None:
        _H_CACHE[key] = h
    return h


def clear_caches():
    """Drop cached H matrices, moment tables and expansion coefficients."""
    _H_CACHE.clear()
    _gamma_table_dd.cache_clear()
    clear_moment_cache()


# -- squeezed-state map and weights -------------------------------------------------

@dataclass(frozen=True)
class SqueezedParams:
    """Coherent amplitude ``alpha`` and squeezing parameter ``epsilon``."""

    alpha: complex
    epsilon: complex


def squeezed_params(A, B):
    """Map dyne statistics ``(A, B)`` to the squeezed state ``|alpha, epsilon>``.

    ``alpha = (A + B A*) / (1 - |B|^2)`` and
    ``epsilon = -B atanh|B| / |B|`` (``epsilon -> -B`` as ``B -> 0``).
    """
    A = complex(A)
    B = complex(B)
    r = abs(B)
    if not r < 1.0:
        raise DomainError("squeezed_params requires |B| < 1")
    alpha = (A + B * A.conjugate()) / (1.0 - r * r)
    if r == 0.0:
        eps = 0j
    elif r < 1e-8:
        eps = -B * (1.0 + r * r / 3.0)
    else:
        eps = -B * math.atanh(r) / r
    return SqueezedParams(alpha, eps)


def coherent_weight(beta, phi_hat, C):
    """Likelihood ratio ``|<beta|psi~>|^2`` of a coherent input for outcome ``(phi_hat, C)``.

    ``exp(-beta^2 + Re[e^{2i phi_hat} C beta^2 + 2 e^{i phi_hat} beta])``.
    Accepts numpy arrays for ``phi_hat`` and ``C``.
    """
    return np.exp(log_coherent_weight(beta, phi_hat, C))


def log_coherent_weight(beta, phi_hat, C):
    beta = float(beta)
    z = np.exp(1j * np.asarray(phi_hat, dtype=float))
    val = -beta * beta + np.real(z * z * np.asarray(C) * beta * beta + 2.0 * z * beta)
    return val if np.ndim(val) else float(val)


def squeezed_overlap(beta, alpha, epsilon):
    """``|<beta|alpha, epsilon>|^2`` for real parameters.

    ``exp[-(1 + tanh epsilon)(beta - alpha)^2] / cosh epsilon``.
    """
    beta, alpha, epsilon = float(beta), float(alpha), float(epsilon)
    return math.exp(-(1.0 + math.tanh(epsilon)) * (beta - alpha) ** 2) / math.cosh(epsilon)
