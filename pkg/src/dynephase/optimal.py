"""Optimal states for phase variance and for M-ary phase-shift keying.

Both problems reduce to the top eigenpair of a real symmetric matrix built
from ``H``:

* Holevo variance.  ``mu = psi^T J psi`` with ``J`` tridiagonal, zero
  diagonal and ``J_{n+1,n} = H_{n+1,n} / 2``, so the best state with at most
  ``N`` photons has ``V_min = lambda_max(J)^-2 - 1``.
* M-ary error.  Decoding a result within ``pi/M`` of the sent phase is the
  operator ``F_C`` with entries ``sin(pi (m-n)/M) / (pi (m-n)) H_mn``;
  ``E = 1 - <psi|F_C|psi>`` and ``E_min = 1 - lambda_max(F_C)``.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _dd
from .errors import IntegrityError, ValidationError
from .numerics import EigenPair, sym_max_eigpair, tridiagonal_max_eigpair
from .phasestats import _amplitudes, _check_dims, holevo_variance
from .pom import HMatrix
from .states import NumberStateVector

ERROR_TOLERANCE = 1e-9
EIGEN_CEILING = 1.0 + 1e-8

__all__ = [
    "TridiagonalJ",
    "ErrorOperatorFC",
    "OptimalState",
    "build_j",
    "optimal_mu",
    "optimal_variance_state",
    "build_fc",
    "error_probability",
    "min_error_state",
]


def _check_truncation(H, N):
    if not isinstance(H, HMatrix):
        raise ValidationError("H must be an HMatrix")
    N = int(N)
    if N < 0:
        raise ValidationError("N must be non-negative")
    if N > H.dim:
        raise ValidationError(f"N={N} exceeds H dimension {H.dim}")
    return N


@dataclass(frozen=True, eq=False)
class TridiagonalJ:
    """``J`` of dimension ``N+1``: zero diagonal, ``offdiag[n] = H_{n+1,n}/2``."""

    offdiag: np.ndarray

    @property
    def dim(self):
        return self.offdiag.shape[0] + 1

    def dense(self):
        return np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


class OptimalState(NamedTuple):
    value: float
    state: NumberStateVector


def build_j(H, N):
    N = _check_truncation(H, N)
    return TridiagonalJ(0.5 * np.diagonal(H.entries, 1)[:N].copy())


def optimal_mu(H, N, tol=1e-12):
    """Largest achievable ``mu`` with at most ``N`` photons, as an ``EigenPair``."""
    j = build_j(H, N)
    if j.dim == 1:
        return EigenPair(0.0, np.ones(1))
    return tridiagonal_max_eigpair(np.zeros(j.dim), j.offdiag, tol)


def optimal_variance_state(H, N, tol=1e-12):
    """Minimum Holevo variance over states with at most ``N`` photons.

    Returns
    -------
    OptimalState
        ``(value, state)`` with ``value = lambda_max^-2 - 1`` (``inf`` for
        ``N = 0``) and the maximising state (non-negative amplitudes).
    """
    pair = optimal_mu(H, N, tol)
    vec = pair.vector
    # Perron-Frobenius: the top eigenvector of J is non-negative.
    vec = np.where(np.abs(vec) < 1e-300, 0.0, vec)
    state = NumberStateVector.normalized(vec, 0.0, f"optimal-variance({H.scheme},N={N})")
    return OptimalState(holevo_variance(pair.value), state)


@dataclass(frozen=True, eq=False)
class ErrorOperatorFC:
    """Correct-decision operator for M-ary phase-shift keying."""

    M: int
    entries: np.ndarray

    @property
    def dim(self):
        return self.entries.shape[0] - 1


def _sinc_weights(M, size):
    d = np.subtract.outer(np.arange(size), np.arange(size))
    # reduce the sine argument exactly: sin(pi d / M) depends on d mod 2M
    r = np.mod(d, 2 * M).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.sin(math.pi * r / M) / (math.pi * d)
    np.fill_diagonal(w, 1.0 / M)
    return w


def build_fc(H, M, dim=None):
    """``F_C`` with entries ``sin(pi (m-n)/M)/(pi (m-n)) H_mn`` and diagonal ``1/M``."""
    if not isinstance(H, HMatrix):
        raise ValidationError("H must be an HMatrix")
    M = int(M)
    if M < 2:
        raise ValidationError("M must be >= 2")
    dim = H.dim if dim is None else _check_truncation(H, dim)
    h = H.entries[: dim + 1, : dim + 1]
    fc = _sinc_weights(M, dim + 1) * h
    np.fill_diagonal(fc, 1.0 / M)
    # zeros where sin(pi d / M) vanishes analytically
    d = np.subtract.outer(np.arange(dim + 1), np.arange(dim + 1))
    fc[(d % M == 0) & (d != 0)] = 0.0
    fc = 0.5 * (fc + fc.T)
    fc.setflags(write=False)
    return ErrorOperatorFC(M, fc)


def _quadratic_terms(fc, c):
    """Error-free pieces whose exact sum is ``<c|F|c>``.

    Each ``c_m c_n F_mn`` is split with two-product transformations, so the
    only rounding left is in the entries of ``F`` (and in ``Re c_m^* c_n`` for
    complex states).  Summing these together with the leading ``1`` of
    ``E = 1 - <c|F|c>`` keeps ``E`` meaningful far below ``ulp(1)``.
    """
    n = c.shape[0]
    f = fc[:n, :n]
    if np.iscomplexobj(c):
        # F is real symmetric, so only Re(c_m^* c_n) contributes
        a = (np.conj(c)[:, None] * c[None, :]).real
        return _exact_products(a, f)
    a, a_err = _dd.vtwo_prod(c[:, None], c[None, :])
    return np.concatenate([_exact_products(a, f), (a_err * f).ravel()])


def _exact_products(a, f):
    p, e = _dd.vtwo_prod(a, f)
    return np.concatenate([p.ravel(), e.ravel()])


def error_probability(H, M, state):
    """Probability of mis-decoding an M-ary symbol carried by ``state``.

    ``E = 1 - <psi|F_C|psi>``.  Values in ``[-1e-9, 0)`` are set to zero.
    """
    _check_dims(H, state)
    c = np.asarray(_amplitudes(state))
    fc = build_fc(H, M, dim=c.shape[0] - 1)
    e = math.fsum([1.0] + (-_quadratic_terms(fc.entries, c)).tolist())
    if e < -ERROR_TOLERANCE or e > 1.0 + ERROR_TOLERANCE:
        raise IntegrityError(f"error probability {e!r} outside [0, 1]")
    return min(max(e, 0.0), 1.0)


def min_error_state(H, M, N, tol=1e-12):
    """Minimum M-ary error over states with at most ``N`` photons.

    The top eigenvector of the truncated ``F_C`` is the optimal state; the
    returned error is its Rayleigh quotient evaluated by
    :func:`error_probability`, which is accurate even when ``E_min`` is many
    orders of magnitude below one.

    Raises
    ------
    IntegrityError
        If ``lambda_max(F_C)`` exceeds ``1 + 1e-8`` (the truncated operator
        would not be a valid effect).
    """
    N = _check_truncation(H, N)
    fc = build_fc(H, M, dim=N)
    pair = sym_max_eigpair(fc.entries, kind="dense", tol=tol)
    if pair.value > EIGEN_CEILING:
        raise IntegrityError(f"lambda_max(F_C) = {pair.value!r} exceeds one")
    state = NumberStateVector.normalized(pair.vector, 0.0, f"min-error({H.scheme},M={M},N={N})")
    return OptimalState(error_probability(H, M, state), state)
