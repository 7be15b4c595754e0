"""Measured phase distributions and their circular statistics.

For a pure state with number amplitudes ``c_n`` the probability density of
a result ``phi`` under the POM with matrix ``H`` is

    P(phi) = (1/2pi) sum_{m,n} c_n c_m^* H_mn e^{i phi (m - n)}
           = (1/2pi) [s_0 + 2 Re sum_{d>=1} s_d e^{i phi d}],

    s_d = sum_n c_n c_{n+d}^* H_{n+d,n}.

The Fourier coefficients ``s_d`` are kept with the distribution so that
point values, interval probabilities and moments are available exactly,
not only on the grid.  ``s_1`` is the first circular moment ``mu``.
"""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDistributionError, IntegrityError, ValidationError
from .pom import HMatrix, h_canonical
from .states import NumberStateVector, RotatedState, photon_number_variance

DEFAULT_GRID = 4096
NEGATIVE_TOLERANCE = 1e-10
HOLEVO_SLACK = 1e-9

__all__ = [
    "PhaseDistribution",
    "CircularStats",
    "fourier_coefficients",
    "phase_distribution",
    "mu_from_H",
    "holevo_variance",
    "circular_stats",
    "excess_variance",
    "holevo_inequality_check",
    "tail_ratio",
]


def _amplitudes(state):
    if isinstance(state, (NumberStateVector, RotatedState)):
        return state.amplitudes
    raise ValidationError("state must be a NumberStateVector or RotatedState")


def _check_dims(H, state):
    if not isinstance(H, HMatrix):
        raise ValidationError("H must be an HMatrix")
    _amplitudes(state)
    if state.truncation > H.dim:
        raise ValidationError(
            f"state truncation {state.truncation} exceeds H dimension {H.dim}"
        )


def fourier_coefficients(H, state):
    """Coefficients ``s_d``, ``d = 0..N``, of the measured phase distribution."""
    _check_dims(H, state)
    c = np.asarray(_amplitudes(state))
    n = c.shape[0]
    h = H.entries[:n, :n]
    s = np.empty(n, dtype=complex)
    for d in range(n):
        s[d] = np.sum(c[: n - d] * np.conj(c[d:]) * np.diagonal(h, d))
    if not np.iscomplexobj(c):
        s = s.real.astype(complex)
    return s


@dataclass(frozen=True, eq=False)
class PhaseDistribution:
    """Phase density on a uniform grid over ``[0, 2pi)``.

    Attributes
    ----------
    grid : ndarray
        ``phi_k = 2 pi k / G``.
    density : ndarray
        ``P(phi_k)``, non-negative.
    coefficients : ndarray or None
        Fourier coefficients ``s_d`` when the distribution is exact; ``None``
        for empirical (histogram) distributions.
    """

    grid: np.ndarray
    density: np.ndarray
    coefficients: np.ndarray = None
    label: str = ""

    @property
    def spacing(self):
        return 2.0 * math.pi / self.grid.shape[0]

    def integral(self):
        """Periodic trapezoid rule over one period."""
        return float(self.spacing * math.fsum(self.density))

    def density_at(self, phi):
        """Exact density at arbitrary ``phi`` (needs coefficients)."""
        if self.coefficients is None:
            raise ValidationError("density_at needs an exact distribution")
        phi = np.asarray(phi, dtype=float)
        d = np.arange(1, self.coefficients.shape[0])
        series = np.exp(1j * np.multiply.outer(phi, d)) @ self.coefficients[1:]
        return (self.coefficients[0].real + 2.0 * series.real) / (2.0 * math.pi)

    def interval_probability(self, a, b):
        """Exact ``int_a^b P(phi) dphi`` (needs coefficients)."""
        if self.coefficients is None:
            raise ValidationError("interval_probability needs an exact distribution")
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        s = self.coefficients
        d = np.arange(1, s.shape[0])
        prim = (np.exp(1j * np.multiply.outer(b, d)) - np.exp(1j * np.multiply.outer(a, d))) / (1j * d)
        return (s[0].real * (b - a) + 2.0 * (prim @ s[1:]).real) / (2.0 * math.pi)

    def bin_probabilities(self, bins):
        """Exact probabilities of ``bins`` equal sectors of ``[0, 2pi)``."""
        edges = np.linspace(0.0, 2.0 * math.pi, bins + 1)
        return self.interval_probability(edges[:-1], edges[1:])

    def value_at(self, phi):
        """Linear interpolation of the grid density at ``phi`` (periodic)."""
        g = self.grid.shape[0]
        x = (float(phi) % (2.0 * math.pi)) / self.spacing
        k = int(math.floor(x))
        t = x - k
        p0 = self.density[k % g]
        p1 = self.density[(k + 1) % g]
        return float(p0 if t == 0.0 else (1.0 - t) * p0 + t * p1)

    def to_csv(self, log10=True):
        """Columns ``phi, P`` and optionally ``log10_P``."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["phi", "P"] + (["log10_P"] if log10 else [])
        writer.writerow(header)
        with np.errstate(divide="ignore"):
            logs = np.log10(self.density)
        for phi, p, lp in zip(self.grid, self.density, logs):
            row = ["%.17g" % phi, "%.17g" % p]
            if log10:
                row.append("%.17g" % lp if np.isfinite(lp) else "-inf")
            writer.writerow(row)
        return buf.getvalue()


def _evaluate_grid(s, grid_points):
    g = int(grid_points)
    folded = np.zeros(g, dtype=complex)
    np.add.at(folded, np.arange(1, s.shape[0]) % g, s[1:])
    # sum_d s_d e^{2 pi i k d / G} = G * ifft(s)_k
    series = g * np.fft.ifft(folded)
    return (s[0].real + 2.0 * series.real) / (2.0 * math.pi)


def phase_distribution(H, state, grid_points=DEFAULT_GRID):
    """Measured phase density of ``state`` under the POM ``H``.

    Parameters
    ----------
    H : HMatrix
    state : NumberStateVector or RotatedState
        Truncation must not exceed ``H.dim``.
    grid_points : int
        Uniform grid size on ``[0, 2pi)``.

    Raises
    ------
    IntegrityError
        If the density dips below ``-1e-10`` anywhere on the grid (a sign of a
        non-positive H matrix); smaller negative values are rounding and are
        set to zero.
    """
    grid_points = int(grid_points)
    if grid_points < 2:
        raise ValidationError("grid_points must be >= 2")
    s = fourier_coefficients(H, state)
    dens = _evaluate_grid(s, grid_points)
    low = float(dens.min())
    if low < -NEGATIVE_TOLERANCE:
        raise IntegrityError(f"phase density {low:.3g} < 0 for scheme {H.scheme}")
    dens = np.where(dens < 0.0, 0.0, dens)
    grid = 2.0 * math.pi * np.arange(grid_points) / grid_points
    dens.setflags(write=False)
    grid.setflags(write=False)
    return PhaseDistribution(grid, dens, s, H.scheme)


def mu_from_H(H, state):
    """First circular moment ``mu = sum_n c_{n+1} c_n^* H_{n+1,n}``.

    Real and non-negative for real-amplitude states.
    """
    _check_dims(H, state)
    c = np.asarray(_amplitudes(state))
    if c.shape[0] < 2:
        return 0j
    sub = np.diagonal(H.entries, 1)[: c.shape[0] - 1]
    terms = c[1:] * np.conj(c[:-1]) * sub
    return complex(math.fsum(terms.real), math.fsum(np.imag(terms)))


def holevo_variance(mu):
    """Holevo phase variance ``|mu|^-2 - 1``; ``inf`` when ``mu == 0``."""
    r2 = abs(complex(mu)) ** 2
    if r2 == 0.0:
        return math.inf
    return (1.0 - r2) / r2


@dataclass(frozen=True)
class CircularStats:
    mu: complex
    mean_phase: float
    variance: float


def circular_stats(H, state):
    mu = mu_from_H(H, state)
    return CircularStats(mu, math.atan2(mu.imag, mu.real), holevo_variance(mu))


def excess_variance(H, state):
    """Holevo variance under ``H`` minus the canonical (intrinsic) variance."""
    v = holevo_variance(mu_from_H(H, state))
    v_can = holevo_variance(mu_from_H(h_canonical(state.truncation), state))
    if math.isinf(v) and math.isinf(v_can):
        return 0.0
    return v - v_can


def holevo_inequality_check(H, state):
    """``4 V >= 1 / Var(n)`` (with 1e-9 slack); states with ``Var(n) = 0`` pass."""
    var_n = photon_number_variance(state)
    if var_n <= 0.0:
        return True
    v = holevo_variance(mu_from_H(H, state))
    if math.isinf(v):
        return True
    return 4.0 * v >= 1.0 / var_n - HOLEVO_SLACK


def tail_ratio(dist):
    """``P(pi) / P(0)`` from the grid, interpolating linearly if needed."""
    p0 = dist.value_at(0.0)
    if p0 == 0.0:
        raise DegenerateDistributionError("P(0) = 0; tail ratio undefined")
    return dist.value_at(math.pi) / p0
