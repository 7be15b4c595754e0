"""Closed-form large-photon-number asymptotics for the four schemes.

Every function is a plain formula evaluation.  Where a formula is only
leading-order, or is only trustworthy beyond some photon number, the
``validity`` helper says so; the CLI prints those flags next to the curves.
"""

import math
from dataclasses import dataclass
from enum import Enum

from .errors import ValidationError
from .numerics import airy_first_zero

__all__ = [
    "SchemeTag",
    "PowerLaw",
    "POWER_LAWS",
    "h_asymptotic",
    "coherent_variance_asymptotic",
    "coherent_excess_asymptotic",
    "vmin_asymptotic",
    "asymptotic_threshold",
    "error_asymptotic",
    "crossover_beta",
    "crossover_log_error",
    "mark2_regime_switch",
    "tail_estimate",
    "collett_bound",
    "validity",
]


class SchemeTag(str, Enum):
    CANONICAL = "canonical"
    HETERODYNE = "heterodyne"
    MARK1 = "mark1"
    MARK2 = "mark2"

    @classmethod
    def of(cls, value):
        if isinstance(value, cls):
            return value
        from .pom import canonical_scheme

        return cls(canonical_scheme(value))


@dataclass(frozen=True)
class PowerLaw:
    """``h(n) ~ c n^{-p}`` for the sub-diagonal deficit of a dyne scheme."""

    c: float
    p: float

    def __call__(self, n):
        return self.c * n ** (-self.p)


POWER_LAWS = {
    SchemeTag.HETERODYNE: PowerLaw(1.0 / 8.0, 1.0),
    SchemeTag.MARK1: PowerLaw(1.0 / 8.0, 0.5),
    SchemeTag.MARK2: PowerLaw(1.0 / 16.0, 1.5),
}


def _positive(x, name):
    x = float(x)
    if not x > 0:
        raise ValidationError(f"{name} must be positive")
    return x


def h_asymptotic(scheme, m):
    """Leading-order ``h(m) = 1 - H_{m,m+1}``; zero for the canonical scheme."""
    tag = SchemeTag.of(scheme)
    m = _positive(m, "m")
    if tag is SchemeTag.CANONICAL:
        return 0.0
    return POWER_LAWS[tag](m)


def coherent_variance_asymptotic(scheme, beta):
    """Large-``beta`` Holevo variance of a coherent state of amplitude ``beta``."""
    tag = SchemeTag.of(scheme)
    b = _positive(beta, "beta")
    if tag is SchemeTag.CANONICAL:
        return 1.0 / (4 * b**2) + 5.0 / (32 * b**4)
    if tag is SchemeTag.HETERODYNE:
        return 1.0 / (2 * b**2) + 3.0 / (8 * b**4)
    if tag is SchemeTag.MARK1:
        return 1.0 / (4 * b)
    return 1.0 / (4 * b**2) + 1.0 / (8 * b**3)


def coherent_excess_asymptotic(scheme, beta):
    """Excess variance ``2 h(beta^2)`` of a coherent state."""
    b = _positive(beta, "beta")
    return 2.0 * h_asymptotic(scheme, b * b)


def vmin_asymptotic(scheme, N):
    """Minimum variance with at most ``N`` photons.

    Dyne schemes: ``2 c N^-p + (-z1) (2 c p)^{2/3} N^{-2(1+p)/3}`` with ``z1``
    the first Airy zero; canonical: ``tan^2(pi/(N+2))`` (exact).
    """
    tag = SchemeTag.of(scheme)
    N = float(N)
    if N < 1:
        raise ValidationError("N must be >= 1")
    if tag is SchemeTag.CANONICAL:
        return math.tan(math.pi / (N + 2)) ** 2
    law = POWER_LAWS[tag]
    c, p = law.c, law.p
    return 2 * c * N ** (-p) + (-airy_first_zero()) * (2 * c * p) ** (2.0 / 3.0) * N ** (-2 * (1 + p) / 3)


def asymptotic_threshold(scheme):
    """Photon number ``(10^3/(2cp))^{1/(2-p)}`` beyond which the Airy form holds."""
    tag = SchemeTag.of(scheme)
    if tag is SchemeTag.CANONICAL:
        return 1.0
    law = POWER_LAWS[tag]
    return (1e3 / (2 * law.c * law.p)) ** (1.0 / (2 - law.p))


def error_asymptotic(scheme, beta, M):
    """Natural log of the M-ary error probability of a coherent state.

    The heterodyne case uses the refined large-``beta`` expansion with
    ``a = cot(pi/M)``,

        -beta^2/(1+a^2) + log[((1+a^2)^5 - a^10) / (sqrt(pi) (1+a^2)^{9/2})] - log(beta),

    whose ``-log(beta)`` is the ``1/d`` prefactor of a Gaussian tail beyond a
    line at distance ``d = beta sin(pi/M)``; the others are
    Gaussian-peak-plus-floor estimates.
    """
    tag = SchemeTag.of(scheme)
    b = _positive(beta, "beta")
    M = int(M)
    if M < 2:
        raise ValidationError("M must be >= 2")
    w = (math.pi / M) ** 2
    if tag is SchemeTag.CANONICAL:
        return -b * b * min(2 * w, 1.0)
    if tag is SchemeTag.MARK1:
        return -b * min(2 * w, 4.0)
    if tag is SchemeTag.MARK2:
        return -b * min(2 * b * w, 4.0)
    a2 = 1.0 / math.tan(math.pi / M) ** 2
    s = 1.0 + a2
    return -b * b / s + math.log((s**5 - a2**5) / (math.sqrt(math.pi) * s**4.5)) - math.log(b)


def error_asymptotic_simple_het(beta, M):
    """Gaussian-plus-floor heterodyne estimate ``-beta^2 min{(pi/M)^2, 1}``."""
    return -float(beta) ** 2 * min((math.pi / M) ** 2, 1.0)


def crossover_beta(M):
    """Amplitude ``4 (M/pi)^2`` beyond which heterodyne beats mark II for M-ary keying."""
    return 4.0 * (M / math.pi) ** 2


def crossover_log_error(M):
    """``log E`` at the crossover amplitude, ``-16 (M/pi)^2``."""
    return -16.0 * (M / math.pi) ** 2


def mark2_regime_switch(M):
    """Amplitude ``2 (M/pi)^2`` where mark II ``log E`` turns from quadratic to linear."""
    return 2.0 * (M / math.pi) ** 2


def tail_estimate(scheme, beta):
    """Natural log of ``P(pi)`` for a coherent state.

    Canonical and mark II values are leading order only (see :func:`validity`).
    """
    tag = SchemeTag.of(scheme)
    b = float(beta)
    if b < 1:
        raise ValidationError("tail_estimate needs beta >= 1")
    if tag is SchemeTag.HETERODYNE:
        return -b * b - math.log(4 * math.pi * b * b)
    if tag is SchemeTag.MARK1:
        return 0.5 * math.log(4 * b / math.pi) - 4 * b
    if tag is SchemeTag.MARK2:
        return -4 * b
    return -b * b


def collett_bound(N):
    """Asymptotic lower bound ``ln N / (4 N^2)`` on the measured phase variance."""
    N = float(N)
    if not N > 1:
        raise ValidationError("collett_bound needs N > 1")
    return math.log(N) / (4 * N * N)


def validity(quantity, scheme, *, beta=None, N=None):
    """Applicability notes for an asymptotic formula.

    Returns
    -------
    dict
        ``{"valid": bool, "leading_order_only": bool, "note": str}``.
    """
    tag = SchemeTag.of(scheme)
    out = {"valid": True, "leading_order_only": False, "note": ""}
    if quantity in ("coherent_variance", "excess", "error", "tail"):
        if beta is not None and beta < 3:
            out["valid"] = False
            out["note"] = "asymptotic in beta; expect O(1) corrections below beta ~ 3"
        if quantity == "tail" and tag in (SchemeTag.CANONICAL, SchemeTag.MARK2):
            out["leading_order_only"] = True
        if quantity == "error" and tag is not SchemeTag.HETERODYNE:
            out["leading_order_only"] = True
            note = "Gaussian-peak-plus-floor estimate; its exponent can be ~25% off for small M"
            out["note"] = f"{out['note']}; {note}" if out["note"] else note
    elif quantity == "vmin":
        thr = asymptotic_threshold(tag)
        if N is not None and N < thr:
            out["valid"] = False
            out["note"] = f"N below asymptotic threshold N_as ~ {thr:.3g}"
    return out
