"""Pure states of a single mode in a truncated photon-number basis."""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import TruncationError, ValidationError

DEFAULT_TRUNCATION = 100
DEFAULT_TAIL_CAP = 1e-10

__all__ = [
    "NumberStateVector",
    "RotatedState",
    "coherent_state",
    "coherent_tail_mass",
    "required_truncation",
    "number_state",
    "rotate",
    "photon_number_variance",
]


@dataclass(frozen=True, eq=False)
class NumberStateVector:
    """Real amplitudes ``psi_0 .. psi_N`` of a normalised pure state.

    Attributes
    ----------
    amplitudes : ndarray, shape (N+1,)
    tail_mass : float
        Probability discarded by the truncation (0 for states that are
        exactly representable).
    """

    amplitudes: np.ndarray
    tail_mass: float = 0.0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=float, copy=True).ravel()
        if amp.size == 0:
            raise ValidationError("state needs at least one amplitude")
        if not np.all(np.isfinite(amp)):
            raise ValidationError("state amplitudes must be finite")
        norm2 = math.fsum(amp * amp)
        if abs(norm2 - 1.0) > 1e-10:
            raise ValidationError(f"state is not normalised (sum psi^2 = {norm2!r})")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def normalized(cls, amplitudes, tail_mass=0.0, label=""):
        """Build from unnormalised amplitudes."""
        amp = np.asarray(amplitudes, dtype=float).ravel()
        nrm = math.sqrt(math.fsum(amp * amp))
        if nrm == 0 or not math.isfinite(nrm):
            raise ValidationError("cannot normalise a zero or non-finite vector")
        return cls(amp / nrm, tail_mass, label)

    @property
    def truncation(self):
        return self.amplitudes.shape[0] - 1

    def padded(self, truncation):
        """Same state embedded in a larger truncation."""
        if truncation < self.truncation:
            raise ValidationError("cannot pad to a smaller truncation")
        amp = np.zeros(truncation + 1)
        amp[: self.truncation + 1] = self.amplitudes
        return NumberStateVector(amp, self.tail_mass, self.label)

    def to_dict(self):
        return {"truncation": int(self.truncation), "amplitudes": [float(x) for x in self.amplitudes]}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        amp = data["amplitudes"]
        if len(amp) != int(data["truncation"]) + 1:
            raise ValidationError("truncation does not match amplitude count")
        return cls(np.asarray(amp, dtype=float))


@dataclass(frozen=True, eq=False)
class RotatedState:
    """A real-amplitude state phase-shifted by ``theta``: ``c_n = psi_n e^{i theta n}``."""

    base: NumberStateVector
    angle: float
    amplitudes: np.ndarray = field(init=False)

    def __post_init__(self):
        n = np.arange(self.base.truncation + 1)
        # reduce n*theta mod 2pi exactly enough that rotate(s, 2pi) == s
        phase = np.mod(n * float(self.angle), 2.0 * math.pi)
        amp = self.base.amplitudes * np.exp(1j * phase)
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def truncation(self):
        return self.base.truncation


def _log_coherent_weights(beta, n):
    """``log |<n|beta>|^2`` for real ``beta > 0``."""
    return -beta * beta + 2.0 * n * math.log(beta) - gammaln(n + 1.0)


def coherent_tail_mass(beta, truncation):
    """Probability ``sum_{n > N} |<n|beta>|^2`` of a coherent state beyond ``N``."""
    beta = float(beta)
    if beta == 0.0:
        return 0.0
    start = truncation + 1
    # Poisson tail; terms decay super-geometrically once n > beta^2.
    stop = max(start, int(beta * beta + 40.0 * beta + 200))
    n = np.arange(start, stop + 1, dtype=float)
    logs = _log_coherent_weights(beta, n)
    return float(math.fsum(np.exp(logs)))


def required_truncation(beta, tail_cap=DEFAULT_TAIL_CAP):
    """Smallest ``N`` whose coherent-state tail mass is below ``tail_cap``."""
    n = max(0, int(beta * beta))
    while coherent_tail_mass(beta, n) >= tail_cap:
        n += max(1, int(0.05 * n))
    while n > 0 and coherent_tail_mass(beta, n - 1) < tail_cap:
        n -= 1
    return n


def coherent_state(beta, truncation=DEFAULT_TRUNCATION, tail_cap=DEFAULT_TAIL_CAP):
    """Coherent state of real amplitude ``beta`` (mean phase zero).

    Amplitudes ``exp(-beta^2/2) beta^n / sqrt(n!)`` are formed in log space and
    renormalised over ``0..truncation``.

    Raises
    ------
    TruncationError
        If the discarded probability exceeds ``tail_cap``; the exception's
        ``required_truncation`` attribute names a sufficient ``N``.
    """
    beta = float(beta)
    truncation = int(truncation)
    if truncation < 0:
        raise ValidationError("truncation must be non-negative")
    if beta < 0 or not math.isfinite(beta):
        raise ValidationError("beta must be finite and non-negative")
    if beta == 0.0:
        amp = np.zeros(truncation + 1)
        amp[0] = 1.0
        return NumberStateVector(amp, 0.0, "vacuum")
    tail = coherent_tail_mass(beta, truncation)
    if tail > tail_cap:
        need = required_truncation(beta, tail_cap)
        raise TruncationError(
            f"coherent state beta={beta:g} loses {tail:.3g} probability at N={truncation}; "
            f"need N >= {need}",
            required_truncation=need,
        )
    n = np.arange(truncation + 1, dtype=float)
    logs = 0.5 * _log_coherent_weights(beta, n)
    amp = np.exp(logs - logs.max())
    return NumberStateVector.normalized(amp, tail, f"coherent({beta:g})")


def number_state(n, truncation=None):
    """Fock state ``|n>`` in a basis of size ``truncation + 1``."""
    truncation = n if truncation is None else truncation
    if not 0 <= n <= truncation:
        raise ValidationError("number state outside truncation")
    amp = np.zeros(truncation + 1)
    amp[n] = 1.0
    return NumberStateVector(amp, 0.0, f"fock({n})")


def rotate(state, theta):
    """Phase-shift a state: ``psi_n -> psi_n e^{i theta n}``."""
    if isinstance(state, RotatedState):
        return RotatedState(state.base, state.angle + float(theta))
    return RotatedState(state, float(theta))


def photon_number_variance(state):
    """``<n^2> - <n>^2`` for a number-basis state."""
    amp = state.amplitudes
    p = np.abs(amp) ** 2
    n = np.arange(p.shape[0], dtype=float)
    mean = math.fsum(n * p)
    return math.fsum((n - mean) ** 2 * p)
