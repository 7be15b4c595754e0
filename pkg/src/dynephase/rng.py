"""Counter-based random numbers: Philox4x32-10.

Every random draw is a pure function of ``(counter, key)``, so trajectory
``t`` of a simulation sees the same numbers no matter how trajectories are
scheduled across threads, and either backend can regenerate any single
draw without replaying the others.

Stream layout used by the simulator (key = 64-bit seed split into two words):

===============  =========================================
counter word     meaning
===============  =========================================
``c0``           block index within the stream
``c1``           trajectory index
``c2``           stream tag (``TAG_*`` below)
``c3``           sub-index (e.g. step number for substeps)
===============  =========================================
"""

import math

import numpy as np

from ._accel import jit

PHILOX_M0 = 0xD2511F53
PHILOX_M1 = 0xCD9E8D57
PHILOX_W0 = 0x9E3779B9
PHILOX_W1 = 0xBB67AE85
ROUNDS = 10

TAG_STEP = 0
TAG_INIT = 1
TAG_SUBSTEP = 2

_MASK32 = 0xFFFFFFFF
_TWO53 = 9007199254740992.0
_TWO26 = 67108864.0


def split_seed(seed):
    """Key words ``(lo, hi)`` of a non-negative 64-bit seed."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be in [0, 2**64)")
    return seed & _MASK32, seed >> 32


@jit(inline="always")
def _mulhilo(a, b):
    p = np.uint64(a) * np.uint64(b)
    return np.uint32(p >> np.uint64(32)), np.uint32(p & np.uint64(0xFFFFFFFF))


@jit
def philox4x32(c0, c1, c2, c3, k0, k1):
    """One Philox4x32-10 block; all arguments and results are ``uint32``."""
    c0 = np.uint32(c0)
    c1 = np.uint32(c1)
    c2 = np.uint32(c2)
    c3 = np.uint32(c3)
    k0 = np.uint32(k0)
    k1 = np.uint32(k1)
    for _ in range(10):
        h0, l0 = _mulhilo(np.uint32(0xD2511F53), c0)
        h1, l1 = _mulhilo(np.uint32(0xCD9E8D57), c2)
        c0, c1, c2, c3 = h1 ^ c1 ^ k0, l1, h0 ^ c3 ^ k1, l0
        # widen before adding so the wrap-around is explicit in both backends
        k0 = np.uint32((np.uint64(k0) + np.uint64(0x9E3779B9)) & np.uint64(0xFFFFFFFF))
        k1 = np.uint32((np.uint64(k1) + np.uint64(0xBB67AE85)) & np.uint64(0xFFFFFFFF))
    return c0, c1, c2, c3


@jit(inline="always")
def uniform53_open(a, b):
    """Uniform double in (0, 1] from two 32-bit words (offset by half an ulp; never 0)."""
    return (float(a >> np.uint32(5)) * 67108864.0 + float(b >> np.uint32(6)) + 0.5) / 9007199254740992.0


@jit(inline="always")
def uniform53(a, b):
    """Uniform double in [0, 1) from two 32-bit words."""
    return (float(a >> np.uint32(5)) * 67108864.0 + float(b >> np.uint32(6))) / 9007199254740992.0


@jit
def normal_pair(c0, c1, c2, c3, k0, k1):
    """Two independent standard normals (Box-Muller) from one block."""
    a, b, c, d = philox4x32(c0, c1, c2, c3, k0, k1)
    u1 = uniform53_open(a, b)
    u2 = uniform53(c, d)
    r = math.sqrt(-2.0 * math.log(u1))
    t = 2.0 * math.pi * u2
    return r * math.cos(t), r * math.sin(t)


# -- vectorised numpy twins ------------------------------------------------------

def philox4x32_np(c0, c1, c2, c3, k0, k1):
    """Vectorised Philox4x32-10; inputs broadcast, outputs ``uint64`` arrays of 32-bit words."""
    mask = np.uint64(_MASK32)
    c0, c1, c2, c3 = (np.asarray(x, dtype=np.uint64) & mask for x in (c0, c1, c2, c3))
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0 = np.uint64(int(k0) & _MASK32)
    k1 = np.uint64(int(k1) & _MASK32)
    m0 = np.uint64(PHILOX_M0)
    m1 = np.uint64(PHILOX_M1)
    w0 = np.uint64(PHILOX_W0)
    w1 = np.uint64(PHILOX_W1)
    s32 = np.uint64(32)
    for _ in range(ROUNDS):
        p0 = m0 * c0
        p1 = m1 * c2
        c0, c1, c2, c3 = (p1 >> s32) ^ c1 ^ k0, p1 & mask, (p0 >> s32) ^ c3 ^ k1, p0 & mask
        k0 = (k0 + w0) & mask
        k1 = (k1 + w1) & mask
    return c0, c1, c2, c3


def _u53(a, b, offset):
    return ((a >> np.uint64(5)).astype(float) * _TWO26 + (b >> np.uint64(6)).astype(float) + offset) / _TWO53


def normal_pair_np(c0, c1, c2, c3, k0, k1):
    a, b, c, d = philox4x32_np(c0, c1, c2, c3, k0, k1)
    u1 = _u53(a, b, 0.5)
    u2 = _u53(c, d, 0.0)
    r = np.sqrt(-2.0 * np.log(u1))
    t = 2.0 * math.pi * u2
    return r * np.cos(t), r * np.sin(t)


def uniform_np(c0, c1, c2, c3, k0, k1):
    a, b, _, _ = philox4x32_np(c0, c1, c2, c3, k0, k1)
    return _u53(a, b, 0.0)
