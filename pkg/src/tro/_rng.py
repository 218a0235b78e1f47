"""Counter-based random numbers (Philox4x32-10).

Every random draw is a pure function of ``(key, counter)``, so the example
at stream position ``p`` can be regenerated without replaying positions
``0 .. p-1``. This is what makes disjoint ranges of a stream reproducible
when generated in any order.

Counter layout used by the samplers::

    c0 = position & 0xFFFFFFFF
    c1 = position >> 32
    c2 = block index within one draw (each block yields four uniforms)
    c3 = purpose tag (see the ``TAG_*`` constants)

and the key is ``(seed, stream)``.
"""

import numpy as np
from numba import njit

TAG_TRAIN = 0
TAG_FRESH = 1
TAG_RISK = 2
TAG_CALIBRATE = 3

_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_TWO_M32 = 1.0 / 4294967296.0
_TWO_PI = 6.283185307179586


@njit(cache=True, inline="always")
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten-round Philox 4x32 block. All arguments are ``uint64`` < 2**32."""
    for r in range(10):
        if r > 0:
            k0 = (k0 + _W0) & _MASK32
            k1 = (k1 + _W1) & _MASK32
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (p1 >> _SHIFT32) ^ c1 ^ k0, p1 & _MASK32, (p0 >> _SHIFT32) ^ c3 ^ k1, p0 & _MASK32
    return c0, c1, c2, c3


@njit(cache=True, inline="always")
def _to_unit(a):
    # (a + 0.5) / 2**32: strictly inside (0, 1)
    return (float(np.int64(a)) + 0.5) * _TWO_M32


@njit(cache=True, inline="always")
def fill_uniforms(k0, k1, position, tag, out, n):
    """Write ``n`` uniforms on (0, 1) for one stream position into ``out``."""
    pos = np.uint64(position)
    c0 = pos & _MASK32
    c1 = pos >> _SHIFT32
    c3 = np.uint64(tag)
    full = n // 4
    for j in range(full):
        r0, r1, r2, r3 = philox4x32(c0, c1, np.uint64(j), c3, k0, k1)
        i = 4 * j
        out[i] = _to_unit(r0)
        out[i + 1] = _to_unit(r1)
        out[i + 2] = _to_unit(r2)
        out[i + 3] = _to_unit(r3)
    rest = n - 4 * full
    if rest > 0:
        r0, r1, r2, r3 = philox4x32(c0, c1, np.uint64(full), c3, k0, k1)
        i = 4 * full
        out[i] = _to_unit(r0)
        if rest > 1:
            out[i + 1] = _to_unit(r1)
        if rest > 2:
            out[i + 2] = _to_unit(r2)


@njit(cache=True, inline="always")
def box_muller(u1, u2):
    """Two independent standard normals from two uniforms on (0, 1)."""
    rad = np.sqrt(-2.0 * np.log(u1))
    ang = _TWO_PI * u2
    return rad * np.cos(ang), rad * np.sin(ang)


def stream_key(seed, stream):
    """Philox key words for an integer seed and stream id."""
    seed = int(seed)
    stream = int(stream)
    if not 0 <= seed < 2**32:
        raise ValueError(f"seed must lie in [0, 2**32), got {seed}")
    if not 0 <= stream < 2**32:
        raise ValueError(f"stream must lie in [0, 2**32), got {stream}")
    return np.uint64(seed), np.uint64(stream)


def uniforms(seed, stream, position, tag, n):
    """Convenience wrapper returning a fresh array of ``n`` uniforms."""
    k0, k1 = stream_key(seed, stream)
    out = np.empty(n)
    fill_uniforms(k0, k1, position, tag, out, n)
    return out
