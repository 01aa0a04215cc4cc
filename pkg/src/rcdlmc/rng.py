"""Counter-based random streams for reproducible ensembles.

Every random number used by a chain is a pure function of
``(master_seed, chain, step, tag, slot)``.  A chain's trajectory therefore
does not depend on how the ensemble is split into blocks, on the number of
worker threads, or on the order in which blocks are executed.

The generator is Philox4x32-10 (Salmon et al., SC'11).  Layout of one call:

* key   = two 32-bit words of ``splitmix64(splitmix64(seed) ^ splitmix64(chain))``
* counter = ``(step & 0xffffffff, step >> 32, slot, tag)``

Each call yields four 32-bit words.  Uniforms use 53 bits,
``u = ((w0 >> 5) * 2**26 + (w1 >> 6)) / 2**53`` in ``[0, 1)``.  Normal
number ``n`` of a step takes the 64-bit word ``(w0, w1)`` (even ``n``) or
``(w2, w3)`` (odd ``n``) of slot ``n // 2`` and maps it through a 256-layer
ziggurat (the same layout as NumPy's ``standard_normal``: low 8 bits pick the
layer, bit 8 the sign, the next 52 bits the abscissa).  The fast path is a
multiply and a compare, so results are exact IEEE arithmetic.  The rare
wedge/tail/retry paths draw from auxiliary blocks
``(step, n, tag | (k + 1) << 8)``, ``k = 0, 1, ...``, which keeps every
normal a pure function of its counter.
"""

from __future__ import annotations

import numba as nb
import numpy as np

__all__ = [
    "TAG_NOISE",
    "TAG_COORD",
    "TAG_INIT_X",
    "TAG_INIT_V",
    "ChainStreams",
    "philox4x32",
    "chain_keys",
]

TAG_NOISE = 0
TAG_COORD = 1
TAG_INIT_X = 2
TAG_INIT_V = 3

_MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_INV_2_53 = 1.0 / 9007199254740992.0


@nb.njit(cache=True, nogil=True)
def _splitmix64(z):
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True, nogil=True)
def _philox(c0, c1, c2, c3, k0, k1):
    for rnd in range(10):
        if rnd > 0:
            k0 = (k0 + _W0) & _MASK32
            k1 = (k1 + _W1) & _MASK32
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> np.uint64(32)
        lo0 = p0 & _MASK32
        hi1 = p1 >> np.uint64(32)
        lo1 = p1 & _MASK32
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
    return c0, c1, c2, c3


@nb.njit(cache=True, nogil=True)
def _uniform53(a, b):
    return ((a >> np.uint64(5)) * np.uint64(67108864) + (b >> np.uint64(6))) * _INV_2_53


@nb.njit(cache=True, nogil=True)
def _keys(seed, chains, k0, k1):
    s = _splitmix64(seed)
    for i in range(chains.shape[0]):
        k = _splitmix64(s ^ _splitmix64(chains[i]))
        k0[i] = k & _MASK32
        k1[i] = k >> np.uint64(32)


def _ziggurat_tables():
    # Marsaglia & Tsang (2000) layer recursion, 256 layers, 52-bit abscissae.
    m1 = 2.0**52
    dn = tn = _ZIG_R
    vn = 4.92867323399e-3
    q = vn / np.exp(-0.5 * dn * dn)
    ki = np.zeros(256, dtype=np.uint64)
    wi = np.zeros(256)
    fi = np.zeros(256)
    ki[0] = np.uint64((dn / q) * m1)
    wi[0] = q / m1
    wi[255] = dn / m1
    fi[0] = 1.0
    fi[255] = np.exp(-0.5 * dn * dn)
    for i in range(254, 0, -1):
        dn = np.sqrt(-2.0 * np.log(vn / dn + np.exp(-0.5 * dn * dn)))
        ki[i + 1] = np.uint64((dn / tn) * m1)
        tn = dn
        fi[i] = np.exp(-0.5 * dn * dn)
        wi[i] = dn / m1
    return ki, wi, fi


_ZIG_R = 3.6541528853610087963519472518
_ZIG_INV_R = 0.27366123732975827203338247596
_ZIG_K, _ZIG_W, _ZIG_F = _ziggurat_tables()


@nb.njit(cache=True, nogil=True)
def _aux_block(s_lo, s_hi, n, tag, k, k0, k1):
    return _philox(s_lo, s_hi, np.uint64(n), tag | (np.uint64(k + 1) << np.uint64(8)), k0, k1)


@nb.njit(cache=True, nogil=True)
def _ziggurat_slow(bits, s_lo, s_hi, n, tag, k0, k1, zk, zw, zf):
    aux = 0
    while True:
        idx = bits & np.uint64(0xFF)
        sign = (bits >> np.uint64(8)) & np.uint64(1)
        rabs = (bits >> np.uint64(9)) & np.uint64(0x000FFFFFFFFFFFFF)
        x = rabs * zw[idx]
        if sign:
            x = -x
        if rabs < zk[idx]:
            return x
        if idx == 0:
            while True:
                w0, w1, w2, w3 = _aux_block(s_lo, s_hi, n, tag, aux, k0, k1)
                aux += 1
                xx = -_ZIG_INV_R * np.log1p(-_uniform53(w0, w1))
                yy = -np.log1p(-_uniform53(w2, w3))
                if yy + yy > xx * xx:
                    if sign:
                        return -(_ZIG_R + xx)
                    return _ZIG_R + xx
        w0, w1, w2, w3 = _aux_block(s_lo, s_hi, n, tag, aux, k0, k1)
        aux += 1
        if (zf[idx - np.uint64(1)] - zf[idx]) * _uniform53(w0, w1) + zf[idx] < np.exp(-0.5 * x * x):
            return x
        bits = (w2 << np.uint64(32)) | w3


_LANES = 256


@nb.njit(cache=True, nogil=True)
def _philox_lanes(s_lo, s_hi, slot, tag, k0, k1, i0, m, c0, c1, c2, c3, ka, kb):
    # Philox for chains i0..i0+m at one slot, in 32-bit lanes so LLVM can vectorise
    for l in range(m):
        c0[l] = np.uint32(s_lo)
        c1[l] = np.uint32(s_hi)
        c2[l] = np.uint32(slot)
        c3[l] = np.uint32(tag)
        ka[l] = np.uint32(k0[i0 + l])
        kb[l] = np.uint32(k1[i0 + l])
    for _ in range(10):
        for l in range(m):
            p0 = np.uint64(0xD2511F53) * np.uint64(c0[l])
            p1 = np.uint64(0xCD9E8D57) * np.uint64(c2[l])
            a = np.uint32(p1 >> np.uint64(32)) ^ c1[l] ^ ka[l]
            b = np.uint32(p0 >> np.uint64(32)) ^ c3[l] ^ kb[l]
            c1[l] = np.uint32(p1 & _MASK32)
            c3[l] = np.uint32(p0 & _MASK32)
            c0[l] = a
            c2[l] = b
            ka[l] = ka[l] + np.uint32(0x9E3779B9)
            kb[l] = kb[l] + np.uint32(0xBB67AE85)


@nb.njit(cache=True, nogil=True)
def _fill_normals(k0, k1, step, tag, out, zk, zw, zf):
    n, count = out.shape
    s_lo = step & _MASK32
    s_hi = step >> np.uint64(32)
    t = np.uint64(tag)
    low = np.uint64(0xFF)
    frac = np.uint64(0x000FFFFFFFFFFFFF)
    sh8 = np.uint64(8)
    sh9 = np.uint64(9)
    sh32 = np.uint64(32)
    one = np.uint64(1)
    c0 = np.empty(_LANES, np.uint32)
    c1 = np.empty(_LANES, np.uint32)
    c2 = np.empty(_LANES, np.uint32)
    c3 = np.empty(_LANES, np.uint32)
    ka = np.empty(_LANES, np.uint32)
    kb = np.empty(_LANES, np.uint32)
    rejected = 0
    # fast path only; misses are marked NaN and resolved below
    for i0 in range(0, n, _LANES):
        m = min(_LANES, n - i0)
        for j in range((count + 1) // 2):
            _philox_lanes(s_lo, s_hi, j, t, k0, k1, i0, m, c0, c1, c2, c3, ka, kb)
            for q in range(2):
                col = 2 * j + q
                if col >= count:
                    break
                for l in range(m):
                    if q == 0:
                        bits = (np.uint64(c0[l]) << sh32) | np.uint64(c1[l])
                    else:
                        bits = (np.uint64(c2[l]) << sh32) | np.uint64(c3[l])
                    idx = bits & low
                    rabs = (bits >> sh9) & frac
                    if rabs < zk[idx]:
                        x = rabs * zw[idx]
                        out[i0 + l, col] = -x if (bits >> sh8) & one else x
                    else:
                        out[i0 + l, col] = np.nan
                        rejected += 1
    if rejected == 0:
        return
    for i in range(n):
        for c in range(count):
            if np.isnan(out[i, c]):
                w0, w1, w2, w3 = _philox(s_lo, s_hi, np.uint64(c // 2), t, k0[i], k1[i])
                if c % 2 == 0:
                    bits = (w0 << sh32) | w1
                else:
                    bits = (w2 << sh32) | w3
                out[i, c] = _ziggurat_slow(bits, s_lo, s_hi, c, t, k0[i], k1[i], zk, zw, zf)


@nb.njit(cache=True, nogil=True)
def _fill_uniforms(k0, k1, step, tag, out):
    s_lo = step & _MASK32
    s_hi = step >> np.uint64(32)
    t = np.uint64(tag)
    for i in range(out.shape[0]):
        w0, w1, w2, w3 = _philox(s_lo, s_hi, np.uint64(0), t, k0[i], k1[i])
        out[i] = _uniform53(w0, w1)


def philox4x32(counter, key):
    """Raw Philox4x32-10 block for one ``counter`` (4 words) and ``key`` (2 words)."""
    c = [np.uint64(int(w) & 0xFFFFFFFF) for w in counter]
    k = [np.uint64(int(w) & 0xFFFFFFFF) for w in key]
    return tuple(int(w) for w in _philox(c[0], c[1], c[2], c[3], k[0], k[1]))


def _as_u64(value, name):
    value = int(value)
    if not 0 <= value < 2**64:
        raise ValueError(f"{name} must be in [0, 2**64), got {value}")
    return np.uint64(value)


def chain_keys(seed, chains):
    """Philox keys ``(k0, k1)`` for each chain id under ``seed``."""
    chains = np.ascontiguousarray(chains, dtype=np.uint64)
    k0 = np.empty(chains.shape[0], dtype=np.uint64)
    k1 = np.empty(chains.shape[0], dtype=np.uint64)
    _keys(_as_u64(seed, "seed"), chains, k0, k1)
    return k0, k1


class ChainStreams:
    """Independent random streams for a set of chains.

    Parameters
    ----------
    seed : int
        Master seed in ``[0, 2**64)``.
    chains : array_like of int
        Global chain indices. Row ``i`` of every draw belongs to
        ``chains[i]``; the values do not depend on the other rows.
    """

    def __init__(self, seed, chains):
        self.seed = int(seed)
        self.chains = np.atleast_1d(np.asarray(chains, dtype=np.uint64))
        self._k0, self._k1 = chain_keys(self.seed, self.chains)

    def __len__(self):
        return self.chains.shape[0]

    def normals(self, step, count, tag=TAG_NOISE):
        """Standard normals of shape ``(n_chains, count)`` for ``step``."""
        out = np.empty((len(self), int(count)), dtype=np.float64)
        if count:
            _fill_normals(
                self._k0, self._k1, _as_u64(step, "step"), int(tag), out, _ZIG_K, _ZIG_W, _ZIG_F
            )
        return out

    def uniforms(self, step, tag=TAG_COORD):
        out = np.empty(len(self), dtype=np.float64)
        _fill_uniforms(self._k0, self._k1, _as_u64(step, "step"), int(tag), out)
        return out

    def coordinates(self, step, d, cdf=None):
        """Coordinate index per chain, uniform on ``0..d-1`` or by inverse ``cdf``."""
        u = self.uniforms(step)
        if cdf is None:
            return np.minimum((u * d).astype(np.int64), d - 1)
        return np.minimum(np.searchsorted(cdf, u, side="right"), d - 1).astype(np.int64)

    def subset(self, rows):
        """Streams for a subset of rows (same chain ids, same numbers)."""
        return ChainStreams(self.seed, self.chains[rows])
