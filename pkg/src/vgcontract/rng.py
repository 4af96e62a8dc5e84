"""Counter-based Gaussian streams.

Every Gaussian increment used by the simulators is a pure function of
``(seed, stream, lane, step)``.  The bits come from Philox4x32-10 keyed by the
64-bit seed, with the counter built from the step pair index, the lane and the
64-bit stream id.  One Philox block gives two uniforms, turned into two
normals by Box-Muller; normal ``step`` uses component ``step & 1`` of block
``step >> 1``.

Because nothing is carried between draws, streams can be evaluated in any
order (or in parallel) and produce the same numbers.  The compiled kernels
implement the same map; this module is the numpy version and the reference
for tests.
"""

import numpy as np

PHILOX_M0 = np.uint64(0xD2511F53)
PHILOX_M1 = np.uint64(0xCD9E8D57)
PHILOX_W0 = np.uint64(0x9E3779B9)
PHILOX_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)

# lane ids used by the simulators
LANE_MAIN = 0
LANE_AUX = 1

_TWO_PI = 6.283185307179586
_INV_2_53 = 1.0 / 9007199254740992.0


def splitmix64(x):
    """One step of the SplitMix64 finalizer on a python int (mod 2**64)."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def derive_seed(master_seed, *tags):
    """Derive an independent 64-bit key from a master seed and integer/str tags."""
    h = splitmix64(int(master_seed) & 0xFFFFFFFFFFFFFFFF)
    for tag in tags:
        if isinstance(tag, str):
            tag = int.from_bytes(tag.encode("utf-8")[:8].ljust(8, b"\0"), "little")
        h = splitmix64(h ^ (int(tag) & 0xFFFFFFFFFFFFFFFF))
    return h


def philox4x32(counter, key, rounds=10):
    """Philox4x32 block function, vectorised over the leading axis.

    Parameters
    ----------
    counter : array of shape (..., 4), integer words < 2**32
    key : array of shape (..., 2), integer words < 2**32

    Returns
    -------
    ndarray of uint64 with shape (..., 4), each word < 2**32
    """
    c = np.asarray(counter, dtype=np.uint64)
    k = np.asarray(key, dtype=np.uint64)
    c0, c1, c2, c3 = c[..., 0], c[..., 1], c[..., 2], c[..., 3]
    k0, k1 = k[..., 0], k[..., 1]
    for _ in range(rounds):
        p0 = PHILOX_M0 * c0
        p1 = PHILOX_M1 * c2
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = (k0 + PHILOX_W0) & _MASK32
        k1 = (k1 + PHILOX_W1) & _MASK32
    return np.stack([c0, c1, c2, c3], axis=-1)


def _block_counter(streams, lane, block):
    streams = np.asarray(streams, dtype=np.uint64)
    block = np.uint64(block)
    c0 = np.broadcast_to(block & _MASK32, streams.shape)
    c1 = np.broadcast_to(((block >> _SHIFT32) & np.uint64(0xFFFF)) | np.uint64(lane << 16), streams.shape)
    return np.stack([c0, c1, streams & _MASK32, streams >> _SHIFT32], axis=-1)


def _seed_key(seed):
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.array([seed & 0xFFFFFFFF, seed >> 32], dtype=np.uint64)


def normal_pair(seed, streams, lane, block):
    """Both Box-Muller normals of one Philox block for each stream.

    Returns two float64 arrays shaped like ``streams``: the normals for steps
    ``2*block`` and ``2*block + 1``.
    """
    words = philox4x32(_block_counter(streams, lane, block), _seed_key(seed))
    a = ((words[..., 0] >> np.uint64(5)) << np.uint64(26)) | (words[..., 1] >> np.uint64(6))
    b = ((words[..., 2] >> np.uint64(5)) << np.uint64(26)) | (words[..., 3] >> np.uint64(6))
    u1 = 1.0 - a.astype(np.float64) * _INV_2_53  # (0, 1]
    u2 = b.astype(np.float64) * _INV_2_53
    r = np.sqrt(-2.0 * np.log(u1))
    th = _TWO_PI * u2
    return r * np.cos(th), r * np.sin(th)


def normals(seed, streams, lane, step):
    """Standard normal for ``step`` on each of ``streams``."""
    z0, z1 = normal_pair(seed, streams, lane, int(step) >> 1)
    return z1 if int(step) & 1 else z0


def uniforms(seed, streams, lane, index):
    """Uniform [0, 1) draws from the same keyed map (used for initial laws)."""
    words = philox4x32(_block_counter(streams, lane, int(index)), _seed_key(seed))
    a = ((words[..., 0] >> np.uint64(5)) << np.uint64(26)) | (words[..., 1] >> np.uint64(6))
    b = ((words[..., 2] >> np.uint64(5)) << np.uint64(26)) | (words[..., 3] >> np.uint64(6))
    return a.astype(np.float64) * _INV_2_53, b.astype(np.float64) * _INV_2_53
