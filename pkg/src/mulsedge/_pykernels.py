"""Numpy versions of the compiled kernels; same signatures and results."""
import numpy as np

WORD = 18
_FRAC_SCALE = 512.0
_KMAX = (1 << 17) - 1
_KMIN = -(1 << 17)
_SHIFTS = np.arange(WORD - 1, -1, -1, dtype=np.int64)


def q99_encode(values):
    v = np.asarray(values, dtype=np.float64)
    k = np.clip(np.floor(v * _FRAC_SCALE + 0.5), _KMIN, _KMAX).astype(np.int64)
    w = k & ((1 << WORD) - 1)
    return ((w[:, None] >> _SHIFTS[None, :]) & 1).astype(np.uint8).reshape(-1)


def q99_decode(bits):
    b = np.asarray(bits, dtype=np.int64).reshape(-1, WORD)
    w = (b << _SHIFTS[None, :]).sum(axis=1)
    w = np.where(w >= 1 << 17, w - (1 << WORD), w)
    return w / _FRAC_SCALE


def _gray_to_index(g):
    i = g.copy()
    shift = g >> 1
    while np.any(shift):
        i ^= shift
        shift >>= 1
    return i


def qam_map(bits, m, scale):
    b = np.asarray(bits, dtype=np.int64).reshape(-1, 2 * m)
    w = 1 << np.arange(m - 1, -1, -1)
    gi = (b[:, :m] * w).sum(axis=1)
    gq = (b[:, m:] * w).sum(axis=1)
    levels = 1 << m
    re = (2 * _gray_to_index(gi) - (levels - 1)) * scale
    im = (2 * _gray_to_index(gq) - (levels - 1)) * scale
    return re.astype(np.float64), im.astype(np.float64)


def qam_demap(re, im, m, scale):
    levels = 1 << m
    shifts = np.arange(m - 1, -1, -1)

    def axis(x):
        t = np.floor((np.asarray(x) / scale + (levels - 1)) / 2.0 + 0.5)
        i = np.clip(t, 0, levels - 1).astype(np.int64)
        g = i ^ (i >> 1)
        return (g[:, None] >> shifts[None, :]) & 1

    return np.concatenate([axis(re), axis(im)], axis=1).astype(np.uint8).reshape(-1)
