# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled bit-level kernels for the Q9.9 codec and square-QAM Gray mapping."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()

cdef enum:
    WORD = 18
    KMAX = 131071
    KMIN = -131072
    MASK = 262143

cdef double FRAC_SCALE = 512.0


def q99_encode(const double[::1] values):
    cdef Py_ssize_t n = values.shape[0], i, b
    out_arr = np.empty(n * WORD, dtype=np.uint8)
    cdef unsigned char[::1] out = out_arr
    cdef double x
    cdef long k
    cdef unsigned long w
    for i in range(n):
        x = floor(values[i] * FRAC_SCALE + 0.5)
        if x > KMAX:
            k = KMAX
        elif x < KMIN:
            k = KMIN
        else:
            k = <long>x
        w = (<unsigned long>k) & MASK
        for b in range(WORD):
            out[i * WORD + b] = (w >> (WORD - 1 - b)) & 1
    return out_arr


def q99_decode(const unsigned char[::1] bits):
    cdef Py_ssize_t n = bits.shape[0] // WORD, i, b
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef long w
    for i in range(n):
        w = 0
        for b in range(WORD):
            w = (w << 1) | (bits[i * WORD + b] & 1)
        if w >= 131072:
            w -= 262144
        out[i] = w / FRAC_SCALE
    return out_arr


def qam_map(const unsigned char[::1] bits, int m, double scale):
    """Gray-map groups of ``2*m`` bits to square-QAM symbols (I bits first)."""
    cdef Py_ssize_t k = 2 * m
    cdef Py_ssize_t n = bits.shape[0] // k, i, b
    cdef int levels = 1 << m
    cdef int gi, gq, ii, iq
    re_arr = np.empty(n, dtype=np.float64)
    im_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] re = re_arr
    cdef double[::1] im = im_arr
    for i in range(n):
        gi = 0
        gq = 0
        for b in range(m):
            gi = (gi << 1) | bits[i * k + b]
            gq = (gq << 1) | bits[i * k + m + b]
        ii = gi
        iq = gq
        b = 1
        while (gi >> b) > 0:
            ii ^= gi >> b
            b += 1
        b = 1
        while (gq >> b) > 0:
            iq ^= gq >> b
            b += 1
        re[i] = (2 * ii - (levels - 1)) * scale
        im[i] = (2 * iq - (levels - 1)) * scale
    return re_arr, im_arr


def qam_demap(const double[::1] re, const double[::1] im, int m, double scale):
    """Hard-decision nearest-point demapping back to Gray-coded bits."""
    cdef Py_ssize_t n = re.shape[0], i, b
    cdef Py_ssize_t k = 2 * m
    cdef int levels = 1 << m
    cdef double t
    cdef int ii, iq, gi, gq
    out_arr = np.empty(n * k, dtype=np.uint8)
    cdef unsigned char[::1] out = out_arr
    for i in range(n):
        t = floor((re[i] / scale + (levels - 1)) / 2.0 + 0.5)
        ii = 0 if t < 0 else (levels - 1 if t > levels - 1 else <int>t)
        t = floor((im[i] / scale + (levels - 1)) / 2.0 + 0.5)
        iq = 0 if t < 0 else (levels - 1 if t > levels - 1 else <int>t)
        gi = ii ^ (ii >> 1)
        gq = iq ^ (iq >> 1)
        for b in range(m):
            out[i * k + b] = (gi >> (m - 1 - b)) & 1
            out[i * k + m + b] = (gq >> (m - 1 - b)) & 1
    return out_arr
