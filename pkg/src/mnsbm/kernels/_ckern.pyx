# cython: language_level=3
"""Compiled numerical kernels.

Line-for-line mirror of pykern.py: same uniforms consumed from the same
streams, same libm calls in the same order, same clamps. Any edit here must
be mirrored there (and vice versa); the build disables FP contraction so
the arithmetic stays bit-identical to the interpreter's. Uniforms are read
directly off each Generator's bit-generator capsule: one next_double call
is exactly what Generator.random() performs.
"""

import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport (M_PI, INFINITY, exp, expm1, fabs, floor, log, log1p,
                        sin, sqrt)
from libc.stdint cimport int64_t
from libc.stdlib cimport free, malloc
from numpy.random cimport bitgen_t

NAME = "c"

cdef double _TINY_U = 1.1102230246251565e-16  # 2**-53
cdef double _HALF_LOG_2PI = 0.9189385332046727

TINY_U = _TINY_U


cdef bitgen_t *_bitgen(gen) except NULL:
    capsule = gen.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("expected a numpy Generator")
    return <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double _next_u(bitgen_t *bg) noexcept nogil:
    return bg.next_double(bg.state)


cdef inline double _pos_u_c(bitgen_t *bg) noexcept nogil:
    cdef double u = bg.next_double(bg.state)
    if u <= 0.0:
        u = _TINY_U
    return u


cdef double _lgamma_c(double x) noexcept nogil:
    # 9-term Lanczos (g = 7); positive arguments only, as in the reference
    cdef double z, s, t
    if x < 0.5:
        return log(M_PI / sin(M_PI * x)) - _lgamma_c(1.0 - x)
    z = x - 1.0
    s = 0.99999999999980993
    s += 676.5203681218851 / (z + 1.0)
    s += -1259.1392167224028 / (z + 2.0)
    s += 771.32342877765313 / (z + 3.0)
    s += -176.61502916214059 / (z + 4.0)
    s += 12.507343278686905 / (z + 5.0)
    s += -0.13857109526572012 / (z + 6.0)
    s += 9.9843695780195716e-6 / (z + 7.0)
    s += 1.5056327351493116e-7 / (z + 8.0)
    t = z + 7.5
    return _HALF_LOG_2PI + (z + 0.5) * log(t) - t + log(s)


def lgamma(x):
    """Log-gamma, bit-identical to the reference implementation."""
    cdef double xd = float(x)
    if xd <= 0.0:
        raise ValueError("lgamma defined here for positive arguments only")
    return _lgamma_c(xd)


cdef double _norm_inv_c(double p) noexcept nogil:
    cdef double q, r
    if p < 0.02425:
        q = sqrt(-2.0 * log(p))
        return (((((-7.784894002430293e-03 * q - 3.223964580411365e-01) * q
                   - 2.400758277161838e+00) * q - 2.549732539343734e+00) * q
                 + 4.374664141464968e+00) * q + 2.938163982698783e+00) / \
               ((((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
                  + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0)
    if p <= 0.97575:
        q = p - 0.5
        r = q * q
        return (((((-3.969683028665376e+01 * r + 2.209460984245205e+02) * r
                   - 2.759285104469687e+02) * r + 1.383577518672690e+02) * r
                 - 3.066479806614716e+01) * r + 2.506628277459239e+00) * q / \
               (((((-5.447609879822406e+01 * r + 1.615858368580409e+02) * r
                   - 1.556989798598866e+02) * r + 6.680131188771972e+01) * r
                 - 1.328068155288572e+01) * r + 1.0)
    q = sqrt(-2.0 * log1p(-p))
    return -(((((-7.784894002430293e-03 * q - 3.223964580411365e-01) * q
                - 2.400758277161838e+00) * q - 2.549732539343734e+00) * q
              + 4.374664141464968e+00) * q + 2.938163982698783e+00) / \
            ((((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
               + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0)


def norm_inv(p):
    """Acklam's inverse normal CDF approximation."""
    return _norm_inv_c(float(p))


def u01(gen):
    """One uniform in [0, 1) from the stream."""
    cdef bitgen_t *bg = _bitgen(gen)
    return _next_u(bg)


cdef inline double _std_normal_c(bitgen_t *bg) noexcept nogil:
    return _norm_inv_c(_pos_u_c(bg))


def std_normal(gen):
    """One standard normal variate, consuming exactly one uniform."""
    cdef bitgen_t *bg = _bitgen(gen)
    return _std_normal_c(bg)


cdef double _gamma_mt_c(bitgen_t *bg, double a) noexcept nogil:
    # Marsaglia-Tsang, shape a >= 1, unit rate
    cdef double d, c, x, t, v, u, xx
    d = a - 1.0 / 3.0
    c = 1.0 / sqrt(9.0 * d)
    while True:
        x = _std_normal_c(bg)
        t = 1.0 + c * x
        if t <= 0.0:
            continue
        v = t * t * t
        u = _pos_u_c(bg)
        xx = x * x
        if u < 1.0 - 0.0331 * xx * xx:
            return d * v
        if log(u) < 0.5 * xx + d * (1.0 - v + log(v)):
            return d * v


cdef double _gamma_draw_c(bitgen_t *bg, double shape, double rate) noexcept nogil:
    cdef double u, g
    if shape < 1.0:
        # boost: G(a) = G(a + 1) * U^(1/a)
        u = _pos_u_c(bg)
        g = _gamma_mt_c(bg, shape + 1.0)
        g *= exp(log(u) / shape)
        return g / rate
    return _gamma_mt_c(bg, shape) / rate


def gamma_draw(gen, shape, rate):
    """One Gamma(shape, rate) variate."""
    cdef double sh = float(shape)
    cdef double ra = float(rate)
    if sh <= 0.0 or ra <= 0.0:
        raise ValueError("gamma shape and rate must be positive")
    cdef bitgen_t *bg = _bitgen(gen)
    return _gamma_draw_c(bg, sh, ra)


cdef int64_t _poisson_inversion_c(bitgen_t *bg, double lam) noexcept nogil:
    # lam <= 30: cumulative inversion, one uniform
    cdef double u = _next_u(bg)
    cdef double p = exp(-lam)
    cdef double cum = p
    cdef int64_t k = 0
    while u >= cum and k < 10000:
        k += 1
        p *= lam / k
        cum += p
    return k


cdef int64_t _poisson_ptrs_c(bitgen_t *bg, double lam) noexcept nogil:
    # Hormann's transformed rejection with squeeze, lam > 10
    cdef double b, a, inv_alpha, v_r, llam, u, v, us, k
    b = 0.931 + 2.53 * sqrt(lam)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    llam = log(lam)
    while True:
        u = _next_u(bg) - 0.5
        v = _next_u(bg)
        us = 0.5 - fabs(u)
        if us <= 0.0:
            continue
        k = floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= v_r:
            return <int64_t> k
        if k < 0.0 or (us < 0.013 and v > us):
            continue
        if v <= 0.0:
            v = _TINY_U
        if (log(v) + log(inv_alpha) - log(a / (us * us) + b)) <= \
                (k * llam - lam - _lgamma_c(k + 1.0)):
            return <int64_t> k


cdef int64_t _poisson_draw_c(bitgen_t *bg, double lam) noexcept nogil:
    if lam == 0.0:
        return 0
    if lam <= 30.0:
        return _poisson_inversion_c(bg, lam)
    return _poisson_ptrs_c(bg, lam)


def poisson_draw(gen, lam):
    """One Poisson(lam) variate."""
    cdef double l = float(lam)
    if l < 0.0:
        raise ValueError("Poisson rate must be nonnegative")
    cdef bitgen_t *bg = _bitgen(gen)
    return _poisson_draw_c(bg, l)


cdef int64_t _ztp_draw_c(bitgen_t *bg, double lam) noexcept nogil:
    cdef double u, p, cum
    cdef int64_t k
    if lam <= 30.0:
        u = _next_u(bg)
        p = lam / expm1(lam)  # P(k = 1)
        cum = p
        k = 1
        while u >= cum and k < 10000:
            k += 1
            p *= lam / k
            cum += p
        return k
    while True:
        k = _poisson_ptrs_c(bg, lam)
        if k > 0:
            return k


def ztp_draw(gen, lam):
    """One zero-truncated Poisson(lam) variate, lam > 0."""
    cdef double l = float(lam)
    if l <= 0.0:
        raise ValueError("zero-truncated Poisson needs a positive rate")
    cdef bitgen_t *bg = _bitgen(gen)
    return _ztp_draw_c(bg, l)


def resample_block(int64_t[::1] ei, int64_t[::1] ej, int64_t[:, ::1] counts,
                   int64_t[:, ::1] z2d, double[:, :, ::1] etas,
                   Py_ssize_t lo, Py_ssize_t hi, bint truncated,
                   gen_total, gen_splits):
    """Redraw latent counts for the dyad range [lo, hi).

    Mirrors the reference: per dyad the total-rate addends are summed in
    sorted order, the total is drawn from the total stream, and each trial
    of the splitting race consumes one uniform per subnetwork from that
    subnetwork's stream.
    """
    cdef Py_ssize_t s_count = counts.shape[0]
    cdef bitgen_t *bg_total = _bitgen(gen_total)
    cdef bitgen_t **bg_split = <bitgen_t **> malloc(s_count * sizeof(bitgen_t *))
    cdef double *rates = <double *> malloc(s_count * sizeof(double))
    cdef double *sorted_rates = <double *> malloc(s_count * sizeof(double))
    if bg_split == NULL or rates == NULL or sorted_rates == NULL:
        free(bg_split); free(rates); free(sorted_rates)
        raise MemoryError()
    cdef Py_ssize_t s, d, t, pos
    cdef int64_t i, j, tot, trial
    cdef double r, total_rate, u, e, best_e, key
    cdef Py_ssize_t best
    try:
        for s in range(s_count):
            bg_split[s] = _bitgen(gen_splits[s])
        with nogil:
            for d in range(lo, hi):
                i = ei[d]
                j = ej[d]
                total_rate = 0.0
                for s in range(s_count):
                    r = etas[s, z2d[s, i], z2d[s, j]]
                    if r < 1e-12:
                        r = 1e-12
                    rates[s] = r
                    sorted_rates[s] = r
                # insertion sort ascending, then sum in that order
                for s in range(1, s_count):
                    key = sorted_rates[s]
                    pos = s
                    while pos > 0 and sorted_rates[pos - 1] > key:
                        sorted_rates[pos] = sorted_rates[pos - 1]
                        pos -= 1
                    sorted_rates[pos] = key
                for s in range(s_count):
                    total_rate += sorted_rates[s]
                if truncated:
                    tot = _ztp_draw_c(bg_total, total_rate)
                else:
                    tot = _poisson_draw_c(bg_total, total_rate)
                for s in range(s_count):
                    counts[s, d] = 0
                for trial in range(tot):
                    best = 0
                    best_e = INFINITY
                    for s in range(s_count):
                        u = _next_u(bg_split[s])
                        e = -log1p(-u) / rates[s]
                        if e < best_e:
                            best_e = e
                            best = s
                    counts[best, d] += 1
    finally:
        free(bg_split)
        free(rates)
        free(sorted_rates)


def gibbs_sweep_z(int64_t[::1] z, int64_t[::1] occ, Py_ssize_t L,
                  int64_t[:, ::1] N,
                  int64_t[::1] counts, int64_t[::1] ho_counts,
                  int64_t[::1] indptr, int64_t[::1] nbr, int64_t[::1] dyad,
                  int64_t[::1] ho_indptr, int64_t[::1] ho_nbr,
                  int64_t[::1] ho_dyad,
                  double alpha, double kappa, double lam, gen):
    """One collapsed Gibbs sweep over vertices 0..n-1. Returns the new L.

    Semantics and arithmetic are those of the reference implementation;
    exactly one uniform is consumed per vertex.
    """
    cdef Py_ssize_t n = z.shape[0]
    cdef bitgen_t *bg = _bitgen(gen)

    scratch_i = np.zeros(n + 2, dtype=np.int64)
    scratch_d = np.zeros(2 * (n + 2), dtype=np.float64)
    cdef int64_t[::1] ivec = scratch_i
    cdef double[::1] dvec = scratch_d
    cdef int64_t *R = &ivec[0]
    cdef double *scores = &dvec[0]
    cdef double *weights = &dvec[n + 2]

    cdef double log_alpha = log(alpha)
    cdef Py_ssize_t i, idx, m, c, last, chosen, jv
    cdef int64_t b, rm, v, nn, occ_c, mm, dd
    cdef double acc, g_max, w, total, u, cum

    with nogil:
        for i in range(n):
            b = z[i]
            # gather i's training and imputed counts by current block
            for idx in range(indptr[i], indptr[i + 1]):
                if counts[dyad[idx]]:
                    R[z[nbr[idx]]] += counts[dyad[idx]]
            for idx in range(ho_indptr[i], ho_indptr[i + 1]):
                if ho_counts[ho_dyad[idx]]:
                    R[z[ho_nbr[idx]]] += ho_counts[ho_dyad[idx]]

            # remove i from block b
            occ[b] -= 1
            for m in range(L):
                rm = R[m]
                if rm:
                    if m == b:
                        N[b, b] -= rm
                    else:
                        N[b, m] -= rm
                        N[m, b] -= rm
            if occ[b] == 0:
                last = L - 1
                if b != last:
                    # move the last label into the vacated slot
                    occ[b] = occ[last]
                    for m in range(L):
                        if m == b or m == last:
                            continue
                        v = N[last, m]
                        N[b, m] = v
                        N[m, b] = v
                    N[b, b] = N[last, last]
                    for jv in range(n):
                        if z[jv] == last:
                            z[jv] = b
                    R[b] = R[last]
                for m in range(L):
                    N[last, m] = 0
                    N[m, last] = 0
                occ[last] = 0
                R[last] = 0
                L -= 1

            # score existing blocks 0..L-1 and a new block at index L
            for c in range(L + 1):
                if c == L:
                    acc = log_alpha
                else:
                    acc = log(<double> occ[c])
                occ_c = occ[c]
                for m in range(L):
                    nn = N[c, m]
                    if m == c:
                        mm = occ_c * (occ_c - 1) // 2
                    else:
                        mm = occ_c * occ[m]
                    dd = occ[m]
                    rm = R[m]
                    if rm == 0:
                        if dd != 0:
                            acc += (<double> nn + kappa) * \
                                (log(<double> mm + lam) - log(<double> (mm + dd) + lam))
                    else:
                        acc += (_lgamma_c(<double> (nn + rm) + kappa)
                                - _lgamma_c(<double> nn + kappa)
                                + (<double> nn + kappa) * log(<double> mm + lam)
                                - (<double> (nn + rm) + kappa)
                                * log(<double> (mm + dd) + lam))
                scores[c] = acc

            g_max = scores[0]
            for c in range(1, L + 1):
                if scores[c] > g_max:
                    g_max = scores[c]
            total = 0.0
            for c in range(L + 1):
                w = exp(scores[c] - g_max)
                weights[c] = w
                total += w
            u = _next_u(bg) * total
            chosen = L
            cum = 0.0
            for c in range(L + 1):
                cum += weights[c]
                if u < cum:
                    chosen = c
                    break

            # insert i into the chosen block
            if chosen == L:
                L += 1
            z[i] = chosen
            occ[chosen] += 1
            for m in range(L):
                rm = R[m]
                if rm:
                    if m == chosen:
                        N[chosen, chosen] += rm
                    else:
                        N[chosen, m] += rm
                        N[m, chosen] += rm

            for m in range(L + 1):
                R[m] = 0

    return L
