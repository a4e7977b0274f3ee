"""Pure-Python numerical kernels.

This module and the compiled extension `_ckern` implement the exact same
floating-point operation sequences: same uniforms consumed from the same
streams, same libm calls in the same order. A chain therefore produces
identical output whichever backend is active. When editing either file,
mirror the change in the other, preserving expression shapes; fused or
reassociated arithmetic breaks the equivalence.

Uniforms come from numpy Generators: `gen.random()` here is one raw
next_double call on the underlying bit generator, which is what the
compiled kernel consumes directly.
"""

import math

import numpy as np

NAME = "python"

# Smallest uniform admitted into a logarithm; draws of exactly 0.0 are
# clamped here (probability 2^-53 per draw) in both backends.
_TINY_U = 1.1102230246251565e-16  # 2**-53

_HALF_LOG_2PI = 0.9189385332046727


def lgamma(x):
    """Log-gamma by a 9-term Lanczos series (g = 7), positive arguments.

    Relative error is ~1e-13 on the used range, well inside the 1e-10
    contract. Both backends use this implementation so their results agree
    bit for bit; the platform lgamma is a different approximation.
    """
    x = float(x)
    if x <= 0.0:
        raise ValueError("lgamma defined here for positive arguments only")
    if x < 0.5:
        # reflection; 1 - x lands in the series branch
        return math.log(math.pi / math.sin(math.pi * x)) - lgamma(1.0 - x)
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
    return _HALF_LOG_2PI + (z + 0.5) * math.log(t) - t + math.log(s)


def u01(gen):
    """One uniform in [0, 1) from the stream."""
    return gen.random()


def _pos_u(gen):
    u = gen.random()
    if u <= 0.0:
        u = _TINY_U
    return u


def norm_inv(p):
    """Acklam's rational approximation to the standard normal inverse CDF.

    Odd-symmetric around p = 1/2, so multiplicative random-walk proposals
    built on it are exactly reversible. |relative error| < 1.2e-9.
    """
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
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
    q = math.sqrt(-2.0 * math.log1p(-p))
    return -(((((-7.784894002430293e-03 * q - 3.223964580411365e-01) * q
                - 2.400758277161838e+00) * q - 2.549732539343734e+00) * q
              + 4.374664141464968e+00) * q + 2.938163982698783e+00) / \
            ((((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
               + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0)


def std_normal(gen):
    """One standard normal variate, consuming exactly one uniform."""
    return norm_inv(_pos_u(gen))


def _gamma_mt(gen, a):
    # Marsaglia-Tsang, shape a >= 1, unit rate
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = std_normal(gen)
        t = 1.0 + c * x
        if t <= 0.0:
            continue
        v = t * t * t
        u = _pos_u(gen)
        xx = x * x
        if u < 1.0 - 0.0331 * xx * xx:
            return d * v
        if math.log(u) < 0.5 * xx + d * (1.0 - v + math.log(v)):
            return d * v


def gamma_draw(gen, shape, rate):
    """One Gamma(shape, rate) variate."""
    shape = float(shape)
    rate = float(rate)
    if shape <= 0.0 or rate <= 0.0:
        raise ValueError("gamma shape and rate must be positive")
    if shape < 1.0:
        # boost: G(a) = G(a + 1) * U^(1/a)
        u = _pos_u(gen)
        g = _gamma_mt(gen, shape + 1.0)
        g *= math.exp(math.log(u) / shape)
        return g / rate
    return _gamma_mt(gen, shape) / rate


def _poisson_inversion(gen, lam):
    # lam <= 30: cumulative inversion, one uniform
    u = gen.random()
    p = math.exp(-lam)
    cum = p
    k = 0
    while u >= cum and k < 10000:
        k += 1
        p *= lam / k
        cum += p
    return k


def _poisson_ptrs(gen, lam):
    # Hormann's transformed rejection with squeeze, lam > 10
    b = 0.931 + 2.53 * math.sqrt(lam)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    llam = math.log(lam)
    while True:
        u = gen.random() - 0.5
        v = gen.random()
        us = 0.5 - abs(u)
        if us <= 0.0:
            continue
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= v_r:
            return int(k)
        if k < 0.0 or (us < 0.013 and v > us):
            continue
        if v <= 0.0:
            v = _TINY_U
        if (math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b)) <= \
                (k * llam - lam - lgamma(k + 1.0)):
            return int(k)


def poisson_draw(gen, lam):
    """One Poisson(lam) variate."""
    lam = float(lam)
    if lam < 0.0:
        raise ValueError("Poisson rate must be nonnegative")
    if lam == 0.0:
        return 0
    if lam <= 30.0:
        return _poisson_inversion(gen, lam)
    return _poisson_ptrs(gen, lam)


def ztp_draw(gen, lam):
    """One zero-truncated Poisson(lam) variate, lam > 0.

    Inversion on the truncated pmf below lam = 30, rejection from the
    untruncated sampler above (zero draws there are vanishingly rare).
    """
    lam = float(lam)
    if lam <= 0.0:
        raise ValueError("zero-truncated Poisson needs a positive rate")
    if lam <= 30.0:
        u = gen.random()
        p = lam / math.expm1(lam)  # P(k = 1)
        cum = p
        k = 1
        while u >= cum and k < 10000:
            k += 1
            p *= lam / k
            cum += p
        return k
    while True:
        k = _poisson_ptrs(gen, lam)
        if k > 0:
            return k


def resample_block(ei, ej, counts, z2d, etas, lo, hi, truncated, gen_total, gen_splits):
    """Redraw latent counts for the dyad range [lo, hi).

    For each dyad: gather per-subnetwork rates (floored at 1e-12), draw the
    total count (zero-truncated when the dyad is an observed edge, plain
    Poisson when imputing a held-out dyad), then split it by an exponential
    race in which every subnetwork consumes one uniform per trial from its
    own stream. The race realizes the multinomial split while staying
    equivariant under relabeling subnetworks together with their streams.
    The total-rate addends are summed in sorted order for the same reason.
    """
    s_count = counts.shape[0]
    rates = [0.0] * s_count
    for d in range(lo, hi):
        i = int(ei[d])
        j = int(ej[d])
        total_rate = 0.0
        for s in range(s_count):
            r = float(etas[s, z2d[s, i], z2d[s, j]])
            if r < 1e-12:
                r = 1e-12
            rates[s] = r
        for r in sorted(rates):
            total_rate += r
        if truncated:
            tot = ztp_draw(gen_total, total_rate)
        else:
            tot = poisson_draw(gen_total, total_rate)
        for s in range(s_count):
            counts[s, d] = 0
        for _ in range(tot):
            best = 0
            best_e = math.inf
            for s in range(s_count):
                u = gen_splits[s].random()
                e = -math.log1p(-u) / rates[s]
                if e < best_e:
                    best_e = e
                    best = s
            counts[best, d] += 1


def gibbs_sweep_z(z, occ, L, N, counts, ho_counts,
                  indptr, nbr, dyad, ho_indptr, ho_nbr, ho_dyad,
                  alpha, kappa, lam, gen):
    """One collapsed Gibbs sweep over vertices 0..n-1. Returns the new L.

    State arrays are capacity-sized ((n+1) rows) and mutated in place:
    `z` assignments, `occ` block occupancies, `N` latent counts per block
    pair (training plus imputed held-out). Rows at and beyond L are kept
    all-zero. Every dyad carries unit exposure once its latent count is
    drawn (imputed held-out dyads are treated as data), so the dyad count
    per block pair is the plain occupancy product. Exactly one uniform is
    consumed per vertex.
    """
    n = z.shape[0]
    alpha = float(alpha)
    kappa = float(kappa)
    lam = float(lam)
    R = [0] * (n + 2)       # latent counts from i into each block
    scores = [0.0] * (n + 2)
    weights = [0.0] * (n + 2)
    log_alpha = math.log(alpha)

    for i in range(n):
        b = int(z[i])
        # gather i's training and imputed counts by current block
        for idx in range(int(indptr[i]), int(indptr[i + 1])):
            c = int(counts[dyad[idx]])
            if c:
                R[int(z[nbr[idx]])] += c
        for idx in range(int(ho_indptr[i]), int(ho_indptr[i + 1])):
            c = int(ho_counts[ho_dyad[idx]])
            if c:
                R[int(z[ho_nbr[idx]])] += c

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
                for j in range(n):
                    if z[j] == last:
                        z[j] = b
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
                acc = math.log(float(occ[c]))
            occ_c = int(occ[c])
            for m in range(L):
                nn = int(N[c, m])
                if m == c:
                    mm = occ_c * (occ_c - 1) // 2
                else:
                    mm = occ_c * int(occ[m])
                dd = int(occ[m])
                rm = R[m]
                if rm == 0:
                    if dd != 0:
                        acc += (nn + kappa) * (math.log(mm + lam) - math.log(mm + dd + lam))
                else:
                    acc += (lgamma(nn + rm + kappa) - lgamma(nn + kappa)
                            + (nn + kappa) * math.log(mm + lam)
                            - (nn + rm + kappa) * math.log(mm + dd + lam))
            scores[c] = acc

        g_max = scores[0]
        for c in range(1, L + 1):
            if scores[c] > g_max:
                g_max = scores[c]
        total = 0.0
        for c in range(L + 1):
            w = math.exp(scores[c] - g_max)
            weights[c] = w
            total += w
        u = gen.random() * total
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
