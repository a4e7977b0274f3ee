"""Single-subnetwork Poisson blockmodel machinery.

Partition prior (Chinese restaurant process), block-pair sufficient
statistics, the Gamma-Poisson collapsed marginal, a collapsed Gibbs sweep
over assignments, conjugate rate draws, and random-walk Metropolis-Hastings
over the hyperparameters in log coordinates.

Block-pair statistics always use the canonical ordered form l <= m. The
collapsed pair term

    T(N, M) = kappa*log(lambda) - logGamma(kappa)
              + logGamma(N + kappa) - (N + kappa)*log(M + lambda)

vanishes at N = M = 0, so empty block pairs contribute nothing and the
new-block case in the Gibbs sweep needs no special handling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

MH_SIGMA = 0.1  # log-space random-walk step


def _kern(kern):
    return kernels.get_backend() if kern is None else kern


@dataclass(frozen=True, eq=False)
class Assignment:
    """Block assignment z over n vertices, labels compacted to 0..L-1."""

    z: np.ndarray
    L: int
    n_l: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", np.asarray(self.z, dtype=np.int64))
        object.__setattr__(self, "n_l", np.asarray(self.n_l, dtype=np.int64))
        if self.L != len(self.n_l):
            raise ValueError("L must equal the number of occupancy entries")
        if self.L > 0 and (self.n_l < 1).any():
            raise ValueError("every block must be occupied")
        if self.z.size:
            if int(self.z.min()) < 0 or int(self.z.max()) >= self.L:
                raise ValueError("labels must lie in 0..L-1")
        counted = np.bincount(self.z, minlength=self.L)
        if not np.array_equal(counted, self.n_l):
            raise ValueError("occupancies inconsistent with labels")

    @property
    def n(self):
        return int(self.z.size)

    @classmethod
    def from_labels(cls, labels):
        """Canonicalize arbitrary labels by first occurrence."""
        mapping = {}
        z = np.empty(len(labels), dtype=np.int64)
        for i, lab in enumerate(labels):
            lab = int(lab)
            if lab not in mapping:
                mapping[lab] = len(mapping)
            z[i] = mapping[lab]
        L = len(mapping)
        n_l = np.bincount(z, minlength=L).astype(np.int64)
        return cls(z=z, L=L, n_l=n_l)


@dataclass(frozen=True, eq=False)
class BlockStats:
    """N: latent edge counts per block pair; M: dyads per block pair.

    Both are full symmetric (L, L) integer matrices over the dyad set they
    were computed from.
    """

    N: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "N", np.asarray(self.N, dtype=np.int64))
        object.__setattr__(self, "M", np.asarray(self.M, dtype=np.int64))
        if self.N.shape != self.M.shape or self.N.ndim != 2 or self.N.shape[0] != self.N.shape[1]:
            raise ValueError("N and M must be square matrices of equal shape")
        if (self.N < 0).any() or (self.M < 0).any():
            raise ValueError("block statistics must be nonnegative")
        if not np.array_equal(self.N, self.N.T) or not np.array_equal(self.M, self.M.T):
            raise ValueError("block statistics must be symmetric")


@dataclass(frozen=True)
class Hyperparams:
    alpha: float
    kappa: float
    lambda_rate: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.kappa > 0 and self.lambda_rate > 0):
            raise ValueError("hyperparameters must be strictly positive")


def _crp_core(n, n_l, alpha, lg):
    terms = [lg(int(c)) for c in n_l]
    return len(n_l) * math.log(alpha) + lg(alpha) - lg(n + alpha) + math.fsum(terms)


def crp_log_density(z, alpha, kern=None):
    """Log probability of the partition under a CRP with concentration alpha."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return _crp_core(z.n, z.n_l, float(alpha), _kern(kern).lgamma)


def sample_crp(n, alpha, rng):
    """Sequential seating: join block l w.p. n_l/(i+alpha), new w.p. alpha/(i+alpha)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    alpha = float(alpha)
    z = np.empty(n, dtype=np.int64)
    occ = [1]
    z[0] = 0
    for i in range(1, n):
        u = rng.random() * (i + alpha)
        chosen = len(occ)
        cum = 0.0
        for l, c in enumerate(occ):
            cum += c
            if u < cum:
                chosen = l
                break
        if chosen == len(occ):
            occ.append(1)
        else:
            occ[chosen] += 1
        z[i] = chosen
    return Assignment(z=z, L=len(occ), n_l=np.asarray(occ, dtype=np.int64))


def block_stats(z, dyads, counts):
    """Sufficient statistics of `counts` over `dyads` given the assignment.

    N sums the provided counts per block pair, M counts the provided dyads
    per block pair. Dyads not listed (for example held-out ones) enter
    neither.
    """
    L = z.L
    N = np.zeros((L, L), dtype=np.int64)
    M = np.zeros((L, L), dtype=np.int64)
    d = np.asarray(dyads, dtype=np.int64).reshape(-1, 2)
    c = np.asarray(counts, dtype=np.int64).reshape(-1)
    if d.shape[0] != c.shape[0]:
        raise ValueError("dyads and counts must align")
    if d.shape[0]:
        zi = z.z[d[:, 0]]
        zj = z.z[d[:, 1]]
        lo = np.minimum(zi, zj)
        hi = np.maximum(zi, zj)
        np.add.at(N, (lo, hi), c)
        np.add.at(M, (lo, hi), 1)
        # mirror the strictly-upper triangle into the lower one
        N += np.tril(N.T, -1)
        M += np.tril(M.T, -1)
    return BlockStats(N=N, M=M)


def pair_term_sum(N, M, kappa, lam, lg):
    """Sum of the collapsed Gamma-Poisson term over block pairs l <= m."""
    L = N.shape[0]
    const = kappa * math.log(lam) - lg(kappa)
    terms = []
    for l in range(L):
        for m in range(l, L):
            nn = int(N[l, m])
            mm = int(M[l, m])
            terms.append(const + lg(nn + kappa) - (nn + kappa) * math.log(mm + lam))
    return math.fsum(terms)


def count_factorial_term(counts, lg):
    """-sum(logGamma(count + 1)); counts of 0 or 1 contribute exactly zero."""
    terms = [lg(int(c) + 1.0) for c in np.asarray(counts).reshape(-1) if c > 1]
    return -math.fsum(terms)


def collapsed_log_likelihood(stats, counts, kappa, lambda_rate, kern=None):
    """log p(counts | z, kappa, lambda) with the rate matrix integrated out."""
    if kappa <= 0 or lambda_rate <= 0:
        raise ValueError("kappa and lambda_rate must be positive")
    lg = _kern(kern).lgamma
    return pair_term_sum(stats.N, stats.M, float(kappa), float(lambda_rate), lg) \
        + count_factorial_term(counts, lg)


def sample_eta(stats, kappa, lambda_rate, rng, kern=None):
    """Draw the rate matrix from its conditional: Gamma(N + kappa, M + lambda)."""
    kern = _kern(kern)
    L = stats.N.shape[0]
    eta = np.empty((L, L), dtype=np.float64)
    for l in range(L):
        for m in range(l, L):
            v = kern.gamma_draw(rng, float(stats.N[l, m]) + kappa,
                                float(stats.M[l, m]) + lambda_rate)
            eta[l, m] = v
            eta[m, l] = v
    return eta


def mh_log_ratio(log_target_cur, log_target_prop, theta_cur, theta_prop):
    """Log acceptance ratio of a multiplicative random walk.

    The theta'/theta factor is the Jacobian of the log transform; by
    construction ratio(a->b) + ratio(b->a) == 0 exactly.
    """
    return (log_target_prop + math.log(theta_prop)) - (log_target_cur + math.log(theta_cur))


def _accept(u, log_ratio):
    if u <= 0.0:
        u = 1.1102230246251565e-16
    return math.log(u) < log_ratio


def mh_three_moves(n, n_l, N, M, hp, rng, kern):
    """One MH pass over (alpha, kappa, lambda), in that order.

    Each coordinate consumes one normal and one uniform whether or not the
    proposal is accepted, keeping stream consumption schedule-independent.
    Targets carry the Gamma(2, 1) prior log-density log(x) - x; the per-dyad
    factorial term is constant in kappa and lambda and omitted.
    """
    lg = kern.lgamma
    a, k, lam = hp.alpha, hp.kappa, hp.lambda_rate

    xi = kern.std_normal(rng)
    u = rng.random()
    a2 = a * math.exp(MH_SIGMA * xi)
    cur = _crp_core(n, n_l, a, lg) + math.log(a) - a
    prop = _crp_core(n, n_l, a2, lg) + math.log(a2) - a2
    if _accept(u, mh_log_ratio(cur, prop, a, a2)):
        a = a2

    xi = kern.std_normal(rng)
    u = rng.random()
    k2 = k * math.exp(MH_SIGMA * xi)
    cur = pair_term_sum(N, M, k, lam, lg) + math.log(k) - k
    prop = pair_term_sum(N, M, k2, lam, lg) + math.log(k2) - k2
    if _accept(u, mh_log_ratio(cur, prop, k, k2)):
        k = k2

    xi = kern.std_normal(rng)
    u = rng.random()
    lam2 = lam * math.exp(MH_SIGMA * xi)
    cur = pair_term_sum(N, M, k, lam, lg) + math.log(lam) - lam
    prop = pair_term_sum(N, M, k, lam2, lg) + math.log(lam2) - lam2
    if _accept(u, mh_log_ratio(cur, prop, lam, lam2)):
        lam = lam2

    return Hyperparams(alpha=a, kappa=k, lambda_rate=lam)


def mh_update_hyperparams(hp, z, stats, counts, rng, kern=None):
    """Random-walk MH over the hyperparameters given the current state.

    `counts` is accepted for interface completeness; the factorial term it
    would contribute is hyperparameter-free and cancels from every ratio.
    """
    del counts
    return mh_three_moves(z.n, z.n_l, stats.N, stats.M, hp, rng, _kern(kern))


def build_csr(n, ai, aj):
    """Both-direction adjacency over dyads (ai[d], aj[d]).

    Returns (indptr, nbr, didx): for vertex v, entries indptr[v]:indptr[v+1]
    list its incident dyads as (other endpoint, dyad index), ordered by dyad
    index. The order is part of the determinism contract: kernels gather in
    this order.
    """
    ai = np.asarray(ai, dtype=np.int64)
    aj = np.asarray(aj, dtype=np.int64)
    deg = np.zeros(n + 1, dtype=np.int64)
    for v in ai:
        deg[v + 1] += 1
    for v in aj:
        deg[v + 1] += 1
    indptr = np.cumsum(deg)
    nbr = np.empty(2 * len(ai), dtype=np.int64)
    didx = np.empty(2 * len(ai), dtype=np.int64)
    cursor = indptr[:-1].copy()
    for d in range(len(ai)):
        i = int(ai[d])
        j = int(aj[d])
        nbr[cursor[i]] = j
        didx[cursor[i]] = d
        cursor[i] += 1
        nbr[cursor[j]] = i
        didx[cursor[j]] = d
        cursor[j] += 1
    return indptr, nbr, didx


def gibbs_sweep_z(z, dyads, counts, hp, rng, kern=None,
                  heldout_dyads=(), heldout_counts=None):
    """One collapsed Gibbs sweep over all vertices in fixed order 0..n-1.

    `dyads`/`counts` are the training dyads and their latent counts;
    `heldout_dyads`/`heldout_counts` carry imputed counts for held-out
    pairs, which are treated as data. Every vertex pair carries unit
    exposure (pairs listed in neither set are zero-count observations), so
    the dyad count per block pair is the plain occupancy product.

    Returns the updated Assignment and the BlockStats the sweep maintained
    (N over training plus imputed counts, M the occupancy products). This
    is a reference entry point that rebuilds state per call (fine for
    small n); the chain engine keeps persistent state and calls the kernel
    directly.
    """
    kern = _kern(kern)
    n = z.n
    d = np.asarray(dyads, dtype=np.int64).reshape(-1, 2)
    c = np.asarray(counts, dtype=np.int64).reshape(-1)
    if d.shape[0] != c.shape[0]:
        raise ValueError("dyads and counts must align")
    observed = {(int(i), int(j)) for i, j in d}
    if len(observed) != d.shape[0]:
        raise ValueError("duplicate dyads")

    ho_d = np.asarray(heldout_dyads, dtype=np.int64).reshape(-1, 2)
    if heldout_counts is None:
        heldout_counts = [0] * ho_d.shape[0]
    ho_c = np.asarray(heldout_counts, dtype=np.int64).reshape(-1)
    if ho_d.shape[0] != ho_c.shape[0]:
        raise ValueError("held-out dyads and counts must align")
    ho_set = {(int(i), int(j)) for i, j in ho_d}
    if len(ho_set) != ho_d.shape[0]:
        raise ValueError("duplicate held-out dyads")
    clash = ho_set & observed
    if clash:
        raise ValueError(f"held-out dyad {sorted(clash)[0]} is also observed")

    cap = n + 1
    zz = z.z.copy()
    occ = np.zeros(cap, dtype=np.int64)
    occ[:z.L] = z.n_l
    N = np.zeros((cap, cap), dtype=np.int64)

    def _scatter(pairs, vals):
        if pairs.shape[0]:
            zi = zz[pairs[:, 0]]
            zj = zz[pairs[:, 1]]
            lo = np.minimum(zi, zj)
            hi = np.maximum(zi, zj)
            np.add.at(N, (lo, hi), vals)

    _scatter(d, c)
    _scatter(ho_d, ho_c)
    N += np.tril(N.T, -1)

    indptr, nbr, didx = build_csr(n, d[:, 0], d[:, 1])
    ho_indptr, ho_nbr, ho_didx = build_csr(n, ho_d[:, 0], ho_d[:, 1])

    L = kern.gibbs_sweep_z(zz, occ, z.L, N, c, ho_c,
                           indptr, nbr, didx, ho_indptr, ho_nbr, ho_didx,
                           hp.alpha, hp.kappa, hp.lambda_rate, rng)
    new_z = Assignment(z=zz, L=L, n_l=occ[:L].copy())
    n_l = occ[:L]
    M = np.outer(n_l, n_l)
    np.fill_diagonal(M, n_l * (n_l - 1) // 2)
    return new_z, BlockStats(N=N[:L, :L].copy(), M=M)
